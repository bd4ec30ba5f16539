import csv
import hashlib
import json
import math
import platform
from pathlib import Path
from typing import Dict, List

import networkx
import numpy
import scipy
import sympy

import cchardy
from cchardy.grid import save_field

from .config_loader import ExperimentConfig
from .experiments import ExperimentResult


def format_float(value: float) -> str:
    return format(value, ".17g")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, numpy.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, numpy.integer)):
        return str(int(value))
    if isinstance(value, (float, numpy.floating)):
        return format_float(float(value))
    if isinstance(value, (tuple, list, numpy.ndarray)):
        return " ".join(_cell(v) for v in value)
    return str(value)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (tuple, list, numpy.ndarray)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, numpy.bool_)):
        return bool(value)
    if isinstance(value, (int, numpy.integer)):
        return int(value)
    if isinstance(value, (float, numpy.floating)):
        value = float(value)
        # JSON has no inf/nan; keep them readable
        return value if math.isfinite(value) else str(value)
    return value


def write_csv(path: Path, rows: List[Dict[str, object]]) -> Path:
    columns: List[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(key)) for key in columns])
    return path


def write_json(path: Path, payload: Dict[str, object]) -> Path:
    with open(path, "w") as f:
        json.dump(_jsonable(payload), f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def config_digest(config: ExperimentConfig) -> str:
    canonical = json.dumps(_jsonable(config.as_dict()), sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def versions() -> Dict[str, str]:
    return {
        "cchardy": cchardy.__version__,
        "python": platform.python_version(),
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "sympy": sympy.__version__,
        "networkx": networkx.__version__,
    }


def write_report(out_dir: str | Path, config: ExperimentConfig, result: ExperimentResult) -> List[Path]:
    """manifest.json, <experiment>.csv, <experiment>.json, summary.txt and any exported fields."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [
        write_csv(out / f"{result.name}.csv", result.rows),
        write_json(out / f"{result.name}.json", result.payload),
    ]
    for name, (values, domain) in sorted(result.fields.items()):
        path = save_field(out / f"{name}.field", values, domain, name=name)
        written += [path, path.with_suffix(".json")]

    summary = out / "summary.txt"
    lines = [f"experiment: {result.name}", f"system: {config.system_label}", ""]
    lines += result.summary
    lines += [""] + [f"[{'pass' if ok else 'FAIL'}] {name}" for name, ok in result.checks.items()]
    summary.write_text("\n".join(lines) + "\n")
    written.append(summary)

    manifest = {
        "experiment": result.name,
        "config": config.as_dict(),
        "config_digest": config_digest(config),
        "seed": config.seed,
        "versions": versions(),
        "checks": result.checks,
        "passed": result.passed,
        "files": sorted(p.name for p in written),
    }
    written.append(write_json(out / "manifest.json", manifest))
    return written
