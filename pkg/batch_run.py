#!/usr/bin/env python3

import argparse
import sys
from pathlib import Path
from typing import Dict, List

from tqdm import tqdm

from services import (
    ConfigError,
    ConfigLoader,
    ExperimentError,
    run_experiment,
    write_csv,
    write_report,
)


def parse_arguments(argv=None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        description="Run every experiment config in a directory",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )

    parser.add_argument(
        "--config-dir",
        type=str,
        default="configs",
        help="Directory containing *.ini experiment configs"
    )

    parser.add_argument(
        "--output-dir",
        type=str,
        default="results/batch",
        help="Output directory; each config writes to a subdirectory named after it"
    )

    parser.add_argument(
        "--only",
        type=str,
        default=None,
        help="Comma-separated experiment names to run (default: all)"
    )

    parser.add_argument(
        "--seed",
        type=int,
        default=None,
        help="Seed applied to every config"
    )

    parser.add_argument(
        "--skip-errors",
        action="store_true",
        help="Don't print the error of each failing config"
    )

    return parser.parse_args(argv)


def run_config(loader: ConfigLoader, path: Path, output_dir: Path, seed) -> Dict[str, object]:
    config = loader.load(path, {"out": str(output_dir / path.stem), "seed": seed})
    result = run_experiment(config)
    write_report(config.out, config, result)
    failed = [name for name, ok in result.checks.items() if not ok]
    return {
        "config": path.name,
        "experiment": result.name,
        "status": "pass" if result.passed else "fail",
        "failed_checks": "; ".join(failed),
    }


def main(argv=None) -> int:
    args = parse_arguments(argv)

    config_dir = Path(args.config_dir)
    if not config_dir.exists():
        print(f"Error: Config directory not found: {config_dir}")
        return 1

    configs = sorted(config_dir.glob("*.ini"))
    if not configs:
        print(f"No .ini files found in {config_dir}")
        return 1

    loader = ConfigLoader()
    if args.only:
        wanted = {name.strip() for name in args.only.split(",")}
        selected = []
        for path in configs:
            try:
                raw, _ = loader.read(path)
            except ConfigError:
                selected.append(path)
                continue
            if raw.get("name") in wanted:
                selected.append(path)
        configs = selected

    output_dir = Path(args.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    print(f"Found {len(configs)} configs to run")
    print(f"Output directory: {output_dir}")
    print()

    rows: List[Dict[str, object]] = []
    errors = 0
    for path in tqdm(configs, desc="Experiments"):
        try:
            rows.append(run_config(loader, path, output_dir, args.seed))
        except (ConfigError, ExperimentError) as e:
            errors += 1
            rows.append({"config": path.name, "experiment": "", "status": "error", "failed_checks": str(e)})
            if not args.skip_errors:
                print(f"\nError running {path}: {e}")

    write_csv(output_dir / "batch_summary.csv", rows)
    passed = sum(1 for row in rows if row["status"] == "pass")

    print(f"\n{'='*60}")
    print("BATCH RUN SUMMARY")
    print(f"{'='*60}")
    print(f"Configs run: {len(configs)}")
    print(f"Passed: {passed}")
    print(f"Failed checks: {len(rows) - passed - errors}")
    print(f"Errors: {errors}")
    print(f"\nOutput saved to: {output_dir}")

    return 0 if passed == len(rows) else 1


if __name__ == "__main__":
    sys.exit(main())
