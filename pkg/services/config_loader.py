import configparser
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from cchardy.shapes import ShapeSpecError, parse_shape
from cchardy.systems import SystemSpecError, get_system, load_system_file, parse_htype

EXPERIMENTS = ("volumes", "capacity", "fatness", "whitney", "content", "hardy", "mazya", "sharp", "chain", "hardy1d")
WEIGHT_KINDS = ("point", "boundary", "mixed")
SYSTEM_FREE = ("hardy1d",)
GAMMA_RANGE = "the range 0 <= gamma <= p admissible for delta^(gamma-p) d^-gamma and delta^(gamma-p) v, v in weak L^(Q/gamma)"


class ConfigError(Exception):
    pass


class ConfigIOError(ConfigError):
    pass


@dataclass(frozen=True)
class Diagnostic:
    key: str
    message: str
    line: Optional[int] = None

    def __str__(self) -> str:
        where = f"line {self.line}: " if self.line is not None else ""
        return f"{where}{self.key}: {self.message}"


@dataclass
class ExperimentConfig:
    """One experiment, read from the [experiment] section of an INI file."""

    name: str = ""
    system: Optional[str] = None
    system_file: Optional[str] = None
    shape: str = "ball(1.0)"
    h: float = 0.0625
    p: float = 2.0
    q: Optional[float] = None
    gamma: float = 0.0
    s: Optional[float] = None
    seed: int = 0
    samples: int = 24
    radii: Tuple[float, ...] = ()
    r0: Optional[float] = None
    out: str = "results"
    threads: int = 1
    x0: Optional[Tuple[float, ...]] = None
    points: Tuple[Tuple[float, ...], ...] = ()
    center: Optional[Tuple[float, ...]] = None
    radius: float = 1.0
    weight: str = "point"
    n_grid: int = 10_000
    radius_factor: Optional[float] = None
    source: Optional[str] = field(default=None, compare=False)

    @property
    def system_label(self) -> str:
        return self.system or Path(self.system_file or "custom").stem

    def as_dict(self) -> Dict[str, object]:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "source"}


KNOWN_KEYS = tuple(f.name for f in fields(ExperimentConfig) if f.name != "source")

_FLOATS = ("h", "p", "q", "gamma", "s", "r0", "radius", "radius_factor")
_INTS = ("seed", "samples", "threads", "n_grid")
_VECTORS = ("x0", "center")


def _vector(text: str) -> Tuple[float, ...]:
    return tuple(float(part) for part in text.replace("(", "").replace(")", "").split(",") if part.strip())


def _convert(key: str, text: str):
    text = text.strip()
    if key in _FLOATS:
        return float(text)
    if key in _INTS:
        return int(text)
    if key in _VECTORS:
        return _vector(text)
    if key == "radii":
        return _vector(text)
    if key == "points":
        return tuple(_vector(chunk) for chunk in text.split(";") if chunk.strip())
    return text


class ConfigLoader:
    SECTION = "experiment"

    def read(self, config_path: str | Path) -> Tuple[Dict[str, str], Dict[str, int]]:
        """Raw key/value pairs of the experiment section with their line numbers."""
        path = Path(config_path)
        if not path.exists():
            raise ConfigIOError(f"Config file not found: {path}")
        try:
            text = path.read_text()
        except OSError as e:
            raise ConfigIOError(f"Failed to read config: {e}")

        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text, source=str(path))
        except configparser.Error as e:
            raise ConfigError(f"Malformed config {path}: {e}")
        if not parser.has_section(self.SECTION):
            raise ConfigError(f"{path}: missing [{self.SECTION}] section")

        lines: Dict[str, int] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            match = re.match(r"^\s*([A-Za-z_][\w-]*)\s*[=:]", raw)
            if match:
                lines.setdefault(match.group(1).lower(), lineno)
        return dict(parser.items(self.SECTION)), lines

    def diagnose(self, config_path: str | Path) -> List[Diagnostic]:
        raw, lines = self.read(config_path)
        diagnostics = [
            Diagnostic(key, "unknown key", lines.get(key)) for key in raw if key not in KNOWN_KEYS
        ]
        values = {}
        for key, text in raw.items():
            if key not in KNOWN_KEYS:
                continue
            try:
                values[key] = _convert(key, text)
            except ValueError:
                diagnostics.append(Diagnostic(key, f"cannot parse '{text}'", lines.get(key)))
        config = ExperimentConfig(**values, source=str(config_path))
        diagnostics.extend(
            replace(d, line=lines.get(d.key)) for d in validate_config(config) if d.key not in {x.key for x in diagnostics}
        )
        return diagnostics

    def load(self, config_path: str | Path, overrides: Optional[Dict[str, object]] = None) -> ExperimentConfig:
        diagnostics = self.diagnose(config_path)
        if diagnostics:
            raise ConfigError("; ".join(str(d) for d in diagnostics))
        raw, _ = self.read(config_path)
        config = ExperimentConfig(**{k: _convert(k, v) for k, v in raw.items()}, source=str(config_path))
        if overrides:
            config = replace(config, **{k: v for k, v in overrides.items() if v is not None})
            problems = validate_config(config)
            if problems:
                raise ConfigError("; ".join(str(d) for d in problems))
        return config


def validate_config(config: ExperimentConfig) -> List[Diagnostic]:
    """Range checks for every parameter the chosen experiment reads."""
    out: List[Diagnostic] = []
    if config.name not in EXPERIMENTS:
        out.append(Diagnostic("name", f"experiment must be one of {', '.join(EXPERIMENTS)}"))

    dim = None
    if config.name in SYSTEM_FREE:
        pass
    elif config.system is None and config.system_file is None:
        out.append(Diagnostic("system", "missing system (give system or system_file)"))
    else:
        try:
            vector_fields = load_system_file(config.system_file) if config.system_file else get_system(config.system)
            dim = vector_fields.ambient_dim
        except (SystemSpecError, OSError) as e:
            out.append(Diagnostic("system_file" if config.system_file else "system", str(e)))

    if config.h <= 0:
        out.append(Diagnostic("h", f"h={config.h} must be positive"))
    if config.p <= 1:
        out.append(Diagnostic("p", f"p={config.p} must exceed 1"))
    if config.q is not None and not 1 < config.q <= config.p:
        out.append(Diagnostic("q", f"q={config.q} outside 1 < q <= p={config.p}"))
    if not 0 <= config.gamma <= config.p:
        out.append(Diagnostic("gamma", f"gamma={config.gamma} outside {GAMMA_RANGE} (p={config.p})"))
    if config.s is not None and config.s <= 1:
        out.append(Diagnostic("s", f"s={config.s} must exceed 1"))
    if config.samples <= 0:
        out.append(Diagnostic("samples", "samples must be positive"))
    if config.threads < 1:
        out.append(Diagnostic("threads", "threads must be at least 1"))
    if any(r <= 0 for r in config.radii):
        out.append(Diagnostic("radii", "radii must be positive"))
    if config.r0 is not None and config.r0 <= 0:
        out.append(Diagnostic("r0", "r0 must be positive"))
    if config.radius <= 0:
        out.append(Diagnostic("radius", "radius must be positive"))
    if config.n_grid < 1000:
        out.append(Diagnostic("n_grid", "n_grid must be at least 1000"))
    if config.radius_factor is not None and not 0 < config.radius_factor < 1:
        out.append(Diagnostic("radius_factor", "radius_factor must lie in (0, 1)"))
    if config.weight not in WEIGHT_KINDS:
        out.append(Diagnostic("weight", f"weight must be one of {', '.join(WEIGHT_KINDS)}"))

    if dim is not None:
        for key in ("x0", "center"):
            value = getattr(config, key)
            if value is not None and len(value) != dim:
                out.append(Diagnostic(key, f"expected {dim} coordinates, got {len(value)}"))
        if any(len(pt) != dim for pt in config.points):
            out.append(Diagnostic("points", f"every point needs {dim} coordinates"))
        if config.name not in ("volumes", "sharp"):
            try:
                parse_shape(config.shape, dim, parse_htype(config.system) if config.system else None)
            except ShapeSpecError as e:
                out.append(Diagnostic("shape", str(e)))
    return out
