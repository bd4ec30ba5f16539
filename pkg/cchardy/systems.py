"""Built-in vector-field systems and the plain-text system format.

Text format: one line per field, n comma-separated polynomial expressions in
x1..xn using integer/decimal coefficients and + - * ^ only.  Blank lines and
lines starting with '#' are ignored.
"""

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import sympy as sp

from .frames import CommutatorBasis, HTypeGroup, VectorFieldSystem, build_commutator_basis, coordinate_symbols
from .metric import omega_sigma
from .nsw import ball_volume, nsw_profile
from .oracles import (
    BoxDistanceOracle,
    DistanceOracle,
    EuclideanOracle,
    GaugeOracle,
    MonomialVolume,
    NswVolume,
    VolumeOracle,
    euclidean_volume,
)

# default local-parameter radius per system
DEFAULT_R0: Dict[str, float] = {
    "euclidean3": 1.0,
    "grushin-paper-example": 0.5,
    "heisenberg1": 1.0,
}

_HTYPE_PATTERN = re.compile(r"^htype\(\s*(\d+)\s*,\s*(\d+)\s*\)$")
_ALLOWED = re.compile(r"^[0-9x\s\.\+\-\*\^\(\)]*$")


class SystemSpecError(ValueError):
    pass


def euclidean(n: int = 3) -> VectorFieldSystem:
    fields = tuple(
        tuple(sp.Integer(1) if i == j else sp.Integer(0) for i in range(n)) for j in range(n)
    )
    return VectorFieldSystem(n, fields, name=f"euclidean{n}")


def grushin_paper_example() -> VectorFieldSystem:
    x1, _, _ = coordinate_symbols(3)
    zero, one = sp.Integer(0), sp.Integer(1)
    fields = (
        (one, zero, zero),
        (zero, one, zero),
        (zero, zero, x1),
    )
    return VectorFieldSystem(3, fields, name="grushin-paper-example")


def parse_htype(name: str) -> Optional[HTypeGroup]:
    if name == "heisenberg1":
        return HTypeGroup(1, 1)
    match = _HTYPE_PATTERN.match(name.strip())
    if match:
        return HTypeGroup(int(match.group(1)), int(match.group(2)))
    return None


def builtin_names() -> List[str]:
    return ["euclidean3", "grushin-paper-example", "heisenberg1", "htype(k,q)"]


def get_system(name: str) -> VectorFieldSystem:
    if name == "euclidean3":
        return euclidean(3)
    if name == "grushin-paper-example":
        return grushin_paper_example()
    group = parse_htype(name)
    if group is not None:
        return group.system
    raise SystemSpecError(f"unknown system '{name}' (known: {', '.join(builtin_names())})")


def default_r0(name: str) -> float:
    if name in DEFAULT_R0:
        return DEFAULT_R0[name]
    return 1.0


def parse_system_text(text: str, name: str = "custom") -> VectorFieldSystem:
    rows: List[List[str]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not _ALLOWED.match(line.replace(",", " ")):
            raise SystemSpecError(f"line {lineno}: only numbers, x1..xn and + - * ^ are allowed")
        rows.append([part.strip() for part in line.split(",")])
    if not rows:
        raise SystemSpecError("system file contains no fields")

    n = len(rows[0])
    if any(len(r) != n for r in rows):
        raise SystemSpecError("every field must list the same number of components")

    symbols = coordinate_symbols(n)
    local = {f"x{i + 1}": s for i, s in enumerate(symbols)}
    fields = []
    for lineno, row in enumerate(rows, 1):
        comps = []
        for text_expr in row:
            try:
                expr = sp.sympify(text_expr.replace("^", "**"), locals=local)
            except (sp.SympifyError, SyntaxError, TypeError) as e:
                raise SystemSpecError(f"field {lineno}: cannot parse '{text_expr}': {e}")
            if expr.free_symbols - set(symbols):
                raise SystemSpecError(f"field {lineno}: unknown variables in '{text_expr}'")
            comps.append(sp.expand(expr))
        fields.append(tuple(comps))
    return VectorFieldSystem(n, tuple(fields), name=name)


def load_system_file(path: Union[str, Path]) -> VectorFieldSystem:
    path = Path(path)
    return parse_system_text(path.read_text(), name=path.stem)


@dataclass
class Geometry:
    """Everything the grid-level modules need to know about one system."""

    system: VectorFieldSystem
    basis: CommutatorBasis
    oracle: DistanceOracle
    volume: VolumeOracle
    group: Optional[HTypeGroup] = None
    r0: float = 1.0


def _default_samples(n: int) -> np.ndarray:
    return np.vstack([np.zeros(n), 0.5 * np.eye(n), -0.5 * np.eye(n)])


def geometry_for(
    system: Union[str, VectorFieldSystem],
    samples: Optional[Sequence[Sequence[float]]] = None,
    max_step: int = 4,
    seed: int = 0,
) -> Geometry:
    sys = get_system(system) if isinstance(system, str) else system
    r0 = default_r0(sys.name)
    pts = _default_samples(sys.ambient_dim) if samples is None else np.asarray(samples, dtype=float)
    basis = build_commutator_basis(sys, pts, max_step)

    group = parse_htype(sys.name)
    if group is not None and group.system == sys:
        unit = omega_sigma(group, 2.0, seed=seed).unit_ball_volume
        return Geometry(sys, basis, GaugeOracle(group), MonomialVolume(unit, group.homogeneous_dim), group, r0)
    if sys.name.startswith("euclidean") and basis.max_step == 1 and basis.size == sys.ambient_dim:
        return Geometry(sys, basis, EuclideanOracle(sys.ambient_dim), euclidean_volume(sys.ambient_dim), None, r0)

    oracle = BoxDistanceOracle(basis)
    probe = 0.25 * r0
    origin = np.zeros(sys.ambient_dim)
    estimate = ball_volume(oracle, origin, probe, n_samples=20_000, seed=seed).estimate
    scale = estimate / float(nsw_profile(basis, origin).value(probe))
    return Geometry(sys, basis, oracle, NswVolume(basis, scale), None, r0)
