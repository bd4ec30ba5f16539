"""Lattice discretisation of bounded domains and horizontal grid operators."""

import json
import logging
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from .errors import DisconnectedDomain, EmptyDomain, GridError, NonFiniteWeight
from .frames import VectorFieldSystem
from .metric import RESIDUAL_TOLERANCE, boundary_distance
from .nsw import LocalParameters
from .oracles import DistanceOracle
from .shapes import Shape

logger = logging.getLogger(__name__)

FIELD_MAGIC = b"CCHF"
SCHEMES = ("central", "forward", "backward")


@dataclass(frozen=True)
class Ball:
    center: Tuple[float, ...]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")

    def scaled(self, factor: float) -> "Ball":
        return Ball(self.center, self.radius * factor)


@dataclass(eq=False)
class GridDomain:
    h: float
    origin: np.ndarray
    dims: Tuple[int, ...]
    inside: np.ndarray
    band: np.ndarray
    system: VectorFieldSystem
    params: LocalParameters
    shape: Optional[Shape] = None
    delta: Optional[np.ndarray] = None
    eikonal: Optional[object] = None
    _frames: Dict[VectorFieldSystem, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def cell_volume(self) -> float:
        return self.h**self.ndim

    @cached_property
    def coords(self) -> np.ndarray:
        axes = [self.origin[k] + self.h * np.arange(self.dims[k]) for k in range(self.ndim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def points(self, mask: Optional[np.ndarray] = None) -> np.ndarray:
        if mask is None:
            return self.coords.reshape(-1, self.ndim)
        return self.coords[mask]

    def frame_for(self, sys: Optional[VectorFieldSystem] = None) -> np.ndarray:
        sys = sys or self.system
        if sys not in self._frames:
            values = sys.frame_at(self.points())
            self._frames[sys] = values.reshape(self.dims + values.shape[1:])
        return self._frames[sys]

    @property
    def frame(self) -> np.ndarray:
        return self.frame_for(self.system)

    def index_of(self, point: Sequence[float]) -> Tuple[int, ...]:
        idx = np.rint((np.asarray(point, dtype=float) - self.origin) / self.h).astype(int)
        return tuple(int(i) for i in np.clip(idx, 0, np.asarray(self.dims) - 1))

    @property
    def inside_count(self) -> int:
        return int(self.inside.sum())

    @property
    def diameter(self) -> float:
        pts = self.points(self.inside)
        return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))


@dataclass(eq=False)
class GridFunction:
    domain: GridDomain
    values: np.ndarray
    compact: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.domain.dims:
            raise ValueError(f"values of shape {self.values.shape} do not match grid {self.domain.dims}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function values must be finite")
        if self.compact and np.any(self.values[~self.domain.inside] != 0.0):
            raise ValueError("compactly supported grid function is nonzero outside the domain")

    def extended(self) -> np.ndarray:
        """Values with the zero extension outside the inside cells applied."""
        return np.where(self.domain.inside, self.values, 0.0)

    def scaled(self, factor: float) -> "GridFunction":
        return GridFunction(self.domain, factor * self.values, self.compact)

    def abs(self) -> "GridFunction":
        return GridFunction(self.domain, np.abs(self.values), self.compact)


def lattice_for(shape: Shape, h: float) -> Tuple[np.ndarray, Tuple[int, ...]]:
    lo, hi = shape.bounds()
    counts = np.maximum(np.rint((hi - lo) / h).astype(int) + 1, 3)
    return lo.astype(float), tuple(int(c) for c in counts)


def discretize(
    shape: Shape,
    h: float,
    sys: VectorFieldSystem,
    params: Optional[LocalParameters] = None,
    compute_delta: bool = True,
    eikonal_tolerance: float = RESIDUAL_TOLERANCE,
) -> GridDomain:
    if not h > 0:
        raise GridError(f"grid spacing must be positive, got {h}")
    origin, dims = lattice_for(shape, h)
    if len(dims) != sys.ambient_dim:
        raise GridError(f"shape has dimension {len(dims)} but the system lives in R^{sys.ambient_dim}")
    axes = [origin[k] + h * np.arange(dims[k]) for k in range(len(dims))]
    coords = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    inside = shape.contains(coords.reshape(-1, len(dims))).reshape(dims)
    # keep the outermost lattice layer free so the band fits on the lattice
    rim = np.ones(dims, dtype=bool)
    rim[tuple(slice(1, -1) for _ in dims)] = False
    inside &= ~rim

    if not inside.any():
        raise EmptyDomain(f"no lattice point of spacing {h} lies inside the shape")
    structure = ndimage.generate_binary_structure(len(dims), 1)
    _, components = ndimage.label(inside, structure=structure)
    if components != 1:
        raise DisconnectedDomain(f"discretised domain has {components} connected components")
    band = ndimage.binary_dilation(inside, structure=structure) & ~inside

    domain = GridDomain(
        h=float(h),
        origin=origin,
        dims=dims,
        inside=inside,
        band=band,
        system=sys,
        params=params or LocalParameters(1.0, 1.0),
        shape=shape,
    )
    domain.__dict__["coords"] = coords
    if compute_delta:
        report = boundary_distance(domain, tolerance=eikonal_tolerance)
        domain.delta = report.delta
        domain.eikonal = report
        if np.any(report.delta[inside] <= 0):
            raise GridError("boundary distance vanished on an inside cell")
    logger.info("discretised %s at h=%g: %s lattice, %d inside cells", type(shape).__name__, h, dims, domain.inside_count)
    return domain


# ---------------------------------------------------------------------------
# horizontal differences
# ---------------------------------------------------------------------------

def difference(values: np.ndarray, axis: int, h: float, scheme: str = "central") -> np.ndarray:
    if scheme == "central":
        return np.gradient(values, h, axis=axis)
    zero = np.zeros_like(np.take(values, [0], axis=axis))
    if scheme == "forward":
        return np.diff(values, axis=axis, append=zero) / h
    if scheme == "backward":
        return np.diff(values, axis=axis, prepend=zero) / h
    raise ValueError(f"unknown difference scheme '{scheme}' (use one of {SCHEMES})")


_ADJOINT = {"central": "central", "forward": "backward", "backward": "forward"}


def _frame(domain: GridDomain, sys: Optional[VectorFieldSystem]) -> np.ndarray:
    return domain.frame_for(sys)


def x_gradient_array(domain: GridDomain, values: np.ndarray, sys=None, scheme: str = "central") -> np.ndarray:
    grads = np.stack([difference(values, k, domain.h, scheme) for k in range(domain.ndim)], axis=-1)
    return np.einsum("...km,...k->...m", _frame(domain, sys), grads)


def x_gradient(sys: Optional[VectorFieldSystem], u: GridFunction, scheme: str = "central") -> np.ndarray:
    """X_i u = sum_k b_ki d_k u on the zero-extended function; shape dims + (m,)."""
    return x_gradient_array(u.domain, u.extended(), sys, scheme)


def x_divergence(sys: Optional[VectorFieldSystem], v: np.ndarray, domain: GridDomain, scheme: str = "central") -> np.ndarray:
    """Divergence whose negative is the discrete adjoint of x_gradient(scheme)."""
    flux = np.einsum("...km,...m->...k", _frame(domain, sys), v)
    adjoint = _ADJOINT[scheme]
    return sum(difference(flux[..., k], k, domain.h, adjoint) for k in range(domain.ndim))


def x_gradient_norm(sys, u: GridFunction, scheme: str = "central") -> np.ndarray:
    return np.linalg.norm(x_gradient(sys, u, scheme), axis=-1)


def dirichlet_energy(sys, u: GridFunction, p: float) -> float:
    """Average of the forward and backward energies sum |Xu|^p h^n."""
    total = 0.0
    for scheme in ("forward", "backward"):
        total += 0.5 * float(np.sum(x_gradient_norm(sys, u, scheme) ** p)) * u.domain.cell_volume
    return total


# ---------------------------------------------------------------------------
# maximal function, weak norms, integration
# ---------------------------------------------------------------------------

def dyadic_radii(R: float, h: float) -> List[float]:
    """R, R/2, R/4, ... while the radius stays at least 2h."""
    r = max(R, 2.0 * h)
    radii = []
    while r >= 2.0 * h * (1.0 - 1e-12):
        radii.append(r)
        r /= 2.0
    return radii


def ball_stencil(domain: GridDomain, oracle: DistanceOracle, index: Tuple[int, ...], radius: float):
    center = domain.coords[index]
    half = oracle.bounding_halfwidth(center, radius)
    reach = np.ceil(half / domain.h).astype(int)
    lo = np.maximum(np.asarray(index) - reach, 0)
    hi = np.minimum(np.asarray(index) + reach + 1, domain.dims)
    window = tuple(slice(a, b) for a, b in zip(lo, hi))
    pts = domain.coords[window].reshape(-1, domain.ndim)
    dist = oracle.distance(center, pts)
    return window, dist


def truncated_maximal(
    u: GridFunction,
    R: float,
    dist_oracle: DistanceOracle,
    cells: Optional[np.ndarray] = None,
) -> GridFunction:
    """Dyadic truncated maximal function of |u| over the radii R, R/2, ... down to 2h."""
    if R <= 0:
        raise ValueError("R must be positive")
    domain = u.domain
    values = np.abs(u.extended())
    radii = dyadic_radii(R, domain.h)
    out = np.zeros(domain.dims)
    targets = np.argwhere(domain.inside if cells is None else cells)
    for idx in map(tuple, targets):
        window, dist = ball_stencil(domain, dist_oracle, idx, radii[0])
        local = values[window].ravel()
        best = 0.0
        for r in radii:
            inball = dist < r
            count = int(inball.sum())
            if count:
                best = max(best, float(local[inball].sum()) / count)
        out[idx] = best
    return GridFunction(domain, out)


@dataclass(frozen=True)
class WeakNorm:
    value: float
    sup_form: float
    s: float


def weak_norm(u: GridFunction, s: float) -> WeakNorm:
    if not s > 0:
        raise ValueError("s must be positive")
    values = np.sort(np.abs(u.values[u.domain.inside]))[::-1]
    if values.size == 0 or values[0] == 0.0:
        return WeakNorm(0.0, 0.0, s)
    if np.isinf(s):
        top = float(values[0])
        return WeakNorm(top, top, s)
    cell = u.domain.cell_volume
    measure = np.arange(1, values.size + 1) * cell
    level = float(np.max(values * measure ** (1.0 / s)))
    r = s / 2.0
    partial = np.cumsum(values**r) * cell
    sup_form = float(np.max(measure ** (1.0 / s - 1.0 / r) * partial ** (1.0 / r)))
    return WeakNorm(level, sup_form, s)


def strong_norm(u: GridFunction, s: float) -> float:
    values = np.abs(u.values[u.domain.inside])
    return float(np.sum(values**s) * u.domain.cell_volume) ** (1.0 / s)


def integrate(u: GridFunction, p: float, weight: Union[np.ndarray, float, None] = None) -> float:
    domain = u.domain
    w = np.ones(domain.dims) if weight is None else np.broadcast_to(np.asarray(weight, dtype=float), domain.dims)
    w_in = w[domain.inside]
    if not np.all(np.isfinite(w_in)):
        raise NonFiniteWeight("weight is not finite on every inside cell")
    return float(np.sum(w_in * np.abs(u.values[domain.inside]) ** p) * domain.cell_volume)


def farthest_point_sample(points: np.ndarray, count: int, seed: int = 0) -> np.ndarray:
    """Indices of a greedy farthest-point subset, started from a seeded random point."""
    points = np.atleast_2d(points)
    if count >= len(points):
        return np.arange(len(points))
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(len(points)))]
    nearest = np.linalg.norm(points - points[chosen[0]], axis=-1)
    while len(chosen) < count:
        nxt = int(np.argmax(nearest))
        chosen.append(nxt)
        nearest = np.minimum(nearest, np.linalg.norm(points - points[nxt], axis=-1))
    return np.asarray(chosen)


def capped_power(distance: np.ndarray, exponent: float, h: float) -> np.ndarray:
    """distance^(-exponent), with distance floored at h/2."""
    return np.maximum(np.asarray(distance, dtype=float), 0.5 * h) ** (-exponent)


# ---------------------------------------------------------------------------
# binary field export
# ---------------------------------------------------------------------------

def save_field(path: Union[str, Path], values: np.ndarray, domain: GridDomain, name: str = "field") -> Path:
    """Write a raw float64 field with a small header plus a JSON sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.ascontiguousarray(values, dtype="<f8")
    ndim = domain.ndim
    header = FIELD_MAGIC + struct.pack(f"<I{ndim}q{ndim + 1}d", ndim, *domain.dims, domain.h, *domain.origin)
    with open(path, "wb") as f:
        f.write(header)
        f.write(data.tobytes())
    sidecar = {
        "name": name,
        "dims": list(domain.dims),
        "spacing": domain.h,
        "origin": [float(v) for v in domain.origin],
        "dtype": "float64-le",
    }
    with open(path.with_suffix(".json"), "w") as f:
        json.dump(sidecar, f, indent=2)
    return path


def load_field(path: Union[str, Path]) -> Tuple[np.ndarray, Dict]:
    raw = Path(path).read_bytes()
    if raw[:4] != FIELD_MAGIC:
        raise ValueError(f"{path} is not a field file")
    (ndim,) = struct.unpack_from("<I", raw, 4)
    fmt = f"<{ndim}q{ndim + 1}d"
    unpacked = struct.unpack_from(fmt, raw, 8)
    dims = tuple(int(d) for d in unpacked[:ndim])
    spacing = float(unpacked[ndim])
    origin = [float(v) for v in unpacked[ndim + 1:]]
    offset = 8 + struct.calcsize(fmt)
    values = np.frombuffer(raw, dtype="<f8", offset=offset).reshape(dims)
    return values.copy(), {"dims": list(dims), "spacing": spacing, "origin": origin}
