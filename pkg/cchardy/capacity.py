"""Variational p-capacity, uniform fatness scans and Wolff potentials."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import ndimage
from scipy.optimize import Bounds, minimize

from .errors import NonConvergence
from .frames import HTypeGroup, VectorFieldSystem
from .grid import (
    GridDomain,
    GridFunction,
    discretize,
    farthest_point_sample,
    x_divergence,
    x_gradient_array,
)
from .metric import OmegaSigma, fundamental_solution, omega_sigma, unit_sphere_samples
from .nsw import ball_volume
from .oracles import DistanceOracle, GaugeOracle, MonomialVolume, VolumeOracle
from .shapes import Box, MetricBall, Shape

logger = logging.getLogger(__name__)

EPSILON_SCHEDULE = (1e-1, 1e-2, 1e-3, 1e-4)
POSITIVE_TOLERANCE = 1e-3


@dataclass(eq=False)
class Condenser:
    domain: GridDomain
    plate: np.ndarray

    def __post_init__(self):
        self.plate = np.asarray(self.plate, dtype=bool)
        if self.plate.shape != self.domain.dims:
            raise ValueError("condenser plate does not match the grid")
        if np.any(self.plate & ~self.domain.inside):
            raise ValueError("condenser plate must lie inside the domain")

    @classmethod
    def from_shape(cls, domain: GridDomain, shape: Shape) -> "Condenser":
        mask = shape.contains(domain.points()).reshape(domain.dims)
        return cls(domain, mask & domain.inside)


@dataclass(eq=False)
class CapacityResult:
    value: float
    minimizer: GridFunction
    iterations: int
    relative_decrement: float
    epsilon: float


@dataclass
class CapacityOptions:
    chunk: int = 50
    max_chunks: int = 60
    relative_tolerance: float = 1e-6
    epsilons: Sequence[float] = EPSILON_SCHEDULE


class DirichletEnergy:
    """Smoothed energy 1/2 sum_{+,-} sum ((|X^s u|^2 + eps^2)^(p/2) - eps^p) h^n over free cells."""

    def __init__(self, domain: GridDomain, sys, plate: np.ndarray, p: float):
        self.domain = domain
        self.sys = sys
        self.p = p
        self.free = domain.inside & ~plate
        self.base = plate.astype(float)
        self.eps = 0.0

    def expand(self, v: np.ndarray) -> np.ndarray:
        u = self.base.copy()
        u[self.free] = v
        return u

    def __call__(self, v: np.ndarray) -> Tuple[float, np.ndarray]:
        u = self.expand(v)
        p, eps, cell = self.p, self.eps, self.domain.cell_volume
        total = 0.0
        grad = np.zeros_like(u)
        for scheme in ("forward", "backward"):
            g = x_gradient_array(self.domain, u, self.sys, scheme)
            sq = np.sum(g * g, axis=-1) + eps * eps
            total += 0.5 * float(np.sum(sq ** (p / 2.0) - eps**p)) * cell
            with np.errstate(divide="ignore", invalid="ignore"):
                coeff = np.where(sq > 0.0, p * sq ** (p / 2.0 - 1.0), 0.0)
            grad -= 0.5 * cell * x_divergence(self.sys, coeff[..., None] * g, self.domain, scheme)
        return total, grad[self.free]

    def exact(self, v: np.ndarray) -> float:
        saved, self.eps = self.eps, 0.0
        value = self(v)[0]
        self.eps = saved
        return value


def _warm_start(domain: GridDomain, plate: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """u0 = d_band / (d_band + d_plate) and the local plate-to-band gap."""
    to_band = ndimage.distance_transform_edt(~domain.band) * domain.h
    to_plate = ndimage.distance_transform_edt(~plate) * domain.h
    gap = np.maximum(to_band + to_plate, domain.h)
    return to_band / gap, gap


def p_capacity(
    domain: GridDomain,
    sys: Optional[VectorFieldSystem],
    condenser: Condenser,
    p: float,
    opts: Optional[CapacityOptions] = None,
) -> CapacityResult:
    if p <= 1.0:
        raise ValueError("p must exceed 1")
    opts = opts or CapacityOptions()
    plate = condenser.plate
    if not plate.any():
        return CapacityResult(0.0, GridFunction(domain, np.zeros(domain.dims), compact=True), 0, 0.0, 0.0)

    energy = DirichletEnergy(domain, sys, plate, p)
    start, gap = _warm_start(domain, plate)
    v = np.clip(start[energy.free], 0.0, 1.0)
    # characteristic gradient scale: one over the typical plate-to-band gap
    scale = 1.0 / float(np.median(gap[energy.free])) if v.size else 1.0
    schedule = [0.0] if p == 2.0 else [e * scale for e in opts.epsilons]

    bounds = Bounds(np.zeros(v.size), np.ones(v.size))
    iterations = 0
    decrement = math.inf
    if v.size == 0:
        schedule = []
    for eps in schedule:
        energy.eps = eps
        previous = energy(v)[0]
        for _ in range(opts.max_chunks):
            result = minimize(
                energy,
                v,
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
                options={"maxiter": opts.chunk},
            )
            v = result.x
            iterations += int(result.nit)
            current = float(result.fun)
            decrement = (previous - current) / max(abs(current), 1e-300)
            previous = current
            if decrement <= opts.relative_tolerance:
                break
        else:
            raise NonConvergence(
                f"capacity solver still decreasing by {decrement:.3e} after {iterations} iterations (eps={eps:g})"
            )
        logger.debug("eps=%g: energy %.6g after %d iterations", eps, previous, iterations)

    value = energy.exact(v) if v.size else 0.0
    u = np.clip(energy.expand(v), 0.0, 1.0)
    logger.info("p-capacity %.6g (p=%g, %d iterations)", value, p, iterations)
    return CapacityResult(value, GridFunction(domain, u, compact=True), iterations, max(decrement, 0.0), energy.eps)


# ---------------------------------------------------------------------------
# annuli and fatness
# ---------------------------------------------------------------------------

def ball_condenser(
    sys: VectorFieldSystem,
    oracle: DistanceOracle,
    center: Sequence[float],
    r: float,
    h: Optional[float] = None,
    plate_shape: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> Condenser:
    """Condenser (B(center, r) closure or plate_shape within it, B(center, 2r)) on a local lattice."""
    h = h or r / 8.0
    center = tuple(float(c) for c in center)
    outer = MetricBall(oracle, center, 2.0 * r)
    domain = discretize(outer, h, sys, compute_delta=False)
    dist = oracle.distance(np.asarray(center), domain.points()).reshape(domain.dims)
    plate = (dist <= r) & domain.inside
    if plate_shape is not None:
        plate &= plate_shape(domain.points()).reshape(domain.dims)
    return Condenser(domain, plate)


def euclidean_condenser_capacity(n: int, p: float, r: float, R: float) -> float:
    """Closed form cap_p(closed B(0, r), B(0, R)) in R^n for 1 < p < n."""
    if not 1.0 < p < n:
        raise ValueError("closed form needs 1 < p < n")
    sphere = 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)
    a = (p - n) / (p - 1.0)
    return sphere * ((n - p) / (p - 1.0)) ** (p - 1.0) * (r**a - R**a) ** (1.0 - p)


@dataclass
class AnnulusReport:
    radii: List[float]
    ratios: List[float]
    capacities: List[float]
    volumes: List[float]

    @property
    def spread(self) -> float:
        return max(self.ratios) / min(self.ratios)

    @property
    def passed(self) -> bool:
        return all(r > 0 for r in self.ratios) and self.spread <= 4.0


def annulus_check(
    sys: VectorFieldSystem,
    oracle: DistanceOracle,
    x: Sequence[float],
    r: float,
    p: float,
    r0: Optional[float] = None,
    levels: int = 3,
    cells_per_radius: int = 8,
    n_samples: int = 200_000,
    seed: int = 0,
) -> AnnulusReport:
    """cap_p(B(x,r), B(x,2r)) / (|B(x,r)| r^-p) at r, r/2, r/4."""
    if r0 is not None and r > r0 / 2.0:
        raise ValueError(f"radius {r} exceeds r0/2 = {r0 / 2.0}")
    radii, ratios, caps, vols = [], [], [], []
    for level in range(levels):
        rr = r / 2**level
        condenser = ball_condenser(sys, oracle, x, rr, h=rr / cells_per_radius)
        cap = p_capacity(condenser.domain, sys, condenser, p).value
        vol = ball_volume(oracle, x, rr, n_samples=n_samples, seed=seed + level).estimate
        radii.append(rr)
        caps.append(cap)
        vols.append(vol)
        ratios.append(cap / (vol * rr ** (-p)))
    logger.info("annulus ratios %s", ", ".join(f"{v:.4g}" for v in ratios))
    return AnnulusReport(radii, ratios, caps, vols)


@dataclass
class FatnessCertificate:
    c0: float
    r0: float
    p: float
    table: List[Dict[str, object]] = field(default_factory=list)


def boundary_samples(domain: GridDomain, count: int = 24, seed: int = 0) -> np.ndarray:
    band = domain.points(domain.band)
    return band[farthest_point_sample(band, count, seed)]


def _fatness_entry(args) -> Dict[str, object]:
    sys, oracle, complement, w, r, p, cells = args
    ball = ball_condenser(sys, oracle, w, r, h=r / cells)
    outside = ball_condenser(sys, oracle, w, r, h=r / cells, plate_shape=complement)
    full = p_capacity(ball.domain, sys, ball, p).value
    part = p_capacity(outside.domain, sys, outside, p).value
    return {"w": tuple(float(c) for c in w), "r": r, "cap_complement": part, "cap_ball": full,
            "ratio": part / full if full > 0 else 0.0}


def fatness_scan(
    domain: GridDomain,
    sys: VectorFieldSystem,
    oracle: DistanceOracle,
    p: float,
    samples: Optional[np.ndarray] = None,
    radii: Sequence[float] = (0.1, 0.2, 0.4),
    n_samples: int = 24,
    cells_per_radius: int = 8,
    threads: int = 1,
    seed: int = 0,
) -> FatnessCertificate:
    """Ratios cap_p(complement within B(w,r) closure, B(w,2r)) / cap_p(B(w,r) closure, B(w,2r))."""
    r0 = domain.params.r0
    if any(r > r0 for r in radii):
        raise ValueError(f"fatness radii must not exceed r0={r0}")
    if domain.shape is None:
        raise ValueError("fatness scan needs the domain's shape to test the complement")
    points = boundary_samples(domain, n_samples, seed) if samples is None else np.atleast_2d(samples)

    def complement(pts: np.ndarray) -> np.ndarray:
        return ~domain.shape.contains(pts)

    jobs = [(sys, oracle, complement, w, float(r), p, cells_per_radius) for w in points for r in radii]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            table = list(pool.map(_fatness_entry, jobs))
    else:
        table = [_fatness_entry(job) for job in jobs]
    c0 = min(row["ratio"] for row in table) if table else 0.0
    logger.info("fatness c0=%.4g over %d (sample, radius) pairs", c0, len(table))
    return FatnessCertificate(c0, r0, p, table)


@dataclass
class SelfImprovement:
    table: Dict[float, float]
    smallest_q: Optional[float]


def self_improvement(
    domain: GridDomain,
    sys: VectorFieldSystem,
    oracle: DistanceOracle,
    p: float,
    qs: Sequence[float],
    **scan_options,
) -> SelfImprovement:
    table: Dict[float, float] = {}
    for q in qs:
        if q > p:
            raise ValueError(f"q={q} exceeds p={p}")
        table[float(q)] = fatness_scan(domain, sys, oracle, q, **scan_options).c0
    passing = [q for q, c in table.items() if c > POSITIVE_TOLERANCE]
    return SelfImprovement(table, min(passing) if passing else None)


# ---------------------------------------------------------------------------
# Wolff potentials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscreteMeasure:
    atoms: Tuple[Tuple[float, ...], ...]
    weights: Tuple[float, ...]

    def __post_init__(self):
        if len(self.atoms) != len(self.weights):
            raise ValueError("one weight per atom is required")
        if any(w < 0 or not math.isfinite(w) for w in self.weights):
            raise ValueError("measure weights must be finite and nonnegative")

    @classmethod
    def dirac(cls, point: Sequence[float], mass: float = 1.0) -> "DiscreteMeasure":
        return cls((tuple(float(c) for c in point),), (float(mass),))

    def scaled(self, factor: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.atoms, tuple(factor * w for w in self.weights))

    @property
    def total(self) -> float:
        return float(sum(self.weights))


def wolff(
    measure: DiscreteMeasure,
    x: Sequence[float],
    R: float,
    p: float,
    volume: VolumeOracle,
    oracle: DistanceOracle,
    h: Optional[float] = None,
    nodes: int = 16,
) -> float:
    """W_p^R mu(x) = int_h^R [mu(B(x,t)) t^p / |B(x,t)|]^(1/(p-1)) dt/t."""
    if R <= 0 or p <= 1:
        raise ValueError("need R > 0 and p > 1")
    if not measure.atoms or measure.total == 0.0:
        return 0.0
    x = np.asarray(x, dtype=float)
    lower = h if h else R * 2.0**-30
    dist = oracle.distance(x, np.asarray(measure.atoms, dtype=float))
    weights = np.asarray(measure.weights)

    breaks = {lower, R}
    breaks.update(float(d) for d in dist if lower < d < R)
    t = R
    while t > lower:
        breaks.add(t)
        t /= 2.0
    points = sorted(breaks)
    gl_x, gl_w = leggauss(nodes)
    total = 0.0
    for a, b in zip(points[:-1], points[1:]):
        la, lb = math.log(a), math.log(b)
        s = 0.5 * (lb - la) * gl_x + 0.5 * (la + lb)
        ts = np.exp(s)
        mass = np.array([weights[dist < tt].sum() for tt in ts])
        vol = np.asarray(volume(x, ts), dtype=float)
        integrand = (mass * ts**p / vol) ** (1.0 / (p - 1.0))
        total += 0.5 * (lb - la) * float(np.dot(gl_w, integrand))
    return total


@dataclass
class WolffBounds:
    c1: Dict[float, float]
    c2: Dict[float, float]

    @property
    def stable(self) -> bool:
        def spread(d):
            vals = list(d.values())
            return max(vals) / min(vals)
        return spread(self.c1) <= 2.0 and spread(self.c2) <= 2.0


def wolff_two_sided(
    group: HTypeGroup,
    p: float,
    shells: Sequence[float] = (0.1, 0.2),
    R: float = 1.0,
    n_samples: int = 64,
    seed: int = 0,
    constants: Optional[OmegaSigma] = None,
) -> WolffBounds:
    """Fit C1 W^R <= Gamma_p <= C2 (W^{2R} + inf_{B(y,R)} Gamma_p) for a unit Dirac at the identity."""
    constants = constants or omega_sigma(group, p)
    volume = MonomialVolume(constants.unit_ball_volume, group.homogeneous_dim)
    oracle = GaugeOracle(group)
    mu = DiscreteMeasure.dirac(group.identity())
    Q = group.homogeneous_dim
    a = (Q - p) / (p - 1.0)
    unit = float(fundamental_solution(group, p, np.eye(group.ambient_dim)[0], constants))
    sphere = unit_sphere_samples(group, n_samples, seed)
    c1: Dict[float, float] = {}
    c2: Dict[float, float] = {}
    for t in shells:
        pts = np.stack([group.dilate(t, g) for g in sphere])
        u = fundamental_solution(group, p, pts, constants)
        gauge = group.kaplan_gauge(pts)
        # the gauge is a genuine distance, so N <= N(y) + R on B(y, R)
        floor = unit * (gauge + R) ** (-a)
        w_r = np.array([wolff(mu, y, R, p, volume, oracle) for y in pts])
        w_2r = np.array([wolff(mu, y, 2.0 * R, p, volume, oracle) for y in pts])
        c1[float(t)] = float(np.min(u / w_r))
        c2[float(t)] = float(np.max(u / (w_2r + floor)))
    return WolffBounds(c1, c2)


# ---------------------------------------------------------------------------
# Poincare, cut-off and localisation checks
# ---------------------------------------------------------------------------

def random_smooth_functions(dim: int, count: int, seed: int = 0, modes: int = 3) -> List[Callable[[np.ndarray], np.ndarray]]:
    rng = np.random.default_rng(seed)
    funcs = []
    for _ in range(count):
        freqs = rng.normal(scale=2.0, size=(modes, dim))
        phases = rng.uniform(0, 2 * math.pi, size=modes)
        amps = rng.normal(size=modes)

        def phi(pts, freqs=freqs, phases=phases, amps=amps):
            return np.sin(pts @ freqs.T + phases) @ amps

        funcs.append(phi)
    return funcs


def poincare_constant(
    domain: GridDomain,
    sys: Optional[VectorFieldSystem],
    oracle: DistanceOracle,
    center: Sequence[float],
    radii: Sequence[float],
    p: float = 2.0,
    count: int = 20,
    seed: int = 0,
) -> Dict[float, float]:
    """Smallest C with int_B |phi - phi_B|^p <= C r^p int_B |X phi|^p over random smooth phi."""
    pts = domain.points()
    dist = oracle.distance(np.asarray(center, dtype=float), pts).reshape(domain.dims)
    funcs = random_smooth_functions(domain.ndim, count, seed)
    out: Dict[float, float] = {}
    for r in radii:
        ball = (dist < r) & domain.inside
        worst = 0.0
        for phi in funcs:
            values = phi(pts).reshape(domain.dims)
            grad = np.linalg.norm(x_gradient_array(domain, values, sys), axis=-1)
            mean = values[ball].mean()
            lhs = float(np.sum(np.abs(values[ball] - mean) ** p))
            rhs = float(r**p * np.sum(grad[ball] ** p))
            if rhs > 0:
                worst = max(worst, lhs / rhs)
        out[float(r)] = worst
    return out


def cutoff_constant(
    domain: GridDomain,
    sys: Optional[VectorFieldSystem],
    oracle: DistanceOracle,
    center: Sequence[float],
    s: float,
    t: float,
) -> float:
    """max |X phi| (t - s) for the ramp phi = clip((t - d) / (t - s), 0, 1)."""
    if not 0 < s < t:
        raise ValueError("need 0 < s < t")
    dist = oracle.distance(np.asarray(center, dtype=float), domain.points()).reshape(domain.dims)
    phi = np.clip((t - dist) / (t - s), 0.0, 1.0)
    grad = np.linalg.norm(x_gradient_array(domain, phi, sys), axis=-1)
    return float(np.max(grad[domain.inside])) * (t - s)


@dataclass
class LocalizationReport:
    cap_domain: float
    cap_box: float

    @property
    def ratio(self) -> float:
        return self.cap_domain / self.cap_box if self.cap_box > 0 else math.inf


def localization_check(
    domain: GridDomain,
    sys: VectorFieldSystem,
    plate: Shape,
    p: float,
    enlarge: float = 3.0,
) -> LocalizationReport:
    """cap_p(K, domain) against cap_p(K, a box `enlarge` times the domain's extent)."""
    inner = p_capacity(domain, sys, Condenser.from_shape(domain, plate), p).value
    pts = domain.points(domain.inside)
    mid = 0.5 * (pts.max(axis=0) + pts.min(axis=0))
    half = 0.5 * enlarge * (pts.max(axis=0) - pts.min(axis=0)) + domain.h
    box = Box(tuple(mid - half), tuple(mid + half))
    big = discretize(box, domain.h, sys, params=domain.params, compute_delta=False)
    outer = p_capacity(big, sys, Condenser.from_shape(big, plate), p).value
    return LocalizationReport(inner, outer)
