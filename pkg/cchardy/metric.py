"""CC distances, the boundary-distance eikonal solver and fundamental-solution gauges."""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize

from .errors import ExponentViolation, NoPathFound, NonConvergence, Singularity
from .frames import CommutatorBasis, HTypeGroup, VectorFieldSystem, build_commutator_basis, eval_frame
from .nsw import NswProfile, nsw_profile

logger = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-3

F_BRACKET = (1e-8, 10.0)
F_TOLERANCE = 1e-12
OMEGA_SAMPLES = 10**6
OMEGA_CHUNK = 1 << 17


# ---------------------------------------------------------------------------
# sub-unit paths
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SubUnitPath:
    """Piecewise-constant controls with |u| <= 1; length = timestep * steps."""

    start: Tuple[float, ...]
    timestep: float
    controls: np.ndarray = field(repr=False)

    @property
    def steps(self) -> int:
        return int(self.controls.shape[0])

    @property
    def length(self) -> float:
        return self.timestep * self.steps

    def trajectory(self, sys: VectorFieldSystem) -> np.ndarray:
        start = np.asarray(self.start, dtype=float)[None, None, :]
        return _shoot(sys, start[0], self.controls[None], self.timestep, keep_path=True)[0]


@dataclass
class PathOptions:
    steps: Sequence[int] = (8, 16, 32)
    tolerance: float = 1e-6
    max_iterations: int = 300
    seed: int = 0
    fd_step: float = 1e-7


def _shoot(sys, x: np.ndarray, controls: np.ndarray, dt: float, keep_path: bool = False) -> np.ndarray:
    """RK4 endpoints of dz = B(z) u dt for a batch of control sequences (P, K, m)."""
    count, steps, _ = controls.shape
    z = np.tile(np.asarray(x, dtype=float), (count, 1))
    path = [z.copy()] if keep_path else None

    def velocity(points: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.einsum("pnm,pm->pn", sys.frame_at(points), u)

    for k in range(steps):
        u = controls[:, k, :]
        k1 = velocity(z, u)
        k2 = velocity(z + 0.5 * dt * k1, u)
        k3 = velocity(z + 0.5 * dt * k2, u)
        k4 = velocity(z + dt * k3, u)
        z = z + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if keep_path:
            path.append(z.copy())
    if keep_path:
        return np.stack(path, axis=1)
    return z


def _operator_norm_max(sys, points: np.ndarray) -> float:
    frames = sys.frame_at(points)
    return float(np.max(np.linalg.norm(frames, ord=2, axis=(1, 2))))


def _solve_controls(sys, x, y, u0, opts: PathOptions) -> Tuple[np.ndarray, float]:
    steps, m = u0.shape
    dt = 1.0 / steps
    size = steps * m
    cache: Dict[bytes, Tuple[np.ndarray, np.ndarray]] = {}

    def endpoint_and_jac(flat: np.ndarray):
        key = flat.tobytes()
        if key not in cache:
            base = flat.reshape(1, steps, m)
            batch = np.repeat(base, size + 1, axis=0)
            batch[1:].reshape(size, size)[np.diag_indices(size)] += opts.fd_step
            ends = _shoot(sys, x, batch, dt)
            jac = (ends[1:] - ends[0]).T / opts.fd_step
            cache.clear()
            cache[key] = (ends[0], jac)
        return cache[key]

    result = minimize(
        lambda v: float(np.dot(v, v) * dt),
        u0.ravel(),
        jac=lambda v: 2.0 * v * dt,
        method="SLSQP",
        constraints=[{
            "type": "eq",
            "fun": lambda v: endpoint_and_jac(v)[0] - y,
            "jac": lambda v: endpoint_and_jac(v)[1],
        }],
        options={"maxiter": opts.max_iterations, "ftol": 1e-12},
    )
    controls = result.x.reshape(steps, m)
    end = _shoot(sys, x, controls[None], dt)[0]
    return controls, float(np.linalg.norm(end - y))


def cc_distance(
    sys: Union[VectorFieldSystem, CommutatorBasis],
    x: Sequence[float],
    y: Sequence[float],
    opts: Optional[PathOptions] = None,
) -> Tuple[float, float, Optional[SubUnitPath]]:
    """Two-sided bracket of d(x, y) plus the witness path of the upper bound."""
    opts = opts or PathOptions()
    if isinstance(sys, CommutatorBasis):
        sys = sys.system
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    gap = float(np.linalg.norm(y - x))
    if gap == 0.0:
        return 0.0, 0.0, None

    steps = list(opts.steps)
    frame = eval_frame(sys, x)
    guess = np.linalg.pinv(frame) @ (y - x)
    u = np.tile(guess, (steps[0], 1))
    first_error = float(np.linalg.norm(_shoot(sys, x, u[None], 1.0 / steps[0])[0] - y))
    if first_error > opts.tolerance:
        rng = np.random.default_rng(opts.seed)
        u = u + 0.1 * max(gap, 1e-3) * rng.standard_normal(u.shape)

    best: Optional[Tuple[float, np.ndarray]] = None
    previous = steps[0]
    for count in steps:
        if count != previous:
            u = np.repeat(u, count // previous, axis=0) if count % previous == 0 else np.resize(u, (count, u.shape[1]))
        previous = count
        u, error = _solve_controls(sys, x, y, u, opts)
        if error > opts.tolerance:
            logger.debug("path with %d steps misses target by %.3e", count, error)
            continue
        speed = float(np.max(np.linalg.norm(u, axis=1)))
        if best is None or speed < best[0]:
            best = (speed, u.copy())

    if best is None:
        raise NoPathFound(f"no sub-unit path from {x.tolist()} to {y.tolist()} within {steps[-1]} steps")

    speed, controls = best
    scaled = controls / speed if speed > 0 else controls
    path = SubUnitPath(tuple(x.tolist()), speed / controls.shape[0], scaled)

    segment = x + np.linspace(0.0, 1.0, 33)[:, None] * (y - x)
    trajectory = _shoot(sys, x, controls[None], 1.0 / controls.shape[0], keep_path=True)[0]
    norm_bound = _operator_norm_max(sys, np.vstack([segment, trajectory]))
    lower = gap / norm_bound if norm_bound > 0 else 0.0
    return speed, min(lower, speed), path


# ---------------------------------------------------------------------------
# boundary distance: subelliptic eikonal by plane sweeping
# ---------------------------------------------------------------------------

@dataclass
class EikonalReport:
    delta: np.ndarray
    scheme: str
    iterations: int
    last_update: float
    residual_max: float
    residual_mean: float
    scheme_residual: float = 0.0


def _neighbour_minima(dpad: np.ndarray, sl: Tuple[slice, ...], axis: int) -> Tuple[np.ndarray, np.ndarray]:
    lower, upper = [], []
    for a, s in enumerate(sl):
        start, stop = s.start + 1, s.stop + 1
        if a == axis:
            lower.append(slice(start - 1, stop - 1))
            upper.append(slice(start + 1, stop + 1))
        else:
            lower.append(slice(start, stop))
            upper.append(slice(start, stop))
    return dpad[tuple(lower)], dpad[tuple(upper)]


def _godunov(dpad, sl, coeff, h) -> np.ndarray:
    n = len(sl)
    mins = []
    for axis in range(n):
        lo, hi = _neighbour_minima(dpad, sl, axis)
        mins.append(np.minimum(lo, hi))
    m = np.stack(mins, axis=-1)
    c = coeff / (h * h)
    m = np.where(c > 0.0, m, np.inf)
    order = np.argsort(m, axis=-1)
    ms = np.take_along_axis(m, order, axis=-1)
    cs = np.take_along_axis(c, order, axis=-1)
    finite = np.isfinite(ms)
    cs = np.where(finite, cs, 0.0)
    ms0 = np.where(finite, ms, 0.0)
    s1 = np.cumsum(cs, axis=-1)
    s2 = np.cumsum(cs * ms0, axis=-1)
    s3 = np.cumsum(cs * ms0 * ms0, axis=-1)
    disc = s2 * s2 - s1 * (s3 - 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (s2 + np.sqrt(np.maximum(disc, 0.0))) / s1
    following = np.concatenate([ms[..., 1:], np.full(ms.shape[:-1] + (1,), np.inf)], axis=-1)
    valid = finite & (s1 > 0.0) & (disc >= 0.0) & (t <= following)
    pick = np.argmax(valid, axis=-1)[..., None]
    chosen = np.take_along_axis(t, pick, axis=-1)[..., 0]
    return np.where(valid.any(axis=-1), chosen, np.inf)


def _lax_friedrichs(dpad, sl, gram, sigma, h) -> np.ndarray:
    n = len(sl)
    grad = []
    avg = 0.0
    for axis in range(n):
        lo, hi = _neighbour_minima(dpad, sl, axis)
        grad.append((hi - lo) / (2.0 * h))
        avg = avg + sigma[..., axis] * (hi + lo) / (2.0 * h)
    g = np.stack(grad, axis=-1)
    hamiltonian = np.sqrt(np.maximum(np.einsum("...i,...ij,...j->...", g, gram, g), 0.0))
    weight = np.sum(sigma, axis=-1) / h
    with np.errstate(divide="ignore", invalid="ignore"):
        new = (1.0 - hamiltonian + avg) / weight
    return np.maximum(np.where(weight > 0, new, np.inf), 0.0)


def _scheme_residual(dpad, inside, diag, gram, sigma, h, diagonal) -> float:
    """Largest |H_h(delta) - 1| of the discrete scheme itself over the inside cells."""
    full = tuple(slice(0, s) for s in inside.shape)
    delta = dpad[tuple(slice(1, -1) for _ in inside.shape)]
    if diagonal:
        candidate = _godunov(dpad, full, diag, h)
    else:
        candidate = _lax_friedrichs(dpad, full, gram, sigma, h)
    weight = np.sum(sigma, axis=-1) / h
    reached = inside & np.isfinite(candidate) & np.isfinite(delta)
    if not reached.any():
        return np.inf
    return float(np.max(np.abs(delta[reached] - candidate[reached]) * weight[reached]))


def _residual(delta: np.ndarray, inside: np.ndarray, gram: np.ndarray, h: float, diagonal: bool) -> np.ndarray:
    n = delta.ndim
    dpad = np.pad(delta, 1, mode="edge")
    full = tuple(slice(0, s) for s in delta.shape)
    parts = []
    for axis in range(n):
        lo, hi = _neighbour_minima(dpad, full, axis)
        if diagonal:
            parts.append(np.maximum(delta - np.minimum(lo, hi), 0.0) / h)
        else:
            parts.append((hi - lo) / (2.0 * h))
    g = np.stack(parts, axis=-1)
    norm = np.sqrt(np.maximum(np.einsum("...i,...ij,...j->...", g, gram, g), 0.0))
    return np.abs(norm - 1.0)[inside]


def boundary_distance(
    grid,
    sys: Optional[VectorFieldSystem] = None,
    tolerance: float = RESIDUAL_TOLERANCE,
    max_iterations: int = 1000,
) -> EikonalReport:
    """Solve |B(x)^T grad delta| = 1 on the inside cells with delta = 0 on the band.

    Sweeps repeat until the residual of the discrete scheme drops below ``tolerance``.
    """
    inside, band, h = grid.inside, grid.band, grid.h
    if not band.any():
        raise ValueError("grid has an empty boundary band")
    frames = grid.frame if sys is None else sys.frame_at(grid.points()).reshape(grid.dims + (grid.ndim, -1))
    gram = np.einsum("...im,...jm->...ij", frames, frames)
    off = gram - np.einsum("...ii->...i", gram)[..., None] * np.eye(grid.ndim)
    diag = np.einsum("...ii->...i", gram)
    diagonal = float(np.max(np.abs(off))) <= 1e-14 * max(float(np.max(diag)), 1.0)
    sigma = np.sqrt(diag)
    scheme = "godunov" if diagonal else "lax-friedrichs"

    extent = float(np.max(np.asarray(grid.dims) * h))
    big = 1e3 * (extent + 1.0)
    start = np.where(inside, big if not diagonal else np.inf, 0.0)
    start[~(inside | band)] = np.inf
    # delta is a view into the padded array, so sweeps see their own updates
    dpad = np.pad(start, 1, mode="constant", constant_values=np.inf)
    delta = dpad[tuple(slice(1, -1) for _ in range(grid.ndim))]

    shape = grid.dims
    iterations = 0
    change = np.inf
    defect = np.inf
    with np.errstate(invalid="ignore", over="ignore"):
        while iterations < max_iterations:
            iterations += 1
            before = delta.copy()
            for axis in range(grid.ndim):
                for index in list(range(shape[axis])) + list(range(shape[axis] - 1, -1, -1)):
                    sl = tuple(slice(index, index + 1) if a == axis else slice(0, shape[a]) for a in range(grid.ndim))
                    mask = inside[sl]
                    if not mask.any():
                        continue
                    if diagonal:
                        candidate = _godunov(dpad, sl, diag[sl], h)
                    else:
                        candidate = _lax_friedrichs(dpad, sl, gram[sl], sigma[sl], h)
                    block = delta[sl]
                    delta[sl] = np.where(mask, np.minimum(block, candidate), block)
            finite = np.isfinite(before) & inside
            change = float(np.max(np.abs(delta[finite] - before[finite]))) if finite.any() else np.inf
            if not np.isfinite(delta[inside]).all():
                continue
            defect = _scheme_residual(dpad, inside, diag, gram, sigma, h, diagonal)
            logger.debug("sweep %d: max update %.3e, scheme residual %.3e", iterations, change, defect)
            if defect < tolerance:
                break
        else:
            raise NonConvergence(
                f"eikonal scheme residual {defect:.3e} still above {tolerance:g} after {max_iterations} iterations"
            )

    delta = np.where(inside | band, delta, 0.0)
    residual = _residual(delta, inside, gram, h, diagonal)
    logger.info("%s eikonal converged in %d iterations, residual max %.3e", scheme, iterations, residual.max())
    return EikonalReport(delta, scheme, iterations, change, float(residual.max()), float(residual.mean()), defect)


# ---------------------------------------------------------------------------
# H-type constants, fundamental solutions and gauges
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OmegaSigma:
    omega: float
    sigma: float
    half_width: float
    unit_ball_volume: float


@lru_cache(maxsize=64)
def omega_sigma(group: HTypeGroup, p: float, n_samples: int = OMEGA_SAMPLES, seed: int = 0) -> OmegaSigma:
    """Monte-Carlo omega_p = int_{N<1} |XN|^p over the box |x_i| < 1, |y_l| < 1/4."""
    if p <= 1.0:
        raise ValueError("p must exceed 1")
    half = np.concatenate([np.ones(group.horiz_dim), np.full(group.center_dim, 0.25)])
    box = float(np.prod(2.0 * half))
    chunks = max(1, math.ceil(n_samples / OMEGA_CHUNK))
    total = total_sq = 0.0
    inside = 0
    remaining = n_samples
    for seq in np.random.SeedSequence(seed).spawn(chunks):
        count = min(OMEGA_CHUNK, remaining)
        remaining -= count
        rng = np.random.default_rng(seq)
        pts = (2.0 * rng.random((count, group.ambient_dim)) - 1.0) * half
        gauge = group.kaplan_gauge(pts)
        keep = (gauge < 1.0) & (gauge > 0.0)
        values = np.zeros(count)
        values[keep] = group.gauge_hgrad_sq(pts[keep]) ** (p / 2.0)
        total += float(values.sum())
        total_sq += float(np.dot(values, values))
        inside += int(keep.sum())
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0)
    omega = box * mean
    return OmegaSigma(
        omega=omega,
        sigma=group.homogeneous_dim * omega,
        half_width=1.96 * box * math.sqrt(var / n_samples),
        unit_ball_volume=box * inside / n_samples,
    )


def _fundamental_constant(group: HTypeGroup, p: float, constants: Optional[OmegaSigma]) -> float:
    constants = constants or omega_sigma(group, p)
    Q = group.homogeneous_dim
    if p == Q:
        return constants.sigma ** (-1.0 / (Q - 1.0))
    return (p - 1.0) / (Q - p) * constants.sigma ** (-1.0 / (p - 1.0))


def fundamental_solution(
    group: HTypeGroup,
    p: float,
    g,
    constants: Optional[OmegaSigma] = None,
) -> np.ndarray:
    if p <= 1.0:
        raise ValueError("p must exceed 1")
    gauge = np.asarray(group.kaplan_gauge(np.asarray(g, dtype=float)))
    if np.any(gauge == 0.0):
        raise Singularity("fundamental solution is singular at the identity")
    Q = group.homogeneous_dim
    c = _fundamental_constant(group, p, constants)
    if p == Q:
        return c * np.log(gauge)
    return c * gauge ** (-(Q - p) / (p - 1.0))


@dataclass(frozen=True)
class GaugeProfile:
    """E(x, r) = (Lambda(x, r) / r^p)^(1/(p-1)) and its inverse F(x, .)."""

    base_point: Tuple[float, ...]
    p: float
    terms: Tuple[Tuple[float, int], ...]
    q_at_x: int
    q_local: int
    r0: float = 1.0

    @property
    def monomial(self) -> bool:
        return len(self.terms) == 1

    @property
    def exponent(self) -> float:
        """(Q - p) / (p - 1) for a monomial profile."""
        return (self.terms[0][1] - self.p) / (self.p - 1.0)

    @property
    def coefficient(self) -> float:
        return self.terms[0][0] ** (1.0 / (self.p - 1.0))

    def lam(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return sum(c * r**d for c, d in self.terms)

    def E(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return (self.lam(r) / r**self.p) ** (1.0 / (self.p - 1.0))

    def log_derivative(self, r) -> np.ndarray:
        """E'(x, r) / E(x, r)."""
        r = np.asarray(r, dtype=float)
        dlam = sum(c * d * r ** (d - 1) for c, d in self.terms)
        return (dlam / self.lam(r) - self.p / r) / (self.p - 1.0)

    def F(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.monomial:
            return (s / self.coefficient) ** (1.0 / self.exponent)
        lo = np.full(s.shape, F_BRACKET[0])
        hi = np.full(s.shape, F_BRACKET[1] * self.r0)
        # E is increasing; widen the upper end for targets beyond the bracket
        while np.any(self.E(hi) < s):
            hi = np.where(self.E(hi) < s, 2.0 * hi, hi)
        while np.any((hi - lo) > F_TOLERANCE * hi):
            mid = 0.5 * (lo + hi)
            below = self.E(mid) < s
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)


def _group_profile_terms(group: HTypeGroup) -> Tuple[Tuple[float, int], ...]:

    basis = build_commutator_basis(group.system, [group.identity()], max_step=2)
    profile = nsw_profile(basis, group.identity())
    return tuple((c, d) for c, d in profile.terms if c > profile.threshold)


def gauge_profile(
    basis_or_group: Union[CommutatorBasis, HTypeGroup],
    x: Sequence[float],
    p: float,
    r0: float = 1.0,
) -> GaugeProfile:
    if p <= 1.0:
        raise ValueError("p must exceed 1")
    point = tuple(float(v) for v in x)
    if isinstance(basis_or_group, HTypeGroup):
        terms = _group_profile_terms(basis_or_group)
        Q = basis_or_group.homogeneous_dim
        q_at_x = q_local = Q
    else:
        profile: NswProfile = nsw_profile(basis_or_group, point)
        terms = tuple(profile.significant_terms())
        q_at_x, q_local = profile.q_at_x, profile.q_local
    if p >= q_at_x:
        raise ExponentViolation(f"p={p} must be below the homogeneous dimension Q(x)={q_at_x}")
    return GaugeProfile(point, float(p), terms, q_at_x, q_local, r0)


def rho_gauge(
    group: HTypeGroup,
    p: float,
    x: Sequence[float],
    y,
    constants: Optional[OmegaSigma] = None,
) -> Tuple[np.ndarray, float]:
    """rho_x(y) = F(x, 1/Gamma_p(x, y)), returned with the constant rho/N."""
    x = np.asarray(x, dtype=float)
    rel = group.product(group.inverse(x), np.asarray(y, dtype=float))
    gamma = fundamental_solution(group, p, rel, constants)
    profile = gauge_profile(group, x, p)
    rho = profile.F(1.0 / gamma)
    Q = group.homogeneous_dim
    c_p = _fundamental_constant(group, p, constants)
    ratio = (c_p * profile.coefficient) ** (-(p - 1.0) / (Q - p))
    return rho, float(ratio)


def radial_density(group: HTypeGroup, p: float, constants: Optional[OmegaSigma] = None) -> Callable[[np.ndarray], np.ndarray]:
    """Density of the pushforward of |X rho|^p dy under rho: kappa^(p-Q) sigma_p t^(Q-1)."""
    constants = constants or omega_sigma(group, p)
    Q = group.homogeneous_dim
    _, kappa = rho_gauge(group, p, group.identity(), group.identity() + np.eye(group.ambient_dim)[0], constants)

    def density(t):
        t = np.asarray(t, dtype=float)
        return kappa ** (p - Q) * constants.sigma * t ** (Q - 1)

    return density


def unit_sphere_samples(group: HTypeGroup, count: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((count, group.ambient_dim))
    gauge = group.kaplan_gauge(pts)
    pts = pts[gauge > 0]
    return np.stack([group.dilate(1.0 / n, g) for g, n in zip(pts, group.kaplan_gauge(pts))])


def hypothesis_constant(
    group: HTypeGroup,
    p: float,
    shells: Sequence[float] = (0.25, 0.5),
    n_samples: int = 2000,
    seed: int = 0,
    constants: Optional[OmegaSigma] = None,
) -> Dict[float, float]:
    """Smallest C with |X Gamma_p(0, .)| <= C (d / Lambda(0, d))^(1/(p-1)) on each shell N = t."""
    Q = group.homogeneous_dim
    if not 1.0 < p < Q:
        raise ExponentViolation(f"p={p} must lie in (1, Q={Q})")
    c_p = _fundamental_constant(group, p, constants)
    a = (Q - p) / (p - 1.0)
    lam_coeff = sum(c for c, _ in _group_profile_terms(group))
    sphere = unit_sphere_samples(group, n_samples, seed)
    out: Dict[float, float] = {}
    for t in shells:
        pts = np.stack([group.dilate(t, g) for g in sphere])
        gauge = group.kaplan_gauge(pts)
        hgrad = np.sqrt(group.gauge_hgrad_sq(pts))
        lhs = a * c_p * gauge ** (-a - 1.0) * hgrad
        rhs = (gauge / (lam_coeff * gauge**Q)) ** (1.0 / (p - 1.0))
        out[float(t)] = float(np.max(lhs / rhs))
    return out
