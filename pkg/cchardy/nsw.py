"""Nagel-Stein-Wainger polynomial, homogeneous dimensions and ball volumes."""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ComparabilityViolation, DegenerateBasis, InconclusiveVolume
from .frames import CommutatorBasis, eval_frame
from .oracles import DistanceOracle

logger = logging.getLogger(__name__)

DETERMINANT_TOLERANCE = 1e-9
EXHAUSTIVE_LIMIT = 10**6
RESCALE_TOLERANCE = 1e-9
VOLUME_CHUNK = 1 << 16
MAX_GAP = 0.5


@dataclass(frozen=True)
class LocalParameters:
    c0: float
    r0: float

    def __post_init__(self):
        if not (0.0 < self.c0 <= 1.0):
            raise ValueError("c0 must lie in (0, 1]")
        if self.r0 <= 0.0:
            raise ValueError("r0 must be positive")


@dataclass(frozen=True)
class NswProfile:
    base_point: Tuple[float, ...]
    terms: Tuple[Tuple[float, int], ...]
    q_at_x: int
    q_local: int
    threshold: float

    @property
    def exponents(self) -> List[int]:
        return [d for _, d in self.terms]

    def significant_terms(self) -> List[Tuple[float, int]]:
        return [(c, d) for c, d in self.terms if c > self.threshold]

    def value(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return sum(c * r**d for c, d in self.terms)

    def derivative(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return sum(c * d * r ** (d - 1) for c, d in self.terms)

    def max_exponent(self) -> int:
        return max(d for c, d in self.significant_terms())


def _tuple_determinants(frame: np.ndarray, degrees: Sequence[int]) -> Dict[int, float]:
    n, l = frame.shape
    sums: Dict[int, float] = {}
    if l**n <= EXHAUSTIVE_LIMIT:
        index = np.array(list(itertools.product(range(l), repeat=n)), dtype=int)
        mats = frame[:, index].transpose(1, 0, 2)
        dets = np.abs(np.linalg.det(mats))
        degs = np.asarray(degrees)[index].sum(axis=1)
        for d in np.unique(degs):
            sums[int(d)] = float(dets[degs == d].sum())
        return sums
    # only tuples of distinct fields can have a nonzero determinant; each subset
    # appears n! times with the same |det|
    perms = math.factorial(n)
    for combo in itertools.combinations(range(l), n):
        det = abs(np.linalg.det(frame[:, list(combo)]))
        d = int(sum(degrees[i] for i in combo))
        sums[d] = sums.get(d, 0.0) + perms * det
    return sums


def nsw_profile(
    basis: CommutatorBasis,
    x: Sequence[float],
    compact_samples: Optional[Sequence[Sequence[float]]] = None,
) -> NswProfile:
    frame = eval_frame(basis, x)
    sums = _tuple_determinants(frame, basis.degrees)
    top = max(sums.values()) if sums else 0.0
    if top <= 0.0:
        raise DegenerateBasis(f"every frame determinant vanishes at {list(x)}")
    threshold = DETERMINANT_TOLERANCE * top
    terms = tuple(sorted(((c, d) for d, c in sums.items() if c > 0.0), key=lambda t: t[1]))
    q_at_x = min(d for c, d in terms if c > threshold)
    q_local = max(d for c, d in terms if c > threshold)
    if compact_samples is not None:
        for sample in compact_samples:
            q_local = max(q_local, nsw_profile(basis, sample).q_local)
    return NswProfile(
        base_point=tuple(float(v) for v in x),
        terms=tuple(sorted(terms, key=lambda t: t[1])),
        q_at_x=q_at_x,
        q_local=q_local,
        threshold=threshold,
    )


def homogeneous_dimensions(
    basis: CommutatorBasis,
    x: Sequence[float],
    compact_samples: Sequence[Sequence[float]] = (),
) -> Tuple[int, int]:
    profile = nsw_profile(basis, x, compact_samples)
    return profile.q_at_x, profile.q_local


def _sample_chunk(seed_seq: np.random.SeedSequence, count: int, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    rng = np.random.default_rng(seed_seq)
    return lo + (hi - lo) * rng.random((count, lo.shape[0]))


@dataclass(frozen=True)
class VolumeEstimate:
    estimate: float
    half_width: float
    volume_lo: float
    volume_hi: float
    samples: int


def ball_volume(
    dist_oracle: DistanceOracle,
    x: Sequence[float],
    r: float,
    n_samples: int = 100_000,
    seed: int = 0,
    certified: bool = False,
) -> VolumeEstimate:
    """Monte-Carlo |B(x, r)| over the oracle's bounding box.

    The estimate counts the ball of the oracle's working distance.  With
    ``certified`` the CC bracket is counted as well: volume_lo uses
    upper < r and volume_hi uses lower < r, and a gap above MAX_GAP of the
    estimate raises InconclusiveVolume.  Otherwise both equal the estimate.

    Chunks of fixed size draw from spawned seeds, so the result depends only on
    (n_samples, seed) and not on how chunks are scheduled.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    x = np.asarray(x, dtype=float)
    half = dist_oracle.bounding_halfwidth(x, r)
    lo, hi = x - half, x + half
    box_volume = float(np.prod(2.0 * half))

    chunks = max(1, math.ceil(n_samples / VOLUME_CHUNK))
    seeds = np.random.SeedSequence(seed).spawn(chunks)
    inside = inside_lo = inside_hi = 0
    remaining = n_samples
    for seq in seeds:
        count = min(VOLUME_CHUNK, remaining)
        remaining -= count
        pts = _sample_chunk(seq, count, lo, hi)
        inside += int(np.count_nonzero(dist_oracle.distance(x, pts) < r))
        if certified:
            upper, lower = dist_oracle.bracket(x, pts)
            inside_lo += int(np.count_nonzero(upper < r))
            inside_hi += int(np.count_nonzero(lower < r))

    estimate = box_volume * inside / n_samples
    frac = inside / n_samples
    half_width = 1.96 * box_volume * math.sqrt(frac * (1.0 - frac) / n_samples)
    if not certified:
        return VolumeEstimate(estimate, half_width, estimate, estimate, n_samples)

    vol_lo = box_volume * inside_lo / n_samples
    vol_hi = box_volume * inside_hi / n_samples
    if estimate > 0 and (vol_hi - vol_lo) > MAX_GAP * estimate:
        raise InconclusiveVolume(
            f"distance bracket too loose at r={r:g}: volumes {vol_lo:.4g}..{vol_hi:.4g}"
        )
    return VolumeEstimate(estimate, half_width, vol_lo, vol_hi, n_samples)


def fitted_exponent(radii: Sequence[float], volumes: Sequence[float]) -> float:
    slope, _ = np.polyfit(np.log(np.asarray(radii)), np.log(np.asarray(volumes)), 1)
    return float(slope)


def check_rescaling(profile: NswProfile, q_local: int, r: float, ts: Sequence[float]) -> float:
    """Largest relative violation of t^Q L(r) <= L(tr) <= t^Q(x) L(r) over ts."""
    base = float(profile.value(r))
    worst = 0.0
    for t in ts:
        scaled = float(profile.value(t * r))
        lower = t**q_local * base
        upper = t**profile.q_at_x * base
        worst = max(worst, (lower - scaled) / base, (scaled - upper) / base)
    return worst


@dataclass
class ComparabilityReport:
    rows: List[Dict[str, float]]
    nsw_ratio_min: float
    nsw_ratio_max: float
    doubling_c0: float
    rescaling_violation: float
    q_local: int

    def doubling_by_radius(self) -> Dict[float, float]:
        out: Dict[float, float] = {}
        for row in self.rows:
            out.setdefault(row["r"], row["ratio"])
        return out


def comparability_report(
    basis: CommutatorBasis,
    dist_oracle: DistanceOracle,
    samples: Sequence[Sequence[float]],
    radii: Sequence[float],
    ts: Sequence[float] = (0.125, 0.25, 0.5, 0.75, 1.0),
    n_samples: int = 100_000,
    seed: int = 0,
    r0: Optional[float] = None,
) -> ComparabilityReport:
    radii = sorted(float(r) for r in radii)
    if r0 is not None and radii[-1] > r0:
        raise ValueError(f"radii must not exceed r0={r0}")
    profiles = [nsw_profile(basis, x) for x in samples]
    q_local = max(p.q_local for p in profiles)

    rows: List[Dict[str, float]] = []
    c0 = math.inf
    violation = 0.0
    for idx, (x, profile) in enumerate(zip(samples, profiles)):
        vols = []
        for j, r in enumerate(radii):
            vol = ball_volume(dist_oracle, x, r, n_samples, seed + 7919 * idx + j)
            lam = float(profile.value(r))
            vols.append(vol.estimate)
            rows.append({
                "x": tuple(float(v) for v in x),
                "r": r,
                "lambda": lam,
                "volume": vol.estimate,
                "volume_lo": vol.volume_lo,
                "volume_hi": vol.volume_hi,
                "ratio": vol.estimate / lam,
            })
            violation = max(violation, check_rescaling(profile, q_local, r, ts))
        for a in range(len(radii)):
            for b in range(a + 1, len(radii)):
                if vols[b] > 0:
                    c0 = min(c0, (vols[a] / vols[b]) / (radii[a] / radii[b]) ** q_local)

    if violation > RESCALE_TOLERANCE:
        raise ComparabilityViolation(f"rescaling bracket violated by {violation:.3e}")
    ratios = [row["ratio"] for row in rows]
    logger.info("nsw ratio in [%.4g, %.4g], doubling C0=%.4g", min(ratios), max(ratios), c0)
    return ComparabilityReport(rows, min(ratios), max(ratios), c0, violation, q_local)
