"""Hardy weights: boundary, point, mixed and gauge families on a grid."""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .frames import HTypeGroup
from .grid import GridDomain, capped_power
from .oracles import DistanceOracle

logger = logging.getLogger(__name__)

KINDS = ("boundary_power", "point_power", "mixed", "gauge_sharp", "gauge_corollary", "custom")


class WeightRangeError(ValueError):
    pass


@dataclass(frozen=True)
class WeightSpec:
    """V = delta^(-p+gamma), d(., x0)^-exponent, their product, a gauge weight or a custom field."""

    kind: str
    p: float
    gamma: float = 0.0
    x0: Optional[Tuple[float, ...]] = None
    exponent: Optional[float] = None
    values: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise WeightRangeError(f"unknown weight kind '{self.kind}' (use one of {', '.join(KINDS)})")
        if self.p <= 1.0:
            raise WeightRangeError(f"p={self.p} must exceed 1")
        if self.kind in ("point_power", "mixed", "gauge_sharp", "gauge_corollary") and self.x0 is None:
            raise WeightRangeError(f"{self.kind} weight needs a pole x0")
        if self.kind == "custom" and self.values is None:
            raise WeightRangeError("custom weight needs values")

    @classmethod
    def boundary(cls, p: float, gamma: float = 0.0) -> "WeightSpec":
        return cls("boundary_power", p, gamma=gamma)

    @classmethod
    def point(cls, p: float, x0, exponent: Optional[float] = None) -> "WeightSpec":
        return cls("point_power", p, x0=tuple(float(v) for v in x0), exponent=p if exponent is None else exponent)

    @classmethod
    def mixed(cls, p: float, gamma: float, x0) -> "WeightSpec":
        return cls("mixed", p, gamma=gamma, x0=tuple(float(v) for v in x0))

    @property
    def point_exponent(self) -> float:
        if self.kind == "point_power":
            return float(self.exponent)
        if self.kind == "mixed":
            return self.gamma
        return 0.0

    @property
    def label(self) -> str:
        if self.kind == "boundary_power":
            return f"delta^-{self.p - self.gamma:g}"
        if self.kind == "point_power":
            return f"d^-{self.point_exponent:g}"
        if self.kind == "mixed":
            return f"delta^-{self.p - self.gamma:g}*d^-{self.gamma:g}"
        return self.kind


def check_admissible(spec: WeightSpec, q_at_x0: Optional[float] = None) -> None:
    if spec.kind in ("boundary_power", "mixed") and not 0.0 <= spec.gamma <= spec.p:
        raise WeightRangeError(
            f"gamma={spec.gamma} outside admissible range 0 <= gamma <= p={spec.p}"
        )
    if q_at_x0 is not None and spec.kind in ("point_power", "mixed"):
        if spec.point_exponent > 0 and spec.p >= q_at_x0:
            raise WeightRangeError(f"p={spec.p} must be below the homogeneous dimension {q_at_x0} at x0")
    if q_at_x0 is not None and spec.kind in ("gauge_sharp", "gauge_corollary") and spec.p >= q_at_x0:
        raise WeightRangeError(f"p={spec.p} must be below Q={q_at_x0}")


def point_distance(domain: GridDomain, oracle: DistanceOracle, x0) -> np.ndarray:
    return oracle.distance(np.asarray(x0, dtype=float), domain.points()).reshape(domain.dims)


def _pole_mask(domain: GridDomain, x0) -> np.ndarray:
    mask = np.zeros(domain.dims, dtype=bool)
    mask[domain.index_of(x0)] = True
    return mask


def gauge_fields(domain: GridDomain, group: HTypeGroup, p: float, x0, kappa: float) -> Tuple[np.ndarray, np.ndarray]:
    """rho_x0 = kappa N(x0^-1 y) and |X rho|^2 = kappa^2 |XN|^2(x0^-1 y) on the lattice."""
    pts = domain.points()
    rel = group.product(group.inverse(np.asarray(x0, dtype=float)), pts)
    gauge = group.kaplan_gauge(rel)
    hgrad = np.zeros_like(gauge)
    nonzero = gauge > 0
    hgrad[nonzero] = group.gauge_hgrad_sq(rel[nonzero])
    return (kappa * gauge).reshape(domain.dims), (kappa**2 * hgrad).reshape(domain.dims)


def evaluate_weight(
    spec: WeightSpec,
    domain: GridDomain,
    oracle: Optional[DistanceOracle] = None,
    group: Optional[HTypeGroup] = None,
    kappa: float = 1.0,
) -> np.ndarray:
    """Weight on the lattice: singular factors capped at h/2, pole cell zeroed, zero off the domain."""
    h = domain.h
    if spec.kind == "custom":
        values = np.asarray(spec.values, dtype=float)
        return np.where(domain.inside, values, 0.0)

    weight = np.ones(domain.dims)
    if spec.kind in ("boundary_power", "mixed"):
        if domain.delta is None:
            raise ValueError("boundary weights need the boundary distance field")
        weight = weight * capped_power(domain.delta, spec.p - spec.gamma, h)
    if spec.kind in ("point_power", "mixed") and spec.point_exponent > 0:
        if oracle is None:
            raise ValueError("point weights need a distance oracle")
        weight = weight * capped_power(point_distance(domain, oracle, spec.x0), spec.point_exponent, h)
        weight[_pole_mask(domain, spec.x0)] = 0.0
    if spec.kind in ("gauge_sharp", "gauge_corollary"):
        if group is None:
            raise ValueError("gauge weights need a Heisenberg-type group")
        rho, hgrad_sq = gauge_fields(domain, group, spec.p, spec.x0, kappa)
        rho = np.maximum(rho, 0.5 * h)
        Q = group.homogeneous_dim
        factor = ((Q - spec.p) / (spec.p - 1.0)) ** spec.p if spec.kind == "gauge_sharp" else 1.0
        # E'/E = ((Q - p)/(p - 1)) / rho for the monomial profile of a group
        weight = factor * hgrad_sq ** (spec.p / 2.0) * rho ** (-spec.p)
        weight[_pole_mask(domain, spec.x0)] = 0.0
    return np.where(domain.inside, weight, 0.0)


def theoretical_bound(spec: WeightSpec, dim: Optional[float] = None, euclidean: bool = False) -> Optional[float]:
    """Sharp constant attached to a weight, when one is known."""
    p = spec.p
    if spec.kind == "point_power" and euclidean and dim is not None and spec.point_exponent == p and p < dim:
        return (p / (dim - p)) ** p
    if spec.kind == "gauge_sharp":
        return (p / (p - 1.0)) ** p
    if spec.kind == "gauge_corollary" and dim is not None:
        return (p / (dim - p)) ** p
    return None
