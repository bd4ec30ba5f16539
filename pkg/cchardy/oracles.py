"""Distance oracles for the CC distance.

Every oracle answers two questions for a base point x and an (N, n) array of
points ys:

* ``distance(x, ys)``: the working quasi-distance that defines lattice balls,
  stencils and covers.  It is exact for the Euclidean oracle, the Kaplan gauge
  on H-type groups and the frozen-frame box pseudo-distance otherwise.
* ``bracket(x, ys) -> (upper, lower)``: bounds with upper >= d_cc >= lower.

``bounding_halfwidth(x, r)`` gives a per-axis Euclidean box that contains the
ball of the working distance.  For the Euclidean and gauge oracles it also
contains the outer set {lower < r}.
"""

import itertools
import math
from typing import Tuple

import numpy as np

from .frames import CommutatorBasis, HTypeGroup, eval_frame

DETERMINANT_TOLERANCE = 1e-9


class DistanceOracle:
    name = "abstract"

    def distance(self, x: np.ndarray, ys: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def bracket(self, x: np.ndarray, ys: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def bounding_halfwidth(self, x: np.ndarray, r: float) -> np.ndarray:
        raise NotImplementedError

    def distance_matrix(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        xs = np.atleast_2d(xs)
        return np.stack([self.distance(x, ys) for x in xs])


class EuclideanOracle(DistanceOracle):
    name = "euclidean"

    def __init__(self, dim: int = 3):
        self.dim = dim

    def distance(self, x, ys):
        return np.linalg.norm(np.atleast_2d(ys) - np.asarray(x, dtype=float), axis=-1)

    def bracket(self, x, ys):
        d = self.distance(x, ys)
        return d, d

    def bounding_halfwidth(self, x, r):
        return np.full(self.dim, float(r))

    def unit_ball_volume(self) -> float:
        return math.pi ** (self.dim / 2) / math.gamma(self.dim / 2 + 1)


class GaugeOracle(DistanceOracle):
    """Kaplan gauge N(x^{-1} y) on a group of Heisenberg type.

    The bracket is the CC distance itself, bounded through the relative point
    (z, t) = x^{-1} y and c = sqrt(2 pi |t| / law):

        max(|z|, c - |z|) <= d_cc <= |z| + c

    Upper: a horizontal segment followed by a circle of length c in the plane
    spanned by z' and U_t z'.  Lower: closing a sub-unit path with the chord
    back to its start encloses a symplectic area of at least |t| / (2 law), and
    a closed curve of length L encloses at most L^2 / (4 pi).
    """

    name = "gauge"

    def __init__(self, group: HTypeGroup):
        self.group = group

    def _relative(self, x, ys) -> np.ndarray:
        g = self.group
        return g.product(g.inverse(np.asarray(x, dtype=float)), np.atleast_2d(ys))

    def distance(self, x, ys):
        return self.group.kaplan_gauge(self._relative(x, ys))

    def bracket(self, x, ys):
        z, t = self.group.split(self._relative(x, ys))
        horiz = np.linalg.norm(z, axis=-1)
        loop = np.sqrt(2.0 * math.pi * np.linalg.norm(t, axis=-1) / self.group.law_factor)
        return horiz + loop, np.maximum(horiz, loop - horiz)

    def bounding_halfwidth(self, x, r):
        g = self.group
        x_h, _ = g.split(np.asarray(x, dtype=float))
        horiz = np.full(g.horiz_dim, float(r))
        # covers both N < r and the outer bracket set lower < r
        vertical = max(r * r / 4.0, 2.0 * g.law_factor * r * r / math.pi)
        center = np.full(g.center_dim, vertical + g.law_factor * float(np.linalg.norm(x_h)) * r)
        return np.concatenate([horiz, center])


class BoxDistanceOracle(DistanceOracle):
    """Frozen-frame box pseudo-distance.

    rho(x, y) = min over n-subsets I with a_I(x) != 0 of max_i |u_i|^(1/deg_i),
    where y - x = sum_{i in I} u_i Y_i(x).  Comparable to d near x, with
    constants that depend on x; ``bracket`` therefore solves the control
    problem point by point.
    """

    name = "box"

    def __init__(self, basis: CommutatorBasis, path_options=None):
        self.basis = basis
        self.path_options = path_options
        self._cache = {}

    def _subsets(self, x: np.ndarray):
        key = tuple(np.round(np.asarray(x, dtype=float), 14))
        if key in self._cache:
            return self._cache[key]
        frame = eval_frame(self.basis, x)
        n, l = frame.shape
        combos = list(itertools.combinations(range(l), n))
        dets = np.array([abs(np.linalg.det(frame[:, list(c)])) for c in combos])
        cut = DETERMINANT_TOLERANCE * dets.max() if dets.size and dets.max() > 0 else 0.0
        subsets = []
        for combo, det in zip(combos, dets):
            if det > cut and det > 0.0:
                mat = frame[:, list(combo)]
                degs = np.array([self.basis.degrees[i] for i in combo], dtype=float)
                subsets.append((mat, np.linalg.inv(mat), degs))
        if len(self._cache) > 4096:
            self._cache.clear()
        self._cache[key] = subsets
        return subsets

    def distance(self, x, ys):
        x = np.asarray(x, dtype=float)
        diff = np.atleast_2d(ys) - x
        best = np.full(diff.shape[0], np.inf)
        for _, inv, degs in self._subsets(x):
            coeffs = diff @ inv.T
            rho = np.max(np.abs(coeffs) ** (1.0 / degs), axis=-1)
            best = np.minimum(best, rho)
        return best

    def bracket(self, x, ys):
        from .metric import cc_distance

        pts = np.atleast_2d(ys)
        upper = np.empty(pts.shape[0])
        lower = np.empty(pts.shape[0])
        for i, y in enumerate(pts):
            upper[i], lower[i], _ = cc_distance(self.basis, x, y, self.path_options)
        return upper, lower

    def bounding_halfwidth(self, x, r):
        x = np.asarray(x, dtype=float)
        width = np.zeros(x.shape[0])
        for mat, _, degs in self._subsets(x):
            width = np.maximum(width, np.abs(mat) @ (float(r) ** degs))
        return width


class VolumeOracle:
    """Callable (x, t) -> |B(x, t)| used by contents and Wolff potentials."""

    def __call__(self, x: np.ndarray, t) -> np.ndarray:
        raise NotImplementedError


class MonomialVolume(VolumeOracle):
    def __init__(self, coefficient: float, exponent: float):
        self.coefficient = float(coefficient)
        self.exponent = float(exponent)

    def __call__(self, x, t):
        return self.coefficient * np.asarray(t, dtype=float) ** self.exponent


def euclidean_volume(dim: int = 3) -> MonomialVolume:
    return MonomialVolume(EuclideanOracle(dim).unit_ball_volume(), dim)


class NswVolume(VolumeOracle):
    """Lambda(x, t) times a fitted constant, the surrogate for |B(x, t)|."""

    def __init__(self, basis: CommutatorBasis, scale: float = 1.0):
        from .nsw import nsw_profile

        self.basis = basis
        self.scale = float(scale)
        self._profile = nsw_profile
        self._cache = {}

    def __call__(self, x, t):
        key = tuple(np.round(np.asarray(x, dtype=float), 14))
        if key not in self._cache:
            if len(self._cache) > 4096:
                self._cache.clear()
            self._cache[key] = self._profile(self.basis, key)
        return self.scale * self._cache[key].value(t)
