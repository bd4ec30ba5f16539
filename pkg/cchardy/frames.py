"""Polynomial vector-field systems, commutator ladders and Heisenberg-type groups.

Fields are stored as sympy polynomials so that Lie brackets are exact; numeric
evaluation goes through lambdified callables cached on the (immutable) objects.
"""

import logging
from collections import namedtuple
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

from .errors import HoermanderFailure, Singularity

logger = logging.getLogger(__name__)

RANK_TOLERANCE = 1e-9

Field = Tuple[sp.Expr, ...]


def coordinate_symbols(n: int) -> Tuple[sp.Symbol, ...]:
    return tuple(sp.symbols(f"x1:{n + 1}", real=True))


def _compile(fields: Sequence[Field], symbols: Sequence[sp.Symbol]) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorised evaluator: (N, n) points -> (N, n, m) coefficient array."""
    n = len(symbols)
    m = len(fields)
    funcs = [sp.lambdify(symbols, expr, modules="numpy") for fld in fields for expr in fld]

    def evaluate(points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        count = pts.shape[0]
        args = [pts[:, k] for k in range(n)]
        cols = [np.broadcast_to(np.asarray(f(*args), dtype=float), (count,)) for f in funcs]
        stacked = np.stack(cols, axis=-1).reshape(count, m, n)
        return stacked.transpose(0, 2, 1)

    return evaluate


def bracket_fields(a: Field, b: Field, symbols: Sequence[sp.Symbol]) -> Field:
    # [A, B]^k = sum_j A^j d_j B^k - B^j d_j A^k
    out = []
    for k in range(len(symbols)):
        expr = sum(
            a[j] * sp.diff(b[k], symbols[j]) - b[j] * sp.diff(a[k], symbols[j])
            for j in range(len(symbols))
        )
        out.append(sp.expand(expr))
    return tuple(out)


def apply_field(fld: Field, function: sp.Expr, symbols: Sequence[sp.Symbol]) -> sp.Expr:
    return sp.expand(sum(fld[j] * sp.diff(function, symbols[j]) for j in range(len(symbols))))


def _is_zero(fld: Field) -> bool:
    return all(sp.simplify(expr) == 0 for expr in fld)


def _same_up_to_sign(a: Field, b: Field) -> bool:
    if all(sp.expand(x - y) == 0 for x, y in zip(a, b)):
        return True
    return all(sp.expand(x + y) == 0 for x, y in zip(a, b))


def numerical_rank(matrix: np.ndarray) -> int:
    sv = np.linalg.svd(np.asarray(matrix, dtype=float), compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > RANK_TOLERANCE * sv[0]))


@dataclass(frozen=True)
class VectorFieldSystem:
    ambient_dim: int
    coeffs: Tuple[Field, ...]
    name: str = "custom"

    def __post_init__(self):
        if self.ambient_dim < 1:
            raise ValueError("ambient dimension must be positive")
        if not self.coeffs:
            raise ValueError("a system needs at least one vector field")
        symbols = coordinate_symbols(self.ambient_dim)
        for idx, fld in enumerate(self.coeffs):
            if len(fld) != self.ambient_dim:
                raise ValueError(f"field {idx + 1} has {len(fld)} components, expected {self.ambient_dim}")
            for expr in fld:
                if not sp.sympify(expr).is_polynomial(*symbols):
                    raise ValueError(f"field {idx + 1} has a non-polynomial coefficient: {expr}")

    @property
    def num_fields(self) -> int:
        return len(self.coeffs)

    @cached_property
    def symbols(self) -> Tuple[sp.Symbol, ...]:
        return coordinate_symbols(self.ambient_dim)

    @cached_property
    def evaluator(self) -> Callable[[np.ndarray], np.ndarray]:
        return _compile(self.coeffs, self.symbols)

    def frame_at(self, points: np.ndarray) -> np.ndarray:
        return self.evaluator(points)


@dataclass(frozen=True)
class CommutatorBasis:
    system: VectorFieldSystem
    fields: Tuple[Field, ...]
    degrees: Tuple[int, ...]
    parents: Tuple[Optional[Tuple[int, int]], ...]
    max_step: int
    hoermander_verified_on: Tuple[Tuple[float, ...], ...]

    @property
    def ambient_dim(self) -> int:
        return self.system.ambient_dim

    @property
    def size(self) -> int:
        return len(self.fields)

    @cached_property
    def symbols(self) -> Tuple[sp.Symbol, ...]:
        return self.system.symbols

    @cached_property
    def evaluator(self) -> Callable[[np.ndarray], np.ndarray]:
        return _compile(self.fields, self.symbols)

    def frame_at(self, points: np.ndarray) -> np.ndarray:
        return self.evaluator(points)


def _fields_of(obj) -> Tuple[Field, ...]:
    return obj.fields if isinstance(obj, CommutatorBasis) else obj.coeffs


def eval_frame(sys, x: Sequence[float]) -> np.ndarray:
    """n x m array whose column i is X_i(x)."""
    point = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(point)):
        raise ValueError("point must have finite coordinates")
    return sys.frame_at(point[None, :])[0]


def eval_frame_many(sys, points: np.ndarray) -> np.ndarray:
    return sys.frame_at(points)


def lie_bracket(sys_or_basis, i: int, j: int, x: Sequence[float]) -> np.ndarray:
    fields = _fields_of(sys_or_basis)
    if not (0 <= i < len(fields) and 0 <= j < len(fields)):
        raise IndexError(f"field indices ({i}, {j}) out of range for {len(fields)} fields")
    symbols = sys_or_basis.symbols
    bracket = bracket_fields(fields[i], fields[j], symbols)
    evaluate = _compile([bracket], symbols)
    return evaluate(np.asarray(x, dtype=float)[None, :])[0][:, 0]


def jacobi_defect(sys_or_basis, i: int, j: int, k: int) -> Field:
    """[X_i,[X_j,X_k]] + [X_j,[X_k,X_i]] + [X_k,[X_i,X_j]] as exact polynomials."""
    fields = _fields_of(sys_or_basis)
    s = sys_or_basis.symbols
    a, b, c = fields[i], fields[j], fields[k]
    terms = (
        bracket_fields(a, bracket_fields(b, c, s), s),
        bracket_fields(b, bracket_fields(c, a, s), s),
        bracket_fields(c, bracket_fields(a, b, s), s),
    )
    return tuple(sp.expand(sum(t[idx] for t in terms)) for idx in range(len(s)))


def _rank_failures(fields: Sequence[Field], symbols, samples: np.ndarray) -> List[Tuple[int, int]]:
    frames = _compile(fields, symbols)(samples)
    n = len(symbols)
    failures = []
    for idx, frame in enumerate(frames):
        rank = numerical_rank(frame)
        if rank < n:
            failures.append((idx, rank))
    return failures


def build_commutator_basis(
    sys: VectorFieldSystem,
    samples: Sequence[Sequence[float]],
    max_step: int,
) -> CommutatorBasis:
    if max_step < 1:
        raise ValueError("max_step must be at least 1")
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    if pts.size == 0:
        raise ValueError("at least one sample point is required")

    symbols = sys.symbols
    fields: List[Field] = [tuple(sp.expand(e) for e in fld) for fld in sys.coeffs]
    degrees = [1] * len(fields)
    parents: List[Optional[Tuple[int, int]]] = [None] * len(fields)

    failures = _rank_failures(fields, symbols, pts)
    step = 1
    while failures and step < max_step:
        step += 1
        current = len(fields)
        for a in range(current):
            for b in range(a + 1, current):
                if degrees[a] + degrees[b] != step:
                    continue
                candidate = bracket_fields(fields[a], fields[b], symbols)
                if _is_zero(candidate):
                    continue
                if any(_same_up_to_sign(candidate, existing) for existing in fields):
                    continue
                fields.append(candidate)
                degrees.append(step)
                parents.append((a, b))
        failures = _rank_failures(fields, symbols, pts)
        logger.debug("degree %d: %d fields, %d rank-deficient samples", step, len(fields), len(failures))

    if failures:
        idx, rank = failures[0]
        raise HoermanderFailure(tuple(pts[idx]), rank, max_step)

    return CommutatorBasis(
        system=sys,
        fields=tuple(fields),
        degrees=tuple(degrees),
        parents=tuple(parents),
        max_step=step,
        hoermander_verified_on=tuple(tuple(float(c) for c in p) for p in pts),
    )


def _quaternion_units() -> List[np.ndarray]:
    # left multiplication by i, j, k on R^4 with basis (1, i, j, k)
    li = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]])
    lj = np.array([[0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]])
    lk = np.array([[0, 0, 0, -1], [0, 0, -1, 0], [0, 1, 0, 0], [1, 0, 0, 0]])
    return [li, lj, lk]


def _block_diag(block: np.ndarray, copies: int) -> np.ndarray:
    size = block.shape[0]
    out = np.zeros((size * copies, size * copies), dtype=int)
    for c in range(copies):
        out[c * size:(c + 1) * size, c * size:(c + 1) * size] = block
    return out


@dataclass(frozen=True)
class HTypeGroup:
    """Group of Heisenberg type on R^{2k} x R^q.

    Law: (x, y)(x', y') = (x + x', y + y' + 1/2 <U_l x, x'>), with U_l orthogonal,
    skew and pairwise anticommuting.  With the factor 1/2 the Kaplan gauge satisfies
    |XN| = |x|/N, so the gauge normalisation 16 matches this law.
    """

    k: int
    q: int = 1
    law_factor: float = 0.5

    def __post_init__(self):
        if self.k < 1 or self.q < 1:
            raise ValueError("k and q must be positive")
        if self.q > 3:
            raise ValueError("only centres of dimension 1, 2 or 3 are supported")
        if self.q > 1 and (2 * self.k) % 4 != 0:
            raise ValueError(f"no Heisenberg-type structure with 2k={2 * self.k}, q={self.q}")

    @property
    def horiz_dim(self) -> int:
        return 2 * self.k

    @property
    def center_dim(self) -> int:
        return self.q

    @property
    def ambient_dim(self) -> int:
        return 2 * self.k + self.q

    @property
    def homogeneous_dim(self) -> int:
        return 2 * self.k + 2 * self.q

    @property
    def name(self) -> str:
        return "heisenberg1" if (self.k, self.q) == (1, 1) else f"htype({self.k},{self.q})"

    @cached_property
    def structure_matrices(self) -> np.ndarray:
        if self.q == 1:
            block = np.array([[0, 1], [-1, 0]])
            return _block_diag(block, self.k)[None, :, :]
        units = _quaternion_units()[: self.q]
        return np.stack([_block_diag(u, (2 * self.k) // 4) for u in units])

    @cached_property
    def system(self) -> VectorFieldSystem:
        symbols = coordinate_symbols(self.ambient_dim)
        xs = symbols[: self.horiz_dim]
        half = sp.Rational(1, 2) if self.law_factor == 0.5 else sp.nsimplify(self.law_factor)
        fields = []
        for j in range(self.horiz_dim):
            comps = [sp.Integer(1) if i == j else sp.Integer(0) for i in range(self.horiz_dim)]
            for u in self.structure_matrices:
                comps.append(sp.expand(half * sum(int(u[j, i]) * xs[i] for i in range(self.horiz_dim))))
            fields.append(tuple(comps))
        return VectorFieldSystem(self.ambient_dim, tuple(fields), name=self.name)

    @cached_property
    def center_bracket(self) -> float:
        """Centre component of [X_1, X_2] at the identity; fixes the law convention."""
        value = lie_bracket(self.system, 0, 1, np.zeros(self.ambient_dim))
        return float(value[self.horiz_dim])

    def split(self, a: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        arr = np.asarray(a, dtype=float)
        return arr[..., : self.horiz_dim], arr[..., self.horiz_dim:]

    def identity(self) -> np.ndarray:
        return np.zeros(self.ambient_dim)

    def product(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        xa, ya = self.split(a)
        xb, yb = self.split(b)
        ua = np.einsum("lij,...j->...li", self.structure_matrices, xa)
        cocycle = self.law_factor * np.einsum("...li,...i->...l", ua, xb)
        return np.concatenate([xa + xb, ya + yb + cocycle], axis=-1)

    def inverse(self, a: np.ndarray) -> np.ndarray:
        return -np.asarray(a, dtype=float)

    def dilate(self, lam: float, a: np.ndarray) -> np.ndarray:
        x, y = self.split(a)
        return np.concatenate([lam * x, lam * lam * y], axis=-1)

    def kaplan_gauge(self, a: np.ndarray) -> np.ndarray:
        x, y = self.split(a)
        x2 = np.sum(x * x, axis=-1)
        y2 = np.sum(y * y, axis=-1)
        return (x2 * x2 + 16.0 * y2) ** 0.25

    @cached_property
    def _gauge_gradient(self) -> Callable[[np.ndarray], np.ndarray]:
        # X_j(N^4) as exact polynomials; |XN| = |X N^4| / (4 N^3)
        system = self.system
        s = system.symbols
        xs, ys = s[: self.horiz_dim], s[self.horiz_dim:]
        n4 = sp.expand(sum(v**2 for v in xs) ** 2 + 16 * sum(v**2 for v in ys))
        funcs = [sp.lambdify(s, apply_field(fld, n4, s), modules="numpy") for fld in system.coeffs]

        def evaluate(points: np.ndarray) -> np.ndarray:
            args = [points[:, k] for k in range(len(s))]
            cols = [np.broadcast_to(np.asarray(f(*args), dtype=float), (points.shape[0],)) for f in funcs]
            return np.stack(cols, axis=-1)

        return evaluate

    def gauge_hgrad_sq(self, a: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(a, dtype=float))
        gauge = self.kaplan_gauge(pts)
        if np.any(gauge == 0.0):
            raise Singularity("horizontal gradient of the gauge is undefined at the identity")
        grads = self._gauge_gradient(pts)
        out = np.sum(grads * grads, axis=-1) / (16.0 * gauge**6)
        return out if np.ndim(a) > 1 else out[0]


HTypeOps = namedtuple("HTypeOps", ["product", "inverse", "dilate", "kaplan_gauge", "gauge_hgrad_sq"])


def htype_ops(group: HTypeGroup) -> HTypeOps:
    return HTypeOps(group.product, group.inverse, group.dilate, group.kaplan_gauge, group.gauge_hgrad_sq)
