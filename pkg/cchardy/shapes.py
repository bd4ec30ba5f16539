"""Bounded shapes that can be discretised: boxes, balls, segments and differences."""

import re
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .frames import HTypeGroup
from .oracles import DistanceOracle, GaugeOracle

Bounds = Tuple[np.ndarray, np.ndarray]


class Shape:
    """Membership test for an open set plus an axis box enclosing it."""

    dim: int = 3

    def contains(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def bounds(self) -> Bounds:
        raise NotImplementedError

    def __sub__(self, other: "Shape") -> "Difference":
        return Difference(self, other)


@dataclass(frozen=True)
class Box(Shape):
    lo: Tuple[float, ...]
    hi: Tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains(self, points):
        pts = np.atleast_2d(points)
        return np.all((pts > np.asarray(self.lo)) & (pts < np.asarray(self.hi)), axis=-1)

    def bounds(self):
        return np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)


def cube(half: float = 1.0, dim: int = 3) -> Box:
    return Box(tuple([-half] * dim), tuple([half] * dim))


@dataclass(frozen=True)
class EuclideanBall(Shape):
    center: Tuple[float, ...]
    radius: float

    @property
    def dim(self) -> int:
        return len(self.center)

    def contains(self, points):
        pts = np.atleast_2d(points)
        return np.linalg.norm(pts - np.asarray(self.center), axis=-1) < self.radius

    def bounds(self):
        c = np.asarray(self.center, dtype=float)
        return c - self.radius, c + self.radius


@dataclass(frozen=True)
class MetricBall(Shape):
    """Ball {y : distance(center, y) < radius} for any distance oracle."""

    oracle: DistanceOracle
    center: Tuple[float, ...]
    radius: float

    @property
    def dim(self) -> int:
        return len(self.center)

    def contains(self, points):
        return self.oracle.distance(np.asarray(self.center, dtype=float), np.atleast_2d(points)) < self.radius

    def bounds(self):
        c = np.asarray(self.center, dtype=float)
        half = self.oracle.bounding_halfwidth(c, self.radius)
        return c - half, c + half


def gauge_ball(group: HTypeGroup, radius: float, center: Optional[Sequence[float]] = None) -> MetricBall:
    c = tuple(float(v) for v in (center if center is not None else group.identity()))
    return MetricBall(GaugeOracle(group), c, float(radius))


@dataclass(frozen=True)
class Segment(Shape):
    """Thin tube of the given thickness around the segment [a, b]."""

    a: Tuple[float, ...]
    b: Tuple[float, ...]
    thickness: float = 1e-9

    @property
    def dim(self) -> int:
        return len(self.a)

    def contains(self, points):
        pts = np.atleast_2d(points)
        a, b = np.asarray(self.a, dtype=float), np.asarray(self.b, dtype=float)
        direction = b - a
        t = np.clip((pts - a) @ direction / float(direction @ direction), 0.0, 1.0)
        nearest = a + t[:, None] * direction
        return np.linalg.norm(pts - nearest, axis=-1) < self.thickness

    def bounds(self):
        a, b = np.asarray(self.a, dtype=float), np.asarray(self.b, dtype=float)
        return np.minimum(a, b) - self.thickness, np.maximum(a, b) + self.thickness


@dataclass(frozen=True)
class Difference(Shape):
    outer: Shape
    inner: Shape

    @property
    def dim(self) -> int:
        return self.outer.dim

    def contains(self, points):
        return self.outer.contains(points) & ~self.inner.contains(points)

    def bounds(self):
        return self.outer.bounds()


_NUMBER = r"[-+]?\d*\.?\d+(?:[eE][-+]?\d+)?"
_PRIMITIVE = re.compile(r"^(box|cube|ball|gauge_ball|segment)\(([^)]*)\)$")


class ShapeSpecError(ValueError):
    pass


def _numbers(text: str) -> list:
    parts = [p.strip() for p in re.split(r"[,;]", text) if p.strip()]
    for part in parts:
        if not re.fullmatch(_NUMBER, part):
            raise ShapeSpecError(f"not a number: '{part}'")
    return [float(p) for p in parts]


def _parse_primitive(text: str, dim: int, group: Optional[HTypeGroup]) -> Shape:
    match = _PRIMITIVE.match(text.strip())
    if not match:
        raise ShapeSpecError(f"unrecognised shape '{text.strip()}'")
    kind, args = match.group(1), _numbers(match.group(2))
    if kind == "cube":
        half = args[0] if args else 1.0
        return cube(half, dim)
    if kind == "box":
        if len(args) == 2:
            return Box(tuple([args[0]] * dim), tuple([args[1]] * dim))
        if len(args) == 2 * dim:
            return Box(tuple(args[0::2]), tuple(args[1::2]))
        raise ShapeSpecError("box takes (lo, hi) or one (lo, hi) pair per axis")
    if kind == "ball":
        radius = args[0] if args else 1.0
        center = tuple(args[1:]) if len(args) > 1 else tuple([0.0] * dim)
        if len(center) != dim:
            raise ShapeSpecError(f"ball centre needs {dim} coordinates")
        return EuclideanBall(center, radius)
    if kind == "gauge_ball":
        if group is None:
            raise ShapeSpecError("gauge_ball needs a Heisenberg-type system")
        radius = args[0] if args else 1.0
        center = args[1:] if len(args) > 1 else None
        return gauge_ball(group, radius, center)
    if len(args) != 2 * dim:
        raise ShapeSpecError(f"segment takes two points of {dim} coordinates")
    return Segment(tuple(args[:dim]), tuple(args[dim:]))


def parse_shape(text: str, dim: int = 3, group: Optional[HTypeGroup] = None) -> Shape:
    """Parse e.g. ``ball(1)``, ``cube(1)``, ``gauge_ball(1)`` or ``ball(1) minus ball(0.5)``."""
    pieces = [p for p in re.split(r"\s+minus\s+", text.strip()) if p]
    if not pieces:
        raise ShapeSpecError("empty shape description")
    shape = _parse_primitive(pieces[0], dim, group)
    for piece in pieces[1:]:
        shape = Difference(shape, _parse_primitive(piece, dim, group))
    return shape
