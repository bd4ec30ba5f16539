"""Whitney ball decompositions, Hausdorff contents and boundary thickness scores."""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy.spatial import cKDTree

from .errors import PropertyViolation
from .grid import GridDomain, farthest_point_sample
from .oracles import DistanceOracle, VolumeOracle

logger = logging.getLogger(__name__)

DEFAULT_RADIUS_FACTOR = 1e-3
GRAPH_LIMIT = 5000
CONTENT_SAMPLE_LIMIT = 400


@dataclass
class WhitneyDecomposition:
    centers: np.ndarray
    radii: np.ndarray
    radius_factor: float
    overlap: int
    clauses: Dict[str, bool] = field(default_factory=dict)
    graph_stats: Optional[Dict[str, float]] = None

    def __len__(self) -> int:
        return len(self.radii)

    def balls(self) -> List[Tuple[Tuple[float, ...], float]]:
        return [(tuple(float(v) for v in c), float(r)) for c, r in zip(self.centers, self.radii)]


def _window(domain: GridDomain, oracle: DistanceOracle, center: np.ndarray, radius: float):
    half = oracle.bounding_halfwidth(center, radius)
    index = np.rint((center - domain.origin) / domain.h).astype(int)
    reach = np.ceil(half / domain.h).astype(int) + 1
    lo = np.maximum(index - reach, 0)
    hi = np.minimum(index + reach + 1, domain.dims)
    window = tuple(slice(a, b) for a, b in zip(lo, hi))
    pts = domain.coords[window].reshape(-1, domain.ndim)
    return window, oracle.distance(center, pts).reshape(domain.coords[window].shape[:-1])


def _candidate_pairs(centers: np.ndarray, radii: np.ndarray, oracle: DistanceOracle, reach: float) -> List[Tuple[int, int]]:
    if len(centers) < 2:
        return []
    widths = [float(np.linalg.norm(oracle.bounding_halfwidth(c, reach))) for c in centers]
    tree = cKDTree(centers)
    return sorted(tree.query_pairs(max(widths)))


def whitney(
    domain: GridDomain,
    dist_oracle: DistanceOracle,
    radius_factor: Optional[float] = None,
    overlap_bound: Optional[int] = None,
) -> WhitneyDecomposition:
    """Greedy Whitney cover: r_j = lambda * dist(B_j, boundary) for centres taken by decreasing delta."""
    if domain.delta is None:
        raise ValueError("whitney decomposition needs the boundary distance field")
    diam = domain.diameter
    lam = radius_factor if radius_factor is not None else DEFAULT_RADIUS_FACTOR * min(domain.params.r0 / diam, 1.0)
    delta = domain.delta
    cells = np.argwhere(domain.inside)
    order = np.argsort(-delta[domain.inside], kind="stable")

    covered = np.zeros(domain.dims, dtype=bool)
    centers: List[np.ndarray] = []
    radii: List[float] = []
    for idx in map(tuple, cells[order]):
        if covered[idx]:
            continue
        center = domain.coords[idx]
        # r = lam (delta - r)
        radius = lam * float(delta[idx]) / (1.0 + lam)
        window, dist = _window(domain, dist_oracle, center, radius)
        covered[window] |= dist < radius
        covered[idx] = True
        centers.append(center)
        radii.append(radius)

    c = np.asarray(centers)
    r = np.asarray(radii)
    clauses: Dict[str, bool] = {}

    # (a) cover
    clauses["a"] = bool(np.all(covered[domain.inside]))
    if not clauses["a"]:
        raise PropertyViolation("a", "some inside cells are not covered")

    # (b) quarter balls pairwise disjoint
    for i, j in _candidate_pairs(c, r, dist_oracle, 0.5 * float(r.max())):
        d = float(dist_oracle.distance(c[i], c[j][None, :])[0])
        if d < 0.25 * (r[i] + r[j]) - 1e-12:
            raise PropertyViolation("b", f"quarter balls {i} and {j} intersect (d={d:.4g})")
    clauses["b"] = True

    # (c) radius proportional to the distance of the ball from the boundary
    centre_delta = np.array([delta[domain.index_of(x)] for x in c])
    defect = np.abs(r - lam * (centre_delta - r))
    if np.any(defect > lam * domain.h + 1e-12):
        raise PropertyViolation("c", f"radius defect {defect.max():.3e} exceeds lambda*h")
    clauses["c"] = True

    # (d) bounded overlap of the dilated balls 4B
    counts = np.zeros(domain.dims, dtype=int)
    for x, radius in zip(c, r):
        window, dist = _window(domain, dist_oracle, x, 4.0 * radius)
        counts[window] += dist < 4.0 * radius
    overlap = int(counts[domain.inside].max())
    clauses["d"] = overlap_bound is None or overlap <= overlap_bound
    if not clauses["d"]:
        raise PropertyViolation("d", f"overlap {overlap} exceeds {overlap_bound}")

    stats = neighbour_graph_stats(c, r, dist_oracle) if len(r) <= GRAPH_LIMIT else None
    logger.info("whitney: %d balls, lambda=%.3g, overlap M=%d", len(r), lam, overlap)
    return WhitneyDecomposition(c, r, lam, overlap, clauses, stats)


def neighbour_graph(centers: np.ndarray, radii: np.ndarray, oracle: DistanceOracle) -> nx.Graph:
    """Balls are adjacent when their doubles intersect."""
    graph = nx.Graph()
    graph.add_nodes_from(range(len(radii)))
    for i, j in _candidate_pairs(centers, radii, oracle, 4.0 * float(np.max(radii))):
        d = float(oracle.distance(centers[i], centers[j][None, :])[0])
        if d < 2.0 * (radii[i] + radii[j]):
            graph.add_edge(i, j, ratio=max(radii[i], radii[j]) / min(radii[i], radii[j]))
    return graph


def neighbour_graph_stats(centers: np.ndarray, radii: np.ndarray, oracle: DistanceOracle) -> Dict[str, float]:
    graph = neighbour_graph(centers, radii, oracle)
    degrees = [d for _, d in graph.degree()]
    ratios = [data["ratio"] for _, _, data in graph.edges(data=True)]
    return {
        "max_degree": float(max(degrees) if degrees else 0),
        "max_radius_ratio": float(max(ratios) if ratios else 1.0),
        "components": float(nx.number_connected_components(graph)),
    }


# ---------------------------------------------------------------------------
# Hausdorff content
# ---------------------------------------------------------------------------

@dataclass
class ContentEstimate:
    value: float
    cover: List[Tuple[int, float]]
    exact: bool = False

    def cost(self, q: float, points: np.ndarray, volume: VolumeOracle) -> float:
        return float(sum(rho ** (-q) * float(volume(points[i], rho)) for i, rho in self.cover))


def dyadic_content_radii(r: float, levels: int, min_radius: float = 0.0) -> List[float]:
    radii = [r * 2.0**-k for k in range(levels)]
    kept = [rho for rho in radii if rho >= min_radius]
    return kept or [r]


def _greedy_cover(dist: np.ndarray, rho: float, costs: np.ndarray, targets: np.ndarray) -> List[int]:
    """Greedy set cover of `targets` by balls centred at any point, cheapest per newly covered point."""
    reach = dist < rho
    uncovered = targets.copy()
    chosen: List[int] = []
    while uncovered.any():
        gain = (reach & uncovered[None, :]).sum(axis=1)
        score = np.where(gain > 0, gain / costs, -1.0)
        best = int(np.argmax(score))
        chosen.append(best)
        uncovered &= ~reach[best]
    return chosen


def _exact_content(dist: np.ndarray, radii: Sequence[float], ball_cost) -> Tuple[float, List[Tuple[int, float]]]:
    size = dist.shape[0]
    full = (1 << size) - 1
    candidates = []
    for rho in radii:
        for i in range(size):
            mask = 0
            for j in np.flatnonzero(dist[i] < rho):
                mask |= 1 << int(j)
            candidates.append((mask, ball_cost(i, rho), i, rho))
    best = np.full(full + 1, np.inf)
    choice: List[Optional[Tuple[int, int]]] = [None] * (full + 1)
    best[0] = 0.0
    for state in range(full + 1):
        if not np.isfinite(best[state]) or state == full:
            continue
        # extend by a ball covering the lowest uncovered point
        low = (~state) & (state + 1)
        for k, (mask, cost, _, _) in enumerate(candidates):
            if mask & low:
                nxt = state | mask
                value = best[state] + cost
                if value < best[nxt]:
                    best[nxt] = value
                    choice[nxt] = (state, k)
    cover: List[Tuple[int, float]] = []
    state = full
    while state:
        prev, k = choice[state]
        cover.append((candidates[k][2], candidates[k][3]))
        state = prev
    return float(best[full]), cover[::-1]


def hausdorff_content(
    points: np.ndarray,
    q: float,
    r: float,
    volume: VolumeOracle,
    oracle: DistanceOracle,
    levels: int = 8,
    min_radius: float = 0.0,
    exact_limit: int = 12,
) -> ContentEstimate:
    """Upper bound of inf sum rho_j^-q |B(x_j, rho_j)| over covers with centres in E and rho_j <= r."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0:
        raise ValueError("content needs a nonempty point set")
    if r <= 0:
        raise ValueError("r must be positive")
    radii = dyadic_content_radii(r, levels, min_radius)
    dist = oracle.distance_matrix(pts, pts)
    size = pts.shape[0]
    vols = {rho: np.array([float(volume(x, rho)) for x in pts]) for rho in radii + [rho / 2 for rho in radii]}

    def ball_cost(i: int, rho: float) -> float:
        return rho ** (-q) * float(vols[rho][i])

    if size <= exact_limit:
        value, cover = _exact_content(dist, radii, ball_cost)
        return ContentEstimate(value, cover, exact=True)

    everyone = np.ones(size, dtype=bool)
    best: Optional[ContentEstimate] = None
    for rho in radii:
        centres = _greedy_cover(dist, rho, vols[rho], everyone)
        # each point is owned by the first chosen ball covering it
        owner = np.full(size, -1)
        for c in centres:
            owner[(dist[c] < rho) & (owner < 0)] = c
        cover: List[Tuple[int, float]] = []
        for c in centres:
            owned = owner == c
            single = [(c, rho)]
            refined: List[Tuple[int, float]] = []
            if rho / 2 >= min_radius and owned.sum() > 0:
                refined = [(k, rho / 2) for k in _greedy_cover(dist, rho / 2, vols[rho / 2], owned)]
            if refined and sum(ball_cost(i, s) for i, s in refined) < ball_cost(c, rho):
                cover.extend(refined)
            else:
                cover.extend(single)
        value = float(sum(ball_cost(i, s) for i, s in cover))
        if best is None or value < best.value:
            best = ContentEstimate(value, cover, exact=False)
    return best


# ---------------------------------------------------------------------------
# thickness scores
# ---------------------------------------------------------------------------

@dataclass
class ThicknessReport:
    interior_score: float
    boundary_score: float
    interior_rows: List[Dict[str, float]]
    boundary_rows: List[Dict[str, float]]


def _subsample(points: np.ndarray, seed: int) -> np.ndarray:
    if len(points) <= CONTENT_SAMPLE_LIMIT:
        return points
    return points[farthest_point_sample(points, CONTENT_SAMPLE_LIMIT, seed)]


def thickness_report(
    domain: GridDomain,
    volume: VolumeOracle,
    oracle: DistanceOracle,
    q: float,
    interior: Sequence[Sequence[float]],
    boundary: Sequence[Sequence[float]],
    radii: Sequence[float] = (0.25,),
    levels: int = 6,
    seed: int = 0,
) -> ThicknessReport:
    """Scores for the interior-content and exterior-content boundary conditions.

    interior: min over x of H^{-q}_{delta(x)}(closed B(x, 2 delta) within the boundary) delta^q / |B(x, delta)|
    boundary: min over (w, r) of H^{-q}_r(B(w, r) outside the domain) r^q / |B(w, r)|
    """
    if domain.delta is None:
        raise ValueError("thickness scores need the boundary distance field")
    band = domain.points(domain.band)
    outside = domain.points(~domain.inside)
    floor = 2.0 * domain.h

    interior_rows = []
    for x in np.atleast_2d(np.asarray(interior, dtype=float)):
        d = float(domain.delta[domain.index_of(x)])
        if d >= domain.params.r0:
            raise ValueError(f"interior sample {x.tolist()} has delta={d:.3g} >= r0")
        near = band[oracle.distance(x, band) <= 2.0 * d]
        if len(near) == 0:
            score = 0.0
        else:
            content = hausdorff_content(_subsample(near, seed), q, d, volume, oracle, levels, floor)
            score = content.value * d**q / float(volume(x, d))
        interior_rows.append({"x": tuple(float(v) for v in x), "delta": d, "score": score})

    boundary_rows = []
    for w in np.atleast_2d(np.asarray(boundary, dtype=float)):
        for r in radii:
            near = outside[oracle.distance(w, outside) < r]
            if len(near) == 0:
                score = 0.0
            else:
                content = hausdorff_content(_subsample(near, seed), q, r, volume, oracle, levels, floor)
                score = content.value * r**q / float(volume(w, r))
            boundary_rows.append({"w": tuple(float(v) for v in w), "r": float(r), "score": score})

    s3 = min((row["score"] for row in interior_rows), default=0.0)
    s4 = min((row["score"] for row in boundary_rows), default=0.0)
    logger.info("thickness scores: interior %.4g, boundary %.4g", s3, s4)
    return ThicknessReport(s3, s4, interior_rows, boundary_rows)
