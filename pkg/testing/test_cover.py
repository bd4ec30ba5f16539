import numpy as np
import pytest

from cchardy.cover import (
    dyadic_content_radii,
    hausdorff_content,
    neighbour_graph,
    thickness_report,
    whitney,
)
from cchardy.errors import PropertyViolation
from cchardy.grid import discretize
from cchardy.nsw import LocalParameters
from cchardy.frames import HTypeGroup
from cchardy.oracles import EuclideanOracle, GaugeOracle, euclidean_volume
from cchardy.shapes import EuclideanBall, cube
from cchardy.systems import euclidean

ORACLE = EuclideanOracle(3)
VOLUME = euclidean_volume(3)


@pytest.fixture(scope="module")
def decomposition(unit_ball):
    return whitney(unit_ball, ORACLE, radius_factor=0.25)


def test_whitney_clauses_hold(decomposition):
    assert decomposition.clauses == {"a": True, "b": True, "c": True, "d": True}
    assert len(decomposition) > 1
    assert decomposition.overlap >= 1


def test_whitney_clauses_hold_on_the_cube(small_cube):
    cover = whitney(small_cube, ORACLE, radius_factor=0.25)
    assert cover.clauses == {"a": True, "b": True, "c": True, "d": True}


@pytest.mark.slow
def test_whitney_clauses_hold_on_the_heisenberg_cube():
    group = HTypeGroup(1, 1)
    domain = discretize(cube(1.0), 0.125, group.system)
    cover = whitney(domain, GaugeOracle(group), radius_factor=0.25)
    assert cover.clauses == {"a": True, "b": True, "c": True, "d": True}
    assert len(cover) > 1


def test_whitney_radii_follow_the_boundary_distance(unit_ball, decomposition):
    lam = decomposition.radius_factor
    for center, radius in decomposition.balls():
        delta = unit_ball.delta[unit_ball.index_of(center)]
        assert radius == pytest.approx(lam * (delta - radius))


def test_quarter_balls_are_disjoint(decomposition):
    c, r = decomposition.centers, decomposition.radii
    dist = np.linalg.norm(c[:, None, :] - c[None, :, :], axis=-1)
    upper = np.triu_indices(len(r), k=1)
    assert np.all(dist[upper] >= (0.25 * (r[:, None] + r[None, :]))[upper] - 1e-12)


def test_whitney_overlap_bound_is_enforced(unit_ball, decomposition):
    with pytest.raises(PropertyViolation) as info:
        whitney(unit_ball, ORACLE, radius_factor=0.25, overlap_bound=decomposition.overlap - 1)
    assert info.value.clause == "d"


def test_whitney_needs_boundary_distance():
    domain = discretize(EuclideanBall((0.0, 0.0, 0.0), 1.0), 0.25, euclidean(3), compute_delta=False)
    with pytest.raises(ValueError):
        whitney(domain, ORACLE)


def test_neighbour_graph(decomposition):
    graph = neighbour_graph(decomposition.centers, decomposition.radii, ORACLE)
    assert graph.number_of_nodes() == len(decomposition)
    stats = decomposition.graph_stats
    assert stats["components"] >= 1.0
    assert stats["max_radius_ratio"] >= 1.0


def test_dyadic_content_radii():
    assert dyadic_content_radii(1.0, 4, 0.2) == [1.0, 0.5, 0.25]
    assert dyadic_content_radii(0.1, 3, 1.0) == [0.1]


@pytest.mark.parametrize("q", [1.0, 2.0, 3.0])
def test_content_of_a_point(q):
    r, levels = 0.5, 4
    estimate = hausdorff_content([[0.0, 0.0, 0.0]], q, r, VOLUME, ORACLE, levels=levels)
    assert estimate.exact
    # rho^(3-q) is smallest at the smallest radius unless q = 3
    rho = r * 2.0 ** -(levels - 1) if q < 3 else r
    assert estimate.value == pytest.approx(VOLUME(None, rho) * rho**-q)


def test_greedy_content_never_beats_exact():
    pts = np.random.default_rng(4).random((10, 3)) * 0.4
    exact = hausdorff_content(pts, 3.0, 0.4, VOLUME, ORACLE, levels=4, exact_limit=10)
    greedy = hausdorff_content(pts, 3.0, 0.4, VOLUME, ORACLE, levels=4, exact_limit=0)
    assert exact.exact and not greedy.exact
    assert greedy.value >= exact.value * (1.0 - 1e-12)
    assert greedy.cost(3.0, pts, VOLUME) == pytest.approx(greedy.value)


def test_content_input_validation():
    with pytest.raises(ValueError):
        hausdorff_content(np.zeros((0, 3)), 2.0, 0.5, VOLUME, ORACLE)
    with pytest.raises(ValueError):
        hausdorff_content([[0.0, 0.0, 0.0]], 2.0, 0.0, VOLUME, ORACLE)


def test_thickness_scores_positive_for_the_ball(unit_ball):
    interior = [[0.0, 0.0, 0.75], [0.75, 0.0, 0.0]]
    boundary = [[0.0, 0.0, 1.0]]
    report = thickness_report(unit_ball, VOLUME, ORACLE, 2.0, interior, boundary, radii=(0.25,), levels=3)
    assert report.interior_score > 0.0
    assert report.boundary_score > 0.0
    assert len(report.interior_rows) == 2
    assert len(report.boundary_rows) == 1


def test_thickness_rejects_points_deeper_than_r0():
    domain = discretize(EuclideanBall((0.0, 0.0, 0.0), 1.0), 0.25, euclidean(3), LocalParameters(1.0, 0.5))
    with pytest.raises(ValueError):
        thickness_report(domain, VOLUME, ORACLE, 2.0, [[0.0, 0.0, 0.0]], [], radii=(0.25,))
