import numpy as np
import pytest

from cchardy.frames import HTypeGroup
from cchardy.grid import capped_power, discretize
from cchardy.oracles import EuclideanOracle
from cchardy.shapes import cube
from cchardy.weights import (
    WeightRangeError,
    WeightSpec,
    check_admissible,
    evaluate_weight,
    theoretical_bound,
)

ORIGIN = (0.0, 0.0, 0.0)


def test_labels():
    assert WeightSpec.boundary(2.0).label == "delta^-2"
    assert WeightSpec.point(2.0, ORIGIN).label == "d^-2"
    assert WeightSpec.mixed(2.0, 1.0, ORIGIN).label == "delta^-1*d^-1"


@pytest.mark.parametrize("kwargs", [
    dict(kind="spherical", p=2.0),
    dict(kind="boundary_power", p=1.0),
    dict(kind="point_power", p=2.0),
    dict(kind="custom", p=2.0),
])
def test_invalid_specs(kwargs):
    with pytest.raises(WeightRangeError):
        WeightSpec(**kwargs)


def test_gamma_outside_admissible_range():
    with pytest.raises(WeightRangeError, match="outside admissible range"):
        check_admissible(WeightSpec.boundary(2.0, gamma=3.0))
    with pytest.raises(WeightRangeError):
        check_admissible(WeightSpec.mixed(2.0, -0.5, ORIGIN))
    check_admissible(WeightSpec.boundary(2.0, gamma=2.0))


def test_point_weights_need_p_below_dimension():
    with pytest.raises(WeightRangeError):
        check_admissible(WeightSpec.point(3.0, ORIGIN), q_at_x0=3)
    with pytest.raises(WeightRangeError):
        check_admissible(WeightSpec("gauge_sharp", 4.0, x0=ORIGIN), q_at_x0=4)
    check_admissible(WeightSpec.point(2.0, ORIGIN), q_at_x0=3)


def test_theoretical_bounds():
    assert theoretical_bound(WeightSpec.point(2.0, ORIGIN), dim=3, euclidean=True) == pytest.approx(4.0)
    assert theoretical_bound(WeightSpec.point(2.0, ORIGIN), dim=3, euclidean=False) is None
    assert theoretical_bound(WeightSpec("gauge_sharp", 2.0, x0=ORIGIN)) == pytest.approx(4.0)
    assert theoretical_bound(WeightSpec("gauge_corollary", 2.0, x0=ORIGIN), dim=4) == pytest.approx(1.0)
    assert theoretical_bound(WeightSpec.boundary(2.0)) is None


def test_point_weight_on_the_lattice(unit_ball):
    values = evaluate_weight(WeightSpec.point(2.0, ORIGIN), unit_ball, EuclideanOracle(3))
    assert np.all(np.isfinite(values))
    assert values[unit_ball.index_of(ORIGIN)] == 0.0
    assert np.all(values[~unit_ball.inside] == 0.0)
    idx = unit_ball.index_of((0.5, 0.0, 0.0))
    assert values[idx] == pytest.approx(4.0)


def test_boundary_weight_is_capped(unit_ball):
    values = evaluate_weight(WeightSpec.boundary(2.0, gamma=0.5), unit_ball)
    expected = capped_power(unit_ball.delta, 1.5, unit_ball.h)
    assert np.allclose(values[unit_ball.inside], expected[unit_ball.inside])
    assert values.max() <= (0.5 * unit_ball.h) ** -1.5


def test_mixed_weight_is_a_product(unit_ball):
    oracle = EuclideanOracle(3)
    mixed = evaluate_weight(WeightSpec.mixed(2.0, 1.0, ORIGIN), unit_ball, oracle)
    boundary = evaluate_weight(WeightSpec.boundary(2.0, 1.0), unit_ball)
    point = evaluate_weight(WeightSpec.point(2.0, ORIGIN, 1.0), unit_ball, oracle)
    assert np.allclose(mixed, boundary * point)


def test_custom_weight_is_zero_outside(small_cube):
    values = evaluate_weight(WeightSpec("custom", 2.0, values=np.ones(small_cube.dims)), small_cube)
    assert np.array_equal(values, small_cube.inside.astype(float))


def test_missing_ingredients(small_cube):
    with pytest.raises(ValueError):
        evaluate_weight(WeightSpec.point(2.0, ORIGIN), small_cube)
    with pytest.raises(ValueError):
        evaluate_weight(WeightSpec("gauge_sharp", 2.0, x0=ORIGIN), small_cube, EuclideanOracle(3))


def test_gauge_weights():
    group = HTypeGroup(1, 1)
    domain = discretize(cube(1.0), 0.25, group.system, compute_delta=False)
    p = 2.0
    sharp = evaluate_weight(WeightSpec("gauge_sharp", p, x0=ORIGIN), domain, group=group)
    plain = evaluate_weight(WeightSpec("gauge_corollary", p, x0=ORIGIN), domain, group=group)
    # ((Q - p)/(p - 1))^p with Q = 4
    assert np.allclose(sharp, 4.0 * plain)
    idx = domain.index_of((0.5, 0.25, 0.25))
    point = domain.coords[idx]
    gauge = float(group.kaplan_gauge(point))
    x_sq = float(point[0] ** 2 + point[1] ** 2)
    assert plain[idx] == pytest.approx(x_sq / gauge**2 / gauge**2)
    assert plain[domain.index_of(ORIGIN)] == 0.0
