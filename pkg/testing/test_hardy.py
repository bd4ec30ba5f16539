import dataclasses
import math

import numpy as np
import pytest

from cchardy.cover import whitney
from cchardy.errors import AnomalousExcess, ZeroGradient
from cchardy.frames import HTypeGroup
from cchardy.grid import GridFunction, discretize
from cchardy.hardy import (
    DENSITY_TOLERANCE,
    boundary_test_functions,
    corollary_exponent,
    corollary_weights,
    fefferman_phong,
    hardy_1d,
    hardy_1d_ratio,
    hardy_ratio,
    mazya_check,
    maximize_ratio,
    pointwise_constant,
    pushforward_density,
    radial_family_search,
    radial_power_ratio,
    sharp_experiment,
)
from cchardy.hardy import _check_bound
from cchardy.metric import omega_sigma
from cchardy.nsw import LocalParameters
from cchardy.oracles import EuclideanOracle
from cchardy.shapes import EuclideanBall
from cchardy.systems import euclidean
from cchardy.weights import WeightRangeError, WeightSpec, evaluate_weight

ORIGIN = (0.0, 0.0, 0.0)
ORACLE = EuclideanOracle(3)


@pytest.fixture(scope="module")
def decomposition(unit_ball):
    return whitney(unit_ball, ORACLE, radius_factor=0.3)


@pytest.fixture(scope="module")
def bump(unit_ball):
    values = np.where(unit_ball.inside, unit_ball.delta * (1.5 + unit_ball.coords[..., 0]), 0.0)
    return GridFunction(unit_ball, values, compact=True)


def test_ratio_is_scale_invariant(unit_ball, bump):
    weight = evaluate_weight(WeightSpec.point(2.0, ORIGIN), unit_ball, ORACLE)
    base = hardy_ratio(bump, weight, 2.0)
    assert base > 0.0
    assert hardy_ratio(bump.scaled(7.5), weight, 2.0) == pytest.approx(base)
    assert hardy_ratio(bump, 3.0 * weight, 2.0) == pytest.approx(3.0 * base)


def test_zero_weight_gives_zero_ratio(unit_ball, bump):
    assert hardy_ratio(bump, np.zeros(unit_ball.dims), 2.0) == 0.0


def test_constant_zero_function_has_no_gradient(unit_ball):
    zero = GridFunction(unit_ball, np.zeros(unit_ball.dims), compact=True)
    with pytest.raises(ZeroGradient):
        hardy_ratio(zero, 1.0, 2.0)


def test_check_bound():
    _check_bound(4.1, 4.0)
    _check_bound(100.0, None)
    with pytest.raises(AnomalousExcess):
        _check_bound(4.3, 4.0)


def test_one_dimensional_ratio_of_the_identity():
    assert hardy_1d_ratio(2.0, 1.0) == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_one_dimensional_hardy_approaches_sharp_constant(p):
    result = hardy_1d(p)
    assert result.bound == pytest.approx((p / (p - 1.0)) ** p)
    assert 0.95 * result.bound <= result.best_ratio <= 1.01 * result.bound
    assert result.alpha > (p - 1.0) / p


def test_one_dimensional_grid_size():
    with pytest.raises(ValueError):
        hardy_1d(2.0, n_grid=100)
    with pytest.raises(ValueError):
        hardy_1d(1.0)


def test_radial_reduction_below_sharp_constant():
    best, args = radial_family_search(3.0, 2.0)
    assert 3.2 <= best <= 4.05
    assert radial_power_ratio(3.0, 2.0, args["beta"], args["core"]) == pytest.approx(best)


def test_radial_reduction_needs_p_below_dimension():
    with pytest.raises(ValueError):
        radial_family_search(3.0, 3.0)
    with pytest.raises(ValueError):
        radial_power_ratio(3.0, 2.0, 0.5, 2.0, R=1.0)


def test_euclidean_point_weight_radial(unit_ball, euclidean_geometry):
    report = maximize_ratio(unit_ball, WeightSpec.point(2.0, ORIGIN), euclidean_geometry, strategy="radial")
    assert report.method == "radial"
    assert report.witness is None
    assert report.bound == pytest.approx(4.0)
    assert 3.2 <= report.best_ratio <= 4.05
    assert report.radial_ratio == report.best_ratio
    assert report.within_bound
    assert report.to_row()["margin"] == pytest.approx(4.0 - report.best_ratio)


@pytest.mark.slow
def test_reported_ratio_is_attained_by_the_witness(unit_ball, euclidean_geometry):
    spec = WeightSpec.point(2.0, ORIGIN)
    report = maximize_ratio(unit_ball, spec, euclidean_geometry, ascent_steps=10)
    weight = evaluate_weight(spec, unit_ball, ORACLE)
    assert report.witness is not None
    attained = hardy_ratio(report.witness, weight, 2.0, euclidean_geometry.system)
    assert attained == pytest.approx(report.best_ratio, rel=1e-12)
    assert 3.2 <= report.radial_ratio <= 4.05
    assert report.best_ratio < report.radial_ratio
    assert report.best_estimate == report.radial_ratio
    assert report.to_row()["radial_ratio"] == report.radial_ratio


def test_lattice_ratio_grows_under_refinement(unit_ball, euclidean_geometry):
    # the continuous ratio approaches 4 only logarithmically in the core radius
    coarse = discretize(EuclideanBall(ORIGIN, 1.0), 0.25, euclidean(3), LocalParameters(1.0, 1.0))
    spec = WeightSpec.point(2.0, ORIGIN)
    ratios = [maximize_ratio(d, spec, euclidean_geometry, strategy="family").best_ratio for d in (coarse, unit_ball)]
    assert 0.0 < ratios[0] < ratios[1] <= 4.2


def test_euclidean_point_weight_families(unit_ball, euclidean_geometry):
    report = maximize_ratio(unit_ball, WeightSpec.point(2.0, ORIGIN), euclidean_geometry, strategy="family")
    assert report.method == "family"
    assert 0.0 < report.best_ratio <= 4.2
    assert report.witness is not None and report.witness.compact


def test_boundary_weight_families(unit_ball, euclidean_geometry):
    report = maximize_ratio(unit_ball, WeightSpec.boundary(2.0), euclidean_geometry, strategy="family")
    assert report.bound is None
    assert report.best_ratio > 0.0
    assert report.details["member"].startswith("delta^")


def test_inadmissible_weight_is_rejected(unit_ball, euclidean_geometry):
    with pytest.raises(WeightRangeError):
        maximize_ratio(unit_ball, WeightSpec.point(3.5, ORIGIN), euclidean_geometry)
    with pytest.raises(ValueError):
        maximize_ratio(unit_ball, WeightSpec.point(2.0, ORIGIN), euclidean_geometry, strategy="newton")


def test_sharp_constants_on_heisenberg():
    group = HTypeGroup(1, 1)
    constants = omega_sigma(group, 2.0, n_samples=200_000, seed=5)
    report = sharp_experiment(group, 2.0, constants=constants)
    assert report.theorem.bound == pytest.approx(4.0)
    assert report.corollary.bound == pytest.approx(1.0)
    assert 0.8 <= report.corollary.radial_ratio <= 1.01
    assert 3.2 <= report.theorem.radial_ratio <= 4.05
    assert report.theorem.witness is None and report.theorem.method == "radial"
    assert report.consistency < 1e-9
    assert report.density_defect <= DENSITY_TOLERANCE
    assert report.passed


def test_wrong_gauge_constants_fail_the_density_check():
    group = HTypeGroup(1, 1)
    constants = omega_sigma(group, 2.0, n_samples=200_000, seed=5)
    bogus = dataclasses.replace(constants, omega=2.0 * constants.omega, sigma=2.0 * constants.sigma)
    report = sharp_experiment(group, 2.0, constants=bogus)
    assert report.density_defect > 0.4
    assert not report.passed


def test_pushforward_density_grows_like_a_power():
    group = HTypeGroup(1, 1)
    edges, density = pushforward_density(group, 2.0, n_samples=100_000, seed=3)
    assert len(edges) == len(density) + 1
    assert np.all(np.diff(density) > 0.0)


@pytest.mark.slow
def test_sharp_constants_on_the_lattice_gauge_ball():
    group = HTypeGroup(1, 1)
    constants = omega_sigma(group, 2.0, n_samples=200_000, seed=5)
    report = sharp_experiment(group, 2.0, h=0.125, constants=constants, ascent_steps=10)
    for part in (report.theorem, report.corollary):
        assert part.witness is not None
        assert 0.0 < part.best_ratio <= part.bound * 1.05
        assert part.best_ratio <= part.radial_ratio
    assert 3.2 <= report.theorem.radial_ratio <= 4.05
    assert report.passed


def test_sharp_experiment_needs_p_below_q():
    with pytest.raises(ValueError):
        sharp_experiment(HTypeGroup(1, 1), 4.0)


def test_corollary_exponent():
    assert corollary_exponent(4.0, 1.0) == pytest.approx(2.5)
    assert corollary_exponent(3.0, 0.0) == 2.0
    assert 1.0 < corollary_exponent(3.0, 2.0) < 1.5


def test_pointwise_constant_is_finite(unit_ball):
    functions = boundary_test_functions(unit_ball, count=2, seed=1)
    assert all(f.compact for f in functions)
    samples = np.array([[0.0, 0.0, 0.75], [0.75, 0.0, 0.0]])
    report = pointwise_constant(unit_ball, None, ORACLE, 1.5, functions, samples)
    assert report.finite
    assert report.constant > 0.0
    assert len(report.rows) == 2


def test_fefferman_phong_grows_with_the_sample(unit_ball, decomposition):
    weight = evaluate_weight(WeightSpec.mixed(2.0, 1.0, ORIGIN), unit_ball, ORACLE)
    volume = lambda x, t: 4.0 * math.pi / 3.0 * np.asarray(t) ** 3
    coarse = fefferman_phong(unit_ball, ORACLE, volume, weight, 2.0, 2.0, decomposition, n_balls=3, points_per_ball=2)
    fine = fefferman_phong(unit_ball, ORACLE, volume, weight, 2.0, 2.0, decomposition, n_balls=3, points_per_ball=4)
    assert 0.0 < coarse.value <= fine.value
    assert math.isfinite(fine.value)
    with pytest.raises(ValueError):
        fefferman_phong(unit_ball, ORACLE, volume, weight, 1.0, 2.0, decomposition)


@pytest.mark.slow
def test_capacitary_condition_for_the_boundary_weight(unit_ball, euclidean_geometry, decomposition):
    spec = WeightSpec.boundary(2.0)
    weight = evaluate_weight(spec, unit_ball)
    report = mazya_check(unit_ball, None, ORACLE, weight, 2.0, decomposition, n_balls=1, threads=2)
    assert report.lower_estimate
    assert report.rows
    assert 0.0 < report.value <= report.global_value < math.inf
    assert all(row["capacity"] > 0.0 for row in report.rows)
    assert any(row["ball"] == -1 for row in report.rows)
    hardy = maximize_ratio(unit_ball, spec, euclidean_geometry, strategy="family")
    assert report.consistent_with(hardy.best_ratio)


def test_zero_weight_has_no_capacitary_mass(unit_ball, decomposition):
    report = mazya_check(unit_ball, None, ORACLE, np.zeros(unit_ball.dims), 2.0, decomposition, n_balls=1)
    assert report.value == 0.0 and report.global_value == 0.0
    assert not report.consistent_with(1.0)


@pytest.mark.slow
def test_corollary_weights(unit_ball, euclidean_geometry, decomposition):
    report = corollary_weights(unit_ball, euclidean_geometry, 2.0, 1.0, ORIGIN, decomposition)
    assert report.s == pytest.approx(2.0)
    assert report.weak_norm > 0.0
    assert report.passed
