import math

import numpy as np
import pytest

from cchardy.capacity import (
    CapacityOptions,
    Condenser,
    DiscreteMeasure,
    annulus_check,
    ball_condenser,
    cutoff_constant,
    euclidean_condenser_capacity,
    fatness_scan,
    localization_check,
    p_capacity,
    poincare_constant,
    self_improvement,
    wolff,
    wolff_two_sided,
)
from cchardy.frames import HTypeGroup
from cchardy.metric import omega_sigma
from cchardy.oracles import EuclideanOracle, euclidean_volume
from cchardy.shapes import EuclideanBall
from cchardy.systems import euclidean

ORACLE = EuclideanOracle(3)


def test_closed_form_condenser_capacity():
    for r in (0.1, 0.5, 2.0):
        assert euclidean_condenser_capacity(3, 2.0, r, 2.0 * r) == pytest.approx(8.0 * math.pi * r)
    with pytest.raises(ValueError):
        euclidean_condenser_capacity(3, 3.0, 0.5, 1.0)


def test_empty_plate_has_zero_capacity(small_cube):
    condenser = Condenser(small_cube, np.zeros(small_cube.dims, dtype=bool))
    result = p_capacity(small_cube, None, condenser, 2.0)
    assert result.value == 0.0
    assert not result.minimizer.values.any()


def test_plate_must_lie_inside(small_cube):
    with pytest.raises(ValueError):
        Condenser(small_cube, ~small_cube.inside)
    with pytest.raises(ValueError):
        p_capacity(small_cube, None, Condenser(small_cube, small_cube.inside & False), 1.0)


def test_capacity_is_monotone_in_the_plate(small_cube):
    small = Condenser.from_shape(small_cube, EuclideanBall((0.0, 0.0, 0.0), 0.3))
    large = Condenser.from_shape(small_cube, EuclideanBall((0.0, 0.0, 0.0), 0.6))
    assert small.plate.sum() < large.plate.sum()
    cap_small = p_capacity(small_cube, None, small, 2.0).value
    cap_large = p_capacity(small_cube, None, large, 2.0).value
    assert 0.0 < cap_small <= cap_large * (1.0 + 1e-6)


def test_minimizer_is_a_condenser_potential(small_cube):
    condenser = Condenser.from_shape(small_cube, EuclideanBall((0.0, 0.0, 0.0), 0.3))
    result = p_capacity(small_cube, None, condenser, 3.0)
    u = result.minimizer.values
    assert result.value > 0.0
    assert np.all((u >= 0.0) & (u <= 1.0))
    assert np.all(u[condenser.plate] == 1.0)
    assert np.all(u[~small_cube.inside] == 0.0)
    assert result.epsilon > 0.0



def test_bounded_descent_reaches_the_discrete_minimum(small_cube):
    condenser = Condenser.from_shape(small_cube, EuclideanBall((0.0, 0.0, 0.0), 0.3))
    default = p_capacity(small_cube, None, condenser, 2.0)
    tight = p_capacity(small_cube, None, condenser, 2.0, CapacityOptions(chunk=200, relative_tolerance=1e-10))
    assert default.value == pytest.approx(tight.value, rel=1e-4)


@pytest.mark.slow
def test_ball_condenser_matches_closed_form():
    r = 0.25
    condenser = ball_condenser(euclidean(3), ORACLE, (0.0, 0.0, 0.0), r, h=r / 12.0)
    value = p_capacity(condenser.domain, None, condenser, 2.0).value
    assert value == pytest.approx(8.0 * math.pi * r, rel=0.10)


def test_localization_enlarging_the_domain_lowers_capacity(small_cube):
    report = localization_check(small_cube, euclidean(3), EuclideanBall((0.0, 0.0, 0.0), 0.3), 2.0)
    assert report.cap_box > 0.0
    assert report.ratio >= 1.0 - 1e-4


def test_annulus_radius_is_limited_by_r0():
    with pytest.raises(ValueError):
        annulus_check(euclidean(3), ORACLE, (0.0, 0.0, 0.0), 0.6, 2.0, r0=1.0)


@pytest.mark.slow
def test_fatness_of_the_unit_ball(unit_ball):
    cert = fatness_scan(unit_ball, euclidean(3), ORACLE, 2.0, radii=(0.2,), n_samples=2, cells_per_radius=4)
    assert len(cert.table) == 2
    assert 0.0 < cert.c0 <= 1.05
    for row in cert.table:
        assert row["cap_complement"] <= row["cap_ball"] * 1.05


def test_fatness_radii_bounded_by_r0(unit_ball):
    with pytest.raises(ValueError):
        fatness_scan(unit_ball, euclidean(3), ORACLE, 2.0, radii=(2.0,))


def test_self_improvement_rejects_q_above_p(unit_ball):
    with pytest.raises(ValueError):
        self_improvement(unit_ball, euclidean(3), ORACLE, 2.0, (2.5,))


def test_discrete_measure_validation():
    with pytest.raises(ValueError):
        DiscreteMeasure(((0.0, 0.0, 0.0),), (-1.0,))
    with pytest.raises(ValueError):
        DiscreteMeasure(((0.0, 0.0, 0.0),), ())
    assert DiscreteMeasure.dirac((0.0, 0.0, 0.0), 2.0).scaled(1.5).total == pytest.approx(3.0)


def test_wolff_potential_of_a_dirac():
    mu = DiscreteMeasure.dirac((0.0, 0.0, 0.0))
    x = (0.25, 0.0, 0.0)
    value = wolff(mu, x, 1.0, 2.0, euclidean_volume(3), ORACLE)
    # int_d^R t^-2 dt / |B_1| with d = 1/4
    assert value == pytest.approx(3.0 / (4.0 * math.pi / 3.0), rel=1e-6)
    assert wolff(mu.scaled(0.0), x, 1.0, 2.0, euclidean_volume(3), ORACLE) == 0.0


def test_wolff_bounds_the_fundamental_solution():
    group = HTypeGroup(1, 1)
    constants = omega_sigma(group, 2.0, n_samples=200_000, seed=5)
    bounds = wolff_two_sided(group, 2.0, shells=(0.1, 0.2), n_samples=16, constants=constants)
    assert all(v > 0 for v in bounds.c1.values())
    assert all(v > 0 for v in bounds.c2.values())
    assert bounds.stable


def test_poincare_and_cutoff_constants(unit_ball):
    poincare = poincare_constant(unit_ball, None, ORACLE, (0.0, 0.0, 0.0), (0.5, 0.75), count=4)
    assert all(0.0 < c < math.inf for c in poincare.values())
    cutoff = cutoff_constant(unit_ball, None, ORACLE, (0.0, 0.0, 0.0), 0.25, 0.75)
    assert 0.5 < cutoff < 1.1
    with pytest.raises(ValueError):
        cutoff_constant(unit_ball, None, ORACLE, (0.0, 0.0, 0.0), 0.75, 0.25)
