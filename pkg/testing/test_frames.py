import numpy as np
import pytest
import sympy as sp
from hypothesis import assume, given, settings, strategies as st

from cchardy.errors import HoermanderFailure, Singularity
from cchardy.frames import (
    HTypeGroup,
    VectorFieldSystem,
    build_commutator_basis,
    eval_frame,
    htype_ops,
    jacobi_defect,
    lie_bracket,
    numerical_rank,
)
from cchardy.systems import grushin_paper_example

GROUPS = [HTypeGroup(1, 1), HTypeGroup(2, 3)]

coordinate = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False)


def points(dim):
    return st.lists(coordinate, min_size=dim, max_size=dim).map(np.array)


def test_eval_frame_columns_are_fields():
    frame = eval_frame(grushin_paper_example(), [0.5, -1.0, 2.0])
    expected = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.5]])
    assert np.allclose(frame, expected)


def test_eval_frame_rejects_non_finite_point():
    with pytest.raises(ValueError):
        eval_frame(grushin_paper_example(), [np.nan, 0.0, 0.0])


def test_bracket_is_antisymmetric():
    sys = grushin_paper_example()
    x = [0.3, -0.2, 1.0]
    assert np.allclose(lie_bracket(sys, 0, 2, x), -lie_bracket(sys, 2, 0, x))
    assert np.allclose(np.abs(lie_bracket(sys, 0, 2, x)), [0.0, 0.0, 1.0])
    assert np.allclose(lie_bracket(sys, 1, 1, x), 0.0)


def test_bracket_index_out_of_range():
    with pytest.raises(IndexError):
        lie_bracket(grushin_paper_example(), 0, 3, [0.0, 0.0, 0.0])


@pytest.mark.parametrize("group", GROUPS, ids=lambda g: g.name)
def test_jacobi_identity(group):
    basis = build_commutator_basis(group.system, [group.identity()], max_step=2)
    for i, j, k in [(0, 1, 2), (1, 2, 3)]:
        if k >= basis.size:
            continue
        assert all(sp.expand(e) == 0 for e in jacobi_defect(basis, i, j, k))


def test_grushin_needs_one_bracket_at_the_origin():
    basis = build_commutator_basis(grushin_paper_example(), [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]], max_step=3)
    assert basis.max_step == 2
    assert basis.degrees == (1, 1, 1, 2)
    assert basis.parents[3] == (0, 2)
    assert numerical_rank(eval_frame(basis, [0.0, 0.0, 0.0])) == 3


def test_hoermander_failure_reports_sample():
    one, zero = sp.Integer(1), sp.Integer(0)
    flat = VectorFieldSystem(3, ((one, zero, zero), (zero, one, zero)), name="flat")
    with pytest.raises(HoermanderFailure) as info:
        build_commutator_basis(flat, [[0.0, 0.0, 0.0]], max_step=3)
    assert info.value.rank == 2


def test_system_rejects_non_polynomial_fields():
    x1 = sp.Symbol("x1", real=True)
    with pytest.raises(ValueError):
        VectorFieldSystem(1, ((sp.sin(x1),),))


@pytest.mark.parametrize("group", GROUPS, ids=lambda g: g.name)
def test_structure_matrices_are_skew_orthogonal_and_anticommute(group):
    units = group.structure_matrices
    eye = np.eye(group.horiz_dim)
    for l, u in enumerate(units):
        assert np.array_equal(u.T, -u)
        assert np.array_equal(u.T @ u, eye)
        for m in range(l + 1, len(units)):
            assert np.array_equal(u @ units[m], -(units[m] @ u))


def test_invalid_htype_dimensions():
    with pytest.raises(ValueError):
        HTypeGroup(1, 2)
    with pytest.raises(ValueError):
        HTypeGroup(0, 1)


def test_heisenberg_bracket_convention():
    group = HTypeGroup(1, 1)
    assert abs(group.center_bracket) == pytest.approx(1.0)
    assert group.homogeneous_dim == 4
    assert group.name == "heisenberg1"


@pytest.mark.parametrize("group", GROUPS, ids=lambda g: g.name)
def test_htype_system_is_step_two(group):
    basis = build_commutator_basis(group.system, [group.identity()], max_step=3)
    assert basis.max_step == 2


@settings(max_examples=50, deadline=None)
@given(points(3), points(3), points(3))
def test_heisenberg_law_is_associative(a, b, c):
    g = HTypeGroup(1, 1)
    assert np.allclose(g.product(g.product(a, b), c), g.product(a, g.product(b, c)), atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(points(7), points(7))
def test_htype_inverse_and_dilation(a, b):
    g = HTypeGroup(2, 3)
    ops = htype_ops(g)
    assert np.allclose(ops.product(a, ops.inverse(a)), g.identity(), atol=1e-12)
    lam = 1.7
    lhs = ops.dilate(lam, ops.product(a, b))
    rhs = ops.product(ops.dilate(lam, a), ops.dilate(lam, b))
    assert np.allclose(lhs, rhs, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(points(3), st.floats(min_value=0.1, max_value=10.0))
def test_gauge_is_homogeneous(a, lam):
    g = HTypeGroup(1, 1)
    assert g.kaplan_gauge(g.dilate(lam, a)) == pytest.approx(lam * g.kaplan_gauge(a), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("group", GROUPS, ids=lambda g: g.name)
@settings(max_examples=30, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000))
def test_horizontal_gradient_of_gauge(group, seed):
    a = np.random.default_rng(seed).uniform(-2.0, 2.0, group.ambient_dim)
    gauge = float(group.kaplan_gauge(a))
    assume(gauge > 1e-3)
    x, _ = group.split(a)
    assert group.gauge_hgrad_sq(a) == pytest.approx(float(x @ x) / gauge**2, rel=1e-8, abs=1e-12)


def test_gauge_gradient_singular_at_identity():
    g = HTypeGroup(1, 1)
    with pytest.raises(Singularity):
        g.gauge_hgrad_sq(g.identity())
