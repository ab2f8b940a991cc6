import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ratinterp.errors import InfeasibleProblem, InvalidProblem, PathSingular
from ratinterp.problem import (
    DerivedProblemMatrices,
    InterpolationProblem,
    build_T_That,
    build_W,
    build_Z,
    build_e,
    deform_W,
    pick_check,
    solve_S,
)
from ratinterp.structure import StructureSpec
from ratinterp.verify import roundtrip_oracle


def test_example1_Z_e(ex1):
    Z = build_Z(ex1)
    np.testing.assert_array_equal(Z, [[0, 0, 0], [0, 0.5, 0], [0, 1, 0.5]])
    np.testing.assert_array_equal(build_e(ex1).ravel(), [1, 1, 0])
    assert ex1.n == 2


def test_example2_Z_e(ex2):
    np.testing.assert_array_equal(build_Z(ex2), [[0, 0, 0], [1, 0, 0], [0, 1, 0]])
    np.testing.assert_array_equal(build_e(ex2).ravel(), [1, 0, 0])


def test_W_block_layout(ex1):
    W = build_W(ex1)
    assert W.shape == (6, 6)
    np.testing.assert_array_equal(W[:2, :2], 0.5 * np.eye(2))
    np.testing.assert_array_equal(W[2:4, 2:4], [[1, 0], [0, 0.4]])
    np.testing.assert_array_equal(W[4:6, 4:6], [[1, 0], [0, 0.4]])
    np.testing.assert_array_equal(W[4:6, 2:4], [[2, 0.1], [0, 0.1]])
    np.testing.assert_array_equal(W[2:4, 4:6], 0)


@pytest.mark.parametrize("make", ["ex1", "ex2"])
def test_S_matches_series(make, request):
    p = request.getfixturevalue(make)
    Z, e = build_Z(p), build_e(p).reshape(-1, 1)
    series = sum(np.linalg.matrix_power(Z, k) @ e @ e.T @ np.linalg.matrix_power(Z, k).T for k in range(400))
    np.testing.assert_allclose(solve_S(Z, e), series, atol=1e-12)


def test_S_scalar_closed_form():
    # single node z with multiplicity 1 besides the origin: S_11 = 1/(1-z^2)
    p = InterpolationProblem.from_lists(1, [0.0, 0.6], [1, 1], [[np.array([[0.5]])], [np.array([[0.7]])]])
    S = solve_S(build_Z(p), build_e(p))
    np.testing.assert_allclose(S, [[1, 1], [1, 1 / (1 - 0.36)]], rtol=1e-13)


def test_examples_feasible(ex1, ex2):
    for p in (ex1, ex2):
        d = DerivedProblemMatrices.from_problem(p)
        res = d.pick(p.ell)
        assert res.feasible and res.min_eig > 0


def test_trivial_W_pick_is_S():
    p = InterpolationProblem.from_lists(2, [0.0, 0.5], [1, 1], [[0.5 * np.eye(2)], [0.5 * np.eye(2)]])
    d = DerivedProblemMatrices.from_problem(p)
    np.testing.assert_allclose(d.T, 0, atol=1e-15)
    assert d.pick(2).feasible


def test_infeasible_pick_detected():
    # |F(0.5)| far below zero violates positivity
    p = InterpolationProblem.from_lists(1, [0.0, 0.5], [1, 1], [[np.array([[0.5]])], [np.array([[-3.0]])]])
    d = DerivedProblemMatrices.from_problem(p)
    assert not d.pick(1).feasible


def test_invalid_problems_rejected():
    with pytest.raises(InvalidProblem):
        InterpolationProblem.from_lists(1, [0.1], [1], [[np.array([[0.5]])]])  # first node not 0
    with pytest.raises(InvalidProblem):
        InterpolationProblem.from_lists(1, [0.0], [1], [[np.array([[0.4]])]])  # W00 != I/2
    with pytest.raises(InvalidProblem):
        InterpolationProblem.from_lists(1, [0.0, 1.2], [1, 1], [[np.array([[0.5]])], [np.array([[1.0]])]])
    with pytest.raises(InvalidProblem):
        InterpolationProblem.from_lists(1, [0.0, 0.0], [1, 1], [[np.array([[0.5]])], [np.array([[1.0]])]])
    with pytest.raises(InvalidProblem):
        InterpolationProblem.from_lists(2, [0.0, 0.5], [1, 1], [[0.5 * np.eye(2)], [np.eye(3)]])


def test_complex_data_rejected():
    with pytest.raises(InvalidProblem, match="complex"):
        InterpolationProblem.from_lists(1, [0.0, 0.3 + 0.2j], [1, 1], [[np.array([[0.5]])], [np.array([[0.7]])]])
    with pytest.raises(InvalidProblem, match="complex"):
        InterpolationProblem.from_lists(1, [0.0, 0.3], [1, 1], [[np.array([[0.5]])], [np.array([[0.7 + 1j]])]])


def test_invalid_problem_is_value_error():
    assert issubclass(InvalidProblem, ValueError)
    assert not issubclass(InfeasibleProblem, ValueError)


def test_covariance_extension_layout():
    C = [np.eye(2), np.array([[0.2, 0.1], [0.0, 0.3]]), np.array([[0.05, 0.0], [0.1, 0.0]])]
    p = InterpolationProblem.covariance_extension(C)
    assert p.nodes == (0.0,) and p.multiplicities == (3,)
    np.testing.assert_allclose(p.values[(0, 0)], 0.5 * np.eye(2))
    np.testing.assert_allclose(p.values[(0, 2)], C[2])


def test_deform_endpoints(ex1):
    d = DerivedProblemMatrices.from_problem(ex1)
    np.testing.assert_allclose(deform_W(d.T, 0.0), 0.5 * np.eye(6), atol=1e-15)
    np.testing.assert_allclose(deform_W(d.T, 1.0), d.Wmat, atol=1e-12)


def test_T_That_definition(ex1):
    W = build_W(ex1)
    T, That = build_T_That(W, build_e(ex1), 2)
    I = np.eye(6)
    np.testing.assert_allclose(T @ (W + 0.5 * I), W - 0.5 * I, atol=1e-13)
    np.testing.assert_allclose(That, T @ np.kron(build_e(ex1).reshape(-1, 1), np.eye(2)), atol=1e-15)


def test_deform_singular_path_raises():
    with pytest.raises(PathSingular):
        deform_W(np.eye(2), 1.0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), ell=st.integers(1, 2), n=st.integers(1, 3))
def test_pick_along_path_stays_positive(seed, ell, n):
    rt = roundtrip_oracle(StructureSpec.uniform(ell, n), seed)
    d = DerivedProblemMatrices.from_problem(rt.problem)
    assert d.pick(ell).feasible
    for lam in np.linspace(0, 1, 11):
        assert pick_check(deform_W(d.T, lam), d.S, ell).min_eig > 0
