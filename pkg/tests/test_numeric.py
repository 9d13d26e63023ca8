import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from modelaug.errors import FactorizationError, InputError
from modelaug.numeric import gram, least_squares, matvec, spd_solve

from oracles import gauss_solve, grid_least_squares

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_matvec_examples():
    np.testing.assert_array_equal(matvec(np.eye(3), [1, 2, 3]), [1, 2, 3])
    np.testing.assert_array_equal(matvec(np.zeros((2, 2)), [5, 7]), [0, 0])
    np.testing.assert_array_equal(matvec([[1, 2], [3, 4]], [1, 1]), [3, 7])


def test_matvec_rejects_mismatch():
    with pytest.raises(InputError):
        matvec(np.eye(3), [1, 2])


def test_matvec_rejects_nonfinite():
    with pytest.raises(InputError):
        matvec([[np.nan]], [1.0])


def test_gram_examples():
    q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((5, 3)))
    np.testing.assert_allclose(gram(q), np.eye(3), atol=1e-12)
    assert gram([[3.0], [4.0]]).tolist() == [[25.0]]
    np.testing.assert_array_equal(gram([[1, 0], [1, 1]]), [[2, 1], [1, 1]])


def test_gram_empty():
    with pytest.raises(InputError):
        gram(np.zeros((0, 0)))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 50), st.integers(1, 50), st.integers(0, 2**32 - 1))
def test_gram_symmetric_psd(m, n, seed):
    A = np.random.default_rng(seed).standard_normal((m, n))
    G = gram(A)
    assert G.shape == (n, n)
    assert np.max(np.abs(G - G.T)) <= 1e-12
    assert np.linalg.eigvalsh(G).min() >= -1e-9 * max(1.0, np.abs(G).max())


def test_spd_solve_examples():
    np.testing.assert_array_equal(spd_solve(np.eye(2), [4, 5]), [4, 5])
    np.testing.assert_allclose(spd_solve(np.diag([2.0, 4.0]), [2, 8]), [1, 2], rtol=1e-15)
    A = [[4.0, 2.0], [2.0, 3.0]]
    np.testing.assert_allclose(spd_solve(A, [1, 1]), gauss_solve(A, [1, 1]), atol=1e-14)


def test_spd_solve_rejects_indefinite():
    with pytest.raises(FactorizationError):
        spd_solve([[1.0, 2.0], [2.0, 1.0]], [1, 1])


def test_spd_solve_rejects_tiny_pivot():
    with pytest.raises(FactorizationError):
        spd_solve(np.diag([1.0, 1e-13]), [1, 1])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_spd_round_trip(n, seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, n))
    A = M.T @ M + np.eye(n)
    b = rng.standard_normal(n) * 10
    x = spd_solve(A, b)
    assert np.max(np.abs(A @ x - b)) <= 1e-8 * (1 + np.max(np.abs(b)))


def test_least_squares_examples():
    u = np.array([0.6, 0.8, 0.0])
    np.testing.assert_allclose(least_squares(u[:, None], 3 * u), [3.0], atol=1e-14)
    A = np.array([[2.0, 1.0], [1.0, 3.0]])
    x = least_squares(A, [3.0, 5.0])
    np.testing.assert_allclose(A @ x, [3.0, 5.0], atol=1e-12)


def test_least_squares_matches_grid_oracle():
    A = np.array([[1.0, 0.5], [0.2, 1.0], [1.0, 1.0], [-0.5, 2.0]])
    b = np.array([1.0, 2.0, 0.5, 3.0])
    expected = grid_least_squares(A, b)
    np.testing.assert_allclose(least_squares(A, b), expected, atol=1e-6)


def test_least_squares_rank_deficient():
    A = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
    with pytest.raises(FactorizationError):
        least_squares(A, [1.0, 1.0, 1.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 10), st.integers(0, 20), st.integers(0, 2**32 - 1))
def test_least_squares_residual_orthogonal(n, extra, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n + extra, n))
    b = rng.standard_normal(n + extra)
    x = least_squares(A, b)
    assert np.max(np.abs(A.T @ (b - A @ x))) <= 1e-7


@given(arrays(np.float64, (3, 3), elements=finite))
def test_matvec_is_linear(A):
    x, y = np.array([1.0, -2.0, 0.5]), np.array([0.0, 3.0, 1.0])
    np.testing.assert_allclose(matvec(A, 2 * x + y), 2 * matvec(A, x) + matvec(A, y), atol=1e-9)
