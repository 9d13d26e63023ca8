import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modelaug.coders import DenseCoder, SparseCode, dense_encode, fuse, normalize, omp_encode
from modelaug.dictionary import LabeledFeature, build_dictionary
from modelaug.errors import InputError

from oracles import best_support, gauss_solve


def unit_columns(rng, m, n):
    D = rng.standard_normal((m, n))
    return D / np.linalg.norm(D, axis=0)


def test_omp_exact_one_sparse():
    D = unit_columns(np.random.default_rng(0), 6, 9)
    code = omp_encode(D, 3 * D[:, 4], k=5)
    assert code.support == (4,)
    np.testing.assert_allclose(code.coefficients, [3.0], atol=1e-12)
    assert code.residual_norm <= 1e-10
    assert code.status == "residual"
    assert len(code.residual_trace) == 2


def test_omp_accepts_dictionary_object():
    d = build_dictionary([LabeledFeature([1.0, 0.0], 0), LabeledFeature([0.0, 2.0], 1)])
    code = omp_encode(d, [0.0, 5.0], 1)
    assert code.support == (1,)
    np.testing.assert_allclose(code.expand(), [0.0, 5.0])


def test_omp_degenerate_cases():
    D = unit_columns(np.random.default_rng(1), 4, 5)
    s = np.array([1.0, 2.0, 0.0, -1.0])
    code = omp_encode(D, s, 0)
    assert code.support == () and code.residual_norm == pytest.approx(np.linalg.norm(s))
    code = omp_encode(D, np.zeros(4), 3)
    assert code.support == () and code.residual_norm == 0.0
    np.testing.assert_array_equal(code.expand(), np.zeros(5))


def test_omp_two_orthogonal_columns_among_random():
    rng = np.random.default_rng(2)
    D = unit_columns(rng, 4, 6)
    # make columns 1 and 4 orthonormal, leave the rest random
    q, _ = np.linalg.qr(rng.standard_normal((4, 2)))
    D[:, 1], D[:, 4] = q[:, 0], q[:, 1]
    s = 2 * D[:, 1] - D[:, 4]
    best_res, best_sup = best_support(D, s, 2)
    code = omp_encode(D, s, 2)
    assert set(code.support) == set(best_sup) == {1, 4}
    coef = dict(zip(code.support, code.coefficients))
    assert coef[1] == pytest.approx(2.0, abs=1e-10)
    assert coef[4] == pytest.approx(-1.0, abs=1e-10)
    assert code.residual_norm == pytest.approx(best_res, abs=1e-10)


def test_omp_tie_goes_to_lowest_index():
    D = np.eye(3)
    code = omp_encode(D, [1.0, 1.0, 1.0], 1)
    assert code.support == (0,)


def test_omp_dependent_column_stops_early():
    a = np.array([1.0, 0.0, 0.0])
    b = np.array([0.0, 1.0, 0.0])
    # third column is a and b mixed, so after picking two the refit is singular
    c = (a + b) / np.sqrt(2)
    D = np.stack([c, a, b], axis=1)
    s = np.array([1.0, 0.3, 0.5])
    code = omp_encode(D, s, 3)
    assert code.status in ("dependent", "correlation")
    assert len(code.support) == 2


def test_omp_errors():
    D = np.eye(3)
    with pytest.raises(InputError):
        omp_encode(D, [1.0, 2.0], 1)
    with pytest.raises(InputError):
        omp_encode(D, [1.0, 2.0, 3.0], 4)
    with pytest.raises(InputError):
        omp_encode(D, [1.0, 2.0, 3.0], -1)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 30), st.integers(1, 100), st.integers(0, 20), st.integers(0, 2**32 - 1))
def test_omp_properties(m, n, k, seed):
    k = min(k, n)
    rng = np.random.default_rng(seed)
    D = unit_columns(rng, m, n)
    code = omp_encode(D, rng.standard_normal(m), k)
    assert len(code.support) <= k
    assert len(set(code.support)) == len(code.support)
    assert all(0 <= j < n for j in code.support)
    assert np.count_nonzero(code.expand()) <= k
    trace = np.array(code.residual_trace)
    assert np.all(np.diff(trace) <= 1e-12)


def test_dense_examples():
    rng = np.random.default_rng(3)
    D = unit_columns(rng, 3, 4)
    np.testing.assert_array_equal(dense_encode(D, np.zeros(3), 2.0).coefficients, np.zeros(4))
    q, _ = np.linalg.qr(rng.standard_normal((5, 3)))
    s = rng.standard_normal(5)
    np.testing.assert_allclose(dense_encode(q, s, 1e-9).coefficients, q.T @ s, atol=1e-6)
    s = rng.standard_normal(3)
    expected = gauss_solve(D.T @ D + 2 * np.eye(4), D.T @ s)
    np.testing.assert_allclose(dense_encode(D, s, 2.0).coefficients, expected, atol=1e-12)


def test_dense_rejects_nonpositive_lambda():
    with pytest.raises(InputError):
        dense_encode(np.eye(2), [1.0, 1.0], 0.0)
    with pytest.raises(InputError):
        DenseCoder(np.eye(2), -1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 20), st.integers(1, 40), st.floats(1e-3, 100), st.floats(1.0, 50.0),
       st.integers(0, 2**32 - 1))
def test_dense_properties(m, n, lam, factor, seed):
    rng = np.random.default_rng(seed)
    D = unit_columns(rng, m, n)
    s = rng.standard_normal(m)
    a = dense_encode(D, s, lam).coefficients
    rhs = D.T @ s
    assert np.max(np.abs((D.T @ D + lam * np.eye(n)) @ a - rhs)) <= 1e-8 * (1 + np.max(np.abs(rhs)))
    bigger = dense_encode(D, s, lam * factor).coefficients
    assert np.linalg.norm(bigger) <= np.linalg.norm(a) + 1e-10


def test_fuse_examples():
    v = np.array([0.0, 3.0, 0.0, 4.0])
    sparse = SparseCode((1, 3), np.array([3.0, 4.0]), 4, 0.0)
    np.testing.assert_allclose(fuse(sparse, v).coefficients, 2 * v / 5)
    empty = SparseCode((), np.zeros(0), 4, 1.0)
    w = np.array([1.0, -2.0, 2.0, 0.0])
    np.testing.assert_allclose(fuse(empty, w).coefficients, w / 3)
    s2 = SparseCode((0, 2), np.array([3.0, 4.0]), 4, 0.0)
    np.testing.assert_allclose(fuse(s2, np.ones(4) / 2).coefficients, [1.1, 0.5, 1.3, 0.5], atol=1e-15)


def test_fuse_length_mismatch():
    with pytest.raises(InputError):
        fuse(np.ones(3), np.ones(4))


def test_normalize_variants():
    v = np.array([3.0, -4.0])
    np.testing.assert_allclose(normalize(v, "l1"), v / 7)
    np.testing.assert_allclose(normalize(v, "max-abs"), v / 4)
    with pytest.raises(InputError):
        normalize(v, "l3")


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 30), st.integers(0, 2**32 - 1), st.sampled_from(["l2", "l1", "max-abs"]))
def test_fuse_norm_bound(n, seed, norm):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(n) * rng.integers(0, 2)
    b = rng.standard_normal(n)
    out = fuse(a, b, norm).coefficients
    assert np.all(np.isfinite(out))
    if norm == "l2":
        assert np.linalg.norm(out) <= 2 + 1e-12


def test_batch_encoding_is_order_independent():
    rng = np.random.default_rng(9)
    D = unit_columns(rng, 6, 12)
    S = rng.standard_normal((5, 6))
    coder = DenseCoder(D, 2.0)
    forward = [coder(s).coefficients for s in S]
    backward = [coder(s).coefficients for s in S[::-1]][::-1]
    for a, b in zip(forward, backward):
        np.testing.assert_array_equal(a, b)
