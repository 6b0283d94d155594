import numpy as np
import pytest

from rdeval import linalg
from rdeval.errors import NumericError


def naive_matmul(a, b):
    """Triple-loop reference product, summation over ascending inner index."""
    m, n = a.shape
    n2, p = b.shape
    assert n == n2
    out = np.zeros((m, p))
    for i in range(m):
        for j in range(p):
            acc = 0.0
            for t in range(n):
                acc += a[i, t] * b[t, j]
            out[i, j] = acc
    return out


def test_matmul_identity_and_zero():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((4, 4))
    assert np.array_equal(linalg.matmul(a, np.eye(4)), a)
    assert np.array_equal(linalg.matmul(np.zeros((3, 4)), a), np.zeros((3, 4)))


def test_matmul_matches_naive_oracle():
    rng = np.random.default_rng(7)
    a = rng.standard_normal((3, 2))
    b = rng.standard_normal((2, 4))
    got = linalg.matmul(a, b)
    want = naive_matmul(a, b)
    assert np.max(np.abs(got - want)) < 1e-12


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ValueError) as err:
        linalg.matmul(np.zeros((3, 2)), np.zeros((3, 4)))
    msg = str(err.value)
    assert "(3, 2)" in msg and "(3, 4)" in msg


def test_matmul_associativity():
    rng = np.random.default_rng(21)
    for _ in range(20):
        a = rng.standard_normal((5, 3))
        b = rng.standard_normal((3, 6))
        c = rng.standard_normal((6, 2))
        left = linalg.matmul(linalg.matmul(a, b), c)
        right = linalg.matmul(a, linalg.matmul(b, c))
        scale = max(1.0, np.max(np.abs(left)))
        assert np.max(np.abs(left - right)) / scale < 1e-10


def test_svd_column_vector():
    res = linalg.svd(np.array([[1.0], [1.0]]))
    assert res.singular_values.shape == (1,)
    assert abs(res.singular_values[0] - np.sqrt(2.0)) < 1e-14
    assert np.max(np.abs(res.u - np.array([[1.0], [1.0]]) / np.sqrt(2.0))) < 1e-14
    assert abs(abs(res.v[0, 0]) - 1.0) < 1e-15


def test_svd_diagonal_known_values():
    a = np.diag([3.0, -5.0, 0.5])
    res = linalg.svd(a)
    assert np.allclose(res.singular_values, [5.0, 3.0, 0.5], atol=1e-13)
    recon = res.reconstruct()
    assert np.max(np.abs(recon - a)) < 1e-12


def _check_svd(a):
    res = linalg.svd(a)
    m, k = a.shape
    r = min(m, k)
    assert res.u.shape == (m, r)
    assert res.v.shape == (k, r)
    assert res.singular_values.shape == (r,)
    # descending, non-negative
    s = res.singular_values
    assert np.all(s >= 0.0)
    assert np.all(np.diff(s) <= 1e-13 * max(1.0, s[0]))
    # orthonormal factors
    assert np.max(np.abs(res.u.T @ res.u - np.eye(r))) < 1e-10
    assert np.max(np.abs(res.v.T @ res.v - np.eye(r))) < 1e-10
    # reconstruction
    tol = 1e-9 * max(1.0, np.max(np.abs(a)))
    assert np.max(np.abs(res.reconstruct() - a)) < tol
    # sign convention
    for j in range(r):
        lead = int(np.argmax(np.abs(res.u[:, j])))
        assert res.u[lead, j] >= 0.0
    return res


def test_svd_random_tall_wide_square():
    rng = np.random.default_rng(11)
    for shape in [(20, 12), (12, 20), (9, 9), (2, 1), (1, 3), (40, 7)]:
        _check_svd(rng.standard_normal(shape) * 3.0)


def test_svd_rank_deficient_and_zero():
    rng = np.random.default_rng(5)
    base = rng.standard_normal((8, 2))
    a = base @ rng.standard_normal((2, 6))  # rank 2, 8x6
    res = _check_svd(a)
    assert np.sum(res.singular_values > 1e-9) == 2
    z = _check_svd(np.zeros((4, 3)))
    assert np.all(z.singular_values == 0.0)


def test_svd_deterministic_repeat():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((10, 6))
    r1 = linalg.svd(a)
    r2 = linalg.svd(a)
    assert np.array_equal(r1.u, r2.u)
    assert np.array_equal(r1.singular_values, r2.singular_values)
    assert np.array_equal(r1.v, r2.v)


def test_svd_agrees_with_library_oracle():
    rng = np.random.default_rng(13)
    a = rng.standard_normal((15, 8))
    mine = linalg.svd(a)
    ref = np.linalg.svd(a, compute_uv=False)
    assert np.max(np.abs(mine.singular_values - ref)) < 1e-10 * max(1.0, ref[0])


def test_svd_nonconvergence_error_carries_residual(monkeypatch):
    monkeypatch.setattr(linalg, "MAX_SWEEPS", 0)
    rng = np.random.default_rng(2)
    with pytest.raises(NumericError) as err:
        linalg.svd(rng.standard_normal((6, 4)))
    assert err.value.residual is not None and err.value.residual > 0.0


def test_svd_rejects_non_finite():
    with pytest.raises(ValueError):
        linalg.svd(np.array([[1.0, np.nan], [0.0, 1.0]]))
