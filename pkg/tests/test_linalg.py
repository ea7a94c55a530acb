import numpy as np
import pytest
from hypothesis import given

from conftest import matrices
from mlorc.errors import NonFiniteError, ShapeError
from mlorc.linalg import frob_norm, l11_norm, matmul, qr_thin, svd_small


def assert_svd_contract(a, res):
    k = min(a.shape)
    assert res.u.shape == (a.shape[0], k)
    assert res.v.shape == (a.shape[1], k)
    assert np.all(res.s >= 0)
    assert np.all(np.diff(res.s) <= 0)
    assert np.linalg.norm(res.u.T @ res.u - np.eye(k)) <= 1e-10
    assert np.linalg.norm(res.v.T @ res.v - np.eye(k)) <= 1e-10
    scale = max(np.linalg.norm(a), 1e-300)
    assert np.linalg.norm(res.reconstruct() - a) <= 1e-8 * scale


def test_matmul_examples():
    a = np.arange(9.0).reshape(3, 3)
    np.testing.assert_array_equal(matmul(np.eye(3), a), a)
    np.testing.assert_array_equal(matmul(a, np.zeros((3, 2))), np.zeros((3, 2)))
    np.testing.assert_array_equal(matmul([[1, 2], [3, 4]], [[5], [6]]), [[17], [39]])


def test_matmul_shape_error():
    with pytest.raises(ShapeError):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_nonfinite_rejected():
    with pytest.raises(NonFiniteError):
        frob_norm(np.array([[1.0, np.nan]]))
    with pytest.raises(NonFiniteError):
        svd_small(np.array([[np.inf, 1.0]]))


def test_qr_orthonormal_input_recovers_columns(rng):
    a, _ = np.linalg.qr(rng.standard_normal((7, 3)))
    q, r = qr_thin(a)
    signs = np.sign(np.diag(r))
    np.testing.assert_allclose(np.abs(np.diag(r)), 1.0, atol=1e-12)
    np.testing.assert_allclose(r, np.diag(signs), atol=1e-12)
    np.testing.assert_allclose(q * signs, a, atol=1e-12)


def test_qr_random_tall_residual(rng):
    a = rng.standard_normal((50, 5))
    q, r = qr_thin(a)
    assert np.linalg.norm(q @ r - a) / np.linalg.norm(a) <= 1e-12
    assert np.linalg.norm(q.T @ q - np.eye(5)) <= 1e-10
    np.testing.assert_array_equal(r, np.triu(r))


def test_qr_rank_deficient_and_zero_columns():
    a = np.zeros((6, 4))
    a[:, 1] = 1.0
    a[:, 3] = 2.0
    q, r = qr_thin(a)
    assert np.linalg.norm(q.T @ q - np.eye(4)) <= 1e-10
    assert np.linalg.norm(q @ r - a) <= 1e-10 * np.linalg.norm(a)
    q, r = qr_thin(np.zeros((5, 3)))
    np.testing.assert_array_equal(q, np.eye(5, 3))
    np.testing.assert_array_equal(r, 0.0)


def test_qr_rejects_wide():
    with pytest.raises(ShapeError):
        qr_thin(np.ones((2, 3)))


@given(matrices(max_side=9))
def test_qr_contract(a):
    if a.shape[0] < a.shape[1]:
        a = a.T
    q, r = qr_thin(a)
    assert np.linalg.norm(q.T @ q - np.eye(a.shape[1])) <= 1e-10
    assert np.linalg.norm(q @ r - a) <= 1e-10 * max(np.linalg.norm(a), 1e-300)


def test_svd_diagonal_sorted():
    res = svd_small(np.diag([3.0, 1.0, 2.0]))
    np.testing.assert_allclose(res.s, [3.0, 2.0, 1.0], atol=1e-15)
    assert_svd_contract(np.diag([3.0, 1.0, 2.0]), res)


def test_svd_zero_matrix():
    a = np.zeros((4, 3))
    res = svd_small(a)
    np.testing.assert_array_equal(res.s, 0.0)
    assert_svd_contract(a, res)


def test_svd_squares_match_eigenvalues(rng):
    # oracle: symmetric eigensolver on b b^T, a different algorithm from Jacobi SVD
    b = rng.standard_normal((4, 7))
    res = svd_small(b)
    eig = np.sort(np.linalg.eigvalsh(b @ b.T))[::-1]
    np.testing.assert_allclose(res.s ** 2, eig, atol=1e-9)


def test_svd_sign_convention(rng):
    res = svd_small(rng.standard_normal((6, 4)))
    for j in range(4):
        col = res.u[:, j]
        first = col[np.flatnonzero(np.abs(col) > 1e-12)[0]]
        assert first > 0


def test_svd_deterministic(rng):
    a = rng.standard_normal((9, 5))
    r1, r2 = svd_small(a), svd_small(a.copy())
    np.testing.assert_array_equal(r1.u, r2.u)
    np.testing.assert_array_equal(r1.s, r2.s)
    np.testing.assert_array_equal(r1.v, r2.v)


def test_svd_rank_one_completion(rng):
    a = np.outer(rng.standard_normal(10), rng.standard_normal(7))
    res = svd_small(a)
    assert_svd_contract(a, res)
    assert res.s[1] <= 1e-12 * res.s[0]


@pytest.mark.parametrize("shape", [(1, 1), (1, 5), (5, 1), (3, 8), (24, 20), (8, 8)])
def test_svd_against_lapack(rng, shape):
    a = rng.standard_normal(shape)
    res = svd_small(a)
    assert_svd_contract(a, res)
    np.testing.assert_allclose(res.s, np.linalg.svd(a, compute_uv=False), atol=1e-12)


@given(matrices(max_side=7))
def test_svd_contract_property(a):
    assert_svd_contract(a, svd_small(a))


def test_norm_examples():
    assert frob_norm(np.zeros((2, 3))) == 0.0
    assert frob_norm([[3.0, 4.0]]) == 5.0
    assert frob_norm(np.eye(5)) == pytest.approx(np.sqrt(5), abs=1e-15)
    assert l11_norm(np.zeros((2, 2))) == 0.0
    assert l11_norm([[1.0, -2.0], [3.0, -4.0]]) == 10.0
    assert l11_norm(np.eye(6)) == 6.0


@given(matrices(max_side=6))
def test_norm_equivalence(a):
    f, l1 = frob_norm(a), l11_norm(a)
    tol = 1e-12 * max(l1, 1.0)
    assert f <= l1 + tol
    assert l1 <= np.sqrt(a.size) * f + tol


@pytest.mark.parametrize("scale", [1e-300, 5.17630632e-115, 1.0, 1e150, 1e300])
def test_extreme_scales(scale):
    # rank-1 constant input leaves rounding-noise columns after the first reflector
    a = np.full((9, 4), scale)
    q, r = qr_thin(a)
    assert np.linalg.norm(q.T @ q - np.eye(4)) <= 1e-10
    assert np.max(np.abs(q @ r - a)) <= 1e-12 * scale
    b = np.random.default_rng(0).standard_normal((7, 5)) * scale
    res = svd_small(b)
    assert np.linalg.norm(res.u.T @ res.u - np.eye(5)) <= 1e-10
    np.testing.assert_allclose(res.s, np.linalg.svd(b, compute_uv=False), rtol=1e-12)
