"""Dense float64 matrix kernels: Householder QR, one-sided Jacobi SVD, norms.

Matrices are plain 2-D ``numpy.ndarray`` objects in C (row-major) order.
Everything here is a pure function of its inputs.
"""
from dataclasses import dataclass

import numpy as np

from mlorc.errors import NonFiniteError, ShapeError

_EPS = np.finfo(np.float64).eps


def as_matrix(a, name="matrix"):
    """Validate ``a`` as a finite 2-D float64 matrix and return it C-contiguous."""
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"{name} must have positive dimensions, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains NaN or Inf")
    return arr


def check_same_shape(a, b, names=("a", "b")):
    if a.shape != b.shape:
        raise ShapeError(f"{names[0]} has shape {a.shape} but {names[1]} has shape {b.shape}")


def matmul(a, b):
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def frob_norm(a):
    a = as_matrix(a)
    return float(np.sqrt(np.sum(a * a)))


def l11_norm(a):
    """Entrywise l1 norm: the sum of absolute values of all entries."""
    a = as_matrix(a)
    return float(np.sum(np.abs(a)))


def qr_thin(a):
    """Thin Householder QR of a tall matrix.

    Returns ``(q, r)`` with ``q`` of shape (m, n) with orthonormal columns and
    ``r`` (n, n) upper triangular. Zero columns are skipped by the reflector
    loop, so ``q`` stays orthonormal for rank-deficient input.
    """
    a = as_matrix(a, "a")
    m, n = a.shape
    if m < n:
        raise ShapeError(f"qr_thin needs rows >= cols, got {a.shape}")

    r = a.copy()
    reflectors = []
    for k in range(n):
        x = r[k:, k]
        xmax = np.max(np.abs(x))
        if xmax == 0.0:
            reflectors.append(None)
            continue
        # rescale so x @ x cannot underflow on tiny residual columns
        v = x / xmax
        normx = np.sqrt(v @ v)
        alpha = -normx if v[0] >= 0 else normx
        v[0] -= alpha
        vnorm = np.sqrt(v @ v)
        if vnorm == 0.0:
            reflectors.append(None)
            continue
        v /= vnorm
        r[k:, k:] -= 2.0 * np.outer(v, v @ r[k:, k:])
        r[k + 1:, k] = 0.0
        reflectors.append(v)

    q = np.eye(m, n)
    for k in range(n - 1, -1, -1):
        v = reflectors[k]
        if v is None:
            continue
        q[k:, :] -= 2.0 * np.outer(v, v @ q[k:, :])
    return q, np.triu(r[:n, :n])


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``a = u @ diag(s) @ v.T`` with ``s`` sorted nonincreasing."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray

    def reconstruct(self):
        return (self.u * self.s) @ self.v.T


def _round_robin(n):
    # Brent-Luk tournament ordering; n is even. Each round is a set of
    # disjoint column pairs that can be rotated simultaneously.
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        half = n // 2
        p = np.array(players[:half])
        q = np.array(players[::-1][:half])
        rounds.append((p, q))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _complete_orthonormal(u, good):
    """Replace columns of ``u`` not flagged ``good`` with an orthonormal completion."""
    m, k = u.shape
    basis = [u[:, j] for j in range(k) if good[j]]
    out = u.copy()
    for j in range(k):
        if good[j]:
            continue
        b = np.array(basis).T if basis else np.zeros((m, 0))
        # candidate with the largest component outside span(basis); first index wins ties
        resid = np.eye(m) - b @ b.T
        col_norms = np.sum(resid * resid, axis=0)
        e = resid[:, int(np.argmax(col_norms))]
        for _ in range(2):
            e = e - b @ (b.T @ e)
        e /= np.sqrt(e @ e)
        out[:, j] = e
        basis.append(e)
    return out


def _jacobi_columns(a, tol=None, max_sweeps=80):
    """One-sided Jacobi: orthogonalize the columns of ``a`` (m >= n).

    Returns ``(w, v)`` with ``a @ v = w``, ``v`` orthogonal and the columns
    of ``w`` mutually orthogonal.
    """
    m, n = a.shape
    if tol is None:
        tol = max(m, 1) * _EPS
    padded = n + (n % 2)
    w = np.zeros((m, padded))
    w[:, :n] = a
    v = np.eye(padded)
    rounds = _round_robin(padded) if padded > 1 else []
    for _ in range(max_sweeps):
        rotated = False
        for p, q in rounds:
            wp, wq = w[:, p], w[:, q]
            alpha = np.sum(wp * wp, axis=0)
            beta = np.sum(wq * wq, axis=0)
            gamma = np.sum(wp * wq, axis=0)
            act = np.abs(gamma) > tol * np.sqrt(alpha * beta)
            if not np.any(act):
                continue
            rotated = True
            c = np.ones_like(gamma)
            s = np.zeros_like(gamma)
            g = gamma[act]
            with np.errstate(over="ignore"):
                # |zeta| = inf gives t = 0, i.e. no rotation, which is the right limit
                zeta = (beta[act] - alpha[act]) / (2.0 * g)
                t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.hypot(1.0, zeta))
            c[act] = 1.0 / np.sqrt(1.0 + t * t)
            s[act] = c[act] * t
            w[:, p], w[:, q] = c * wp - s * wq, s * wp + c * wq
            vp, vq = v[:, p], v[:, q]
            v[:, p], v[:, q] = c * vp - s * vq, s * vp + c * vq
        if not rotated:
            break
    return w[:, :n], v[:n, :n]


def _fix_signs(u, v):
    for j in range(u.shape[1]):
        col = u[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            u[:, j] = -col
            v[:, j] = -v[:, j]
    return u, v


def svd_small(b):
    """Thin SVD by one-sided Jacobi on the side with fewer columns.

    Deterministic for a fixed input. ``u`` is (m, k), ``s`` (k,), ``v`` (n, k)
    with ``k = min(m, n)``. The first clearly nonzero entry of every column of
    ``u`` is made nonnegative.
    """
    b = as_matrix(b, "b")
    m, n = b.shape
    transposed = m < n
    a = b.T if transposed else b

    # unit max-entry scaling keeps the column inner products in range
    scale = float(np.max(np.abs(a)))
    w, rot = _jacobi_columns(a / scale if scale > 0 else a)
    s = np.sqrt(np.sum(w * w, axis=0))
    order = np.argsort(-s, kind="stable")
    s = s[order]
    w = w[:, order]
    rot = rot[:, order]

    smax = s[0] if s.size else 0.0
    good = s > max(smax * 1e-13, np.finfo(np.float64).tiny)
    left = np.zeros_like(w)
    left[:, good] = w[:, good] / s[good]
    if not np.all(good):
        left = _complete_orthonormal(left, good)

    s = s * scale if scale > 0 else s
    if transposed:
        u, v = rot.copy(), left
    else:
        u, v = left, rot.copy()
    u, v = _fix_signs(u, v)
    return SvdResult(u=u, s=s, v=v)
