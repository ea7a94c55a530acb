"""Randomized SVD with oversampling and the factored moment container."""
from dataclasses import dataclass

import numpy as np

from mlorc.errors import ShapeError
from mlorc.linalg import as_matrix, qr_thin, svd_small

_MASK64 = (1 << 64) - 1


class RngStream:
    """Seeded Gaussian source.

    Backed by numpy's PCG64 bit generator, keyed through ``SeedSequence`` so
    that a stream is fully determined by ``(seed, *key)``. ``counter`` counts
    the normal variates drawn so far.
    """

    def __init__(self, seed, *key):
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        entropy = [self.seed & _MASK64] + [k & _MASK64 for k in self.key]
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
        self.counter = 0

    @classmethod
    def for_step(cls, seed, param_id, step):
        """Stream owned by one parameter at one step, independent of call order."""
        return cls(seed, param_id, step)

    def normal(self, shape):
        out = self._gen.standard_normal(shape)
        self.counter += out.size
        return out

    def uniform(self, size):
        return self._gen.random(size)

    def choice(self, n, size):
        """``size`` distinct indices from ``range(n)``, uniformly."""
        return self._gen.choice(n, size=size, replace=False)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, key={self.key}, counter={self.counter})"


def gaussian_matrix(n, l, rng):
    if n < 1 or l < 1:
        raise ShapeError(f"gaussian_matrix needs positive dimensions, got ({n}, {l})")
    return rng.normal((n, l))


@dataclass
class FactoredMomentum:
    """A moment stored as ``u @ diag(s) @ v.T`` with ``u`` (m, l) and ``v`` (n, l)."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros(cls, m, n, l):
        return cls(np.zeros((m, l)), np.zeros(l), np.zeros((n, l)))

    @property
    def shape(self):
        return self.u.shape[0], self.v.shape[0]

    @property
    def width(self):
        return self.s.shape[0]


def reconstruct(f):
    u, s, v = f.u, f.s, f.v
    if u.ndim != 2 or v.ndim != 2 or s.ndim != 1:
        raise ShapeError("factors must be (m, l), (l,), (n, l)")
    if not (u.shape[1] == s.shape[0] == v.shape[1]):
        raise ShapeError(f"inconsistent factor widths {u.shape}, {s.shape}, {v.shape}")
    return (u * s) @ v.T


def rsvd(a, r, p, rng, keep_oversampled=False):
    """Rank-``r`` randomized SVD of ``a`` with ``p`` oversampling columns.

    Sketch ``a`` with an (n, r + p) Gaussian matrix, orthonormalize the sketch,
    take the exact SVD of the projected (r + p, n) matrix and keep its leading
    ``r`` components. No power iterations. With ``keep_oversampled`` all
    ``r + p`` components are returned instead. The sketch width is clamped to
    ``min(m, n)``, where the factorization becomes exact.
    """
    a = as_matrix(a, "a")
    if r < 1:
        raise ValueError(f"target rank must be >= 1, got {r}")
    if p < 0:
        raise ValueError(f"oversampling must be >= 0, got {p}")
    m, n = a.shape
    l = min(r + p, m, n)

    omega = gaussian_matrix(n, l, rng)
    y = a @ omega
    q, _ = qr_thin(y)
    b = q.T @ a
    small = svd_small(b)
    k = l if keep_oversampled else min(r, l)
    return FactoredMomentum(u=q @ small.u[:, :k], s=small.s[:k].copy(), v=small.v[:, :k].copy())
