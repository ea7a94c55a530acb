"""Synthetic smooth objectives over a matrix parameter W (m x n).

``MatrixQuadratic`` is f(W) = 0.5 * ||a W b - c||_F^2 with additive Gaussian
gradient noise of controllable variance. ``LogisticTask`` is an l2-regularized
binary logistic regression scored through the first row of W and sampled in
mini-batches.
"""
from dataclasses import dataclass

import numpy as np

from mlorc.errors import ConfigError, ShapeError
from mlorc.linalg import as_matrix, qr_thin, svd_small
from mlorc.lowrank import RngStream


@dataclass(frozen=True)
class GradSample:
    grad: np.ndarray
    batch_indices: list
    loss_value: float


def _check_w(w, shape):
    w = as_matrix(w, "w")
    if w.shape != shape:
        raise ShapeError(f"parameter must have shape {shape}, got {w.shape}")
    return w


@dataclass(frozen=True)
class MatrixQuadratic:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    noise_std: float = 0.0

    def __post_init__(self):
        a = as_matrix(self.a, "a")
        b = as_matrix(self.b, "b")
        c = as_matrix(self.c, "c")
        if c.shape != (a.shape[0], b.shape[1]):
            raise ShapeError(f"c must be {(a.shape[0], b.shape[1])}, got {c.shape}")
        if self.noise_std < 0:
            raise ConfigError("must be >= 0", "noise_std")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def shape(self):
        return self.a.shape[1], self.b.shape[0]

    def residual(self, w):
        w = _check_w(w, self.shape)
        return self.a @ w @ self.b - self.c

    def loss(self, w):
        res = self.residual(w)
        return 0.5 * float(np.sum(res * res))

    def grad(self, w):
        return self.a.T @ self.residual(w) @ self.b.T

    def smoothness(self):
        """Lipschitz constant of the gradient: sigma_max(a)^2 * sigma_max(b)^2."""
        return float(svd_small(self.a).s[0] ** 2 * svd_small(self.b).s[0] ** 2)

    def stoch_grad(self, w, batch_size, rng):
        """Exact gradient plus i.i.d. N(0, noise_std^2 / batch_size) per entry."""
        if batch_size < 1:
            raise ConfigError(f"must be >= 1, got {batch_size}", "batch_size")
        g = self.grad(w)
        if self.noise_std > 0:
            g = g + (self.noise_std / np.sqrt(batch_size)) * rng.normal(g.shape)
        return GradSample(grad=g, batch_indices=[], loss_value=self.loss(w))


def _random_orthonormal(rows, cols, rng):
    q, r = qr_thin(rng.normal((rows, cols)))
    # column signs from r's diagonal make the draw Haar distributed
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d


def _conditioned(rows, cols, spread, rng):
    k = min(rows, cols)
    s = np.linspace(spread, 1.0, k)
    return (_random_orthonormal(rows, k, rng) * s) @ _random_orthonormal(cols, k, rng).T


def make_quadratic(m, n, planted_rank=None, noise_std=0.0, seed=0, spread=2.0, target_noise=0.0):
    """Quadratic with a planted optimum W* of rank ``planted_rank``.

    ``a`` (m x m) and ``b`` (n x n) have singular values spaced linearly in
    ``[1, spread]``. ``c = a W* b + target_noise * N(0, 1)``; with
    ``target_noise = 0`` the minimum value is 0, attained at W*.
    """
    if m < 1 or n < 1:
        raise ConfigError(f"dims must be positive, got ({m}, {n})", "problem.dims")
    if planted_rank is None:
        planted_rank = min(m, n)
    if not 1 <= planted_rank <= min(m, n):
        raise ConfigError(f"must be in [1, {min(m, n)}], got {planted_rank}", "problem.planted_rank")
    if spread < 1:
        raise ConfigError(f"must be >= 1, got {spread}", "problem.spread")
    rng = RngStream(seed, 0x51)
    a = _conditioned(m, m, spread, rng)
    b = _conditioned(n, n, spread, rng)
    w_star = rng.normal((m, planted_rank)) @ rng.normal((planted_rank, n)) / np.sqrt(planted_rank)
    c = a @ w_star @ b
    if target_noise > 0:
        c = c + target_noise * rng.normal(c.shape)
    return MatrixQuadratic(a, b, c, noise_std), w_star


def _log1pexp(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class LogisticTask:
    """Binary logistic regression on ``features @ W[0]`` plus ``0.5 * l2_reg * ||W||_F^2``.

    Only the first row of W scores samples; the remaining rows are shaped by
    the regularizer alone.
    """

    features: np.ndarray
    labels: np.ndarray
    m: int = 1
    l2_reg: float = 0.0

    def __post_init__(self):
        x = as_matrix(self.features, "features")
        y = np.asarray(self.labels, dtype=np.float64).ravel()
        if y.shape[0] != x.shape[0]:
            raise ShapeError(f"{x.shape[0]} samples but {y.shape[0]} labels")
        if not np.all((y == 0) | (y == 1)):
            raise ConfigError("labels must be 0 or 1", "labels")
        if self.m < 1:
            raise ConfigError(f"must be >= 1, got {self.m}", "m")
        if self.l2_reg < 0:
            raise ConfigError(f"must be >= 0, got {self.l2_reg}", "l2_reg")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def shape(self):
        return self.m, self.features.shape[1]

    @property
    def n_samples(self):
        return self.features.shape[0]

    def _loss_on(self, w, idx):
        x, y = self.features[idx], self.labels[idx]
        z = x @ w[0]
        data = float(np.mean(_log1pexp(z) - y * z))
        return data + 0.5 * self.l2_reg * float(np.sum(w * w))

    def _grad_on(self, w, idx):
        x, y = self.features[idx], self.labels[idx]
        resid = _sigmoid(x @ w[0]) - y
        g = self.l2_reg * w
        g[0] += x.T @ resid / len(idx)
        return g

    def loss(self, w):
        w = _check_w(w, self.shape)
        return self._loss_on(w, np.arange(self.n_samples))

    def grad(self, w):
        w = _check_w(w, self.shape)
        return self._grad_on(w, np.arange(self.n_samples))

    def smoothness(self):
        x = self.features
        return 0.25 * float(svd_small(x).s[0] ** 2) / self.n_samples + self.l2_reg

    def stoch_grad(self, w, batch_size, rng):
        """Mini-batch gradient over ``batch_size`` samples drawn without replacement."""
        w = _check_w(w, self.shape)
        if not 1 <= batch_size <= self.n_samples:
            raise ConfigError(
                f"must be in [1, {self.n_samples}], got {batch_size}", "batch_size"
            )
        idx = np.sort(rng.choice(self.n_samples, batch_size))
        return GradSample(
            grad=self._grad_on(w, idx),
            batch_indices=[int(i) for i in idx],
            loss_value=self._loss_on(w, idx),
        )


def make_logistic(n_samples, m, n, seed=0, l2_reg=1e-3, margin=1.0):
    rng = RngStream(seed, 0x10)
    x = rng.normal((n_samples, n))
    w_true = rng.normal((n,)) * margin
    p = _sigmoid(x @ w_true)
    y = (rng.uniform(n_samples) < p).astype(np.float64)
    return LogisticTask(x, y, m=m, l2_reg=l2_reg)


def load_logistic_csv(path, m=1, l2_reg=0.0):
    """Dense CSV: one sample per row, label in the last column."""
    data = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    if data.shape[1] < 2:
        raise ShapeError(f"{path}: need at least one feature column and a label column")
    return LogisticTask(data[:, :-1], data[:, -1], m=m, l2_reg=l2_reg)


def loss(problem, w):
    return problem.loss(w)


def grad(problem, w):
    return problem.grad(w)


def stoch_grad(problem, w, batch_size, rng):
    return problem.stoch_grad(w, batch_size, rng)


def finite_diff_grad(problem, w, h=1e-5):
    """Central-difference gradient of ``problem.loss`` (or any callable) at ``w``."""
    if not h > 0:
        raise ValueError(f"step must be > 0, got {h}")
    f = problem.loss if hasattr(problem, "loss") else problem
    w = as_matrix(w, "w").copy()
    out = np.empty_like(w)
    for i in range(w.shape[0]):
        for j in range(w.shape[1]):
            orig = w[i, j]
            w[i, j] = orig + h
            fp = f(w)
            w[i, j] = orig - h
            fm = f(w)
            w[i, j] = orig
            out[i, j] = (fp - fm) / (2.0 * h)
    return out
