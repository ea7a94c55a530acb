"""AdamW, Lion, their momentum-compressed variants, and a GaLore-AdamW baseline.

Every step function is functional: it takes ``(w, g, state, hp)`` and returns
``(w_new, state_new)`` without mutating its inputs. Counters start at 1 and
advance by exactly one per step.

The compressed variants accept an optional ``trace`` dict. When given, the
step stores the uncompressed current moments and compression diagnostics in
it; the harness uses these for its metric columns.
"""
from dataclasses import dataclass

import numpy as np

from mlorc.compress import correct_nonneg, zeta
from mlorc.errors import ConfigError, ShapeError
from mlorc.linalg import as_matrix, check_same_shape, svd_small
from mlorc.lowrank import FactoredMomentum, reconstruct, rsvd

KINDS = ("adamw", "lion", "mlorc-adamw", "mlorc-lion", "galore-adamw")


@dataclass(frozen=True)
class HyperParams:
    alpha: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.0
    epsilon: float = 1e-8
    rank: int = 4
    oversample: int = 0
    batch_size: int = 1
    galore_update_freq: int = 200

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigError(f"must be > 0, got {self.alpha}", "alpha")
        for name in ("beta1", "beta2"):
            b = getattr(self, name)
            if not 0.0 <= b < 1.0:
                raise ConfigError(f"must be in [0, 1), got {b}", name)
        if not self.weight_decay >= 0:
            raise ConfigError(f"must be >= 0, got {self.weight_decay}", "weight_decay")
        if not self.epsilon > 0:
            raise ConfigError(f"must be > 0, got {self.epsilon}", "epsilon")
        for name, low in (("rank", 1), ("oversample", 0), ("batch_size", 1), ("galore_update_freq", 1)):
            val = getattr(self, name)
            if int(val) != val or val < low:
                raise ConfigError(f"must be an integer >= {low}, got {val}", name)


@dataclass
class AdamWState:
    m: np.ndarray
    v: np.ndarray
    t: int = 1


@dataclass
class MLorcAdamWState:
    fm: FactoredMomentum
    fv: FactoredMomentum
    t: int = 1


@dataclass
class LionState:
    m: np.ndarray
    t: int = 1
    warm_start: bool = False


@dataclass
class MLorcLionState:
    fm: FactoredMomentum
    t: int = 1
    warm_start: bool = False


@dataclass
class GaLoreState:
    projector: np.ndarray
    m_low: np.ndarray
    v_low: np.ndarray
    t: int = 1


STATE_TYPES = {
    "adamw": AdamWState,
    "lion": LionState,
    "mlorc-adamw": MLorcAdamWState,
    "mlorc-lion": MLorcLionState,
    "galore-adamw": GaLoreState,
}


def _factor_width(shape, hp):
    return min(hp.rank, shape[0], shape[1])


def init_state(kind, shape, hp, warm_start=False):
    """Zero-initialized state for a parameter of the given ``(m, n)`` shape."""
    m, n = shape
    if kind == "adamw":
        return AdamWState(np.zeros(shape), np.zeros(shape))
    if kind == "lion":
        return LionState(np.zeros(shape), warm_start=warm_start)
    if kind == "mlorc-adamw":
        l = _factor_width(shape, hp)
        return MLorcAdamWState(FactoredMomentum.zeros(m, n, l), FactoredMomentum.zeros(m, n, l))
    if kind == "mlorc-lion":
        l = _factor_width(shape, hp)
        return MLorcLionState(FactoredMomentum.zeros(m, n, l), warm_start=warm_start)
    if kind == "galore-adamw":
        if hp.rank > min(m, n):
            raise ConfigError(f"GaLore rank {hp.rank} exceeds min{shape}", "rank")
        r = hp.rank
        return GaLoreState(np.zeros((m, r)), np.zeros((r, n)), np.zeros((r, n)))
    raise ConfigError(f"unknown optimizer kind {kind!r}; expected one of {KINDS}", "kind")


def _inputs(w, g):
    w = as_matrix(w, "w")
    g = as_matrix(g, "g")
    check_same_shape(w, g, ("w", "g"))
    return w, g


def _adam_direction(m, v, t, hp):
    m_hat = m / (1.0 - hp.beta1 ** t)
    v_hat = v / (1.0 - hp.beta2 ** t)
    return m_hat / (np.sqrt(v_hat) + hp.epsilon)


def adamw_step(w, g, state, hp):
    w, g = _inputs(w, g)
    check_same_shape(w, state.m, ("w", "state.m"))
    m = hp.beta1 * state.m + (1.0 - hp.beta1) * g
    v = hp.beta2 * state.v + (1.0 - hp.beta2) * g * g
    w_new = w - hp.alpha * (_adam_direction(m, v, state.t, hp) + hp.weight_decay * w)
    return w_new, AdamWState(m, v, state.t + 1)


def mlorc_adamw_step(w, g, state, hp, rng, trace=None):
    """One MLorc-AdamW step.

    The weight update uses the uncompressed moments of this step; the RSVD
    factors only carry them to the next step. Both compressions draw from
    ``rng`` in order (first moment, then second).
    """
    w, g = _inputs(w, g)
    if state.fm.shape != w.shape or state.fv.shape != w.shape:
        raise ShapeError(f"state factors {state.fm.shape} do not match parameter {w.shape}")
    m_prev = reconstruct(state.fm)
    v_raw = reconstruct(state.fv)
    report = zeta(v_raw)
    v_prev = correct_nonneg(v_raw, report)

    m = hp.beta1 * m_prev + (1.0 - hp.beta1) * g
    v = hp.beta2 * v_prev + (1.0 - hp.beta2) * g * g
    fm = rsvd(m, hp.rank, hp.oversample, rng)
    fv = rsvd(v, hp.rank, hp.oversample, rng)

    w_new = w - hp.alpha * (_adam_direction(m, v, state.t, hp) + hp.weight_decay * w)
    if trace is not None:
        trace.update(
            m=m,
            v=v,
            v_corrected=v_prev,
            zeta=report.zeta,
            negative_count=report.negative_count,
            comp_err_m=float(np.linalg.norm(reconstruct(fm) - m)),
        )
    return w_new, MLorcAdamWState(fm, fv, state.t + 1)


def lion_step(w, g, state, hp):
    """Lion update ``w - alpha * sign(c)``; sign(0) is 0. No weight decay."""
    w, g = _inputs(w, g)
    check_same_shape(w, state.m, ("w", "state.m"))
    m_prev = g if (state.warm_start and state.t == 1) else state.m
    c = hp.beta1 * m_prev + (1.0 - hp.beta1) * g
    m = hp.beta2 * m_prev + (1.0 - hp.beta2) * g
    return w - hp.alpha * np.sign(c), LionState(m, state.t + 1, state.warm_start)


def mlorc_lion_step(w, g, state, hp, rng, trace=None):
    w, g = _inputs(w, g)
    if state.fm.shape != w.shape:
        raise ShapeError(f"state factors {state.fm.shape} do not match parameter {w.shape}")
    if state.warm_start and state.t == 1:
        m_prev = g
    else:
        m_prev = reconstruct(state.fm)
    c = hp.beta1 * m_prev + (1.0 - hp.beta1) * g
    m = hp.beta2 * m_prev + (1.0 - hp.beta2) * g
    fm = rsvd(m, hp.rank, hp.oversample, rng)
    w_new = w - hp.alpha * np.sign(c)
    if trace is not None:
        trace.update(m=m, c=c, comp_err_m=float(np.linalg.norm(reconstruct(fm) - m)))
    return w_new, MLorcLionState(fm, state.t + 1, state.warm_start)


def galore_projector(g, r):
    """First ``r`` left singular vectors of ``g`` (exact SVD)."""
    return svd_small(g).u[:, :r].copy()


def galore_adamw_step(w, g, state, hp):
    w, g = _inputs(w, g)
    m, n = w.shape
    r = hp.rank
    if r > min(m, n):
        raise ConfigError(f"GaLore rank {r} exceeds min({m}, {n})", "rank")
    if state.projector.shape != (m, r) or state.m_low.shape != (r, n):
        raise ShapeError(f"GaLore state does not match parameter {w.shape} at rank {r}")

    if (state.t - 1) % hp.galore_update_freq == 0:
        p = galore_projector(g, r)
    else:
        p = state.projector
    low = p.T @ g
    m_low = hp.beta1 * state.m_low + (1.0 - hp.beta1) * low
    v_low = hp.beta2 * state.v_low + (1.0 - hp.beta2) * low * low
    n_low = _adam_direction(m_low, v_low, state.t, hp)
    w_new = w - hp.alpha * (p @ n_low + hp.weight_decay * w)
    return w_new, GaLoreState(p, m_low, v_low, state.t + 1)


def optimizer_step(kind, w, g, state, hp, rng=None, trace=None):
    """Dispatch to the step function for ``kind``.

    ``rng`` is required for the compressed variants and ignored otherwise.
    """
    if kind not in STATE_TYPES:
        raise ConfigError(f"unknown optimizer kind {kind!r}; expected one of {KINDS}", "kind")
    if not isinstance(state, STATE_TYPES[kind]):
        raise ConfigError(f"state {type(state).__name__} does not belong to optimizer {kind!r}", "kind")
    if kind == "adamw":
        return adamw_step(w, g, state, hp)
    if kind == "lion":
        return lion_step(w, g, state, hp)
    if kind == "galore-adamw":
        return galore_adamw_step(w, g, state, hp)
    if rng is None:
        raise ValueError(f"{kind} needs an RngStream")
    if kind == "mlorc-adamw":
        return mlorc_adamw_step(w, g, state, hp, rng, trace)
    return mlorc_lion_step(w, g, state, hp, rng, trace)
