"""Spectral concentration, gradient-norm traces and optimizer-state accounting.

Memory figures are element counts, not bytes. Singular values always come
from the exact SVD, never from the randomized one.
"""
from dataclasses import dataclass

import numpy as np

from mlorc.errors import ConfigError, DomainError
from mlorc.linalg import as_matrix, l11_norm, svd_small
from mlorc.optimizers import (
    AdamWState,
    GaLoreState,
    LionState,
    MLorcAdamWState,
    MLorcLionState,
)

MEMORY_METHODS = ("full-adamw", "lora-adamw", "galore", "mlorc-adamw")


@dataclass(frozen=True)
class SpectralRatio:
    k: int
    ratio: float


@dataclass(frozen=True)
class MemoryCount:
    weights: int
    optimizer_states: int
    method: str


def topk_ratio(a, k=8):
    """Share of the nuclear norm carried by the ``k`` largest singular values."""
    a = as_matrix(a)
    if not 1 <= k <= min(a.shape):
        raise DomainError(f"k must be in [1, {min(a.shape)}], got {k}")
    s = svd_small(a).s
    total = float(np.sum(s))
    if total <= 0.0:
        raise DomainError("top-k ratio is undefined for the zero matrix")
    return SpectralRatio(k=k, ratio=min(1.0, float(np.sum(s[:k])) / total))


def memory_count(method, m, n, r):
    if min(m, n, r) < 1:
        raise ConfigError(f"m, n, r must be >= 1, got ({m}, {n}, {r})")
    if method == "full-adamw":
        return MemoryCount(m * n, 2 * m * n, method)
    if method == "lora-adamw":
        return MemoryCount(m * n + m * r + n * r, 2 * m * r + 2 * n * r, method)
    if method == "galore":
        return MemoryCount(m * n, m * r + 2 * n * r, method)
    if method == "mlorc-adamw":
        return MemoryCount(m * n, 2 * m * r + 2 * n * r, method)
    raise ConfigError(f"unknown method {method!r}; expected one of {MEMORY_METHODS}", "method")


@dataclass
class LoraAdamWState:
    """Storage layout of AdamW on LoRA adapters ``B`` (m x r) and ``A`` (r x n).

    Accounting only; LoRA is not a runnable optimizer here.
    """

    m_b: np.ndarray
    v_b: np.ndarray
    m_a: np.ndarray
    v_a: np.ndarray

    @classmethod
    def zeros(cls, m, n, r):
        return cls(np.zeros((m, r)), np.zeros((m, r)), np.zeros((r, n)), np.zeros((r, n)))


def measured_state_elements(state):
    """Real numbers actually held in the state's moment structures.

    Singular-value vectors of factored moments are treated as absorbed into
    a neighbouring factor and are not counted.
    """
    if isinstance(state, AdamWState):
        return state.m.size + state.v.size
    if isinstance(state, LionState):
        return state.m.size
    if isinstance(state, MLorcAdamWState):
        return sum(f.u.size + f.v.size for f in (state.fm, state.fv))
    if isinstance(state, MLorcLionState):
        return state.fm.u.size + state.fm.v.size
    if isinstance(state, GaLoreState):
        return state.projector.size + state.m_low.size + state.v_low.size
    if isinstance(state, LoraAdamWState):
        return state.m_b.size + state.v_b.size + state.m_a.size + state.v_a.size
    raise TypeError(f"unsupported state type {type(state).__name__}")


def grad_l11_trace(gradients):
    """Per-step l1,1 norms of ``gradients`` and their running average."""
    norms = np.array([l11_norm(g) for g in gradients], dtype=np.float64)
    if norms.size == 0:
        return norms, norms.copy()
    running = np.cumsum(norms) / np.arange(1, norms.size + 1)
    return norms, running
