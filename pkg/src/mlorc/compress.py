"""Non-negativity repair for a reconstructed second moment."""
from dataclasses import dataclass

import numpy as np

from mlorc.linalg import as_matrix


@dataclass(frozen=True)
class CorrectionReport:
    zeta: float
    negative_count: int


def zeta(v_tilde):
    """Absolute mean of the strictly negative entries (0 when there are none)."""
    v_tilde = as_matrix(v_tilde, "v_tilde")
    neg = v_tilde[v_tilde < 0]
    if neg.size == 0:
        return CorrectionReport(zeta=0.0, negative_count=0)
    return CorrectionReport(zeta=float(np.mean(-neg)), negative_count=int(neg.size))


def correct_nonneg(v_tilde, report=None):
    """ReLU, then fill the formerly negative entries with ``zeta(v_tilde)``."""
    v_tilde = as_matrix(v_tilde, "v_tilde")
    if report is None:
        report = zeta(v_tilde)
    out = v_tilde.copy()
    out[v_tilde < 0] = report.zeta
    return out
