"""Momentum low-rank compression (MLorc) for AdamW and Lion, with exact and GaLore baselines."""
from mlorc.compress import CorrectionReport, correct_nonneg, zeta
from mlorc.linalg import SvdResult, frob_norm, l11_norm, matmul, qr_thin, svd_small
from mlorc.optimizers import (
    HyperParams,
    adamw_step,
    galore_adamw_step,
    init_state,
    lion_step,
    mlorc_adamw_step,
    mlorc_lion_step,
    optimizer_step,
)
from mlorc.lowrank import FactoredMomentum, RngStream, gaussian_matrix, reconstruct, rsvd

__version__ = "0.1.0"
