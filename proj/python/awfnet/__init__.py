"""Adaptive wavelet filter networks: python surface over the C++ core.

The heavy lifting lives in the compiled ``awfnet._core`` extension; this
package re-exports its operations.
"""

from awfnet._core import (
    AwfNet,
    AwfnetError,
    auc,
    balance_factors,
    bc_loss,
    calibration_errors,
    ce_gradient,
    ce_loss,
    classification_metrics,
    cs_loss,
    dwt2,
    focal_loss,
    full_metrics,
    generate_synthetic,
    gradcheck_suite,
    idwt2,
    run_training,
    __version__,
)

__all__ = [
    "AwfNet",
    "AwfnetError",
    "auc",
    "balance_factors",
    "bc_loss",
    "calibration_errors",
    "ce_gradient",
    "ce_loss",
    "classification_metrics",
    "cs_loss",
    "dwt2",
    "focal_loss",
    "full_metrics",
    "generate_synthetic",
    "gradcheck_suite",
    "idwt2",
    "run_training",
    "__version__",
]
