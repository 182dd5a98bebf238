"""Multi-view Bayesian GP-LVM with per-view ARD relevance weights."""

from ._mrd import (
    DataError,
    DimensionError,
    InvalidArgument,
    Model,
    MrdError,
    NumericalError,
    SingularMatrixError,
    VersionError,
    classify,
    gradcheck,
    init_model,
    load_model,
    predictive_mean,
    psi_stats,
    sample_traversal,
    segment,
    synth,
    train,
    transfer,
)

__all__ = [
    "DataError",
    "DimensionError",
    "InvalidArgument",
    "Model",
    "MrdError",
    "NumericalError",
    "SingularMatrixError",
    "VersionError",
    "classify",
    "gradcheck",
    "init_model",
    "load_model",
    "predictive_mean",
    "psi_stats",
    "sample_traversal",
    "segment",
    "synth",
    "train",
    "transfer",
]
