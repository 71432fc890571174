"""Entangled dual-comb spectroscopy simulator and analysis toolkit."""

__version__ = "0.1.0"

from .gaussian import (
    PairState,
    QuadratureSelector,
    SingleModeState,
    apply_loss,
    displace,
    mixed_tmsv_from_measured,
    quadrature_variance,
    sample_quadrature,
    tmsv_state,
    vacuum_pair,
)

__all__ = [
    "__version__",
    "PairState",
    "SingleModeState",
    "QuadratureSelector",
    "vacuum_pair",
    "tmsv_state",
    "mixed_tmsv_from_measured",
    "displace",
    "apply_loss",
    "quadrature_variance",
    "sample_quadrature",
]
