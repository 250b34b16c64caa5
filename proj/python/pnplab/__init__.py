"""Synths, JTFS features and PNP kernels for perceptual sound matching."""

from ._core import (
    PnpError,
    damped_condition,
    eig_sym,
    features,
    jacobian,
    metric,
    mss_distance,
    pnp_quadratic,
    resolve_config,
    sample_rate,
    scale,
    synth_chirp,
    synth_drum,
    unscale,
)

__all__ = [
    "PnpError",
    "damped_condition",
    "eig_sym",
    "features",
    "jacobian",
    "metric",
    "mss_distance",
    "pnp_quadratic",
    "resolve_config",
    "sample_rate",
    "scale",
    "synth_chirp",
    "synth_drum",
    "unscale",
]
