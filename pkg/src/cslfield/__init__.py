"""Closed-form and brute-force tools for a 1-D CSL scalar-field collapse model."""

from .units_modes import (
    ModelParams,
    ModeGrid,
    build_mode_grid,
    dispersion,
    oscillation_period,
    stroboscopic_times,
)
from .clump_states import (
    ClumpPair,
    ClumpProfile,
    chi_momentum,
    chi_position,
    clump_overlap,
    log_clump_overlap,
)

__version__ = "0.1.0"

__all__ = [
    "ModelParams",
    "ModeGrid",
    "build_mode_grid",
    "dispersion",
    "oscillation_period",
    "stroboscopic_times",
    "ClumpPair",
    "ClumpProfile",
    "chi_momentum",
    "chi_position",
    "clump_overlap",
    "log_clump_overlap",
]
