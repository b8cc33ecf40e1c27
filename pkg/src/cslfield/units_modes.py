"""Physical parameters, dispersion, momentum grids and stroboscopic times.

Natural units (hbar = c = 1) are used throughout.  A box of length ``L``
quantises momenta with spacing ``dk = 2*pi/L``; the grid uses midpoints
``k_j = (j + 1/2) dk`` so that ``k = 0`` never appears.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class ModelParams:
    """Model constants.

    Parameters
    ----------
    m : float
        Field mass.
    lam : float
        Collapse rate.
    box_length : float
        Length ``L`` of the quantisation box.
    k_max : float
        Momentum cutoff, must exceed ``m``.
    """

    m: float
    lam: float
    box_length: float
    k_max: float

    def __post_init__(self):
        if not (self.m > 0 and math.isfinite(self.m)):
            raise ValueError(f"m must be positive and finite, got {self.m}")
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError(f"lam must be non-negative and finite, got {self.lam}")
        if not (self.box_length > 0 and math.isfinite(self.box_length)):
            raise ValueError(f"box_length must be positive, got {self.box_length}")
        if not (self.k_max > self.m and math.isfinite(self.k_max)):
            raise ValueError(f"k_max must exceed m, got k_max={self.k_max}, m={self.m}")

    @property
    def dk(self) -> float:
        return 2.0 * math.pi / self.box_length


@dataclass(frozen=True)
class ModeGrid:
    """Ordered positive momenta on a uniform midpoint grid."""

    k_values: np.ndarray
    dk: float
    k_max: float = field(default=math.inf)

    def __post_init__(self):
        k = np.asarray(self.k_values, dtype=float)
        k.setflags(write=False)
        object.__setattr__(self, "k_values", k)
        if k.ndim != 1 or k.size < 2:
            raise ValueError("a mode grid needs at least 2 modes")
        if np.any(k <= 0) or np.any(np.diff(k) <= 0):
            raise ValueError("k_values must be positive and strictly increasing")

    def __len__(self) -> int:
        return self.k_values.size

    @property
    def n_modes(self) -> int:
        return self.k_values.size

    @property
    def box_length(self) -> float:
        return 2.0 * math.pi / self.dk

    def omega(self, m: float) -> np.ndarray:
        """Mode energies for mass ``m``."""
        return dispersion(self.k_values, m)


def dispersion(k, m):
    """Relativistic dispersion ``sqrt(m**2 + k**2)``.

    Accepts scalars or arrays; negative input is rejected.
    """
    k_arr = np.asarray(k, dtype=float)
    if np.any(k_arr < 0):
        raise ValueError("momentum must be non-negative")
    if not m > 0:
        raise ValueError("mass must be positive")
    out = np.hypot(m, k_arr)
    return float(out) if out.ndim == 0 else out


def build_mode_grid(params: ModelParams) -> ModeGrid:
    """Midpoint momentum grid ``k_j = (j + 1/2) dk`` below the cutoff."""
    dk = params.dk
    n = int(math.floor(params.k_max / dk + 1e-12))
    if n < 2:
        raise ValueError(
            f"only {n} mode(s) fit below k_max={params.k_max} with dk={dk}; need at least 2"
        )
    k = (np.arange(n) + 0.5) * dk
    return ModeGrid(k_values=k, dk=dk, k_max=params.k_max)


def oscillation_period(m: float) -> float:
    """Period ``tau = 2*pi/m`` of the slowest mode."""
    if not m > 0:
        raise ValueError("mass must be positive")
    return 2.0 * math.pi / m


class StroboscopicTimes(NamedTuple):
    """Times that are whole multiples of the period.

    ``multiples`` holds the integers n with ``times = n * tau``; ``warning``
    is set when no multiple fits below ``t_final``.
    """

    times: np.ndarray
    multiples: np.ndarray
    warning: bool


def stroboscopic_times(t_final: float, m: float, max_samples: int) -> StroboscopicTimes:
    """Integer multiples of ``2*pi/m`` up to ``t_final``, thinned uniformly.

    With more candidate multiples than ``max_samples`` the retained ones
    are ``round(i * n_total / max_samples)`` for ``i = 1..max_samples``.
    """
    if not t_final > 0:
        raise ValueError("t_final must be positive")
    if max_samples < 1:
        raise ValueError("max_samples must be at least 1")
    tau = oscillation_period(m)
    n_total = int(math.floor(t_final / tau * (1.0 + 4e-16) + 1e-9))
    if n_total < 1:
        warnings.warn("t_final is shorter than one period; no stroboscopic times", stacklevel=2)
        return StroboscopicTimes(np.empty(0), np.empty(0, dtype=np.int64), True)
    if n_total <= max_samples:
        mult = np.arange(1, n_total + 1, dtype=np.int64)
    else:
        idx = np.arange(1, max_samples + 1)
        mult = np.unique(np.rint(idx * n_total / max_samples).astype(np.int64))
    # n * (2*pi/m) with a single rounding: exact integer times 2*pi in extended form
    times = np.array([_multiple_of_period(int(n), m) for n in mult])
    return StroboscopicTimes(times, mult, False)


def _multiple_of_period(n: int, m: float) -> float:
    # split 2*pi into high/low parts so n*2*pi is formed without an extra rounding
    hi = 6.283185307179586
    lo = 2.4492935982947064e-16
    return (n * hi + n * lo) / m
