"""Gaussian clump (coherent) states and their overlaps."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

# exp(x) underflows to subnormals near -708; below this the overlap is reported as 0
LOG_UNDERFLOW = -700.0


@dataclass(frozen=True)
class ClumpProfile:
    """Gaussian clump of mean particle number ``n_particles``.

    Parameters
    ----------
    n_particles : float
        Mean particle number N.
    sigma : float
        Spatial width.
    center : float
        Clump position.
    """

    n_particles: float
    sigma: float
    center: float = 0.0

    def __post_init__(self):
        if not self.n_particles > 0:
            raise ValueError("n_particles must be positive")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def width_is_wide(self, m: float, factor: float = 1.0) -> bool:
        """True when ``sigma * m`` exceeds ``factor`` (advisory only)."""
        return self.sigma * m > factor

    def check_width(self, m: float) -> bool:
        """Warn when the clump is not much wider than the Compton length."""
        ok = self.width_is_wide(m)
        if not ok:
            warnings.warn(
                f"sigma*m = {self.sigma * m:.3g} < 1: the clump is narrower than 1/m", stacklevel=2
            )
        return ok


@dataclass(frozen=True)
class ClumpPair:
    """Two clumps sharing shape (N, sigma) at different centres."""

    left: ClumpProfile
    right: ClumpProfile

    def __post_init__(self):
        _check_shared(self.left, self.right)

    def __getitem__(self, s: int) -> ClumpProfile:
        """Clump by 1-based index ``s`` in {1, 2}."""
        if s == 1:
            return self.left
        if s == 2:
            return self.right
        raise IndexError("clump index must be 1 or 2")

    @property
    def n_particles(self) -> float:
        return self.left.n_particles

    @property
    def sigma(self) -> float:
        return self.left.sigma

    @property
    def separation(self) -> float:
        return abs(self.left.center - self.right.center)


def _check_shared(a: ClumpProfile, b: ClumpProfile) -> None:
    if not math.isclose(a.n_particles, b.n_particles, rel_tol=1e-12):
        raise ValueError("clumps must share the particle number N")
    if not math.isclose(a.sigma, b.sigma, rel_tol=1e-12):
        raise ValueError("clumps must share the width sigma")


def chi_position(x, p: ClumpProfile):
    """Real clump amplitude chi(x)."""
    x = np.asarray(x, dtype=float)
    amp = math.sqrt(p.n_particles) * (2.0 * math.pi * p.sigma**2) ** -0.25
    out = amp * np.exp(-((x - p.center) ** 2) / (4.0 * p.sigma**2))
    return float(out) if out.ndim == 0 else out


def chi_momentum(k, p: ClumpProfile):
    """Complex clump amplitude in momentum space.

    Defined for any real k; negative momenta satisfy
    ``chi_momentum(-k) == conj(chi_momentum(k))``.
    """
    k = np.asarray(k, dtype=float)
    amp = math.sqrt(p.n_particles) * (2.0 * p.sigma**2 / math.pi) ** 0.25
    out = amp * np.exp(-(k**2) * p.sigma**2) * np.exp(-1j * k * p.center)
    return complex(out) if out.ndim == 0 else out


def log_clump_overlap(a: ClumpProfile, b: ClumpProfile) -> float:
    """Logarithm of the clump inner product, safe for very large N."""
    _check_shared(a, b)
    r = (a.center - b.center) ** 2 / (8.0 * a.sigma**2)
    # -N (1 - e^{-r}) == N * expm1(-r), accurate for small r as well
    return a.n_particles * math.expm1(-r)


def clump_overlap(a: ClumpProfile, b: ClumpProfile) -> float:
    """Inner product of two clumps; 0.0 once the log drops below ``LOG_UNDERFLOW``."""
    lg = log_clump_overlap(a, b)
    if lg < LOG_UNDERFLOW:
        return 0.0
    return math.exp(lg)
