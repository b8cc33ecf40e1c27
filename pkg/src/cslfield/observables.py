"""Time-dependent summaries: particle production, energy, decoherence, K.

Each mode k carries two independent oscillators (centre-of-mass and
relative combinations of the +k and -k amplitudes), one collapsing in a
position-like and one in a momentum-like variable.  Both obey the same
single-oscillator master equation, so ``n_a + n_b`` at a mode equals the
sum of the two oscillator mean numbers and each grows at ``lam / 2w``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .clump_states import ClumpPair
from .field_density import clump_dm, log_k_factor
from .units_modes import ModeGrid, ModelParams, dispersion


@dataclass(frozen=True)
class TimeSeries:
    times: np.ndarray
    values: np.ndarray
    label: str = ""
    units: str = ""

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values)
        if t.ndim != 1 or v.shape[:1] != t.shape:
            raise ValueError("times and values must have equal lengths")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.times.size


def mode_occupation(t, k, n0_a, n0_b, params: ModelParams):
    """Occupations ``(n_a, n_b)`` of the two operators at mode k."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be non-negative")
    growth = params.lam * np.asarray(t) / (2.0 * dispersion(k, params.m))
    return n0_a + growth, n0_b + growth


def mode_energy(t, k, e0, params: ModelParams):
    """Energy of mode k: ``lam t + e0``, the same for every k."""
    dispersion(k, params.m)
    return params.lam * np.asarray(t) + e0


@dataclass(frozen=True)
class EnergyDensity:
    """Energy per unit length at one time, per mode and summed.

    The rates scale with the number of modes, so the total grows without
    bound as ``k_max`` is raised.
    """

    t: float
    k_values: np.ndarray
    per_mode: np.ndarray
    total: float
    rate_per_mode: float
    total_rate: float


def energy_density(t, grid: ModeGrid, e0, params: ModelParams) -> EnergyDensity:
    """Energy density contributions at time ``t``.

    ``e0`` is the initial energy of each mode (scalar or one value per
    mode); its density contribution is ``e0 / L``.
    """
    L = grid.box_length
    rate = grid.dk * params.lam / (2.0 * math.pi)
    e0 = np.broadcast_to(np.asarray(e0, dtype=float), grid.k_values.shape)
    per_mode = rate * t + e0 / L
    return EnergyDensity(
        float(t),
        grid.k_values,
        per_mode,
        math.fsum(per_mode),
        rate,
        rate * grid.n_modes,
    )


def decoherence_curve(times, pair: ClumpPair, grid: ModeGrid, params: ModelParams, exact_terms: bool = True) -> TimeSeries:
    """Off-diagonal to diagonal clump-basis ratio versus time."""
    vals = [clump_dm(t, pair, grid, params, exact_terms).ratio for t in times]
    return TimeSeries(np.asarray(times, float), np.array(vals), "offdiag/diag", "1")


def no_particle_probability(times, grid: ModeGrid, params: ModelParams) -> TimeSeries:
    """K(t), the weight of the sector with no created particles."""
    vals = [math.exp(log_k_factor(t, grid, params)) for t in times]
    return TimeSeries(np.asarray(times, float), np.array(vals), "K", "1")


def fit_slope(times, values) -> float:
    """Ordinary least-squares slope of ``values`` against ``times``."""
    t = np.asarray(times, dtype=float)
    A = np.column_stack([t, np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(A, np.asarray(values, dtype=float), rcond=None)
    return float(coef[0])


@dataclass
class ProductionFit:
    k: float
    omega: float
    times: np.ndarray
    n_a: np.ndarray
    n_b: np.ndarray
    energy: np.ndarray
    occupation_slope: float = field(init=False)
    energy_slope: float = field(init=False)

    def __post_init__(self):
        self.occupation_slope = fit_slope(self.times, self.n_a)
        self.energy_slope = fit_slope(self.times, self.energy)


def oracle_production(k, params: ModelParams, times, n_max=None) -> ProductionFit:
    """Particle production at one mode from the truncated-Fock integrator.

    Both oscillators start in the vacuum.  One integration serves both,
    since the momentum-collapse problem is a relabelling of the
    position-collapse one; ``n_a = n_b`` is half their summed mean number.
    """
    from .fock_oracle import evolve_lindblad, moments

    w = float(dispersion(k, params.m))
    times = np.sort(np.asarray(times, dtype=float))
    states = evolve_lindblad(0.0, 0.0, params.lam, w, times, n_max=n_max)
    n_one = np.array([moments(d).n_mean.real for d in states])
    tot = 2.0 * n_one
    return ProductionFit(float(k), w, times, 0.5 * tot, 0.5 * tot, w * tot)
