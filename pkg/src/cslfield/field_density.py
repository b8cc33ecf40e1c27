"""Density-matrix functionals in the field basis and in the clump basis.

Field-basis elements are reported as exponents (natural log) with the
Gaussian measure prefactors left out; those prefactors are absorbed into
the functional integration element and only exponents and ratios carry
physical meaning.  Cross-mode sums run over the grid in ascending k using
``math.fsum`` so results are reproducible bit for bit.

The H = 0 expressions use ``w(k)`` wherever it appears.  For H != 0 the
``mass_shell_chi`` switch evaluates every clump-dependent piece with
``w -> m`` (clump amplitudes live at ``k << m``), which is what makes the
long-time limit finite; turn it off for the literal per-mode expression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .clump_states import ClumpPair, chi_momentum
from .units_modes import ModeGrid, ModelParams, dispersion

NEG_INF_SENTINEL = "-inf"


@dataclass(frozen=True)
class DMElementLog:
    """Log-domain carrier ``value = sign * exp(log_magnitude)``."""

    log_magnitude: float
    sign: int = 1

    def __post_init__(self):
        if math.isnan(self.log_magnitude):
            raise ValueError("log magnitude is NaN")
        if self.sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")

    @property
    def value(self) -> float:
        return self.sign * math.exp(self.log_magnitude)

    def serialize(self) -> str:
        if self.log_magnitude == -math.inf:
            return NEG_INF_SENTINEL
        return repr(float(self.log_magnitude))


@dataclass(frozen=True)
class FieldProfile:
    """Real field on an x-lattice together with its transform on the mode grid.

    The lattice has ``2M`` points of spacing ``L / 2M`` for ``M`` grid modes,
    starting at ``x0``.  With the midpoint momenta ``(j + 1/2) dk`` this
    pairing is an exact (anti-periodic) discrete Fourier pair, so
    ``sum_x f^2 dx == 2 dk sum_k |f~|^2``.
    """

    f_samples: np.ndarray
    f_tilde: np.ndarray
    grid: ModeGrid
    x0: float

    @property
    def x(self) -> np.ndarray:
        return lattice(self.grid, self.x0)

    @classmethod
    def from_samples(cls, f_samples, grid: ModeGrid, x0: float | None = None) -> "FieldProfile":
        x0 = -0.5 * grid.box_length if x0 is None else x0
        f = np.asarray(f_samples, dtype=float)
        if f.shape != (2 * grid.n_modes,):
            raise ValueError("need 2 * n_modes real samples")
        return cls(f, forward_transform(f, grid, x0), grid, x0)

    @classmethod
    def from_function(cls, func, grid: ModeGrid, x0: float | None = None) -> "FieldProfile":
        x0 = -0.5 * grid.box_length if x0 is None else x0
        return cls.from_samples(func(lattice(grid, x0)), grid, x0)

    @classmethod
    def from_tilde(cls, f_tilde, grid: ModeGrid, x0: float | None = None) -> "FieldProfile":
        x0 = -0.5 * grid.box_length if x0 is None else x0
        ft = np.asarray(f_tilde, dtype=complex)
        if ft.shape != (grid.n_modes,):
            raise ValueError("need one amplitude per mode")
        return cls(inverse_transform(ft, grid, x0), ft, grid, x0)


def lattice(grid: ModeGrid, x0: float) -> np.ndarray:
    n = 2 * grid.n_modes
    return x0 + np.arange(n) * (grid.box_length / n)


def forward_transform(f_samples, grid: ModeGrid, x0: float) -> np.ndarray:
    """``f~(k_j) = dx / sqrt(2 pi) * sum_n f(x_n) exp(-i k_j x_n)`` for grid modes."""
    M = grid.n_modes
    n = np.arange(2 * M)
    dx = grid.box_length / (2 * M)
    spec = np.fft.fft(np.asarray(f_samples) * np.exp(-1j * np.pi * n / (2 * M)))[:M]
    return dx / math.sqrt(2 * math.pi) * np.exp(-1j * grid.k_values * x0) * spec


def inverse_transform(f_tilde, grid: ModeGrid, x0: float) -> np.ndarray:
    """Real field ``(2 dk / sqrt(2 pi)) Re sum_k f~(k) exp(i k x)`` on the lattice."""
    M = grid.n_modes
    n = np.arange(2 * M)
    g = np.zeros(2 * M, dtype=complex)
    g[:M] = np.asarray(f_tilde) * np.exp(1j * grid.k_values * x0)
    s = np.exp(1j * np.pi * n / (2 * M)) * np.fft.ifft(g) * (2 * M)
    return (2.0 * grid.dk / math.sqrt(2 * math.pi)) * s.real


def _fsum(v) -> float:
    return math.fsum(np.asarray(v, dtype=float).ravel())


# ---------------------------------------------------------------- H = 0


def h0_mode_exponent(f_k, fp_k, k, t, chi_s, chi_sp, params: ModelParams):
    """Per-mode exponent of the H = 0 field-basis element (broadcasts over k)."""
    w = dispersion(k, params.m)
    dk = params.dk
    c = math.sqrt(2.0 / params.m)
    val = (
        -params.lam * t * dk * np.abs(f_k - fp_k) ** 2
        - dk * w * np.abs(f_k - c * chi_s) ** 2
        - dk * w * np.abs(fp_k - c * chi_sp) ** 2
    )
    return float(val) if np.ndim(val) == 0 else val


def _pair_chis(pair: ClumpPair, grid: ModeGrid):
    return {1: chi_momentum(grid.k_values, pair[1]), 2: chi_momentum(grid.k_values, pair[2])}


def _logsumexp_pairs(exps) -> DMElementLog:
    lg = math.log(0.5) + float(logsumexp(np.array(exps)))
    return DMElementLog(lg, 1)


def h0_field_element_log(f: FieldProfile, fp: FieldProfile, t, pair: ClumpPair, grid: ModeGrid, params: ModelParams) -> DMElementLog:
    """``log <f| rho(t) |f'>`` for H = 0, summed over the four clump pairings."""
    chis = _pair_chis(pair, grid)
    k = grid.k_values
    exps = [
        _fsum(h0_mode_exponent(f.f_tilde, fp.f_tilde, k, t, chis[s], chis[sp], params))
        for s in (1, 2)
        for sp in (1, 2)
    ]
    return _logsumexp_pairs(exps)


def h0_exponent_xspace(f: FieldProfile, fp: FieldProfile, t, chi_s_x, chi_sp_x, params: ModelParams) -> float:
    """Total H = 0 exponent evaluated on the x-lattice.

    ``[m^2 - d^2/dx^2]^{1/4}`` acts as multiplication by ``sqrt(w(k))`` in
    k-space.  ``chi_s_x`` and ``chi_sp_x`` are clump amplitudes sampled on
    the lattice.
    """
    grid = f.grid
    dx = grid.box_length / (2 * grid.n_modes)
    c = math.sqrt(2.0 / params.m)
    root_w = np.sqrt(grid.omega(params.m))

    def smoothed(g):
        return inverse_transform(root_w * forward_transform(g, grid, f.x0), grid, f.x0)

    a = smoothed(f.f_samples - c * np.asarray(chi_s_x))
    b = smoothed(fp.f_samples - c * np.asarray(chi_sp_x))
    return (
        -params.lam * t * 0.5 * _fsum((f.f_samples - fp.f_samples) ** 2) * dx
        - 0.5 * _fsum(a * a) * dx
        - 0.5 * _fsum(b * b) * dx
    )


def h0_maximizer(k, t, chi_s, chi_sp, params: ModelParams):
    """Field amplitudes maximising the per-mode H = 0 exponent."""
    w = dispersion(k, params.m)
    lt = params.lam * t
    c = math.sqrt(2.0 / params.m) / (2.0 * lt + w)
    f0 = c * (lt * (chi_s + chi_sp) + w * chi_s)
    f0p = c * (lt * (chi_s + chi_sp) + w * chi_sp)
    return f0, f0p


def h0_max_exponent(k, t, chi_s, chi_sp, params: ModelParams):
    """Maximum of the per-mode H = 0 exponent, per unit dk."""
    w = dispersion(k, params.m)
    lt = params.lam * t
    val = -(2.0 * lt * w) / (params.m * (2.0 * lt + w)) * np.abs(chi_s - chi_sp) ** 2
    return float(val) if np.ndim(val) == 0 else val


def h0_max_limit_log(pair: ClumpPair, grid: ModeGrid, params: ModelParams, mass_shell: bool = False) -> float:
    """Late-time maximum of ``log <f0| rho_12 |f0'>`` summed over modes.

    With ``mass_shell`` the factor ``w/m`` is set to 1.
    """
    chis = _pair_chis(pair, grid)
    d2 = np.abs(chis[1] - chis[2]) ** 2
    ratio = 1.0 if mass_shell else grid.omega(params.m) / params.m
    return -_fsum(grid.dk * ratio * d2)


def gaussian_pair_integral(alpha, A, B, C, D) -> float:
    """Closed form of ``int dx dx' exp(-alpha (x-x')^2 - (x-A)^2 - (x-B)^2 - (x'-C)^2 - (x'-D)^2)``."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    lg = (
        math.log(math.pi / (2.0 * math.sqrt(alpha + 1.0)))
        - 0.5 * (A - B) ** 2
        - 0.5 * (C - D) ** 2
        - alpha * (A + B - C - D) ** 2 / (4.0 * (alpha + 1.0))
    )
    return math.exp(lg)


# ---------------------------------------------------------------- clump basis


def clump_basis_mode_log(i, j, s, sp, k, t, pair: ClumpPair, params: ModelParams, mass_shell: bool = False):
    """Log of the per-mode clump-basis element ``<l_i| rho_{s s'} |l_j>``.

    With ``mass_shell`` the decay exponent uses ``lam t / m`` (the K-type
    prefactor keeps ``w(k)``).
    """
    w = dispersion(k, params.m)
    r = params.lam * t / w
    r_chi = params.lam * t / params.m if mass_shell else r
    dk = params.dk
    ci, cj = chi_momentum(k, pair[i]), chi_momentum(k, pair[j])
    cs, csp = chi_momentum(k, pair[s]), chi_momentum(k, pair[sp])
    val = (
        -np.log1p(r)
        - r_chi / (2.0 * (1.0 + r_chi)) * dk * np.abs(ci + cs - cj - csp) ** 2
        - dk * np.abs(ci - cs) ** 2
        - dk * np.abs(cj - csp) ** 2
    )
    return float(val) if np.ndim(val) == 0 else val


def clump_basis_mode_element(i, j, s, sp, k, t, pair: ClumpPair, params: ModelParams, mass_shell: bool = False):
    """Per-mode clump-basis element (see :func:`clump_basis_mode_log`)."""
    return np.exp(clump_basis_mode_log(i, j, s, sp, k, t, pair, params, mass_shell))


def log_k_factor(t, grid: ModeGrid, params: ModelParams) -> float:
    """``log K = -(L/2 pi) sum_k dk ln(lam t / w + 1)``, cutoff-dependent."""
    w = grid.omega(params.m)
    L = 2.0 * math.pi / grid.dk
    return -(L / (2.0 * math.pi)) * _fsum(grid.dk * np.log1p(params.lam * t / w))


def k_factor(t, grid: ModeGrid, params: ModelParams, route: str = "log") -> float:
    """Weight of the no-created-particle sector.

    ``route="log"`` sums logarithms; ``route="product"`` multiplies
    ``1/(lam t / w + 1)`` mode by mode.
    """
    if route == "log":
        return math.exp(log_k_factor(t, grid, params))
    if route == "product":
        w = grid.omega(params.m)
        out = 1.0
        for v in params.lam * t / w:
            out /= v + 1.0
        return out
    raise ValueError(f"unknown route {route!r}")


def s_bar(t, params: ModelParams) -> float:
    r = params.lam * t / params.m
    return r / (r + 1.0)


@dataclass(frozen=True)
class ClumpBasisDM:
    """2x2 clump-basis density matrix.

    ``reduced`` holds the elements divided by K so the decoherence ratio
    survives when K itself underflows; ``elements = k_factor * reduced``.
    """

    elements: np.ndarray
    reduced: np.ndarray
    k_factor: float
    log_k_factor: float
    s_bar: float

    @property
    def ratio(self) -> float:
        return float(self.reduced[0, 1] / self.reduced[0, 0])

    @property
    def log_ratio(self) -> float:
        return math.log(self.reduced[0, 1]) - math.log(self.reduced[0, 0])


def clump_dm(t, pair: ClumpPair, grid: ModeGrid, params: ModelParams, exact_terms: bool = True) -> ClumpBasisDM:
    """Clump-basis elements.

    With ``exact_terms`` every ``exp(-N)`` term is retained.  Setting it to
    False drops them (the large-N comparison mode), leaving ``K/2`` on the
    diagonal and ``(K/2) exp(-2 N s_bar)`` off it.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    N = pair.n_particles
    sb = s_bar(t, params)
    if exact_terms:
        cross = 2.0 * math.exp(-N * (1.0 + 0.5 * sb))
        diag = 0.5 * (1.0 + math.exp(-2.0 * N) + cross)
        off = 0.5 * (math.exp(-2.0 * N * sb) + math.exp(-2.0 * N) + cross)
    else:
        diag = 0.5
        off = 0.5 * math.exp(-2.0 * N * sb)
    reduced = np.array([[diag, off], [off, diag]])
    lk = log_k_factor(t, grid, params)
    K = math.exp(lk)
    return ClumpBasisDM(K * reduced, reduced, K, lk, sb)


def decoherence_limit_ratio(n_particles: float, exact_terms: bool = True) -> float:
    """Late-time value of the off-diagonal to diagonal ratio.

    Only the collapse term survives as ``exp(-2N)`` when the ``exp(-N)``
    corrections are dropped; with them kept the ratio levels off at
    ``(2 e^{-2N} + 2 e^{-3N/2}) / (1 + e^{-2N} + 2 e^{-3N/2})``.
    """
    N = n_particles
    if not exact_terms:
        return math.exp(-2.0 * N)
    c = 2.0 * math.exp(-1.5 * N)
    e2 = math.exp(-2.0 * N)
    return (2.0 * e2 + c) / (1.0 + e2 + c)


def clump_mode_product_log(i, j, s, sp, t, pair: ClumpPair, grid: ModeGrid, params: ModelParams, mass_shell: bool = True, include_k: bool = False) -> float:
    """Sum over the grid of per-mode clump-basis logs.

    With ``include_k=False`` the ``1/(lam t/w + 1)`` prefactors are
    dropped, leaving the clump-dependent exponent only.
    """
    vals = clump_basis_mode_log(i, j, s, sp, grid.k_values, t, pair, params, mass_shell)
    if not include_k:
        vals = vals + np.log1p(params.lam * t / grid.omega(params.m))
    return _fsum(vals)


# ---------------------------------------------------------------- H != 0


def _S_of(lam, t, w):
    a = lam * t / (2.0 * w)
    return a / (1.0 + a), 1.0 / (1.0 + a)


def h_mode_exponent(f_k, fp_k, k, t, chi_s, chi_sp, params: ModelParams, mass_shell_chi: bool = True, strict: bool = False):
    """Per-mode exponent of the field-basis element with the oscillator Hamiltonian.

    Returns
    -------
    log_gauss : float or ndarray
        The exponent.
    log_prefactor : float or ndarray
        ``ln(2(1-S) / (pi (1+S)))``, reported separately because it is
        absorbed into the measure.

    Notes
    -----
    The expression holds at whole multiples of ``2 pi / m``; ``strict``
    raises for any other ``t``.
    """
    if strict and not is_stroboscopic(t, params.m):
        raise ValueError(f"t={t} is not a whole multiple of the period")
    m = params.m
    dk = params.dk
    w = dispersion(k, m)
    S, oms = _S_of(params.lam, t, w)
    ops = 1.0 + S
    c = math.sqrt(2.0 / m)
    if mass_shell_chi:
        wc = m
        Sc, omsc = _S_of(params.lam, t, m)
    else:
        wc, Sc, omsc = w, S, oms
    ctr_s = c * (chi_s - Sc * chi_sp) / omsc
    ctr_sp = c * (chi_sp - Sc * chi_s) / omsc
    Pf = dk * w * oms / ops
    Pc = dk * wc * omsc / (1.0 + Sc)
    log_gauss = (
        -2.0 * S * dk * w / (oms * ops) * np.abs(f_k - fp_k) ** 2
        - Pf * (np.abs(f_k) ** 2 + np.abs(fp_k) ** 2)
        + 2.0 * Pc * np.real(f_k * np.conj(ctr_s) + fp_k * np.conj(ctr_sp))
        - Pc * (np.abs(ctr_s) ** 2 + np.abs(ctr_sp) ** 2)
        + dk * 2.0 * Sc / omsc * np.abs(chi_s - chi_sp) ** 2
    )
    log_pref = np.log(2.0 * oms / (math.pi * ops))
    if np.ndim(log_gauss) == 0:
        return float(log_gauss), float(log_pref)
    return log_gauss, log_pref


def h_field_element_log(f: FieldProfile, fp: FieldProfile, t, pair: ClumpPair, grid: ModeGrid, params: ModelParams, mass_shell_chi: bool = True) -> DMElementLog:
    """``log <f| rho(t) |f'>`` with the Hamiltonian, measure prefactors excluded."""
    chis = _pair_chis(pair, grid)
    k = grid.k_values
    exps = [
        _fsum(h_mode_exponent(f.f_tilde, fp.f_tilde, k, t, chis[s], chis[sp], params, mass_shell_chi)[0])
        for s in (1, 2)
        for sp in (1, 2)
    ]
    return _logsumexp_pairs(exps)


def h_long_time_exponent(f_k, fp_k, k, t, chi_s, chi_sp, params: ModelParams):
    """Per-mode exponent in the ``lam t >> w`` limit."""
    if not params.lam * t > 0:
        raise ValueError("long-time limit needs lam * t > 0")
    dk = params.dk
    w = dispersion(k, params.m)
    lt = params.lam * t
    d = f_k - fp_k
    dc = chi_s - chi_sp
    val = (
        -(lt / 2.0) * dk * np.abs(d) ** 2
        + math.sqrt(2.0 * params.m) * dk * np.real(d * np.conj(dc))
        - (dk / lt) * w**2 * (np.abs(f_k) ** 2 + np.abs(fp_k) ** 2)
        - dk * np.abs(dc) ** 2
    )
    return float(val) if np.ndim(val) == 0 else val


def long_time_smooth_enough(f: FieldProfile, t, params: ModelParams, factor: float = 1e3, rel_cut: float = 1e-12) -> bool:
    """True when every populated mode satisfies ``lam t >= factor * 2 w(k)``."""
    amp = np.abs(f.f_tilde)
    if amp.max() == 0:
        return True
    used = amp > rel_cut * amp.max()
    w = f.grid.omega(params.m)[used]
    return bool(np.all(params.lam * t >= factor * 2.0 * w))


def is_stroboscopic(t, m, tol: float = 1e-9) -> bool:
    n = t * m / (2.0 * math.pi)
    return abs(n - round(n)) <= tol * max(1.0, abs(n))
