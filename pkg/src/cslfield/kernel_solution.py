"""Single-mode Gaussian collapse kernel.

One oscillator mode obeys

    d rho/dt = -i w [a^dag a, rho] - (lam / 4w) [a + a^dag, [a + a^dag, rho]]

starting from the two-displacement operator
``exp(-g1^2/2) exp(g1 a^dag)|0><0| exp(g2 a) exp(-g2^2/2)``.  The solution keeps
the quadratic form

    rho(t) = C exp(R a^dag^2) exp(b1 a^dag) sum_n S^n |n><n| exp(b2s a) exp(conj(R) a^2)

and this module evaluates the coefficients, the position-space kernel and
its limits, and the closed-form moments.

All kernels are assembled as exponents first and exponentiated once.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln


class KernelRegimeError(ValueError):
    """Raised when the exact coefficients have a non-positive denominator."""


@dataclass(frozen=True)
class KernelCoeffs:
    """Coefficients of the quadratic kernel at one time.

    ``C`` is complex in general; it is real at stroboscopic instants and in
    the ``approx`` regime.  ``one_minus_S`` is stored separately so that
    ``1 - S`` is never formed by cancellation.
    """

    S: float
    R: complex
    beta1: complex
    beta2_star: complex
    C: complex
    t: float
    omega: float
    lam: float
    gamma1: float
    gamma2: float
    regime: str
    one_minus_S: float
    log_C: complex = 0j
    stroboscopic: bool = False
    late_time: bool = True

    @property
    def alpha(self) -> float:
        return self.lam * self.t / (2.0 * self.omega)


@dataclass(frozen=True)
class MomentSet:
    """Trace-weighted moments ``Tr(O rho)`` for O in {a, a^dag, a^dag a, a^2, a^dag^2}."""

    a_mean: complex
    adag_mean: complex
    n_mean: complex
    a2_mean: complex
    adag2_mean: complex
    trace: complex = 1.0

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.a_mean, self.adag_mean, self.n_mean, self.a2_mean, self.adag2_mean], dtype=complex
        )

    def max_abs_diff(self, other: "MomentSet") -> float:
        return float(np.max(np.abs(self.as_array() - other.as_array())))


def initial_trace(gamma1: float, gamma2: float) -> float:
    """Trace of the two-displacement initial operator."""
    return math.exp(-0.5 * (gamma1 - gamma2) ** 2)


def _check_time(t, omega):
    if not t >= 0:
        raise ValueError("t must be non-negative")
    if not omega > 0:
        raise ValueError("omega must be positive")


def _log_trace_gaussian(one_minus_S, R, beta1, beta2_star) -> complex:
    """log of (1/pi) * integral d^2z exp(-(1-S)|z|^2 + R z*^2 + R* z^2 + b1 z* + b2s z)."""
    r1, r2 = R.real, R.imag
    A = np.array(
        [[2.0 * one_minus_S - 4.0 * r1, -4.0 * r2], [-4.0 * r2, 2.0 * one_minus_S + 4.0 * r1]]
    )
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    if not det > 0 or not A[0, 0] > 0:
        raise KernelRegimeError("kernel is not normalisable at these parameters")
    b = np.array([beta1 + beta2_star, 1j * (beta2_star - beta1)])
    quad = b @ np.linalg.solve(A.astype(complex), b)
    return math.log(2.0) - 0.5 * math.log(det) + 0.5 * quad


def coeffs_exact(t, omega, lam, gamma1, gamma2) -> KernelCoeffs:
    """Coefficients keeping every ``sin(w t)`` term.

    ``C`` is fixed numerically so that the trace of the kernel equals
    ``exp(-(g1 - g2)^2 / 2)``; the trace of the quadratic form is a 2-D
    Gaussian integral over coherent-state labels, evaluated in closed form.

    Raises
    ------
    KernelRegimeError
        If the common denominator is not positive.
    """
    _check_time(t, omega)
    alpha = lam * t / (2.0 * omega)
    s = math.sin(omega * t)
    q = lam / (2.0 * omega**2) * s
    D = (alpha + 1.0) ** 2 - q * q
    if not D > 0:
        raise KernelRegimeError(
            f"denominator {D:.3g} <= 0 at t={t}, omega={omega}, lam={lam}: lam/omega^2 too large"
        )
    ph = cmath.exp(-1j * omega * t)
    one_minus_S = (alpha + 1.0) / D
    S = 1.0 - one_minus_S
    R = -(lam / (4.0 * omega**2)) * ph * s / D
    beta1 = ((alpha + 1.0) * gamma1 * ph + q * gamma2) / D
    beta2_star = ((alpha + 1.0) * gamma2 * ph.conjugate() + q * gamma1) / D
    log_C = -0.5 * (gamma1 - gamma2) ** 2 - _log_trace_gaussian(one_minus_S, R, beta1, beta2_star)
    return KernelCoeffs(
        S=S,
        R=complex(R),
        beta1=complex(beta1),
        beta2_star=complex(beta2_star),
        C=cmath.exp(log_C),
        t=float(t),
        omega=float(omega),
        lam=float(lam),
        gamma1=float(gamma1),
        gamma2=float(gamma2),
        regime="exact",
        one_minus_S=one_minus_S,
        log_C=complex(log_C),
        stroboscopic=False,
        late_time=t >= 100.0 * 2.0 * math.pi / omega,
    )


def coeffs_approx(t, omega, lam, gamma1, gamma2, stroboscopic: bool = False) -> KernelCoeffs:
    """Late-time coefficients with the ``sin(w t)`` terms dropped.

    Parameters
    ----------
    stroboscopic : bool
        Replace ``exp(+-i w t)`` by 1, valid only at whole periods.  Never
        applied implicitly.

    Notes
    -----
    ``late_time`` on the result reports whether ``t >= 100 * 2 pi / w``,
    where dropping the oscillating terms is justified.
    """
    _check_time(t, omega)
    alpha = lam * t / (2.0 * omega)
    one_minus_S = 1.0 / (alpha + 1.0)
    S = alpha / (alpha + 1.0)
    ph = 1.0 + 0j if stroboscopic else cmath.exp(-1j * omega * t)
    beta1 = one_minus_S * gamma1 * ph
    beta2_star = one_minus_S * gamma2 * ph.conjugate()
    log_C = math.log(one_minus_S) + S * gamma1 * gamma2 - 0.5 * (gamma1**2 + gamma2**2)
    return KernelCoeffs(
        S=S,
        R=0j,
        beta1=complex(beta1),
        beta2_star=complex(beta2_star),
        C=complex(math.exp(log_C)),
        t=float(t),
        omega=float(omega),
        lam=float(lam),
        gamma1=float(gamma1),
        gamma2=float(gamma2),
        regime="approx",
        one_minus_S=one_minus_S,
        log_C=complex(log_C),
        stroboscopic=stroboscopic,
        late_time=t >= 100.0 * 2.0 * math.pi / omega,
    )


def kernel_trace(coeffs: KernelCoeffs) -> complex:
    """Trace of the quadratic-form operator described by ``coeffs``."""
    return cmath.exp(
        coeffs.log_C
        + _log_trace_gaussian(coeffs.one_minus_S, coeffs.R, coeffs.beta1, coeffs.beta2_star)
    )


def _raising_exponential(c: complex, power: int, n: int) -> np.ndarray:
    """Matrix of exp(c * a^dag**power) on the first n number states."""
    out = np.zeros((n, n), dtype=complex)
    idx = np.arange(n)
    lg = 0.5 * gammaln(idx + 1.0)
    for j in range(0, (n - 1) // power + 1):
        rows = idx[j * power :]
        cols = rows - j * power
        if j == 0:
            out[rows, cols] = 1.0
            continue
        if c == 0:
            break
        mag = np.exp(lg[rows] - lg[cols] - gammaln(j + 1.0))
        out[rows, cols] = mag * c**j
    return out


def number_basis_matrix(coeffs: KernelCoeffs, n_max: int) -> np.ndarray:
    """Kernel as a dense matrix on number states ``0..n_max``.

    Every factor is triangular, so the truncated entries are exact.
    """
    n = n_max + 1
    L = _raising_exponential(coeffs.R, 2, n) @ _raising_exponential(coeffs.beta1, 1, n)
    U = (
        _raising_exponential(coeffs.beta2_star, 1, n) @ _raising_exponential(np.conj(coeffs.R), 2, n)
    ).T
    d = coeffs.S ** np.arange(n, dtype=float)
    return coeffs.C * (L * d) @ U


def _need_approx(coeffs: KernelCoeffs):
    if coeffs.regime != "approx":
        raise ValueError("position kernel needs approx-regime coefficients")
    if not coeffs.S < 1.0:
        raise ValueError("S must be below 1")


def _log_x_kernel(X, Xp, S, oms, g1, g2):
    ops = 1.0 + S
    X = np.asarray(X, dtype=float)
    Xp = np.asarray(Xp, dtype=float)
    c1 = (g1 - S * g2) / oms
    c2 = (g2 - S * g1) / oms
    return (
        0.5 * math.log(2.0 * oms / (math.pi * ops))
        - 2.0 * S * (X - Xp) ** 2 / (oms * ops)
        - (oms / ops) * ((X - c1) ** 2 + (Xp - c2) ** 2)
        + S * (g1 - g2) ** 2 / oms
    )


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def x_matrix_element(X, Xp, coeffs: KernelCoeffs):
    """Position kernel ``<X| rho(t) |X'>`` at a stroboscopic instant.

    Broadcasts over ``X`` and ``Xp``.
    """
    _need_approx(coeffs)
    lg = _log_x_kernel(X, Xp, coeffs.S, coeffs.one_minus_S, coeffs.gamma1, coeffs.gamma2)
    return _out(np.exp(lg))


def p_matrix_element(p, pp, coeffs_prime: KernelCoeffs):
    """Momentum-collapse twin of :func:`x_matrix_element` (same functional form)."""
    return x_matrix_element(p, pp, coeffs_prime)


def short_time_element(X, Xp, t, omega, lam, gamma1, gamma2):
    """Kernel for ``lam t / 2w << 1``."""
    X = np.asarray(X, dtype=float)
    Xp = np.asarray(Xp, dtype=float)
    lg = (
        0.5 * math.log(2.0 / math.pi)
        - (lam * t / omega) * (X - Xp) ** 2
        - (X - gamma1) ** 2
        - (Xp - gamma2) ** 2
    )
    return _out(np.exp(lg))


def long_time_element(X, Xp, t, omega, lam, gamma1, gamma2):
    """Kernel for ``lam t / 2w >> 1``."""
    if not lam * t > 0:
        raise ValueError("long-time kernel needs lam * t > 0")
    X = np.asarray(X, dtype=float)
    Xp = np.asarray(Xp, dtype=float)
    lt = lam * t
    d = X - Xp
    lg = (
        0.5 * math.log(2.0 * omega / (math.pi * lt))
        - (lt / (2.0 * omega)) * d**2
        + d * (gamma1 - gamma2)
        - (omega / lt) * (X**2 + Xp**2)
        - 0.5 * (gamma1 - gamma2) ** 2
    )
    return _out(np.exp(lg))


def thermal_map(S: float, omega: float, one_minus_S: float | None = None):
    """Temperature and occupation of the thermal state ``(1-S) S^{a^dag a}``.

    Returns
    -------
    kT : float
        ``w / ln(1/S)``.
    mean_n : float
        ``S / (1 - S)``.
    """
    if not (0.0 < S < 1.0):
        raise ValueError("S must lie in (0, 1)")
    oms = 1.0 - S if one_minus_S is None else one_minus_S
    kT = omega / -math.log(S)
    return kT, S / oms


def mehler_kernel(X, Xp, S):
    """Closed form of ``sum_n S^n psi_n(X) psi_n(X')``."""
    if not (0.0 <= S < 1.0):
        raise ValueError("S must lie in [0, 1)")
    X = np.asarray(X, dtype=float)
    Xp = np.asarray(Xp, dtype=float)
    lg = (
        0.5 * math.log(2.0 / (math.pi * (1.0 - S * S)))
        - (1.0 - S) / (2.0 * (1.0 + S)) * (X + Xp) ** 2
        - (1.0 + S) / (2.0 * (1.0 - S)) * (X - Xp) ** 2
    )
    return _out(np.exp(lg))


def closed_moments(t, omega, lam, gamma1, gamma2) -> MomentSet:
    """Exact trace-weighted first and second moments."""
    _check_time(t, omega)
    tr0 = initial_trace(gamma1, gamma2)
    ph = cmath.exp(-1j * omega * t)
    s = math.sin(omega * t)
    return MomentSet(
        a_mean=gamma1 * tr0 * ph,
        adag_mean=gamma2 * tr0 * ph.conjugate(),
        n_mean=complex((lam * t / (2.0 * omega) + gamma1 * gamma2) * tr0),
        a2_mean=(-(lam / (2.0 * omega)) * ph * s / omega + gamma1**2 * ph * ph) * tr0,
        adag2_mean=(-(lam / (2.0 * omega)) * ph.conjugate() * s / omega + gamma2**2 * ph.conjugate() ** 2)
        * tr0,
        trace=complex(tr0),
    )
