"""Brute-force reference engine in a truncated number basis.

The master equation of one oscillator mode,

    d rho/dt = -i w [n, rho] - kappa [x, [x, rho]],   x = a + a^dag,  kappa = lam / 4w,

is integrated with the classical explicit 4th-order Runge-Kutta scheme on
the truncated operators.  The density matrix is held in diagonal-band
storage ``band[i, d + B] = rho[i, i + d]`` for ``|d| <= B``; entries further
from the diagonal start out negligible and are dropped.  With ``B = n_max``
the storage is the full matrix.

Other reference routines: Hermite position wavefunctions, coherent-state
overlaps over a mode grid, and the residual of the truncated field
eigenstate.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .clump_states import ClumpProfile, chi_momentum
from .kernel_solution import MomentSet
from .units_modes import ModeGrid, dispersion

log = logging.getLogger(__name__)

RK4_SAFETY = 2.5  # fraction of the RK4 stability boundary (~2.8) kept as margin
PHASE_STEP = 0.02  # max w*dt, keeps free-rotation phase error far below 1e-8
MIN_BANDWIDTH = 16


class TruncationError(RuntimeError):
    """Probability leaked to the truncation boundary; ``hint`` is a larger n_max."""

    def __init__(self, message: str, hint: int):
        super().__init__(message)
        self.hint = hint


@dataclass
class TruncatedDM:
    """Density operator on number states ``0..n_max`` in band storage."""

    band: np.ndarray
    n_max: int
    bandwidth: int
    t: float
    omega: float
    lam: float
    gamma1: float = 0.0
    gamma2: float = 0.0
    representation: str = "x"

    @property
    def dim(self) -> int:
        return self.n_max + 1

    @property
    def matrix(self) -> np.ndarray:
        """Dense ``(n_max+1) x (n_max+1)`` matrix."""
        n, B = self.dim, self.bandwidth
        out = np.zeros((n, n), dtype=complex)
        i = np.arange(n)
        for d in range(-B, B + 1):
            ok = (i + d >= 0) & (i + d < n)
            out[i[ok], i[ok] + d] = self.band[i[ok], d + B]
        return out

    def diagonal(self, d: int = 0) -> np.ndarray:
        """Entries ``rho[i, i + d]`` for every valid i."""
        n, B = self.dim, self.bandwidth
        if abs(d) > B:
            return np.zeros(max(n - abs(d), 0), dtype=complex)
        lo = max(0, -d)
        hi = min(n, n - d)
        return self.band[lo:hi, d + B]

    def trace(self) -> complex:
        return complex(np.sum(self.diagonal(0)))

    def tail_norm(self) -> float:
        """Norm of the last row and column, the truncation leak monitor."""
        n, B = self.dim, self.bandwidth
        row = self.band[n - 1, : B + 1]
        i = np.arange(max(0, n - 1 - B), n)
        col = self.band[i, B + (n - 1 - i)]
        return float(math.sqrt(np.sum(np.abs(row) ** 2) + np.sum(np.abs(col) ** 2)))


def coherent_amplitudes(gamma, n: int) -> np.ndarray:
    """Number-basis amplitudes of the normalised coherent state, ``n`` entries."""
    g = complex(gamma)
    c = np.empty(n, dtype=complex)
    c[0] = math.exp(-0.5 * abs(g) ** 2)
    for i in range(1, n):
        c[i] = c[i - 1] * g / math.sqrt(i)
    return c if g.imag != 0 else c.real.copy()


def heuristic_n_max(gamma1, gamma2, lam, omega, t) -> int:
    """Occupancy plus linear growth with an 8x Poisson-tail margin."""
    return int(math.ceil((max(gamma1**2, gamma2**2) + lam * t / (2.0 * omega)) * 8 + 20))


def tail_n_max(gamma1, gamma2, lam, omega, t, tol: float = 1e-9) -> int:
    """Truncation from the geometric tail of the late-time thermal populations.

    Populations fall like ``S**n`` with ``S = nbar / (nbar + 1)``; the
    result is the level where ``S**n`` drops below ``tol`` plus a margin.
    """
    nbar = lam * t / (2.0 * omega) + max(gamma1**2, gamma2**2)
    if nbar <= 0:
        return 20
    S = nbar / (nbar + 1.0)
    return int(math.ceil(math.log(tol) / math.log(S))) + 20


def suggest_n_max(gamma1, gamma2, lam, omega, t, tol: float = 1e-9) -> int:
    """Larger of :func:`heuristic_n_max` and :func:`tail_n_max`."""
    return max(heuristic_n_max(gamma1, gamma2, lam, omega, t), tail_n_max(gamma1, gamma2, lam, omega, t, tol))


def auto_bandwidth(gamma1, gamma2, n_max: int, lam: float = 0.0, omega: float = 1.0, tol: float = 1e-14) -> int:
    """Band wide enough for the initial state and for squeezing-driven spread.

    The initial part keeps every dropped entry below ``tol``.  The ``a^dag^2``
    term of the evolving state spreads coherences further when ``lam/w^2``
    is large; ``16 + 8 log2(1 + lam/w^2)`` keeps the dropped weight near
    1e-9 for ``lam/w^2 <= 2`` (calibrated against full-matrix runs).
    """
    n = n_max + 1
    c1 = np.abs(coherent_amplitudes(gamma1, n))
    c2 = np.abs(coherent_amplitudes(gamma2, n))
    outer = np.outer(c1, c2)
    i, j = np.nonzero(outer > tol)
    need = int(np.max(np.abs(i - j))) if i.size else 0
    squeeze = int(math.ceil(MIN_BANDWIDTH + 8.0 * math.log2(1.0 + lam / omega**2)))
    return int(min(max(need, squeeze), n_max))


def stable_dt(lam, omega, n_max, bandwidth) -> float:
    """Step inside the RK4 stability region for the truncated generator.

    The dissipator's spectral radius is ``(lam/w) * 4 (n_max+1)`` (the
    squared spread of ``x`` eigenvalues) and rotation adds ``w * B``.
    """
    rate = 4.0 * (lam / omega) * (n_max + 1) + omega * max(bandwidth, 1)
    return min(RK4_SAFETY / rate, PHASE_STEP / omega)


@njit(cache=True, fastmath=True)
def _stage(src, base, acc, dst, mask, n, B, omega, kappa, s, x2d, x2o, a, b):
    # padded layout: row i -> i+2, band column c -> c+2, coefficient index k -> k+2
    W = 2 * B + 1
    for i in range(n):
        pi = i + 2
        for c in range(W):
            pc = c + 2
            pj = i + c - B + 2
            v = (x2d[pi] + x2d[pj]) * src[pi, pc]
            v += x2o[pi - 2] * src[pi - 2, pc + 2] + x2o[pi] * src[pi + 2, pc - 2]
            v += x2o[pj - 2] * src[pi, pc - 2] + x2o[pj] * src[pi, pc + 2]
            w = s[pi - 1] * (s[pj - 1] * src[pi - 1, pc] + s[pj] * src[pi - 1, pc + 2])
            w += s[pi] * (s[pj - 1] * src[pi + 1, pc - 2] + s[pj] * src[pi + 1, pc])
            v -= 2.0 * w
            k = mask[pi, pc] * (complex(0.0, -omega * (B - c)) * src[pi, pc] - kappa * v)
            acc[pi, pc] += b * k
            dst[pi, pc] = base[pi, pc] + a * k


@njit(cache=True)
def _rk4(P, mask, n, B, omega, kappa, s, x2d, x2o, dt, nsteps):
    t1 = np.zeros_like(P)
    t2 = np.zeros_like(P)
    acc = np.zeros_like(P)
    for _ in range(nsteps):
        acc[:, :] = P
        _stage(P, P, acc, t1, mask, n, B, omega, kappa, s, x2d, x2o, 0.5 * dt, dt / 6.0)
        _stage(t1, P, acc, t2, mask, n, B, omega, kappa, s, x2d, x2o, 0.5 * dt, dt / 3.0)
        _stage(t2, P, acc, t1, mask, n, B, omega, kappa, s, x2d, x2o, dt, dt / 3.0)
        _stage(t1, P, acc, t2, mask, n, B, omega, kappa, s, x2d, x2o, 0.0, dt / 6.0)
        P[:, :] = acc
    return P


def _coefficients(n: int, B: int):
    size = n + B + 6
    s = np.zeros(size)
    x2d = np.zeros(size)
    x2o = np.zeros(size)
    i = np.arange(n)
    s[2 : n + 1] = np.sqrt(i[:-1] + 1.0)  # x[i, i+1], zero past the boundary
    x2d[2 : n + 2] = i + np.where(i + 1 < n, i + 1, 0)  # (x @ x)[i, i] of truncated x
    x2o[2:n] = np.sqrt((i[:-2] + 1.0) * (i[:-2] + 2.0))  # (x @ x)[i, i+2]
    mask = np.zeros((n + 4, 2 * B + 5))
    d = np.arange(-B, B + 1)
    j = i[:, None] + d[None, :]
    mask[2 : n + 2, 2 : 2 * B + 3] = (j >= 0) & (j < n)
    return s, x2d, x2o, mask


def _pad(band: np.ndarray, n_new: int) -> np.ndarray:
    n, W = band.shape
    P = np.zeros((n_new + 4, W + 4), dtype=complex)
    P[2 : n + 2, 2 : W + 2] = band
    return P


def _initial_band(gamma1, gamma2, n_max, B) -> np.ndarray:
    n = n_max + 1
    c1 = coherent_amplitudes(gamma1, n)
    c2 = coherent_amplitudes(gamma2, n)
    band = np.zeros((n, 2 * B + 1), dtype=complex)
    i = np.arange(n)
    for d in range(-B, B + 1):
        ok = (i + d >= 0) & (i + d < n)
        band[i[ok], d + B] = c1[i[ok]] * c2[i[ok] + d]
    return band


def evolve_lindblad(
    gamma1,
    gamma2,
    lam,
    omega,
    times,
    n_max: int | None = None,
    dt: float | None = None,
    bandwidth: int | None = None,
    tail_tol: float = 1e-6,
    truncation_tol: float = 1e-9,
    segments: int = 20,
    representation: str = "x",
) -> list[TruncatedDM]:
    """Integrate from the two-displacement initial operator and snapshot at ``times``.

    Parameters
    ----------
    times : sequence of float
        Non-negative output times, returned in ascending order.
    n_max : int, optional
        Fixed truncation.  When omitted the truncation grows with time,
        following :func:`suggest_n_max` at ``truncation_tol``.
    dt : float, optional
        Upper bound on the step; the step is always kept inside the RK4
        stability region.
    bandwidth : int, optional
        Stored distance from the diagonal.  Defaults to :func:`auto_bandwidth`.
    tail_tol : float
        Abort with :class:`TruncationError` when the boundary row/column norm
        exceeds this after any segment.
    """
    if not omega > 0 or not lam >= 0:
        raise ValueError("need omega > 0 and lam >= 0")
    times = np.sort(np.asarray(times, dtype=float))
    if times.size == 0 or times[0] < 0:
        raise ValueError("times must be non-negative and non-empty")
    t_end = float(times[-1])
    fixed = n_max is not None
    if fixed:
        n_cur = int(n_max)
    else:
        n_cur = suggest_n_max(gamma1, gamma2, lam, omega, 0.0, truncation_tol)
    n_final = n_cur if fixed else suggest_n_max(gamma1, gamma2, lam, omega, t_end, truncation_tol)
    B = bandwidth if bandwidth is not None else auto_bandwidth(gamma1, gamma2, n_final, lam, omega)
    B = int(min(B, n_final))
    kappa = lam / (4.0 * omega)

    band = _initial_band(gamma1, gamma2, n_cur, B)
    P = _pad(band, n_cur + 1)

    # segment boundaries: requested outputs plus a uniform subdivision for growth
    marks = np.unique(np.concatenate([times, np.linspace(0.0, t_end, segments + 1)]))
    out = []
    t = 0.0
    for t1 in marks:
        if t1 > t:
            if not fixed:
                need = suggest_n_max(gamma1, gamma2, lam, omega, t1, truncation_tol)
                if need > n_cur:
                    P = _grow(P, n_cur + 1, need + 1)
                    n_cur = need
            n = n_cur + 1
            Bn = min(B, n_cur)
            s, x2d, x2o, mask = _coefficients(n, B)
            h = stable_dt(lam, omega, n_cur, Bn)
            if dt is not None:
                h = min(h, dt)
            steps = int(math.ceil((t1 - t) / h))
            P = _rk4(P, mask, n, B, omega, kappa, s, x2d, x2o, (t1 - t) / steps, steps)
            t = float(t1)
            dm = _snapshot(P, n_cur, B, t, omega, lam, gamma1, gamma2, representation)
            tail = dm.tail_norm()
            if tail > tail_tol:
                hint = int(math.ceil(1.5 * max(n_cur, suggest_n_max(gamma1, gamma2, lam, omega, t_end))))
                raise TruncationError(
                    f"boundary norm {tail:.3g} > {tail_tol:g} at t={t:.6g} with n_max={n_cur}; "
                    f"retry with n_max >= {hint}",
                    hint,
                )
        if np.any(np.isclose(times, t1, rtol=0, atol=0)):
            dm = _snapshot(P, n_cur, B, t, omega, lam, gamma1, gamma2, representation)
            out.extend([dm] * int(np.sum(times == t1)))
    log.debug("integrated to t=%g with n_max=%d, bandwidth=%d", t, n_cur, B)
    return out


def _grow(P, n_old, n_new):
    W = P.shape[1]
    Q = np.zeros((n_new + 4, W), dtype=complex)
    Q[2 : n_old + 2] = P[2 : n_old + 2]
    return Q


def _snapshot(P, n_max, B, t, omega, lam, g1, g2, rep) -> TruncatedDM:
    band = P[2 : n_max + 3, 2 : 2 * B + 3].copy()
    return TruncatedDM(band, n_max, B, t, omega, lam, g1, g2, rep)


def integrate_lindblad_x(gamma1, gamma2, lam, omega, t_final, n_max=None, dt=None, **kw) -> TruncatedDM:
    """State at ``t_final`` for position-type collapse (see :func:`evolve_lindblad`)."""
    return evolve_lindblad(gamma1, gamma2, lam, omega, [t_final], n_max, dt, representation="x", **kw)[-1]


def integrate_lindblad_p(gamma1, gamma2, lam, omega, t_final, n_max=None, dt=None, **kw) -> TruncatedDM:
    """Momentum-collapse oscillator.

    Written with its own ladder operator the equation is identical to the
    position case, so the same integrator runs and the result is labelled
    as a momentum-representation state.
    """
    return evolve_lindblad(gamma1, gamma2, lam, omega, [t_final], n_max, dt, representation="p", **kw)[-1]


def moments(dm: TruncatedDM) -> MomentSet:
    """Trace-weighted ``<a>, <a^dag>, <a^dag a>, <a^2>, <a^dag^2>``."""
    n = dm.dim
    k = np.arange(n, dtype=float)
    s1 = np.sqrt(k[1:])  # sqrt(i+1) for i = 0..n-2
    s2 = np.sqrt(k[1:-1] * k[2:])  # sqrt((i+1)(i+2))
    return MomentSet(
        a_mean=complex(np.sum(s1 * dm.diagonal(-1))),
        adag_mean=complex(np.sum(s1 * dm.diagonal(1))),
        n_mean=complex(np.sum(k * dm.diagonal(0))),
        a2_mean=complex(np.sum(s2 * dm.diagonal(-2))),
        adag2_mean=complex(np.sum(s2 * dm.diagonal(2))),
        trace=dm.trace(),
    )


def position_wavefunctions(n_max: int, X) -> np.ndarray:
    """``psi_n(X)`` for ``n = 0..n_max``, shape ``(n_max+1,) + X.shape``.

    Eigenfunctions of ``a^dag a`` with ``a = X + (1/2) d/dX``, normalised
    to 1 in X; built with the three-term Hermite-function recurrence.
    """
    X = np.asarray(X, dtype=float)
    xi = math.sqrt(2.0) * X
    out = np.empty((n_max + 1,) + X.shape)
    out[0] = (2.0 / math.pi) ** 0.25 * np.exp(-X * X)
    if n_max >= 1:
        out[1] = math.sqrt(2.0) * xi * out[0]
    for n in range(1, n_max):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * xi * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def position_wavefunction(n: int, X):
    """Single ``psi_n(X)``."""
    v = position_wavefunctions(n, X)[n]
    return float(v) if np.ndim(v) == 0 else v


def dm_position_element(dm: TruncatedDM, X, Xp):
    """``sum_{n n'} rho[n, n'] psi_n(X) psi_n'(X')`` on the grid ``X x Xp``.

    Scalars give a complex scalar; 1-D inputs give a ``(len(X), len(Xp))``
    array.
    """
    X_arr = np.atleast_1d(np.asarray(X, dtype=float))
    Xp_arr = np.atleast_1d(np.asarray(Xp, dtype=float))
    A = position_wavefunctions(dm.n_max, X_arr)
    Bm = position_wavefunctions(dm.n_max, Xp_arr)
    val = A.T @ dm.matrix @ Bm
    if np.ndim(X) == 0 and np.ndim(Xp) == 0:
        return complex(val[0, 0])
    return val


def coherent_overlap_oracle(p1: ClumpProfile, p2: ClumpProfile, grid: ModeGrid, n_max: int, log: bool = False):
    """Clump inner product as a product of truncated single-oscillator overlaps.

    Each grid mode carries two real-displacement oscillators with
    displacements ``sqrt(2 dk) Re chi~`` and ``sqrt(2 dk) Im chi~``.
    """
    k = grid.k_values
    scale = math.sqrt(2.0 * grid.dk)
    c1 = scale * chi_momentum(k, p1)
    c2 = scale * chi_momentum(k, p2)
    total = 0.0
    n = n_max + 1
    for a, b in zip(np.concatenate([c1.real, c1.imag]), np.concatenate([c2.real, c2.imag])):
        ov = float(np.dot(coherent_amplitudes(a, n), coherent_amplitudes(b, n)))
        total += math.log(ov)
    return total if log else math.exp(total)


def _two_mode_state(u: complex, n_max: int) -> np.ndarray:
    """Coefficients ``C[p, q]`` of exp(-a^dag b^dag) exp(u a^dag + conj(u) b^dag)|0>."""
    n = n_max + 1
    ca = np.empty(n, dtype=complex)
    cb = np.empty(n, dtype=complex)
    ca[0] = cb[0] = 1.0
    for i in range(1, n):
        ca[i] = ca[i - 1] * u / math.sqrt(i)
        cb[i] = cb[i - 1] * np.conj(u) / math.sqrt(i)
    term = np.outer(ca, cb)
    state = term.copy()
    sq = np.sqrt(np.arange(n, dtype=float))
    for j in range(1, n):
        nxt = np.zeros_like(term)
        nxt[1:, 1:] = term[:-1, :-1] * np.outer(sq[1:], sq[1:])
        term = -nxt / j
        state += term
    return state


def field_eigenvalue(f_tilde_k: complex, k: float, dk: float, x: float = 0.0) -> float:
    """Single-mode field value ``(dk / sqrt(2 pi)) * 2 Re(f~ exp(i k x))``."""
    return dk / math.sqrt(2.0 * math.pi) * 2.0 * (f_tilde_k * np.exp(1j * k * x)).real


def _mode_field_terms(f_tilde_k, k, n_max, m, dk):
    w = dispersion(k, m)
    u = math.sqrt(2.0 * w * dk) * f_tilde_k
    C = _two_mode_state(u, n_max)
    nrm = np.linalg.norm(C)
    if not np.isfinite(nrm):
        raise OverflowError("two-mode state norm overflowed; reduce |f~| or n_max")
    n = n_max + 1
    a = np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1)
    # first index is the a mode, second the b mode
    lower = a @ C + C @ a  # (a + b^dag) C, truncated
    raise_ = a.T @ C + C @ a.T  # (a^dag + b) C
    return w, u, C, nrm, lower, raise_


def eigenstate_residual(f_tilde_k: complex, k: float, n_max: int, m: float = 1.0, dk: float = 0.1, x: float = 0.0) -> float:
    """Relative residual ``||(phi_k(x) - f_k(x)) psi|| / ||psi||`` of the truncated eigenstate.

    ``phi_k`` is the single-mode field operator built from truncated ladder
    operators of both modes, ``f_k(x)`` the eigenvalue from
    :func:`field_eigenvalue`.
    """
    w, u, C, nrm, lower, raise_ = _mode_field_terms(f_tilde_k, k, n_max, m, dk)
    pref = math.sqrt(dk / (4.0 * math.pi * w))
    e = np.exp(1j * k * x)
    r = e * (lower - u * C) + np.conj(e) * (raise_ - np.conj(u) * C)
    return float(pref * np.linalg.norm(r) / nrm)


def eigenstate_expectation(f_tilde_k: complex, k: float, n_max: int, m: float = 1.0, dk: float = 0.1, x: float = 0.0) -> complex:
    """``<psi| phi_k(x) |psi> / <psi|psi>`` for the truncated eigenstate."""
    w, u, C, nrm, lower, raise_ = _mode_field_terms(f_tilde_k, k, n_max, m, dk)
    pref = math.sqrt(dk / (4.0 * math.pi * w))
    e = np.exp(1j * k * x)
    phi = pref * (e * lower + np.conj(e) * raise_)
    return complex(np.vdot(C, phi) / nrm**2)
