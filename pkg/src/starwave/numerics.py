"""Shared numerical kernels: stable phi functions, oscillatory quadrature,
and the L^1 Fourier norms used by the cutoff-constant machinery.

Fourier convention (fixed package-wide): for g in L^1,

    g_check(tau) = (2 sqrt(pi))^{-1} int g(lambda) e^{i lambda tau} d lambda,

the unique normalization for which the free-dispersion bound

    sup_d | int e^{i(t mu^2 + d mu)} g(mu) d mu |  <=  ||g_check||_1 |t|^{-1/2}

holds with constant exactly 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import phi1, phi2  # noqa: F401  (re-exported backend kernels)


class AliasingError(RuntimeError):
    """Dual-grid tail mass indicates an unresolved inverse transform."""


@dataclass(frozen=True)
class QuadratureResult:
    value: complex
    error_estimate: float
    evaluations: int
    converged: bool = True

    def __post_init__(self):
        if self.error_estimate < 0 or self.evaluations <= 0:
            raise ValueError("invalid quadrature metadata")


def oscillatory_integral(g, m_limit, t, mode="refine", n0=4097,
                         osc_tol=1e-7, max_points=2 ** 20) -> QuadratureResult:
    """int_{-M}^{M} e^{i t mu^2} g(mu) d mu by trapezoid with step halving.

    ``g`` is a callable accepting an array of abscissae. In ``refine`` mode
    the step is halved until two successive levels differ by less than
    ``osc_tol`` (or the point budget is reached, in which case the result is
    returned flagged rather than silently wrong). ``plain`` mode evaluates a
    single level. At t = 0 this reduces to the plain trapezoid rule.
    """
    m_limit = float(m_limit)
    n = int(n0)
    evaluations = 0

    def level(npts):
        mu = np.linspace(-m_limit, m_limit, npts)
        vals = np.asarray(g(mu), dtype=np.complex128)
        if t != 0.0:
            vals = vals * np.exp(1j * t * mu * mu)
        return np.trapezoid(vals, mu)

    cur = level(n)
    evaluations += n
    if mode == "plain":
        return QuadratureResult(complex(cur), 0.0, evaluations)
    err = np.inf
    while True:
        n2 = 2 * (n - 1) + 1
        if n2 > max_points:
            return QuadratureResult(complex(cur), float(err), evaluations,
                                    converged=bool(err < osc_tol))
        nxt = level(n2)
        evaluations += n2
        err = abs(nxt - cur)
        cur, n = nxt, n2
        if err < osc_tol:
            return QuadratureResult(complex(cur), float(err), evaluations)


def inverse_transform_l1(g, m_limit, n=2 ** 16, pad=8,
                         return_flag=False):
    """||g_check||_1 on the dual grid of an FFT with zero padding.

    g is sampled on a uniform grid over [-M, M); the samples are embedded in
    a pad*n array, transformed, and |g_check| is summed with the trapezoid
    rule on the dual grid. Raises AliasingError when more than 1% of the
    total mass sits in the outer decade of the dual grid (tails unresolved).
    """
    if n < 2 ** 10:
        raise ValueError("need at least 2^10 samples")
    if pad < 8:
        raise ValueError("zero-padding factor must be >= 8")
    n = int(n)
    npad = int(pad) * n
    dlam = 2.0 * m_limit / n
    lam = -m_limit + dlam * np.arange(n)
    samples = np.zeros(npad, dtype=np.complex128)
    samples[:n] = np.asarray(g(lam), dtype=np.complex128)
    # g_check(tau_m) = (2 sqrt(pi))^{-1} dlam * sum_k g(lam_k) e^{i lam_k tau_m}
    tau = 2.0 * np.pi * np.fft.fftfreq(npad, d=dlam)
    spec = np.fft.ifft(samples) * npad
    spec *= np.exp(1j * lam[0] * tau)  # account for the grid offset
    spec *= dlam / (2.0 * np.sqrt(np.pi))
    mag = np.abs(spec)
    order = np.argsort(tau)
    tau_s, mag_s = tau[order], mag[order]
    total = np.trapezoid(mag_s, tau_s)
    tau_max = np.max(np.abs(tau_s))
    outer = np.abs(tau_s) > 0.9 * tau_max
    tail = np.trapezoid(np.where(outer, mag_s, 0.0), tau_s)
    flagged = total > 0 and tail > 0.01 * total
    if flagged and not return_flag:
        raise AliasingError(
            f"dual-grid tail holds {tail/total:.1%} of the mass; "
            "increase n or the padding factor")
    return (float(total), flagged) if return_flag else float(total)


def fourier_l1_norm(g, m_limit, n=2 ** 16, pad=8) -> float:
    """||F^{-1} g||_1 for a smooth g supported in [-M, M]."""
    return inverse_transform_l1(g, m_limit, n=n, pad=pad)


def cumtrapz_prefix(y, w_half_left, w_half_right, axis=-1):
    """Node-indexed prefix integrals: P_i = int_{x_0}^{x_i} y dx."""
    cells = y[..., :-1] * w_half_left + y[..., 1:] * w_half_right
    s = np.cumsum(cells, axis=axis)
    pad = [(0, 0)] * s.ndim
    pad[axis % s.ndim] = (1, 0)
    return np.pad(s, pad)


def cell_halves(x):
    """Half-cell trapezoid weights (h_j/2 for both cell endpoints)."""
    h = np.diff(x) / 2.0
    return h, h
