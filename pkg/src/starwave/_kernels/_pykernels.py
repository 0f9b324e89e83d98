"""Numpy implementation of the hot kernels.

Mirrors the API of the compiled module ``_ckernels``; the package selects
one of the two at import time (see ``starwave._kernels``).

Conventions used throughout:

* grids are 1-d increasing arrays starting at 0;
* potentials enter as one-sided cell-endpoint samples ``vlo``/``vhi``
  (``vlo[j] = V(x_j^+)``, ``vhi[j] = V(x_{j+1}^-)``), so jump
  discontinuities that sit on grid nodes are represented exactly;
* ``z`` lives in the closed upper half plane (Im z >= 0);
* the Volterra kernels are integrated with product-trapezoid rules, i.e.
  the oscillatory factor e^{2iz(.)} is integrated exactly against the
  piecewise-linear interpolant of V*m, which keeps the O(h^2) error
  uniform in z.
"""

import numpy as np

BACKEND = "python"

_SERIES_CUT = 1e-3
# 2*Im(z)*x_max beyond which e^{2 i z x} overflows / drowns in rounding.
_GROWTH_LIMIT = 600.0


def phi1(w):
    """(e^w - 1)/w, extended by 1 at w = 0.

    Series evaluation below |w| = 1e-3 keeps the relative error < 1e-14.
    """
    w = np.asarray(w, dtype=np.complex128)
    scalar = w.ndim == 0
    w = np.atleast_1d(w)
    out = np.empty_like(w)
    small = np.abs(w) < _SERIES_CUT
    ws = w[small]
    # sum_{k>=0} w^k/(k+1)!  (terms beyond w^5 are below 1e-26 here)
    out[small] = 1.0 + ws * (1 / 2 + ws * (1 / 6 + ws * (1 / 24 + ws * (1 / 120 + ws / 720))))
    wb = w[~small]
    out[~small] = np.expm1(wb) / wb
    return out[0] if scalar else out


def phi2(w):
    """(e^w - 1 - w)/w^2, extended by 1/2 at w = 0."""
    w = np.asarray(w, dtype=np.complex128)
    scalar = w.ndim == 0
    w = np.atleast_1d(w)
    out = np.empty_like(w)
    small = np.abs(w) < _SERIES_CUT
    ws = w[small]
    # sum_{k>=0} w^k/(k+2)!
    out[small] = 1 / 2 + ws * (1 / 6 + ws * (1 / 24 + ws * (1 / 120 + ws * (1 / 720 + ws / 5040))))
    wb = w[~small]
    out[~small] = (np.expm1(wb) - wb) / (wb * wb)
    return out[0] if scalar else out


def _revcumsum(a, axis=-1):
    return np.flip(np.cumsum(np.flip(a, axis=axis), axis=axis), axis=axis)


def _suffix0(a, axis=-1):
    """Suffix sums over cells -> node values; last node gets 0."""
    s = _revcumsum(a, axis=axis)
    pad = [(0, 0)] * s.ndim
    pad[axis % s.ndim] = (0, 1)
    return np.pad(s, pad)


def _prefix0(a, axis=-1):
    """Prefix sums over cells -> node values; first node gets 0."""
    s = np.cumsum(a, axis=axis)
    pad = [(0, 0)] * s.ndim
    pad[axis % s.ndim] = (1, 0)
    return np.pad(s, pad)


class _VolterraWorkspace:
    """Grid- and z-dependent quantities reused across Picard iterations."""

    def __init__(self, x, z_col):
        h = np.diff(x)
        self.h = h
        self.x = x
        self.z = z_col  # shape (B, 1)
        self.two_iz = 2j * z_col
        if np.any(np.abs(2.0 * np.imag(z_col) * x[-1]) > _GROWTH_LIMIT):
            raise OverflowError(
                "2*Im(z)*x_max too large for the phase-anchored cumulative sums"
            )
        w = self.two_iz * h  # (B, n-1)
        p2 = phi2(w)
        self.c_lo = h * p2                 # weight of the near-anchor node
        self.c_hi = h * (phi1(w) - p2)     # weight of the far node
        # phases anchored at x = 0
        self.ephase = np.exp(self.two_iz * x)      # e^{2 i z x_i}
        self.ephase_inv = np.exp(-self.two_iz * x)


def _iterate_plus(ws, glo, ghi):
    """Suffix integrals for the m_+ equation.

    Returns (I, A) with
      A_i = int_{x_i}^{x_max} e^{2iz(y - x_i)} g(y) dy   (product trapezoid)
      I_i = int_{x_i}^{x_max} (e^{2iz(y-x_i)} - 1)/(2iz) g(y) dy.
    """
    cells = ws.c_lo * glo + ws.c_hi * ghi
    # A_i = e^{-2iz x_i} * sum_{j>=i} e^{2iz x_j} C_j ; the partial sums grow
    # toward the final one, so the reversed cumulative sum is stable.
    a = ws.ephase_inv * _suffix0(cells * ws.ephase[..., :-1])
    b = _suffix0(ws.h * (glo + ghi) / 2.0)
    return (a - b) / ws.two_iz, a


def _iterate_minus(ws, glo, ghi):
    """Prefix integrals for the m_- equation.

    Returns (I, A) with
      A_i = int_0^{x_i} e^{2iz(x_i - y)} g(y) dy
      I_i = int_0^{x_i} (e^{2iz(x_i - y)} - 1)/(2iz) g(y) dy.
    """
    # cells anchored at their right edge: int e^{2iz(x_{j+1}-y)} g dy
    cells = ws.c_lo * ghi + ws.c_hi * glo
    a = ws.ephase * _prefix0(cells * ws.ephase_inv[..., 1:])
    b = _prefix0(ws.h * (glo + ghi) / 2.0)
    return (a - b) / ws.two_iz, a


def _iterate_zero(x, h, glo, ghi, sign):
    """z = 0 limit of the Volterra kernels, exact moments of the linear interpolant.

    sign +: I_i = int_{x_i}^{x_max} (y - x_i) g dy,  A_i = int_{x_i}^{x_max} g dy
    sign -: I_i = int_0^{x_i} (x_i - y) g dy,        A_i = int_0^{x_i} g dy
    """
    cell_b = h * (glo + ghi) / 2.0
    if sign > 0:
        # int_cell (y - x_left) g dy
        cell_m = h * h * (glo / 6.0 + ghi / 3.0)
        d = _suffix0(cell_m + x[:-1] * cell_b) - x * _suffix0(cell_b)
        a = _suffix0(cell_b)
    else:
        # int_cell (x_right - y) g dy
        cell_m = h * h * (ghi / 6.0 + glo / 3.0)
        d = _prefix0(cell_m) + x * _prefix0(cell_b) - _prefix0(x[1:] * cell_b)
        a = _prefix0(cell_b)
    return d, a


def volterra_m_batch(x, vlo, vhi, z, sign, tol=1e-10, max_iter=200):
    """Picard iteration for the de-oscillated Jost factors m_(+/-).

    Parameters
    ----------
    x : (n,) increasing grid starting at 0
    vlo, vhi : (n-1,) one-sided potential values at the cell endpoints
    z : (B,) complex spectral points, Im z >= 0
    sign : +1 (solve inward from x_max) or -1 (outward from 0)
    tol : sup-norm stopping tolerance for successive iterates
    max_iter : iteration budget

    Returns
    -------
    m : (B, n) complex samples of m
    mp : (B, n) complex samples of dm/dx from the differentiated identity
    niter : (B,) iterations used per point
    residual : (B,) sup-norm defect of the final iterate
    """
    x = np.asarray(x, dtype=np.float64)
    vlo = np.asarray(vlo, dtype=np.float64)
    vhi = np.asarray(vhi, dtype=np.float64)
    z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    bsz, n = z.size, x.size
    zero = np.abs(z) == 0.0
    m = np.ones((bsz, n), dtype=np.complex128)
    mp = np.zeros_like(m)
    niter = np.zeros(bsz, dtype=np.int64)
    residual = np.zeros(bsz, dtype=np.float64)

    groups = []
    if np.any(~zero):
        groups.append(np.nonzero(~zero)[0])
    if np.any(zero):
        groups.append(np.nonzero(zero)[0])

    h = np.diff(x)
    for idx in groups:
        is_zero = np.abs(z[idx[0]]) == 0.0
        zc = z[idx][:, None]
        ws = None if is_zero else _VolterraWorkspace(x, zc)
        mm = np.ones((idx.size, n), dtype=np.complex128)

        def step(mm):
            glo, ghi = vlo * mm[..., :-1], vhi * mm[..., 1:]
            if is_zero:
                return _iterate_zero(x, h, glo, ghi, sign)
            if sign > 0:
                return _iterate_plus(ws, glo, ghi)
            return _iterate_minus(ws, glo, ghi)

        it = 0
        while it < max_iter:
            i_new, _ = step(mm)
            m_new = 1.0 + i_new
            it += 1
            diff = np.max(np.abs(m_new - mm))
            mm = m_new
            if diff < tol:
                break
        # derivative of the final iterate and its fixed-point defect
        i_fin, a = step(mm)
        m[idx] = mm
        mp[idx] = -a if sign > 0 else a
        niter[idx] = it
        residual[idx] = np.max(np.abs(1.0 + i_fin - mm), axis=-1)
    return m, mp, niter, residual


def volterra_m(x, vlo, vhi, z, sign, tol=1e-10, max_iter=200):
    """Single-z wrapper around :func:`volterra_m_batch`."""
    m, mp, niter, residual = volterra_m_batch(x, vlo, vhi, np.asarray([z]),
                                              sign, tol, max_iter)
    return m[0], mp[0], int(niter[0]), float(residual[0])


def free_propagator_apply(x_out, y, wq, f, t, chunk=2048):
    """Quadrature of the free line propagator e^{itH0}, H0 = -d^2/dx^2.

    u(x) = (-4 pi i t)^{-1/2} * sum_j wq_j e^{-i (x - y_j)^2 / (4 t)} f_j
    """
    if t == 0.0:
        raise ValueError("free propagator kernel is singular at t = 0")
    x_out = np.asarray(x_out, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    wf = np.asarray(wq, dtype=np.float64) * np.asarray(f, dtype=np.complex128)
    c = np.exp(1j * np.pi / 4 * np.sign(t)) / np.sqrt(4.0 * np.pi * abs(t))
    out = np.empty(x_out.size, dtype=np.complex128)
    s = -1.0 / (4.0 * t)
    for lo in range(0, x_out.size, chunk):
        hi = min(lo + chunk, x_out.size)
        d = x_out[lo:hi, None] - y[None, :]
        out[lo:hi] = np.exp(1j * s * d * d) @ wf
    return c * out
