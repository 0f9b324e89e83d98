"""Generalized eigenfunctions of the network operator.

For a distinguished branch j and sign +/-, the family is

    F_j(x)      = c1 f_{j,s}(z,x) + c2 f_{j,-s}(z,x)   on branch j,
    F_k(x)      = d_k f_{k,-s}(z,x)                    on branches k != j,

with (c1, c2, d) fixed by vertex continuity and the Kirchhoff law. The
linear 2x2 vertex solve is the source of truth; the printed closed-form
coefficients (with the Wronskian sampled along the branch) are kept as a
cross-check. The vertex values of the minus solutions are exact:
f_{k,-}(z,0) = 1 and f'_{k,-}(z,0) = -iz, because V vanishes on x <= 0.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .jost import JostCache, NumericalQualityError, _as_z
from .netmodel import NetworkFunction, NetworkSpec

MIN_ABS_Z = 0.05
VERTEX_TOL = 1e-10


class BandError(ValueError):
    """Spectral point outside the validity band of the construction."""


@dataclass(eq=False)
class VertexData:
    """Per-branch vertex scalars at one z: f_{k,+}(0), f'_{k,+}(0)."""

    z: complex
    fp0: np.ndarray   # (N,)
    dfp0: np.ndarray  # (N,)

    @property
    def fm0(self):
        return np.ones_like(self.fp0)

    @property
    def dfm0(self):
        return np.full_like(self.fp0, -1j * self.z)

    def w_minus(self):
        """W_{k,-}(z) = f_- f'_+ - f_+ f'_- evaluated at the vertex."""
        return self.dfp0 + 1j * self.z * self.fp0

    def s_value(self):
        """s(z) = sum_k f'_{k,+}(z,0) / (iz f_{k,+}(z,0))."""
        return np.sum(self.dfp0 / (1j * self.z * self.fp0))


class EigenAssembler:
    """Caches vertex data and branch arrays per spectral point."""

    def __init__(self, network: NetworkSpec, cache: JostCache | None = None):
        self.network = network
        self.cache = cache or JostCache(network, refine=2)
        self._vertex = {}

    def vertex(self, z) -> VertexData:
        z = _as_z(z)
        vd = self._vertex.get(z)
        if vd is None:
            fp0 = np.empty(self.network.n_branches, dtype=np.complex128)
            dfp0 = np.empty_like(fp0)
            for j in range(self.network.n_branches):
                bb = self.cache.branch_batch(j, np.asarray([z]), need_minus=False)
                fp0[j], dfp0[j] = bb.fp0[0], bb.dfp0[0]
            vd = VertexData(z=z, fp0=fp0, dfp0=dfp0)
            self._vertex[z] = vd
        return vd

    def branch_f(self, j, z, sign):
        """(f, f') sampled along branch j for one sign."""
        z = _as_z(z)
        m, mp = self.cache.point(j, z, sign)
        osc = np.exp(1j * sign * z * self.cache.grid.x)
        return osc * m, osc * (1j * sign * z * m + mp)


@dataclass(eq=False)
class EigenFamily:
    """One generalized eigenfunction F^{sign,j} with its coefficients."""

    z: complex
    j: int
    sign: int
    c1: complex
    c2: complex
    d: np.ndarray              # (N,), entry j unused (set to 1)
    W_pm: complex              # vertex-determinant Wronskian W_{j,sign}
    components: NetworkFunction
    resid_continuity: float
    resid_kirchhoff: float
    c1_closed: complex = 0j    # closed-formula cross-check values
    c2_closed: complex = 0j


def vertex_system(vd: VertexData, j: int, sign: int):
    """Vertex 2x2 system (matrix, rhs) and the d-normalization data.

    With d_{j+1} = 1 the continuity/Kirchhoff conditions reduce to a 2x2
    system for (c1, c2) whose determinant is the Wronskian W_{j,sign}.
    """
    n = vd.fp0.size
    jp = (j + 1) % n
    if sign > 0:
        f_j, df_j = vd.fp0[j], vd.dfp0[j]          # f_{j,+}
        f_jo, df_jo = vd.fm0[j], vd.dfm0[j]        # f_{j,-}
        f_opp, df_opp = vd.fm0, vd.dfm0            # f_{k,-} for k != j
    else:
        f_j, df_j = vd.fm0[j], vd.dfm0[j]
        f_jo, df_jo = vd.fp0[j], vd.dfp0[j]
        f_opp, df_opp = vd.fp0, vd.dfp0
    g = f_opp[jp]
    mask = np.arange(n) != j
    s_sum = np.sum(df_opp[mask] / f_opp[mask])
    mat = np.array([[f_j, f_jo], [df_j, df_jo]])
    rhs = np.array([g, -g * s_sum])
    d = g / f_opp
    return mat, rhs, d, s_sum


def build_family(network: NetworkSpec, z, j: int, sign,
                 assembler: EigenAssembler | None = None,
                 min_abs_z=MIN_ABS_Z) -> EigenFamily:
    """Assemble F^{sign,j}_{z^2} (linear vertex solve, d_{j+1} = 1)."""
    z = _as_z(z)
    s = +1 if sign in ("+", 1, +1) else -1
    if abs(z) < min_abs_z:
        raise BandError(
            f"|z| = {abs(z):.3g} below the family construction band "
            f"(>= {min_abs_z}); use the combined kernel forms instead")
    asm = assembler or EigenAssembler(network)
    vd = asm.vertex(z)
    if np.any(np.abs(vd.fp0) < 1e-12):
        raise BandError("f_{k,+}(z,0) vanished; assumption band violated")
    mat, rhs, d, _ = vertex_system(vd, j, s)
    det = mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0]
    if abs(det) < 1e-12:
        raise NumericalQualityError(f"degenerate Wronskian at z = {z}")
    c = np.linalg.solve(mat, rhs)
    c1, c2 = complex(c[0]), complex(c[1])
    # closed formulas from the vertex lemma, with the branch-sampled Wronskian
    w_sampled = wronskian(network, j, z, s, assembler=asm)
    n = network.n_branches
    jp = (j + 1) % n
    if s > 0:
        f_opp, df_opp = vd.fm0, vd.dfm0
        f_same, df_same = vd.fp0[j], vd.dfp0[j]
    else:
        f_opp, df_opp = vd.fp0, vd.dfp0
        f_same, df_same = vd.fm0[j], vd.dfm0[j]
    mask = np.arange(n) != j
    s_sum = np.sum(df_opp[mask] / f_opp[mask])
    c1_closed = f_opp[jp] / w_sampled * (df_opp[j] + f_opp[j] * s_sum)
    c2_closed = -f_opp[jp] / w_sampled * (df_same + f_same * s_sum)

    vals = np.empty((n, network.grid.x.size), dtype=np.complex128)
    dvals0 = np.empty(n, dtype=np.complex128)
    for k in range(n):
        f_plus, df_plus = asm.branch_f(k, z, +1)
        f_minus, df_minus = asm.branch_f(k, z, -1)
        if k == j:
            if s > 0:
                vals[k] = c1 * f_plus + c2 * f_minus
                dvals0[k] = c1 * df_plus[0] + c2 * df_minus[0]
            else:
                vals[k] = c1 * f_minus + c2 * f_plus
                dvals0[k] = c1 * df_minus[0] + c2 * df_plus[0]
        else:
            if s > 0:
                vals[k] = d[k] * f_minus
                dvals0[k] = d[k] * df_minus[0]
            else:
                vals[k] = d[k] * f_plus
                dvals0[k] = d[k] * df_plus[0]
    v0 = vals[:, 0]
    scale0 = max(np.max(np.abs(v0)), 1e-300)
    resid_c = float(np.max(np.abs(v0 - v0[j])) / scale0)
    resid_k = float(np.abs(np.sum(dvals0)) / max(np.max(np.abs(dvals0)), 1e-300))
    if resid_c > VERTEX_TOL or resid_k > VERTEX_TOL:
        warnings.warn(f"vertex residuals {resid_c:.2e}/{resid_k:.2e} above "
                      f"{VERTEX_TOL:.0e} at z = {z}")
    dd = d.copy()
    dd[j] = 1.0
    return EigenFamily(z=z, j=j, sign=s, c1=c1, c2=c2, d=dd,
                       W_pm=complex(det),
                       components=NetworkFunction(network.grid, vals),
                       resid_continuity=resid_c, resid_kirchhoff=resid_k,
                       c1_closed=complex(c1_closed), c2_closed=complex(c2_closed))


def wronskian(network: NetworkSpec, j: int, z, sign,
              assembler: EigenAssembler | None = None, n_samples=8,
              constancy_tol=1e-8) -> complex:
    """W_{j,sign}(z) = f_{j,sign} f'_{j,-sign} - f_{j,-sign} f'_{j,sign}.

    Sampled at ``n_samples`` grid points along the branch; the mean is
    returned after a constancy check (the exponential factors cancel
    algebraically, so the sampled spread measures solver quality only).
    Solves on two nested refinements of the base grid; the mean is
    Richardson-extrapolated, the constancy check runs on the finer grid.
    """
    from . import _kernels

    z = _as_z(z)
    s = +1 if sign in ("+", 1, +1) else -1
    if abs(z) < 1e-12:
        raise BandError("Wronskian is degenerate at z = 0")
    profiles = []
    for factor in (2, 4):
        g = network.grid.refined(factor)
        vlo, vhi = network.potentials[j].cell_values(g.x)
        mp_, mpp = _kernels.volterra_m(g.x, vlo, vhi, z, +1)[:2]
        mm_, mmp = _kernels.volterra_m(g.x, vlo, vhi, z, -1)[:2]
        # exponentials cancel: W_+ = (m_+ m_-' - m_- m_+') - 2iz m_+ m_-
        profiles.append((mp_ * mmp - mm_ * mpp) - 2j * z * mp_ * mm_)
    # nested grids share nodes: refined(4).x[::2] == refined(2).x, so the
    # trapezoid error cancels pointwise under Richardson extrapolation
    w_all = (4.0 * profiles[1][::2] - profiles[0]) / 3.0
    if s <= 0:
        w_all = -w_all
    n = w_all.size
    idx = np.linspace(0.05 * n, 0.9 * n, n_samples).astype(int)
    w = w_all[idx]
    mean = np.mean(w)
    dev = np.max(np.abs(w - mean))
    if dev > constancy_tol * abs(mean):
        raise NumericalQualityError(
            f"Wronskian not constant: spread {dev:.2e} vs |W| = {abs(mean):.2e}")
    return complex(mean)


@dataclass(eq=False)
class SFunction:
    """s(z) = sum_k (1 - R_{k,2})/(1 + R_{k,2}) on a z grid."""

    z: np.ndarray
    values: np.ndarray
    min_abs: float
    re_s0_extrapolated: float
    re_s0_predicted: float      # sum_k 1/gamma_k^2
    band_min_abs: float         # empirical min over the band samples
    kappa: float

    def __post_init__(self):
        if self.min_abs <= 0:
            raise NumericalQualityError("s(z) lower bound is not positive")


def s_function(network: NetworkSpec, z_grid, cache: JostCache | None = None,
               kappa=0.1) -> SFunction:
    """Evaluate s on a real grid plus a band sample at Im z in {kappa/2, kappa}.

    Also extrapolates Re s to z = 0 from the three smallest grid points
    (quadratically in z; Re s is even in z on the real axis) and compares
    with the predicted limit sum_k gamma_k^{-2}.
    """
    from .jost import zero_energy_constants

    z_grid = np.sort(np.atleast_1d(np.asarray(z_grid, dtype=np.float64)))
    if np.any(z_grid == 0.0):
        raise ValueError("z = 0 not allowed; the limit is reported separately")
    cache = cache or JostCache(network)
    asm = EigenAssembler(network, cache)

    def s_at(z_arr):
        out = np.empty(z_arr.size, dtype=np.complex128)
        for i, z in enumerate(z_arr):
            vd = asm.vertex(complex(z))
            denom = 1j * complex(z) * vd.fp0
            if np.any(np.abs(denom) < 1e-14):
                raise BandError(f"1 + R_2 vanished near z = {z}")
            out[i] = vd.s_value()
        return out

    vals = s_at(z_grid)
    band = []
    for im in (kappa / 2, kappa):
        band.append(s_at(z_grid[:: max(1, z_grid.size // 16)] + 1j * im))
    band_min = float(min(np.min(np.abs(b)) for b in band))
    # Re s is even in z on the real axis; fit a + b z^2 + c z^4 exactly
    # through the three smallest grid points and evaluate at 0
    z3 = z_grid[:3]
    re3 = vals[:3].real
    if z3.size == 3:
        vand = np.vander(z3 ** 2, 3, increasing=True)
        re0 = float(np.linalg.solve(vand, re3)[0])
    else:
        re0 = float(re3[0])
    pred = 0.0
    for j in range(network.n_branches):
        _, gam = zero_energy_constants(network, j, cache)
        pred += 1.0 / abs(gam) ** 2
    return SFunction(z=z_grid, values=vals, min_abs=float(np.min(np.abs(vals))),
                     re_s0_extrapolated=re0, re_s0_predicted=float(pred),
                     band_min_abs=band_min, kappa=kappa)


@dataclass(eq=False)
class CoeffBoundsReport:
    z: np.ndarray
    c1w_over_z: np.ndarray   # |c_{j,-,1} W_{j,-}| / |z| per grid point (min over j)
    c2_over_s: np.ndarray    # |c_{j,-,2}| / |s(z)| (max over j)
    c1_inf: float
    c2_sup: float

    def __post_init__(self):
        if self.c1_inf <= 0:
            raise NumericalQualityError("empirical c1 lower bound not positive")


def coeff_bounds(network: NetworkSpec, z_grid,
                 assembler: EigenAssembler | None = None) -> CoeffBoundsReport:
    """Empirical constants of the coefficient bounds for the minus families."""
    z_grid = np.atleast_1d(np.asarray(z_grid, dtype=np.float64))
    asm = assembler or EigenAssembler(network)
    n = network.n_branches
    c1w = np.empty(z_grid.size)
    c2s = np.empty(z_grid.size)
    for i, z in enumerate(z_grid):
        vd = asm.vertex(complex(z))
        s_abs = abs(vd.s_value())
        vals1, vals2 = [], []
        for j in range(n):
            mat, rhs, _, _ = vertex_system(vd, j, -1)
            det = mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0]
            c = np.linalg.solve(mat, rhs)
            vals1.append(abs(c[0] * det) / abs(z))
            vals2.append(abs(c[1]) / s_abs)
        c1w[i] = min(vals1)
        c2s[i] = max(vals2)
    return CoeffBoundsReport(z=z_grid, c1w_over_z=c1w, c2_over_s=c2s,
                             c1_inf=float(np.min(c1w)), c2_sup=float(np.max(c2s)))


def p_diagnostic(network: NetworkSpec, z_grid,
                 assembler: EigenAssembler | None = None) -> np.ndarray:
    """p(mu) = c_{j,-,2}/(f_{j+1,+}(mu,0) s(mu)) for j = 0 on a real grid.

    The printed low-energy coefficient; checked for boundedness and
    grid-refinement stability of its discrete H^1 seminorm.
    """
    z_grid = np.atleast_1d(np.asarray(z_grid, dtype=np.float64))
    asm = assembler or EigenAssembler(network)
    out = np.empty(z_grid.size, dtype=np.complex128)
    for i, z in enumerate(z_grid):
        vd = asm.vertex(complex(z))
        mat, rhs, _, _ = vertex_system(vd, 0, -1)
        c = np.linalg.solve(mat, rhs)
        jp = 1 % network.n_branches
        out[i] = c[1] / (vd.fp0[jp] * vd.s_value())
    return out
