"""Jost solutions on the branches and the derived scattering coefficients.

Each branch carries the half-line Schrodinger operator -d^2/dx^2 + V_j with
V_j extended by zero to x < 0. The Jost solutions f_{j,+-}(z,x) =
e^{+-izx} m_{j,+-}(z,x) are built by Picard iteration of the Volterra
equations for the de-oscillated factors m; transmission and reflection
coefficients follow from the same integrals:

    1/T_j(z)        = 1 - (2iz)^{-1} int V_j m_{j,+}(z,y) dy
    R_{j,2}/T_j(z)  =     (2iz)^{-1} int e^{2izy} V_j m_{j,+}(z,y) dy

R_{j,1} is not printed in closed form; it is reconstructed from the exact
two-term asymptotics of f_{j,-} past the support of V (flagged as such).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import _kernels
from .netmodel import BranchGrid, NetworkSpec, weighted_norm

VOLTERRA_TOL = 1e-10
MAX_ITER = 200
ASSUME_TOL = 1e-8
CLASS_TOL = 1e-8
UNITARITY_TOL = 1e-6


class NonConvergenceError(RuntimeError):
    """Picard iteration exhausted its budget."""

    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class AssumptionError(RuntimeError):
    """The standing vertex assumption |gamma_k| > 0 fails."""


class PoleProximityError(RuntimeError):
    """1/T vanished on the real axis (should not happen for real z != 0)."""


class NumericalQualityError(RuntimeError):
    """A quantity that must be constant/bounded failed its internal check."""


class UnitarityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SpectralPoint:
    """Spectral parameter z in the closed upper half plane."""

    z: complex

    def __post_init__(self):
        z = complex(self.z)
        if z.imag < -1e-15:
            raise ValueError("spectral points live in Im z >= 0")
        object.__setattr__(self, "z", z)

    @staticmethod
    def sqrt_plus(lam, eps=0.0):
        """z_eps = sqrt(lam + i eps) with the principal branch (phase in [-pi, pi))."""
        return SpectralPoint(complex(np.sqrt(complex(lam, eps))))

    @property
    def is_real(self):
        return self.z.imag == 0.0


def _as_z(z):
    return z.z if isinstance(z, SpectralPoint) else complex(z)


@dataclass(eq=False)
class JostSolution:
    """Sampled Jost data for one branch at one spectral point.

    Arrays for a sign are None until that sign has been solved.
    """

    branch: int
    z: complex
    grid: BranchGrid
    m_plus: np.ndarray | None = None
    m_minus: np.ndarray | None = None
    f_plus: np.ndarray | None = None
    f_minus: np.ndarray | None = None
    df_plus: np.ndarray | None = None
    df_minus: np.ndarray | None = None
    iterations: int = 0
    residual: float = 0.0


def _fill_sign(sol, sign, m, mp):
    z, x = sol.z, sol.grid.x
    osc = np.exp(1j * sign * z * x)
    f = osc * m
    df = osc * (1j * sign * z * m + mp)
    if sign > 0:
        sol.m_plus, sol.f_plus, sol.df_plus = m, f, df
    else:
        sol.m_minus, sol.f_minus, sol.df_minus = m, f, df


def solve_m(network: NetworkSpec, j: int, z, sign="+", tol=VOLTERRA_TOL,
            max_iter=MAX_ITER, grid=None) -> JostSolution:
    """Solve the Volterra equation for m_{j,sign} at one spectral point."""
    s = +1 if sign in ("+", 1, +1) else -1
    g = network.grid if grid is None else grid
    z = _as_z(z)
    vlo, vhi = network.potentials[j].cell_values(g.x)
    m, mp, niter, residual = _kernels.volterra_m(g.x, vlo, vhi, z, s, tol, max_iter)
    if residual >= tol and niter >= max_iter:
        raise NonConvergenceError(
            f"branch {j}, z={z}: Volterra iteration did not reach {tol:.1e} "
            f"(residual {residual:.3e})", residual=residual)
    sol = JostSolution(branch=j, z=z, grid=g, iterations=int(niter),
                       residual=float(residual))
    _fill_sign(sol, s, m, mp)
    return sol


def solve_jost(network: NetworkSpec, j: int, z, tol=VOLTERRA_TOL,
               max_iter=MAX_ITER, grid=None) -> JostSolution:
    """Solve both signs and merge into one record."""
    sol = solve_m(network, j, z, "+", tol, max_iter, grid)
    other = solve_m(network, j, z, "-", tol, max_iter, grid)
    sol.m_minus, sol.f_minus, sol.df_minus = other.m_minus, other.f_minus, other.df_minus
    sol.iterations = max(sol.iterations, other.iterations)
    sol.residual = max(sol.residual, other.residual)
    return sol


# ----------------------------------------------------------------------
# batched branch data with optional Richardson-extrapolated scalars
# ----------------------------------------------------------------------

@dataclass(eq=False)
class BranchBatch:
    """Batched Jost data for one branch over a z array (base grid arrays)."""

    z: np.ndarray          # (B,)
    m_plus: np.ndarray     # (B, n)
    mp_plus: np.ndarray
    m_minus: np.ndarray | None
    mp_minus: np.ndarray | None
    fp0: np.ndarray        # f_{j,+}(z,0)  (Richardson-extrapolated if refine>1)
    dfp0: np.ndarray       # f'_{j,+}(z,0)
    b_int: np.ndarray      # int V m_+ dy
    a_int: np.ndarray      # int e^{2izy} V m_+ dy
    tail_fm: np.ndarray | None  # (f_-(x_N), f'_-(x_N)) pair, shape (2, B)
    iterations: np.ndarray


class JostCache:
    """Per-network solver front end with optional nested-grid extrapolation.

    refine = 1 solves on the base grid only; refine = 2 also solves on the
    midpoint-refined grid and Richardson-extrapolates the scalar outputs
    (vertex values, scattering integrals), which are the accuracy-critical
    quantities for unitarity-grade tolerances.
    """

    def __init__(self, network: NetworkSpec, refine=2, tol=VOLTERRA_TOL,
                 max_iter=MAX_ITER):
        self.network = network
        self.refine = refine
        self.tol = tol
        self.max_iter = max_iter
        self.grid = network.grid
        self.grid2 = network.grid.refined(2) if refine > 1 else None
        self._v = {g: network.v_cell_samples(g) for g in self._grids()}
        self._point_cache = {}

    def _grids(self):
        return (self.grid, self.grid2) if self.grid2 is not None else (self.grid,)

    def _solve(self, g, j, z_arr, sign):
        vlo, vhi = self._v[g][j]
        m, mp, niter, residual = _kernels.volterra_m_batch(
            g.x, vlo, vhi, z_arr, sign, self.tol, self.max_iter)
        bad = (residual >= self.tol) & (niter >= self.max_iter)
        if np.any(bad):
            k = int(np.argmax(bad))
            raise NonConvergenceError(
                f"branch {j}, z={z_arr[k]}: no convergence "
                f"(residual {residual[k]:.3e})", residual=float(residual[k]))
        return m, mp, niter

    def branch_batch(self, j, z_arr, need_minus=True, need_tail=False) -> BranchBatch:
        z_arr = np.atleast_1d(np.asarray(z_arr, dtype=np.complex128))
        g1 = self.grid
        m1, mp1, it1 = self._solve(g1, j, z_arr, +1)
        b1 = _cell_trapz(g1.x, *self._v[g1][j], m1)
        a1 = -mp1[:, 0]
        fp01, dfp01 = m1[:, 0], 1j * z_arr * m1[:, 0] + mp1[:, 0]
        mm1 = mpm1 = None
        tail1 = None
        if need_minus or need_tail:
            mm1, mpm1, itm = self._solve(g1, j, z_arr, -1)
            it1 = np.maximum(it1, itm)
            if need_tail:
                tail1 = _minus_tail(g1, z_arr, mm1, mpm1)
        if self.refine > 1:
            g2 = self.grid2
            m2, mp2, _ = self._solve(g2, j, z_arr, +1)
            b2 = _cell_trapz(g2.x, *self._v[g2][j], m2)
            a2 = -mp2[:, 0]
            fp02, dfp02 = m2[:, 0], 1j * z_arr * m2[:, 0] + mp2[:, 0]
            b1 = (4 * b2 - b1) / 3
            a1 = (4 * a2 - a1) / 3
            fp01 = (4 * fp02 - fp01) / 3
            dfp01 = (4 * dfp02 - dfp01) / 3
            if need_tail:
                mm2, mpm2, _ = self._solve(g2, j, z_arr, -1)
                tail2 = _minus_tail(g2, z_arr, mm2, mpm2)
                tail1 = (4 * tail2 - tail1) / 3
        return BranchBatch(z=z_arr, m_plus=m1, mp_plus=mp1, m_minus=mm1,
                           mp_minus=mpm1, fp0=fp01, dfp0=dfp01, b_int=b1,
                           a_int=a1, tail_fm=tail1, iterations=it1)

    def point(self, j, z, sign):
        """Cached single-point base-grid solve; returns (m, mp)."""
        z = _as_z(z)
        key = (j, z, sign)
        hit = self._point_cache.get(key)
        if hit is None:
            vlo, vhi = self._v[self.grid][j]
            m, mp, niter, residual = _kernels.volterra_m(
                self.grid.x, vlo, vhi, z, sign, self.tol, self.max_iter)
            if residual >= self.tol and niter >= self.max_iter:
                raise NonConvergenceError(
                    f"branch {j}, z={z}: no convergence", residual=float(residual))
            hit = (m, mp)
            self._point_cache[key] = hit
        return hit


def _cell_trapz(x, wlo, whi, m):
    """Trapezoid of a cell-weighted product: sum_j h_j (wlo_j m_j + whi_j m_{j+1})/2."""
    h = np.diff(x)
    return np.sum(h * (wlo * m[..., :-1] + whi * m[..., 1:]) / 2.0, axis=-1)


def _minus_tail(g, z_arr, m_minus, mp_minus):
    """(f_-(x_N), f'_-(x_N)) past the potential support."""
    xN = g.x[-1]
    osc = np.exp(-1j * z_arr * xN)
    f = osc * m_minus[:, -1]
    df = osc * (-1j * z_arr * m_minus[:, -1] + mp_minus[:, -1])
    return np.stack([f, df])


# ----------------------------------------------------------------------
# scattering coefficients
# ----------------------------------------------------------------------

@dataclass(eq=False)
class ScatteringData:
    """T, R1, R2 on a real-z grid plus the zero-energy constants."""

    branch: int
    z: np.ndarray
    T: np.ndarray
    R1: np.ndarray
    R2: np.ndarray
    nu: complex
    gamma_coef: complex
    classification: str
    unitarity_defect: np.ndarray
    T_from_fit: np.ndarray
    r1_source: str = "asymptotic-fit"

    def __post_init__(self):
        if np.max(self.unitarity_defect) > UNITARITY_TOL:
            warnings.warn(
                f"branch {self.branch}: max unitarity defect "
                f"{np.max(self.unitarity_defect):.2e} exceeds {UNITARITY_TOL:.0e}",
                UnitarityWarning)
        if abs(self.gamma_coef) <= ASSUME_TOL:
            raise AssumptionError(
                f"branch {self.branch}: |gamma| = {abs(self.gamma_coef):.2e} "
                "violates the standing vertex assumption")


def zero_energy_constants(network, j, cache: JostCache | None = None):
    """nu_j = int V m_+(0,.) dy and gamma_j = 1 + int x V m_+(0,x) dx."""
    cache = cache or JostCache(network)
    out = []
    for g in cache._grids():
        vlo, vhi = cache._v[g][j]
        m, mp, niter, residual = _kernels.volterra_m(
            g.x, vlo, vhi, 0.0, +1, cache.tol, cache.max_iter)
        nu = _cell_trapz(g.x, vlo, vhi, m[None])[0]
        gam = 1.0 + _cell_trapz(g.x, g.x[:-1] * vlo, g.x[1:] * vhi, m[None])[0]
        out.append((nu, gam))
    if len(out) == 2:
        nu = (4 * out[1][0] - out[0][0]) / 3
        gam = (4 * out[1][1] - out[0][1]) / 3
    else:
        nu, gam = out[0]
    return complex(nu), complex(gam)


def scattering(network: NetworkSpec, j: int, z_grid, cache: JostCache | None = None
               ) -> ScatteringData:
    """Transmission/reflection coefficients of branch j on a real z grid."""
    z_grid = np.atleast_1d(np.asarray(z_grid, dtype=np.float64))
    if np.any(z_grid == 0.0):
        raise ValueError("z = 0 is handled by the limit constants, not the grid")
    cache = cache or JostCache(network)
    bb = cache.branch_batch(j, z_grid.astype(np.complex128), need_minus=True,
                            need_tail=True)
    tiz = 2j * bb.z
    inv_t = 1.0 - bb.b_int / tiz
    if np.any(np.abs(inv_t) < 1e-12):
        raise PoleProximityError(f"branch {j}: 1/T vanished on the real grid")
    T = 1.0 / inv_t
    R2 = T * bb.a_int / tiz
    # R1 from the exact two-oscillation form of f_- past the support:
    # f_-(x) = a e^{-izx} + b e^{izx},  a = 1/T, b = R1/T.
    fN, dfN = bb.tail_fm
    xN = cache.grid.x[-1]
    a = (1j * bb.z * fN - dfN) * np.exp(1j * bb.z * xN) / tiz
    b = (dfN + 1j * bb.z * fN) * np.exp(-1j * bb.z * xN) / tiz
    R1 = b / a
    T_fit = 1.0 / a
    nu, gam = zero_energy_constants(network, j, cache)
    v_l1 = weighted_norm(network.potentials[j], 0.0)
    cls = "exceptional" if abs(nu) < CLASS_TOL * (1.0 + v_l1) else "generic"
    if cls == "generic" and abs(nu) < 100 * CLASS_TOL * (1.0 + v_l1):
        warnings.warn(f"branch {j} is near-exceptional (|nu| = {abs(nu):.2e})")
    defect = np.abs(np.abs(T) ** 2 + np.abs(R2) ** 2 - 1.0)
    return ScatteringData(branch=j, z=z_grid, T=T, R1=R1, R2=R2, nu=nu,
                          gamma_coef=gam, classification=cls,
                          unitarity_defect=defect, T_from_fit=T_fit)


def rho_constant(tol=1e-12):
    """The unique rho > 0 with rho*e^rho = 1, by bisection."""
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if mid * np.exp(mid) < 1.0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def check_assumption(network: NetworkSpec, cache: JostCache | None = None,
                     assume_tol=ASSUME_TOL):
    """Per-branch standing-assumption report.

    Returns a list of dicts with gamma_coef, holds, plus the two printed
    sufficient conditions (non-negative potential in the generic case, or
    first moment below rho with rho e^rho = 1).
    """
    cache = cache or JostCache(network)
    rho = rho_constant()
    out = []
    for j, p in enumerate(network.potentials):
        nu, gam = zero_energy_constants(network, j, cache)
        x = network.grid.x
        vx = p(x)
        vlo, vhi = p.cell_values(x)
        first_moment = float(_cell_trapz(x, x[:-1] * np.abs(vlo),
                                         x[1:] * np.abs(vhi), np.ones((1, x.size)))[0])
        generic = abs(nu) >= CLASS_TOL * (1.0 + weighted_norm(p, 0.0))
        out.append({
            "branch": j,
            "nu": nu,
            "gamma_coef": gam,
            "holds": bool(abs(gam) > assume_tol),
            "generic": bool(generic),
            "nonnegative": bool(np.min(vx) >= 0.0),
            "first_moment": first_moment,
            "first_moment_leq_rho": bool(first_moment <= rho),
            "rho": rho,
        })
    return out


def dm_dz(network: NetworkSpec, j: int, z, x, rel_step=1e-5,
          cache: JostCache | None = None) -> complex:
    """dm_{j,+}/dz at (z, x) by a central difference with relative step."""
    z = _as_z(z)
    h = rel_step * max(abs(z), 1.0)
    cache = cache or JostCache(network, refine=1)
    vals = []
    for zz in (z + h, z - h):
        m, _ = cache.point(j, zz, +1)
        spline_r = CubicSpline(cache.grid.x, m.real)
        spline_i = CubicSpline(cache.grid.x, m.imag)
        vals.append(spline_r(x) + 1j * spline_i(x))
    return complex((vals[0] - vals[1]) / (2 * h))


def ode_defect(grid: BranchGrid, v, z, f):
    """sup |-f'' + V f - z^2 f| / sup |f| by nonuniform second differences."""
    x = grid.x
    h1 = x[1:-1] - x[:-2]
    h2 = x[2:] - x[1:-1]
    d2 = 2.0 * (f[2:] / (h2 * (h1 + h2)) - f[1:-1] / (h1 * h2)
                + f[:-2] / (h1 * (h1 + h2)))
    res = -d2 + (v[1:-1] - z * z) * f[1:-1]
    return float(np.max(np.abs(res)) / np.max(np.abs(f)))
