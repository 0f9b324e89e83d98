"""Star network model: branch grids, potentials, sampled network functions.

A star-shaped network is N >= 2 copies of the half line [0, oo) glued at
x = 0. Functions on it are N-tuples of half-line functions sharing one
branch grid. Potentials are described symbolically (so they can be
resampled exactly on refined grids) and are extended by zero to x < 0.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad


class NotInL1sError(ValueError):
    """Weighted L^1 norm does not exist for the requested weight."""


class GridTruncationError(ValueError):
    """Potential tail mass beyond x_max exceeds the grid's tail tolerance."""


class WeightClassWarning(UserWarning):
    """Potential misses the decay class gamma > 5/2 required by the theory."""


@dataclass(frozen=True, eq=False)
class BranchGrid:
    """Shared half-line grid, graded toward the vertex by default.

    Node i of the base graded grid sits at x_max*(i/(n-1))^grading; extra
    breakpoints (e.g. square-bump edges) are snapped in exactly so piecewise
    potentials stay piecewise smooth between nodes.
    """

    x_max: float = 40.0
    n_points: int = 1600
    scheme: str = "graded"
    grading: float = 1.5
    tail_tol: float = 1e-10
    snap: tuple = ()
    x: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.x_max <= 0:
            raise ValueError("x_max must be positive")
        if self.n_points < 16:
            raise ValueError("n_points must be at least 16")
        if self.scheme not in ("graded", "uniform"):
            raise ValueError(f"unknown grid scheme {self.scheme!r}")
        u = np.linspace(0.0, 1.0, self.n_points)
        x = self.x_max * (u ** self.grading if self.scheme == "graded" else u)
        pts = [b for b in self.snap if 0.0 < b < self.x_max]
        if pts:
            x = np.unique(np.concatenate([x, np.asarray(pts, dtype=np.float64)]))
            # drop near-duplicates that would create degenerate cells
            keep = np.concatenate([[True], np.diff(x) > 1e-12 * self.x_max])
            x = x[keep]
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "weights", _trapezoid_weights(x))

    def refined(self, factor: int = 2) -> "BranchGrid":
        """Nested refinement: insert midpoints (factor-1 per cell)."""
        x = self.x
        if factor < 2:
            return self
        pieces = [x]
        for k in range(1, factor):
            pieces.append(x[:-1] + np.diff(x) * k / factor)
        xr = np.sort(np.concatenate(pieces))
        g = object.__new__(BranchGrid)
        for name, val in (
            ("x_max", self.x_max), ("n_points", xr.size), ("scheme", self.scheme),
            ("grading", self.grading), ("tail_tol", self.tail_tol), ("snap", self.snap),
            ("x", xr), ("weights", _trapezoid_weights(xr)),
        ):
            object.__setattr__(g, name, val)
        return g

    def to_dict(self):
        return {
            "x_max": self.x_max,
            "n_points": self.n_points,
            "scheme": self.scheme,
            "grading": self.grading,
            "tail_tol": self.tail_tol,
        }


def _trapezoid_weights(x):
    w = np.zeros_like(x)
    h = np.diff(x)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


_KINDS = ("zero", "exp_decay", "square_bump", "gaussian_bump", "table")


@dataclass(frozen=True)
class PotentialSpec:
    """One branch potential; evaluation at x < 0 returns exactly 0."""

    kind: str = "zero"
    amplitude: float = 0.0     # exp_decay a, gaussian amplitude
    rate: float = 1.0          # exp_decay rate r > 0
    height: float = 0.0        # square_bump h
    left: float = 0.0          # square_bump left edge >= 0
    right: float = 1.0         # square_bump right edge > left
    center: float = 0.0        # gaussian center >= 0
    width: float = 1.0         # gaussian width > 0
    xs: tuple = ()             # table abscissae (increasing, >= 0)
    values: tuple = ()         # table values
    gamma: float = 3.0         # decay exponent the potential claims

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "exp_decay" and self.rate <= 0:
            raise ValueError("exp_decay rate must be > 0")
        if self.kind == "square_bump":
            if self.left < 0 or self.right <= self.left:
                raise ValueError("square_bump needs 0 <= left < right")
        if self.kind == "gaussian_bump":
            if self.center < 0 or self.width <= 0:
                raise ValueError("gaussian_bump needs center >= 0, width > 0")
        if self.kind == "table":
            xs = np.asarray(self.xs, dtype=np.float64)
            vals = np.asarray(self.values, dtype=np.float64)
            if xs.size < 2 or xs.size != vals.size:
                raise ValueError("table needs matching x/value samples (>= 2)")
            if xs[0] < 0 or np.any(np.diff(xs) <= 0):
                raise ValueError("table abscissae must be increasing and >= 0")
            if not np.all(np.isreal(vals)):
                raise ValueError("potential values must be real")

    # -- constructors ------------------------------------------------------
    @staticmethod
    def zero():
        return PotentialSpec(kind="zero")

    @staticmethod
    def exp_decay(amplitude, rate, gamma=3.0):
        return PotentialSpec(kind="exp_decay", amplitude=float(amplitude),
                             rate=float(rate), gamma=gamma)

    @staticmethod
    def square_bump(height, left, right, gamma=3.0):
        return PotentialSpec(kind="square_bump", height=float(height),
                             left=float(left), right=float(right), gamma=gamma)

    @staticmethod
    def gaussian_bump(amplitude, center, width, gamma=3.0):
        return PotentialSpec(kind="gaussian_bump", amplitude=float(amplitude),
                             center=float(center), width=float(width), gamma=gamma)

    @staticmethod
    def table(xs, values, gamma=3.0):
        return PotentialSpec(kind="table", xs=tuple(float(v) for v in xs),
                             values=tuple(float(v) for v in values), gamma=gamma)

    # -- evaluation --------------------------------------------------------
    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros_like(x)
        pos = x >= 0
        if self.kind == "zero":
            pass
        elif self.kind == "exp_decay":
            out[pos] = self.amplitude * np.exp(-self.rate * x[pos])
        elif self.kind == "square_bump":
            inside = pos & (x >= self.left) & (x <= self.right)
            out[inside] = self.height
        elif self.kind == "gaussian_bump":
            out[pos] = self.amplitude * np.exp(-((x[pos] - self.center) / self.width) ** 2)
        elif self.kind == "table":
            xs = np.asarray(self.xs)
            vals = np.asarray(self.values)
            inside = pos & (x >= xs[0]) & (x <= xs[-1])
            out[inside] = np.interp(x[inside], xs, vals)
        return out

    def breakpoints(self):
        """Abscissae where the potential is not smooth (snapped into grids)."""
        if self.kind == "square_bump":
            return (self.left, self.right)
        if self.kind == "table":
            return tuple(self.xs)
        return ()

    def cell_values(self, x):
        """One-sided endpoint values per grid cell: (V(x_j^+), V(x_{j+1}^-)).

        Distinguishes the two limits only where V jumps (square bump edges
        that sit on grid nodes); elsewhere both equal the node samples.
        """
        v = self(x)
        vlo, vhi = v[:-1].copy(), v[1:].copy()
        if self.kind == "square_bump":
            vlo[:] = np.where((x[:-1] >= self.left) & (x[:-1] < self.right),
                              self.height, 0.0)
            vhi[:] = np.where((x[1:] > self.left) & (x[1:] <= self.right),
                              self.height, 0.0)
        return vlo, vhi

    def is_zero(self):
        if self.kind == "zero":
            return True
        if self.kind == "exp_decay" or self.kind == "gaussian_bump":
            return self.amplitude == 0.0
        if self.kind == "square_bump":
            return self.height == 0.0
        return all(v == 0.0 for v in self.values)

    def tail_integral(self, x0):
        """int_{x0}^oo (1 + y) |V(y)| dy, closed form per kind."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "exp_decay":
            a, r = abs(self.amplitude), self.rate
            return a * np.exp(-r * x0) * ((1.0 + x0) / r + 1.0 / r**2)
        if self.kind == "square_bump":
            lo = max(x0, self.left)
            if lo >= self.right:
                return 0.0
            return abs(self.height) * ((self.right - lo) + (self.right**2 - lo**2) / 2)
        if self.kind == "gaussian_bump":
            from scipy.special import erfc
            a, c, w = abs(self.amplitude), self.center, self.width
            u = (x0 - c) / w
            return a * ((1.0 + c) * np.sqrt(np.pi) * w / 2 * erfc(u)
                        + w**2 / 2 * np.exp(-u * u))
        # table: exact integral of |linear| * (1 + y) over the part beyond x0
        xs = np.asarray(self.xs)
        if x0 >= xs[-1]:
            return 0.0
        total = 0.0
        for a, b, va, vb in _table_segments(self, x0):
            total += _abs_linear_moment(a, b, va, vb)
        return total


def _table_segments(p, x0):
    """Table segments (clipped to y >= max(x0, 0)), split at sign changes."""
    xs = np.asarray(p.xs)
    vals = np.asarray(p.values)
    for i in range(xs.size - 1):
        a, b = xs[i], xs[i + 1]
        if b <= x0:
            continue
        va, vb = vals[i], vals[i + 1]
        if a < x0:
            va = va + (vb - va) * (x0 - a) / (b - a)
            a = x0
        if va * vb < 0:
            root = a + (b - a) * va / (va - vb)
            yield a, root, va, 0.0
            yield root, b, 0.0, vb
        else:
            yield a, b, va, vb


def _abs_linear_moment(a, b, va, vb):
    """int_a^b |linear(y)| (1 + y) dy for the segment with endpoint values."""
    va, vb = abs(va), abs(vb)
    h = b - a
    if h <= 0:
        return 0.0
    # |linear| = va + (vb-va) s on s in [0,1]; weight (1 + a + h s)
    m0 = h * (va + vb) / 2
    m1 = h * h * (va / 6 + vb / 3)
    return (1.0 + a) * m0 + m1


def weighted_norm(p: PotentialSpec, s: float) -> float:
    """Weighted norm int_0^oo |V(x)| (1 + x^2)^{s/2} dx.

    Closed forms where available, otherwise adaptive quadrature with
    relative accuracy 1e-8.
    """
    if s < 0:
        raise ValueError("weight exponent s must be >= 0")
    if p.kind == "zero" or p.is_zero():
        return 0.0
    if p.kind == "exp_decay" and s == 0:
        return abs(p.amplitude) / p.rate
    if p.kind == "square_bump" and s == 0:
        return abs(p.height) * (p.right - p.left)
    wt = lambda x: (1.0 + x * x) ** (s / 2.0)
    if p.kind == "exp_decay":
        val, _ = quad(lambda x: abs(p.amplitude) * np.exp(-p.rate * x) * wt(x),
                      0.0, np.inf, epsabs=0.0, epsrel=1e-10, limit=400)
        return val
    if p.kind == "square_bump":
        val, _ = quad(lambda x: abs(p.height) * wt(x), p.left, p.right,
                      epsabs=0.0, epsrel=1e-10, limit=400)
        return val
    if p.kind == "gaussian_bump":
        val, _ = quad(lambda x: abs(p(np.asarray([x]))[0]) * wt(x), 0.0, np.inf,
                      epsabs=0.0, epsrel=1e-10, limit=400)
        return val
    # table
    vals = np.asarray(p.values)
    if abs(vals[-1]) > 1e-8 * max(np.max(np.abs(vals)), 1e-300):
        raise NotInL1sError("table potential tail does not decay; not in L^1_s")
    total = 0.0
    for a, b, va, vb in _table_segments(p, 0.0):
        seg, _ = quad(lambda x, a=a, b=b, va=va, vb=vb:
                      abs(va + (vb - va) * (x - a) / (b - a)) * wt(x),
                      a, b, epsabs=0.0, epsrel=1e-10, limit=200)
        total += seg
    return total


@dataclass(frozen=True, eq=False)
class NetworkSpec:
    """Star network: one potential per branch plus the shared grid."""

    potentials: tuple
    grid: BranchGrid

    def __post_init__(self):
        pots = tuple(self.potentials)
        object.__setattr__(self, "potentials", pots)
        if len(pots) < 2:
            raise ValueError("a star network needs N >= 2 branches")
        snap = []
        for p in pots:
            snap.extend(b for b in p.breakpoints() if b < self.grid.x_max)
        if snap:
            need = [b for b in snap
                    if np.min(np.abs(self.grid.x - b)) > 1e-12 * self.grid.x_max]
            if need:
                g = BranchGrid(self.grid.x_max, self.grid.n_points, self.grid.scheme,
                               self.grid.grading, self.grid.tail_tol,
                               snap=tuple(sorted(set(self.grid.snap) | set(snap))))
                object.__setattr__(self, "grid", g)
        for j, p in enumerate(pots):
            tail = p.tail_integral(self.grid.x_max)
            if tail >= self.grid.tail_tol:
                raise GridTruncationError(
                    f"branch {j}: tail mass {tail:.3e} beyond x_max exceeds "
                    f"tail_tol {self.grid.tail_tol:.1e}")
            if p.gamma <= 2.5 and not p.is_zero():
                warnings.warn(
                    f"branch {j}: gamma = {p.gamma} <= 5/2; the decay theory "
                    "needs gamma > 5/2 (running anyway)", WeightClassWarning)
            weighted_norm(p, p.gamma)  # raises NotInL1sError if divergent

    @property
    def n_branches(self):
        return len(self.potentials)

    def v_samples(self, grid=None):
        """(N, n) potential samples on the (possibly refined) grid."""
        g = self.grid if grid is None else grid
        return np.stack([p(g.x) for p in self.potentials])

    def v_cell_samples(self, grid=None):
        """Per-branch one-sided cell-endpoint samples [(vlo, vhi), ...]."""
        g = self.grid if grid is None else grid
        return [p.cell_values(g.x) for p in self.potentials]

    def to_dict(self):
        return {
            "n_branches": self.n_branches,
            "potentials": [_potential_to_dict(p) for p in self.potentials],
            "grid": self.grid.to_dict(),
        }

    @staticmethod
    def from_dict(cfg):
        return load_network(cfg)


def _potential_to_dict(p):
    d = {"kind": p.kind, "gamma": p.gamma}
    if p.kind == "exp_decay":
        d.update(amplitude=p.amplitude, rate=p.rate)
    elif p.kind == "square_bump":
        d.update(height=p.height, left=p.left, right=p.right)
    elif p.kind == "gaussian_bump":
        d.update(amplitude=p.amplitude, center=p.center, width=p.width)
    elif p.kind == "table":
        d.update(x=list(p.xs), values=list(p.values))
    return d


def _potential_from_dict(d):
    kind = d.get("kind", "zero")
    gamma = float(d.get("gamma", 3.0))
    if kind == "zero":
        return PotentialSpec.zero()
    if kind == "exp_decay":
        return PotentialSpec.exp_decay(d["amplitude"], d["rate"], gamma)
    if kind == "square_bump":
        return PotentialSpec.square_bump(d["height"], d["left"], d["right"], gamma)
    if kind == "gaussian_bump":
        return PotentialSpec.gaussian_bump(d["amplitude"], d["center"], d["width"], gamma)
    if kind == "table":
        return PotentialSpec.table(d["x"], d["values"], gamma)
    raise ValueError(f"unknown potential kind {kind!r}")


def load_network(cfg) -> NetworkSpec:
    """Build a NetworkSpec from a JSON config path, JSON string or dict."""
    if isinstance(cfg, (str, bytes)):
        text = cfg
        try:
            data = json.loads(text)
        except json.JSONDecodeError:
            with open(cfg) as fh:
                data = json.load(fh)
    else:
        data = cfg
    pots = [_potential_from_dict(p) for p in data["potentials"]]
    n = int(data.get("n_branches", len(pots)))
    if n != len(pots):
        raise ValueError(f"n_branches = {n} but {len(pots)} potentials given")
    gd = data.get("grid", {})
    grid = BranchGrid(
        x_max=float(gd.get("x_max", 40.0)),
        n_points=int(gd.get("n_points", 1600)),
        scheme=gd.get("scheme", "graded"),
        grading=float(gd.get("grading", 1.5)),
        tail_tol=float(gd.get("tail_tol", 1e-10)),
    )
    return NetworkSpec(potentials=tuple(pots), grid=grid)


@dataclass(frozen=True, eq=False)
class NetworkFunction:
    """Complex samples on every branch of the shared grid."""

    grid: BranchGrid
    values: np.ndarray  # (N, n) complex

    def __post_init__(self):
        vals = np.atleast_2d(np.asarray(self.values, dtype=np.complex128))
        if vals.shape[1] != self.grid.x.size:
            raise ValueError("branch arrays do not match the grid")
        object.__setattr__(self, "values", vals)

    @property
    def n_branches(self):
        return self.values.shape[0]

    @staticmethod
    def from_callables(grid, funcs):
        return NetworkFunction(grid, np.stack([np.asarray(f(grid.x), dtype=np.complex128)
                                               for f in funcs]))

    @staticmethod
    def zero(grid, n_branches):
        return NetworkFunction(grid, np.zeros((n_branches, grid.x.size), dtype=np.complex128))

    def __add__(self, other):
        return NetworkFunction(self.grid, self.values + other.values)

    def __sub__(self, other):
        return NetworkFunction(self.grid, self.values - other.values)

    def __mul__(self, a):
        return NetworkFunction(self.grid, self.values * a)

    __rmul__ = __mul__

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("branch,x,re,im\n")
            for k in range(self.n_branches):
                for x, v in zip(self.grid.x, self.values[k]):
                    fh.write(f"{k},{x!r},{v.real!r},{v.imag!r}\n")

    @staticmethod
    def from_csv(path, grid):
        by_branch = {}
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            if header != ["branch", "x", "re", "im"]:
                raise ValueError("expected header branch,x,re,im")
            for line in fh:
                b, x, re, im = line.strip().split(",")
                by_branch.setdefault(int(b), []).append((float(x), float(re), float(im)))
        n = max(by_branch) + 1
        vals = np.zeros((n, grid.x.size), dtype=np.complex128)
        for b, rows in by_branch.items():
            xs = np.asarray([r[0] for r in rows])
            if xs.size != grid.x.size or np.max(np.abs(xs - grid.x)) > 1e-9:
                raise ValueError("CSV abscissae do not match the grid")
            vals[b] = [complex(r[1], r[2]) for r in rows]
        return NetworkFunction(grid, vals)


def norms(f: NetworkFunction) -> dict:
    """L^1, L^2 and sup norms over the whole network (trapezoid rule)."""
    w = f.grid.weights
    a = np.abs(f.values)
    return {
        "l1": float(np.sum(a * w)),
        "l2": float(np.sqrt(np.sum(a * a * w))),
        "linf": float(np.max(a)),
    }


def gaussian_bump_function(grid, n_branches, branch=0, center=2.0, width=0.8,
                           amplitude=1.0):
    """Convenience initial datum: one Gaussian bump on a single branch."""
    vals = np.zeros((n_branches, grid.x.size), dtype=np.complex128)
    vals[branch] = amplitude * np.exp(-((grid.x - center) / width) ** 2)
    return NetworkFunction(grid, vals)
