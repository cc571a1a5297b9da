"""Line energies, the energy identity, the Gronwall bound and linearized stability.

The line energy on the diagonal s + t = u is

    E(u) = int λ(u) (x_s² + x_t²) ds.

For L[x] = g with x = 0 on both axes,

    E(u) - E(c) = int_c^u int (g (x_s + x_t) - 2 λ'(v) x_s x_t) ds dv,

which follows from div(λ x_t², λ x_s²) = g (x_s + x_t) - 2 λ' x_s x_t.
Diagonal integrals use the grid nodes (i, k - i) with spacing h in s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from hodograph.boundary import CauchyGoursatData
from hodograph.curvature import CurvatureProfile
from hodograph.grid import Field, Grid, GridError
from hodograph.volterra_cg import solve_picard

TRACE_TOL = 1e-12


class EnergyError(ValueError):
    """Raised when an energy computation's hypotheses fail."""


def _diag_index(grid: Grid, u: float) -> int:
    k = u / grid.h
    kr = int(round(k))
    if abs(k - kr) > 1e-7:
        raise EnergyError(f"u = {u} is not a grid diagonal")
    if kr < grid.m or kr > grid.ns + grid.nt:
        raise EnergyError(f"diagonal u = {u} lies outside the grid")
    return kr


def _diag_nodes(grid: Grid, k: int):
    i = np.arange(max(0, k - grid.nt), min(k, grid.ns) + 1)
    return i, k - i


def _diag_trapz(vals: np.ndarray, h: float) -> float:
    if vals.size < 2:
        return 0.0
    return float(h * (vals.sum() - 0.5 * (vals[0] + vals[-1])))


def _diag_integral(arr: np.ndarray, grid: Grid, k: int) -> float:
    i, j = _diag_nodes(grid, k)
    return _diag_trapz(arr[i, j], grid.h)


def line_energy(x: Field, profile: CurvatureProfile, u: float, grads=None) -> float:
    """Trapezoid value of E(u) along the grid diagonal s + t = u.

    Args:
        x: Field.
        profile: Curvature profile.
        u: Diagonal; must be a multiple of h inside the grid.
        grads: Optional precomputed (x_s, x_t) stencil arrays.
    """
    k = _diag_index(x.grid, u)
    xs, xt = x.gradient() if grads is None else grads
    return float(profile.lam(k * x.grid.h)) * _diag_integral(xs * xs + xt * xt, x.grid, k)


@dataclass
class EnergyTrace:
    u: np.ndarray
    E: np.ndarray
    x_s: np.ndarray = field(repr=False)
    x_t: np.ndarray = field(repr=False)

    def __post_init__(self):
        if np.any(self.E < 0):
            raise EnergyError("negative energy")

    def to_rows(self):
        return list(zip(self.u.tolist(), self.E.tolist()))


def energy_trace(x: Field, profile: CurvatureProfile, us=None) -> EnergyTrace:
    """Energies on every grid diagonal from c to min(S, T), or on ``us``."""
    g = x.grid
    xs, xt = x.gradient()
    if us is None:
        ks = np.arange(g.m, min(g.ns, g.nt) + 1)
    else:
        ks = np.array([_diag_index(g, u) for u in us], dtype=int)
    E = np.array([line_energy(x, profile, k * g.h, (xs, xt)) for k in ks])
    return EnergyTrace(ks * g.h, E, xs, xt)


def divergence_flag(values) -> bool:
    """True if energies computed under successive halvings of h fail to converge.

    Flags a growth by 2x or more in one refinement and, with three or more
    levels, successive differences that do not contract (ratio above 0.7).
    Grid values of a logarithmically divergent energy grow by a constant
    amount per halving, which the second test catches.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return False
    if np.any(v[1:] >= 2.0 * np.abs(v[:-1])) and np.any(v[1:] > 0):
        return True
    if v.size >= 3:
        d = np.abs(np.diff(v))
        scale = 1e-12 * max(1.0, float(np.max(np.abs(v))))
        if d[-2] > scale and d[-1] / d[-2] > 0.7:
            return True
    return False


def _check_axes(x: Field):
    g = x.grid
    m = g.m
    if np.max(np.abs(x.values[m:, 0])) > TRACE_TOL or np.max(np.abs(x.values[0, m:])) > TRACE_TOL:
        raise EnergyError("energy identity needs x = 0 on both axes")


def slab_integral(arr: np.ndarray, grid: Grid, c: float, u: float) -> float:
    """int_c^u int arr ds dv over the diagonals c <= s + t <= u (trapezoid in both)."""
    k0, k1 = _diag_index(grid, c), _diag_index(grid, u)
    inner = np.array([_diag_integral(arr, grid, k) for k in range(k0, k1 + 1)])
    return _diag_trapz(inner, grid.h)


def energy_identity_residual(x: Field, g: Field | np.ndarray, profile: CurvatureProfile,
                             c: float, u: float) -> float:
    """|E(u) - E(c) - int_c^u int (g (x_s + x_t) - 2 λ' x_s x_t) ds dv|.

    Raises:
        EnergyError: If x does not vanish on both axes.
    """
    _check_axes(x)
    gv = g.values if isinstance(g, Field) else np.asarray(g, float)
    xs, xt = x.gradient()
    grid = x.grid
    integrand = gv * (xs + xt) - 2.0 * profile.dlam(grid.U) * xs * xt
    Eu = line_energy(x, profile, u, (xs, xt))
    Ec = line_energy(x, profile, c, (xs, xt))
    return abs(Eu - Ec - slab_integral(integrand, grid, c, u))


def gronwall_bound(E_c: float, g, profile: CurvatureProfile, c: float, u: float,
                   grid: Grid | None = None) -> float:
    """λ(u) e^{u-c} / λ(c) * (E(c) + ||g||²/2) over the slab c <= s + t <= u.

    Args:
        E_c: Energy on the diagonal c.
        g: Forcing Field, nodal array (then ``grid`` is required), or the
            number 0 for no forcing.
        profile: Curvature profile with λ' > 0 on [c, u].
        c, u: Slab limits.

    Raises:
        EnergyError: If λ' <= 0 somewhere on [c, u].
    """
    uu = np.linspace(c, u, 1025)
    if np.any(profile.dlam(uu) <= 0):
        raise EnergyError("the bound needs λ' > 0 on [c, u]")
    if isinstance(g, Field):
        norm2 = slab_integral(g.values ** 2, g.grid, c, u)
    elif np.isscalar(g):
        if g != 0:
            raise EnergyError("a scalar forcing must be 0")
        norm2 = 0.0
    else:
        if grid is None:
            raise EnergyError("nodal forcing needs its grid")
        norm2 = slab_integral(np.asarray(g, float) ** 2, grid, c, u)
    return float(profile.lam(u)) * math.exp(u - c) / float(profile.lam(c)) * (E_c + 0.5 * norm2)


# -- linearized stability ----------------------------------------------------

@dataclass
class Perturbation:
    """Relative perturbation δlogλ = δλ/λ0 of a curvature profile.

    Attributes:
        dlog: δlogλ(u).
        dlog_du: Its u-derivative.
        c, C: Interval for the mean / mean-free split.
        name: Label for reports.
        constant: True when δlogλ is constant, so its derivative is exactly 0.
    """

    dlog: Callable
    dlog_du: Callable
    c: float
    C: float
    name: str = "perturbation"
    constant: bool = False

    @classmethod
    def from_delta_lambda(cls, dlam: Callable, dlam_du: Callable, lam0: CurvatureProfile,
                          c: float, C: float, name: str = "perturbation") -> "Perturbation":
        def dlog(u):
            return dlam(u) / lam0.lam(u)

        def dlog_du(u):
            l0 = lam0.lam(u)
            return (dlam_du(u) * l0 - dlam(u) * lam0.dlam(u)) / (l0 * l0)

        return cls(dlog, dlog_du, c, C, name)

    @classmethod
    def scaling(cls, eps: float, c: float, C: float) -> "Perturbation":
        """δλ = eps λ0: a uniform rescaling of the coefficient."""
        return cls(lambda u: np.full_like(np.asarray(u, float), eps),
                   lambda u: np.zeros_like(np.asarray(u, float)), c, C, "scaling", True)

    def mean(self) -> float:
        """Plain average of δlogλ over [c, C] in u."""
        val, _ = integrate.quad(lambda v: float(self.dlog(np.asarray(v))), self.c, self.C,
                                epsabs=1e-13, epsrel=1e-13, limit=200)
        return val / (self.C - self.c)

    def mean_free(self) -> "Perturbation":
        mu = self.mean()
        base = self.dlog
        return Perturbation(lambda u: base(u) - mu, self.dlog_du, self.c, self.C,
                            f"{self.name}-meanfree", self.constant)

    def weighted_norm2(self, lam0: CurvatureProfile) -> float:
        """int_c^C λ0 (d δlogλ/du)² du."""
        if self.constant:
            return 0.0
        val, _ = integrate.quad(lambda v: float(lam0.lam(v)) * float(self.dlog_du(np.asarray(v))) ** 2,
                                self.c, self.C, epsabs=1e-13, epsrel=1e-13, limit=200)
        return val


def linearized_forcing(x0: Field, lam0: CurvatureProfile, pert: Perturbation) -> Field:
    """g = -2 λ0(u) (d δlogλ/du) (x0)_u with (x0)_u = (x_s + x_t)/2."""
    grid = x0.grid
    if pert.constant:
        return Field(grid, np.where(grid.mask, 0.0, np.nan), "g")
    xs, xt = x0.gradient()
    m = grid.mask
    U = grid.U[m]
    vals = np.full(grid.shape, np.nan)
    vals[m] = -2.0 * lam0.lam(U) * pert.dlog_du(U) * 0.5 * (xs[m] + xt[m])
    return Field(grid, vals, "g")


@dataclass
class StabilityReport:
    name: str
    sup_E0: float
    sup_E1: float
    weighted_norm2: float
    ratio: float
    iterations: int
    x1: Field = field(repr=False)

    def as_dict(self) -> dict:
        p = f"stability.{self.name}."
        return {p + "sup_E0": self.sup_E0, p + "sup_E1": self.sup_E1,
                p + "weighted_norm2": self.weighted_norm2, p + "ratio": self.ratio,
                p + "iterations": self.iterations}


def stability_experiment(x0: Field, lam0: CurvatureProfile, pert: Perturbation,
                         tol: float = 1e-10, max_iter: int = 500, workers: int = 1) -> StabilityReport:
    """Solve L0[x1] = g with zero data and compare energies with the base solution.

    The energies are taken over the diagonals c <= u <= C of the base grid.
    The measured ratio is sup E1 / (sup E0 * int_c^C λ0 (δlogλ)'² du).
    """
    grid = x0.grid
    if grid.m == 0:
        raise GridError("stability runs on a truncated-cone grid")
    g = linearized_forcing(x0, lam0, pert)
    zero = CauchyGoursatData.zero(grid.c)
    x1, rep = solve_picard(zero, lam0, grid, tol, max_iter, source=np.where(grid.mask, g.values, 0.0),
                           workers=workers)
    x1.label = "x1"
    k_hi = min(_diag_index(grid, min(pert.C, grid.S + grid.T)), grid.ns + grid.nt)
    us = np.arange(grid.m, k_hi + 1) * grid.h
    E0 = energy_trace(x0, lam0, us).E
    E1 = energy_trace(x1, lam0, us).E
    sup0, sup1 = float(E0.max()), float(E1.max())
    w2 = pert.weighted_norm2(lam0)
    if w2 > 0 and sup0 > 0:
        ratio = sup1 / (sup0 * w2)
    else:
        ratio = 0.0 if sup1 == 0 else math.inf
    return StabilityReport(pert.name, sup0, sup1, w2, ratio, rep.iterations, x1)
