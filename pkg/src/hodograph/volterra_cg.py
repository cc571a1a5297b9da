"""Picard iteration for the Cauchy-Goursat problem on a truncated cone.

The unknown satisfies the Volterra equation

    2 λ(s+t) x(s,t) = G(s,t) + int_{(c-t)^+}^s λ'(σ+t) x(σ,t) dσ
                             + int_{(c-s)^+}^t λ'(s+τ) x(s,τ) dτ,

with G built from the boundary data (see :mod:`hodograph.boundary`).  Line
integrals are composite trapezoid rules along grid rows and columns.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from hodograph.boundary import CauchyGoursatData, forcing_on_grid, graded_integral
from hodograph.curvature import CurvatureProfile
from hodograph.grid import (Field, Grid, GridError, area_integral, cumtrapz_s, cumtrapz_t,
                            sqrt_cusp_weights)

MIN_ITERATIONS = 3


class ConvergenceError(RuntimeError):
    """Picard iteration hit max_iter; carries the increment history."""

    def __init__(self, message: str, increments: list[float]):
        super().__init__(message)
        self.increments = list(increments)


@dataclass
class SolveReport:
    iterations: int
    final_increment: float
    increments: list[float]
    attainment: dict = field(default_factory=dict)
    contour_residuals: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def ratios(self) -> list[float]:
        inc = self.increments
        return [b / a for a, b in zip(inc[:-1], inc[1:]) if a > 0]

    def as_dict(self) -> dict:
        out = {
            "iterations": self.iterations,
            "final_increment": self.final_increment,
            "increments": ",".join(repr(float(v)) for v in self.increments),
        }
        out.update({f"attainment.{k}": v for k, v in self.attainment.items()})
        for k, (point, case, res) in enumerate(self.contour_residuals):
            out[f"contour.{k}"] = (f"s={float(point[0])!r} t={float(point[1])!r} case={case} "
                                   f"residual={float(res)!r}")
        out.update(self.extra)
        return out


class VolterraOperator:
    """The affine map x -> A x on a fixed grid, with G and the coefficients cached.

    Args:
        data: Cauchy-Goursat data.
        profile: Curvature profile; λ must not vanish on [c, S+T].
        grid: Truncated-cone grid with the same c as the data.
        source: Optional right-hand side q of L[x] = q, given at the grid nodes.
            It adds (1/(2λ)) times its integral over the cone part of [0,s]x[0,t].
        workers: Threads for the row and column sweeps.  Results do not depend
            on this value.
        cusp: Apply the square-root endpoint correction on lines that start on
            a Goursat axis, where solutions typically behave like sqrt(distance).
    """

    def __init__(self, data: CauchyGoursatData, profile: CurvatureProfile, grid: Grid,
                 source: np.ndarray | None = None, workers: int = 1, cusp: bool = True):
        if abs(grid.c - data.c) > 1e-12 * max(1.0, data.c):
            raise GridError(f"grid c = {grid.c} differs from data c = {data.c}")
        self.grid, self.data, self.profile = grid, data, profile
        self.workers = max(1, int(workers))
        self.cusp = bool(cusp)
        lam = profile.lam(grid.U)
        if np.any(lam[grid.mask] == 0) or not np.all(np.isfinite(lam[grid.mask])):
            raise ValueError("λ must be finite and nonzero on the grid")
        self.two_lam = 2.0 * lam
        self.dlam = profile.dlam(grid.U)
        rhs = forcing_on_grid(data, profile, grid)
        if source is not None:
            rhs = rhs + area_integral(np.asarray(source, float), grid)
        self.rhs = rhs

    def _sweeps(self, w):
        g = self.grid
        if self.workers == 1:
            return cumtrapz_s(w, g, self.cusp), cumtrapz_t(w, g, self.cusp)
        with ThreadPoolExecutor(max_workers=2) as pool:
            fs = pool.submit(cumtrapz_s, w, g, self.cusp)
            ft = pool.submit(cumtrapz_t, w, g, self.cusp)
            return fs.result(), ft.result()

    def __call__(self, x: np.ndarray) -> np.ndarray:
        w = np.where(self.grid.mask, self.dlam * x, 0.0)
        rows, cols = self._sweeps(w)
        out = (self.rhs + rows + cols) / self.two_lam
        out[~self.grid.mask] = np.nan
        return out


def apply_A(x: Field, data: CauchyGoursatData, profile: CurvatureProfile,
            source: np.ndarray | None = None, workers: int = 1, cusp: bool = True) -> Field:
    """One application of the Volterra operator."""
    op = VolterraOperator(data, profile, x.grid, source, workers, cusp)
    return Field(x.grid, op(x.values), x.label, x.generation + 1)


def initial_guess(data: CauchyGoursatData, grid: Grid) -> Field:
    """Extension of the Dirichlet traces that is constant along the lines s - t = const.

    On t = 0 it equals g, on s = 0 it equals h, and on s + t = c it equals f,
    so it matches every Dirichlet trace exactly.
    """
    c = data.c
    p = grid.S2 - grid.T2
    vals = np.full(grid.shape, np.nan)
    mk = grid.mask
    pm = p[mk]
    out = np.empty(pm.shape)
    mid = np.abs(pm) <= c
    out[mid] = data.f(np.clip(0.5 * (pm[mid] + c), 0.0, c))
    hi = pm > c
    out[hi] = data.g(pm[hi])
    lo = pm < -c
    out[lo] = data.h(-pm[lo])
    vals[mk] = out
    return Field(grid, vals, "x0", 0)


def picard(op: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, mask: np.ndarray,
           tol: float, max_iter: int, min_iter: int = MIN_ITERATIONS):
    """Iterate x <- op(x) until the sup-increment drops below tol.

    Stops after at least ``min_iter`` iterations, or at once if an iterate is
    reproduced exactly.

    Raises:
        ConvergenceError: After ``max_iter`` iterations without convergence.
    """
    x = x0
    increments: list[float] = []
    for k in range(1, max_iter + 1):
        new = op(x)
        inc = float(np.max(np.abs(new[mask] - x[mask]))) if np.any(mask) else 0.0
        if not math.isfinite(inc):
            raise ConvergenceError("iteration produced non-finite values", increments)
        increments.append(inc)
        x = new
        if inc == 0.0 or (inc < tol and k >= min_iter):
            return x, increments
    raise ConvergenceError(
        f"no convergence after {max_iter} iterations (last increment {increments[-1]:.3e})", increments)


def solve_picard(data: CauchyGoursatData, profile: CurvatureProfile, grid: Grid,
                 tol: float = 1e-10, max_iter: int = 500, x0: Field | None = None,
                 source: np.ndarray | None = None, workers: int = 1, cusp: bool = True):
    """Solve the Cauchy-Goursat problem by successive approximation.

    Args:
        data: Boundary data (validate it first).
        profile: Curvature profile.
        grid: Truncated-cone grid.
        tol: Sup-norm increment at which to stop.
        max_iter: Iteration cap.
        x0: Starting field; defaults to :func:`initial_guess`.
        source: Optional nodal right-hand side q of L[x] = q.
        workers: Threads used inside each iteration.
        cusp: Square-root endpoint correction on axis-based lines.

    Returns:
        (Field, SolveReport).

    Raises:
        ConvergenceError: If ``max_iter`` is reached.
    """
    if tol <= 0 or max_iter < 1:
        raise ValueError("need tol > 0 and max_iter >= 1")
    op = VolterraOperator(data, profile, grid, source, workers, cusp)
    start = (x0 if x0 is not None else initial_guess(data, grid)).values
    values, increments = picard(op, start, grid.mask, tol, max_iter)
    x = Field(grid, values, "x", len(increments))
    return x, SolveReport(len(increments), increments[-1], increments)


# -- attainment -------------------------------------------------------------

def check_attainment(x: Field, data: CauchyGoursatData, delta: float | None = None,
                     probes=None) -> dict:
    """Trace errors on the three boundary pieces and the normal-derivative error.

    The normal derivative at ξ on the Cauchy line is estimated by
    [x(ξ+z, c-ξ+z) - x(ξ, c-ξ)] / z with z = 2h, using bilinear interpolation
    off the nodes.

    Args:
        x: Converged field.
        data: The data it should attain.
        delta: Endpoint exclusion for the probes; defaults to 0.1 c.
        probes: Explicit probe abscissae in [delta, c - delta]; defaults to 9
            equally spaced points.

    Returns:
        Dict with ``trace_g``, ``trace_h``, ``trace_f``, ``dn_max`` and
        ``dn_errors`` (list of (ξ, estimate, n(ξ))).
    """
    g = x.grid
    c, m = g.c, g.m
    delta = 0.1 * c if delta is None else delta
    v = x.values
    trace_g = float(np.max(np.abs(v[m:, 0] - data.g(g.s[m:])))) if g.ns >= m else 0.0
    trace_h = float(np.max(np.abs(v[0, m:] - data.h(g.t[m:])))) if g.nt >= m else 0.0
    i = np.arange(m + 1)
    trace_f = float(np.max(np.abs(v[i, m - i] - data.f(g.s[i]))))
    if probes is None:
        probes = np.linspace(delta, c - delta, 9)
    z = 2.0 * g.h
    rows = []
    for xi in np.atleast_1d(probes):
        est = (x.interpolate(xi + z, c - xi + z) - x.interpolate(xi, c - xi)) / z
        rows.append((float(xi), est, float(data.n(np.asarray(xi)))))
    dn = max((abs(e - n) for _, e, n in rows), default=0.0)
    return {"trace_g": trace_g, "trace_h": trace_h, "trace_f": trace_f, "dn_max": dn,
            "dn_errors": rows}


# -- contour identities -----------------------------------------------------

CASES = ("I", "II", "III", "IV", "unified")


def _case_of(s, t, c):
    if s > c and t > c:
        return "I"
    if s <= c and t > c:
        return "II"
    if s > c and t <= c:
        return "III"
    return "IV"


def _line_sum_field(x: Field, lam, dlam, s, t, cusp=True):
    """int λ x_σ along the row to (s,t) plus int λ x_τ along the column, by parts.

    Uses the same quadrature as the solver, so a converged field satisfies the
    relation up to the iteration tolerance.
    """
    g = x.grid
    i, j = g.index(s, t)
    i0, j0 = g.row_start(j), g.col_start(i)
    total = 0.0
    for vals, uu, k0 in ((x.values[: i + 1, j], g.s[: i + 1] + t, i0),
                         (x.values[i, : j + 1], s + g.t[: j + 1], j0)):
        k = vals.size - 1
        if k > k0:
            w = np.zeros(vals.shape)
            w[k0:] = dlam(uu[k0:]) * vals[k0:]
            total += lam(uu[-1]) * vals[-1] - lam(uu[k0]) * vals[k0]
            total -= float(np.trapezoid(w[k0:], dx=g.h))
            if cusp:
                wts = sqrt_cusp_weights(k)
                dr = math.sqrt(k0 + 1.0) - math.sqrt(k0)
                total -= g.h * (w[k0 + 1] - w[k0]) / dr * (wts[k] - wts[k0])
    return total


def _line_sum_callable(fn, lam, dlam, s, t, c):
    a, b = max(c - t, 0.0), max(c - s, 0.0)
    total = 0.0
    if s > a:
        total += lam(s + t) * fn(s, t) - lam(a + t) * fn(a, t)
        total -= integrate.quad(lambda v: dlam(v + t) * fn(v, t), a, s, epsabs=1e-13, epsrel=1e-13,
                                limit=200)[0]
    if t > b:
        total += lam(s + t) * fn(s, t) - lam(s + b) * fn(s, b)
        total -= integrate.quad(lambda v: dlam(s + v) * fn(s, v), b, t, epsabs=1e-13, epsrel=1e-13,
                                limit=200)[0]
    return total


def _known_part(data: CauchyGoursatData, profile: CurvatureProfile, s, t):
    c = data.c
    lam = lambda v: float(profile.lam(v))  # noqa: E731
    lo, hi = max(c - t, 0.0), min(c, s)
    if data.N is not None:
        n_part = float(data.N(np.asarray(hi))) - float(data.N(np.asarray(lo)))
    else:
        n_part = graded_integral(data.n, lo, hi, c)
    total = lam(c) * n_part
    for trace, end in ((data.g, s), (data.h, t)):
        if end > c:
            # int_c^end λ q' by parts
            corr = integrate.quad(lambda v: float(profile.dlam(v)) * float(trace(np.asarray(v))), c, end,
                                  epsabs=1e-13, epsrel=1e-13, limit=200)[0]
            total += lam(end) * float(trace(np.asarray(end))) - lam(c) * float(trace(np.asarray(c))) - corr
    return total


def verify_contour_identity(x, data: CauchyGoursatData, profile: CurvatureProfile,
                            point: tuple[float, float], case: str = "unified") -> float:
    """|LHS - RHS| of the contour relation through ``point``.

    The left side collects int λ x_σ along the row and int λ x_τ along the
    column that end at the point; the right side is the Cauchy-line integral of
    λ(c) n plus int λ g' and int λ h' along the Goursat axes.

    Args:
        x: A :class:`Field` (point must be a node) or a callable x(s, t).
        data: Boundary data.
        profile: Curvature profile.
        point: (s, t) inside the closed cone.
        case: ``I`` (s, t > c), ``II`` (s <= c < t), ``III`` (t <= c < s),
            ``IV`` (s, t <= c) or ``unified``.

    Raises:
        ValueError: If the point is outside the cone or not in the stated case.
    """
    s, t = map(float, point)
    c = data.c
    if case not in CASES:
        raise ValueError(f"unknown case {case!r}")
    if s < 0 or t < 0 or s + t < c:
        raise ValueError(f"({s}, {t}) is outside the cone")
    if case != "unified" and _case_of(s, t, c) != case:
        raise ValueError(f"({s}, {t}) belongs to case {_case_of(s, t, c)}, not {case}")
    lam = lambda v: float(profile.lam(v))  # noqa: E731
    dlam = profile.dlam
    if isinstance(x, Field):
        lhs = _line_sum_field(x, lam, dlam, s, t)
    else:
        lhs = _line_sum_callable(lambda a, b: float(x(a, b)), lam, lambda v: float(dlam(v)), s, t, c)
    return abs(lhs - _known_part(data, profile, s, t))
