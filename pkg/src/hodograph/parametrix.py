"""Semi-infinite Goursat problem: parametrix, residual, forcing and corrector.

For a profile with λ(0) = 0 and λ'(0) > 0 the function

    x_p(s, t) = arcsin((λ(t) - λ(s)) / (λ(t) + λ(s)))

takes the Goursat values -π/2 on the s-axis and +π/2 on the t-axis and
reproduces the arcsine solution when λ(u) = u.  The remainder x_c = x - x_p
solves L[x_c] = -L[x_p] with zero data on both axes; it is found from a
contractive Volterra equation on the rectangle [0, S] x [0, T].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from hodograph.curvature import ContractionBounds, CurvatureProfile, ProfileError, contraction_bounds
from hodograph.grid import Field, Grid, GridError, RectangleGrid, area_integral, cumtrapz_s, cumtrapz_t
from hodograph.volterra_cg import ConvergenceError, SolveReport, picard

HALF_PI = 0.5 * math.pi


class CertificateError(ValueError):
    """The contraction certificate is not below one; the corrector refuses to run."""

    def __init__(self, message: str, certificate: float):
        super().__init__(message)
        self.certificate = certificate


def eval_parametrix(profile: CurvatureProfile, s, t):
    """x_p at (s, t); 0 at the origin, where the Goursat values jump."""
    s, t = np.broadcast_arrays(np.asarray(s, float), np.asarray(t, float))
    ls, lt = profile.lam(s), profile.lam(t)
    den = ls + lt
    origin = (s == 0) & (t == 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        arg = np.where(origin, 0.0, (lt - ls) / np.where(origin, 1.0, den))
    out = np.arcsin(np.clip(arg, -1.0, 1.0))
    return out if out.ndim else float(out)


def _closed_form(profile, s, t):
    ls, lt, lu = profile.lam(s), profile.lam(t), profile.lam(s + t)
    ds, dt, du = profile.dlam(s), profile.dlam(t), profile.dlam(s + t)
    num = (-ls * ls * dt * du
           + lt * ds * (-lu * dt + lt * du)
           + ls * (lu * ds * dt + lt * (ds - dt) * du))
    return num / (np.sqrt(ls * lt) * (ls + lt) ** 2)


def _axis_form(profile, small, other):
    """Leading term of the residual as ``small`` -> 0 with ``other`` fixed."""
    d0 = float(profile.dlam(0.0))
    lt, dt, d2t = profile.lam(other), profile.dlam(other), profile.d2lam(other)
    return np.sqrt(small) * math.sqrt(d0) * (lt * d2t - 2.0 * dt * dt + 2.0 * d0 * dt) / lt ** 1.5


def eval_residual(profile: CurvatureProfile, s, t, h_switch: float = 0.0):
    """Closed-form residual H of the parametrix.

    H = -L[x_p] where L[x] = 2 λ(s+t) x_st + λ'(s+t)(x_s + x_t), so that the
    corrector solves L[x_c] = H.  Near the axes (min(s, t) < h_switch) the
    leading term of the expansion in the small variable is used instead of the
    cancellation-prone closed form.  H vanishes on both axes and at the origin.

    Args:
        profile: Profile with λ(0) = 0.
        s, t: Evaluation points (broadcast).
        h_switch: Distance from the axes below which the expansion is used.
    """
    s, t = np.broadcast_arrays(np.asarray(s, float), np.asarray(t, float))
    out = np.zeros(s.shape)
    lo = np.minimum(s, t)
    axis = lo == 0
    near = ~axis & (lo < h_switch)
    far = ~axis & ~near
    if np.any(far):
        out[far] = _closed_form(profile, s[far], t[far])
    if np.any(near):
        ss, tt = s[near], t[near]
        sm = ss <= tt
        val = np.empty(ss.shape)
        val[sm] = _axis_form(profile, ss[sm], tt[sm])
        # the residual is antisymmetric under s <-> t
        val[~sm] = -_axis_form(profile, tt[~sm], ss[~sm])
        val[ss == tt] = 0.0
        out[near] = val
    return out if out.ndim else float(out)


def residual_field(profile: CurvatureProfile, grid: Grid, h_switch: float | None = None) -> Field:
    hs = 2.0 * grid.h if h_switch is None else h_switch
    return Field(grid, eval_residual(profile, grid.S2, grid.T2, hs), "H")


def integrated_forcing(profile: CurvatureProfile, grid: Grid, h_switch: float | None = None) -> Field:
    """f(s, t) = (1/(2 λ(s+t))) int_0^s int_0^t H, zero on both axes.

    The double integral is a running 2-D trapezoid rule, so rows and columns
    on the axes are exactly zero.
    """
    H = residual_field(profile, grid, h_switch).values
    area = area_integral(H, grid)
    lam = profile.lam(grid.U)
    out = np.zeros(grid.shape)
    pos = grid.U > 0
    out[pos] = area[pos] / (2.0 * lam[pos])
    out[0, :] = 0.0
    out[:, 0] = 0.0
    return Field(grid, out, "f")


def certify(profile: CurvatureProfile, U: float) -> ContractionBounds:
    """Contraction bounds on [0, U], or CertificateError if the hypotheses fail."""
    try:
        return contraction_bounds(profile, U)
    except ProfileError as exc:
        u = np.linspace(0.0, U, 4097)
        g = profile.g(u)
        big = float(np.nanmax(g)) if np.any(np.isfinite(g)) else math.nan
        cert = 1.0 - float(np.nanmin(g)) / (2.0 * big) if big and big > 0 else math.inf
        raise CertificateError(f"contraction hypotheses fail on [0, {U}]: {exc}",
                               max(cert, 1.0) if math.isfinite(cert) else math.inf) from exc


@dataclass
class CorrectorProblem:
    """Volterra problem x = f + K x on a rectangle grid.

    ``bounds`` defaults to the contraction bounds on [0, S + T], the range of
    s + t over the grid.
    """

    profile: CurvatureProfile
    forcing: Field
    bounds: ContractionBounds | None = None

    def __post_init__(self):
        g = self.forcing.grid
        if g.m != 0:
            raise GridError("the corrector lives on a rectangle grid (c = 0)")
        v = self.forcing.values
        if np.any(v[0, :] != 0) or np.any(v[:, 0] != 0):
            raise ValueError("corrector forcing must vanish on both axes")
        if self.bounds is None:
            self.bounds = certify(self.profile, g.S + g.T)

    @property
    def certificate(self) -> float:
        return self.bounds.certificate


class CorrectorOperator:
    """x -> f + int_0^s K1 x dσ + int_0^t K2 x dτ with (K x)(0, 0) = 0."""

    def __init__(self, profile: CurvatureProfile, forcing: np.ndarray, grid: Grid):
        self.grid, self.f = grid, forcing
        self.dlam = profile.dlam(grid.U)
        lam = profile.lam(grid.U)
        self.inv = np.zeros(grid.shape)
        pos = grid.U > 0
        self.inv[pos] = 1.0 / (2.0 * lam[pos])

    def __call__(self, x):
        w = self.dlam * x
        return self.f + (cumtrapz_s(w, self.grid) + cumtrapz_t(w, self.grid)) * self.inv


def solve_corrector(problem: CorrectorProblem, tol: float = 1e-10, max_iter: int = 500):
    """Fixed point of the corrector equation by iteration from zero.

    Returns:
        (Field, SolveReport); ``report.ratios`` holds the per-iteration
        sup-increment ratios and ``report.extra`` the certificate.

    Raises:
        CertificateError: If the certificate is not below one.
        ConvergenceError: If ``max_iter`` is reached.
    """
    q = problem.certificate
    if not q < 1.0:
        raise CertificateError(f"certificate {q} >= 1", q)
    grid = problem.forcing.grid
    op = CorrectorOperator(problem.profile, problem.forcing.values, grid)
    values, inc = picard(op, np.zeros(grid.shape), np.ones(grid.shape, bool), tol, max_iter)
    report = SolveReport(len(inc), inc[-1], inc)
    ratios = report.ratios
    report.extra.update({
        "certificate": q,
        "m0": problem.bounds.m0,
        "M": problem.bounds.M,
        "max_increment_ratio": max(ratios) if ratios else 0.0,
    })
    return Field(grid, values, "x_corr", len(inc)), report


def assemble_base(x_p, x_corr: Field) -> Field:
    """x_base = x_p + x_corr on the corrector's grid.

    Args:
        x_p: Field on the same grid, or a vectorised evaluator x_p(s, t).
        x_corr: Corrector field.
    """
    g = x_corr.grid
    if isinstance(x_p, Field):
        if x_p.grid != g:
            raise GridError("grid mismatch")
        xp = x_p.values
    else:
        xp = np.asarray(x_p(g.S2, g.T2), float)
    return Field(g, xp + x_corr.values, "x_base")


def discrete_pde_residual(x: Field, profile: CurvatureProfile) -> np.ndarray:
    """2 λ x_st + λ'(x_s + x_t) from finite-difference stencils."""
    xs, xt = x.gradient()
    _, xst, _ = x.hessian()
    U = x.grid.U
    return 2.0 * profile.lam(U) * xst + profile.dlam(U) * (xs + xt)


def cusp_amplitude(x: Field, t_values=None, column: int = 1) -> np.ndarray:
    """Empirical M(t) in x(s, t) ≈ π/2 - M λ(t)^(-1/2) sqrt(s) near the t-axis.

    Returns the products (π/2 - x(s1, t)) / sqrt(s1) for s1 = column * h;
    multiply by sqrt(λ(t)) to compare with a constant amplitude.
    """
    g = x.grid
    s1 = column * g.h
    j = np.arange(1, g.nt + 1) if t_values is None else np.rint(np.asarray(t_values) / g.h).astype(int)
    return (HALF_PI - x.values[column, j]) / math.sqrt(s1)


def solve_goursat(profile: CurvatureProfile, grid: RectangleGrid, tol: float = 1e-10,
                  max_iter: int = 500, U: float | None = None):
    """Parametrix, residual, forcing, corrector and base solution on a rectangle.

    Returns:
        Dict with Fields ``x_p``, ``H``, ``f``, ``x_corr``, ``x_base`` and the
        corrector's SolveReport under ``report``.
    """
    bounds = certify(profile, grid.S + grid.T if U is None else U)
    xp = Field(grid, eval_parametrix(profile, grid.S2, grid.T2), "x_p")
    H = residual_field(profile, grid)
    f = integrated_forcing(profile, grid)
    corr, report = solve_corrector(CorrectorProblem(profile, f, bounds), tol, max_iter)
    return {"x_p": xp, "H": H, "f": f, "x_corr": corr, "x_base": assemble_base(xp, corr),
            "report": report}


__all__ = [
    "CertificateError", "ConvergenceError", "CorrectorProblem", "assemble_base", "certify",
    "cusp_amplitude", "discrete_pde_residual", "eval_parametrix", "eval_residual",
    "integrated_forcing", "residual_field", "solve_corrector", "solve_goursat",
]
