"""Curvature function lambda(u) and the y <-> u change of variables.

The Gauss curvature is ``K = -lambda(y)**2``.  Everything downstream works with
``lambda`` as a function of the hodograph time ``u``, where ``du = -lambda dy``.
Primes always denote derivatives with respect to ``u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate, optimize
from scipy.interpolate import PchipInterpolator

KINDS = ("constant", "linear", "polynomial", "tabulated")

# Number of interior samples used for positivity checks and inf/sup of lambda(u)/u.
DENSE_SAMPLES = 4096
QUAD_TOL = 1e-10


class ProfileError(ValueError):
    """Raised when a curvature profile violates its hypotheses."""


@dataclass(frozen=True)
class CurvatureProfile:
    """Evaluators for lambda, lambda' and lambda'' on ``[0, u_max]``.

    Build instances with :func:`make_profile`; the constructor does not validate.
    """

    kind: str
    params: tuple
    u_max: float
    _lam: Callable = field(repr=False, compare=False)
    _dlam: Callable = field(repr=False, compare=False)
    _d2lam: Callable = field(repr=False, compare=False)

    def lam(self, u):
        return self._lam(np.asarray(u, dtype=float))

    def dlam(self, u):
        return self._dlam(np.asarray(u, dtype=float))

    def d2lam(self, u):
        return self._d2lam(np.asarray(u, dtype=float))

    def __call__(self, u):
        return self.lam(u)

    def g(self, u):
        """lambda(u)/u, continued to u=0 by lambda'(0)."""
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(u > 0, self.lam(u) / np.where(u > 0, u, 1.0), self.dlam(0.0))
        return out


@dataclass(frozen=True)
class ContractionBounds:
    """Inf/sup of lambda(u)/u on [0, U] and the resulting contraction factor."""

    m0: float
    M: float
    U: float

    def __post_init__(self):
        if not (0 < self.m0 <= self.M < math.inf):
            raise ProfileError(f"invalid bounds m0={self.m0}, M={self.M}")
        assert 0.0 < self.certificate < 1.0

    @property
    def certificate(self) -> float:
        return 1.0 - self.m0 / (2.0 * self.M)


def _polynomial_profile(kind, coeffs, u_max):
    poly = Polynomial(coeffs)
    d1 = poly.deriv(1)
    d2 = poly.deriv(2)
    return CurvatureProfile(kind, tuple(float(c) for c in coeffs), float(u_max), poly, d1, d2)


def make_profile(
    kind: str,
    params: Sequence,
    u_max: float | None = None,
    semi_infinite: bool = False,
    offset: float = 0.0,
) -> CurvatureProfile:
    """Build and validate a curvature profile.

    Parameter conventions (coefficients are in powers of ``u``):

    * ``constant``, ``[k]``: lambda = k.
    * ``linear``, ``[a]`` or ``[a, b]``: lambda = a*u + b.
    * ``polynomial``, ``[a1, a2, ...]``: lambda = offset + a1*u + a2*u**2 + ...
    * ``tabulated``: a sequence of ``(u, lambda)`` pairs with strictly increasing
      ``u``; interpolated by a monotone piecewise cubic.

    Args:
        kind: One of ``constant``, ``linear``, ``polynomial``, ``tabulated``.
        params: Coefficients or sample table, as above.
        u_max: Upper end of the domain. Defaults to 10 for analytic kinds and to
            the last sample for tables.
        semi_infinite: Require lambda(0) = 0 and lambda'(0) > 0, as needed by the
            parametrix/corrector path.
        offset: Constant term for the ``polynomial`` kind.

    Raises:
        ProfileError: On malformed parameters or when lambda <= 0 somewhere on a
            dense sample of (0, u_max].
    """
    if kind not in KINDS:
        raise ProfileError(f"unknown profile kind {kind!r}; expected one of {KINDS}")
    params = list(params)
    if kind == "tabulated":
        table = np.asarray(params, dtype=float)
        if table.ndim != 2 or table.shape[1] != 2 or table.shape[0] < 2:
            raise ProfileError("tabulated profile needs at least two (u, lambda) rows")
        uu, ll = table[:, 0], table[:, 1]
        if np.any(np.diff(uu) <= 0):
            raise ProfileError("tabulated samples must be strictly increasing in u")
        interp = PchipInterpolator(uu, ll, extrapolate=False)
        profile = CurvatureProfile(
            kind,
            tuple(map(tuple, table.tolist())),
            float(uu[-1] if u_max is None else u_max),
            interp,
            interp.derivative(1),
            interp.derivative(2),
        )
    else:
        if u_max is None:
            u_max = 10.0
        if kind == "constant":
            if len(params) != 1:
                raise ProfileError("constant profile takes one parameter")
            coeffs = [params[0]]
        elif kind == "linear":
            if len(params) not in (1, 2):
                raise ProfileError("linear profile takes [a] or [a, b]")
            a = params[0]
            b = params[1] if len(params) == 2 else 0.0
            coeffs = [b, a]
        else:
            if not params:
                raise ProfileError("polynomial profile needs at least one coefficient")
            coeffs = [offset, *params]
        profile = _polynomial_profile(kind, [float(c) for c in coeffs], u_max)

    if not profile.u_max > 0:
        raise ProfileError("u_max must be positive")
    sample = np.linspace(0.0, profile.u_max, DENSE_SAMPLES + 1)[1:]
    values = profile.lam(sample)
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise ProfileError("lambda must be positive on (0, u_max]")
    if semi_infinite:
        lam0 = float(profile.lam(0.0))
        if not np.isfinite(lam0) or abs(lam0) > 1e-14:
            raise ProfileError(f"semi-infinite path requires lambda(0) = 0, got {lam0}")
        if not float(profile.dlam(0.0)) > 0:
            raise ProfileError("semi-infinite path requires lambda'(0) > 0")
    return profile


def contraction_bounds(profile: CurvatureProfile, U: float, n: int = DENSE_SAMPLES) -> ContractionBounds:
    """Sampled inf/sup of g(u) = lambda(u)/u on [0, U].

    The endpoint value g(0) = lambda'(0) is included analytically.
    """
    if U <= 0:
        raise ProfileError("U must be positive")
    if abs(float(profile.lam(0.0))) > 1e-14:
        raise ProfileError("contraction bounds need lambda(0) = 0")
    u = np.linspace(0.0, U, n + 1)
    if np.any(profile.dlam(u) <= 0):
        raise ProfileError("contraction bounds need lambda' > 0 on [0, U]")
    g = profile.g(u)
    if np.any(~np.isfinite(g)) or np.any(g <= 0):
        raise ProfileError("lambda(u)/u must stay positive on [0, U]")
    return ContractionBounds(float(g.min()), float(g.max()), float(U))


def y_of_u(profile: CurvatureProfile, u: float, u_ref: float = 1.0, y_ref: float = 0.0,
           tol: float = QUAD_TOL) -> float:
    """Physical coordinate y at hodograph time u: y_ref + int_u^u_ref dη/lambda(η)."""
    if u <= 0 or u_ref <= 0:
        raise ProfileError("u must be positive (the y integral diverges at u = 0)")
    if u == u_ref:
        return float(y_ref)
    val, _ = integrate.quad(lambda eta: 1.0 / float(profile.lam(eta)), u, u_ref,
                            epsabs=tol, epsrel=tol, limit=200)
    return float(y_ref + val)


def u_of_y(profile: CurvatureProfile, y: float, u_ref: float = 1.0, y_ref: float = 0.0,
           tol: float = QUAD_TOL) -> float:
    """Inverse of :func:`y_of_u`; y is strictly decreasing in u."""

    def resid(u):
        return y_of_u(profile, u, u_ref, y_ref, tol) - y

    if y == y_ref:
        return float(u_ref)
    lo, hi = u_ref, u_ref
    if y > y_ref:
        while resid(lo) < 0:
            lo *= 0.5
            if lo < 1e-300:
                raise ProfileError(f"y = {y} not reached for u > 0")
    else:
        while resid(hi) > 0:
            hi *= 2.0
            if hi > 1e12:
                raise ProfileError(f"y = {y} not reached")
    return float(optimize.brentq(resid, lo, hi, xtol=tol * 1e-2, rtol=4 * np.finfo(float).eps))


def u_from_lambda_of_y(lam_y: Callable[[float], float], y: float) -> float:
    """u(y) = int_y^inf lambda(η) dη for a curvature function given in y."""
    val, _ = integrate.quad(lam_y, y, np.inf, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)
    return float(val)
