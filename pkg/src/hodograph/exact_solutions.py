"""Closed-form solutions used as oracles.

* :class:`ArcsineSolution`: x = arcsin((t - s)/(t + s)), the solution for lambda(u) = u.
* :class:`ProductSolution`: the surface w = A exp(-y) cos x, whose hodograph image
  is the arcsine solution.
* :class:`PolynomialSolution`: a quintic solution of u (x_uu - x_pp) + x_u = 0
  whose x_p changes sign inside its domain of dependence.

All derivatives are hand-differentiated.  Hodograph oracles take (s, t) with
u = s + t, p = s - t, and also expose (u, p) evaluators.
"""

from __future__ import annotations

import math

import numpy as np

from hodograph.boundary import CauchyGoursatData
from hodograph.curvature import CurvatureProfile, make_profile

PI = math.pi


class HodographOracle:
    """Base class: (s, t) derivatives from the (u, p) ones."""

    name = "oracle"

    def x_up(self, u, p):  # pragma: no cover - abstract
        raise NotImplementedError

    def x(self, s, t):
        s, t = np.asarray(s, float), np.asarray(t, float)
        return self.x_up(s + t, s - t)

    def x_s(self, s, t):
        u, p = _up(s, t)
        return self.dx_du(u, p) + self.dx_dp(u, p)

    def x_t(self, s, t):
        u, p = _up(s, t)
        return self.dx_du(u, p) - self.dx_dp(u, p)

    def x_ss(self, s, t):
        u, p = _up(s, t)
        return self.d2x_du2(u, p) + 2.0 * self.d2x_dudp(u, p) + self.d2x_dp2(u, p)

    def x_st(self, s, t):
        u, p = _up(s, t)
        return self.d2x_du2(u, p) - self.d2x_dp2(u, p)

    def x_tt(self, s, t):
        u, p = _up(s, t)
        return self.d2x_du2(u, p) - 2.0 * self.d2x_dudp(u, p) + self.d2x_dp2(u, p)

    def pde_residual(self, profile: CurvatureProfile, s, t):
        """2 λ(s+t) x_st + λ'(s+t) (x_s + x_t)."""
        u = np.asarray(s, float) + np.asarray(t, float)
        return 2.0 * profile.lam(u) * self.x_st(s, t) + profile.dlam(u) * (self.x_s(s, t) + self.x_t(s, t))


def _up(s, t):
    s, t = np.asarray(s, float), np.asarray(t, float)
    return s + t, s - t


class ArcsineSolution(HodographOracle):
    """x_a(s, t) = arcsin((t - s)/(t + s)) = arcsin(-p/u) with Cauchy line s + t = c."""

    name = "arcsine"

    def __init__(self, c: float = 1.0):
        if c <= 0:
            raise ValueError("c must be positive")
        self.c = float(c)
        self.profile = make_profile("linear", [1.0])

    def x_up(self, u, p):
        return np.arcsin(np.clip(-np.asarray(p, float) / u, -1.0, 1.0))

    def dx_du(self, u, p):
        return p / (u * np.sqrt(u * u - p * p))

    def dx_dp(self, u, p):
        return -1.0 / np.sqrt(u * u - p * p)

    def d2x_dp2(self, u, p):
        return -p / (u * u - p * p) ** 1.5

    def d2x_du2(self, u, p):
        return -p * (2.0 * u * u - p * p) / (u * u * (u * u - p * p) ** 1.5)

    def d2x_dudp(self, u, p):
        return u / (u * u - p * p) ** 1.5

    # closed forms in (s, t), used to cross-check the (u, p) chain
    def x_s_closed(self, s, t):
        return -np.sqrt(t / s) / (s + t)

    def x_t_closed(self, s, t):
        return np.sqrt(s / t) / (s + t)

    # induced boundary data
    def g(self, s):
        return np.full_like(np.asarray(s, float), -PI / 2)

    def h(self, t):
        return np.full_like(np.asarray(t, float), PI / 2)

    def f(self, s):
        return np.arcsin(np.clip((self.c - 2.0 * np.asarray(s, float)) / self.c, -1.0, 1.0))

    def fprime(self, s):
        s = np.asarray(s, float)
        return -1.0 / np.sqrt(s * (self.c - s))

    def n(self, s):
        s = np.asarray(s, float)
        return (2.0 * s - self.c) / (self.c * np.sqrt(s * (self.c - s)))

    def N(self, s):
        """Antiderivative of n vanishing at both ends of [0, c]."""
        s = np.clip(np.asarray(s, float), 0.0, self.c)
        return -2.0 * np.sqrt(s * (self.c - s)) / self.c

    def data(self) -> CauchyGoursatData:
        return CauchyGoursatData(self.c, self.g, self.h, self.f, self.n, self.N, name="arcsine")


class PolynomialSolution(HodographOracle):
    """x = -(5π/26) [(3u⁴ - 12u² + 10) p + 8 (u² - 1) p³ + (8/5) p⁵].

    Solves u (x_uu - x_pp) + x_u = 0 (the λ(u) = u equation).  Its data on
    u = 1 are x(1, p) = -(π/26)(5p + 8p⁵), with x_p < 0 there, yet
    x_p(3/2, 0) = 145π/416 > 0.
    """

    name = "polynomial"
    K = -5.0 * PI / 26.0

    def __init__(self):
        self.c = 1.0
        self.profile = make_profile("linear", [1.0])

    def x_up(self, u, p):
        u, p = np.asarray(u, float), np.asarray(p, float)
        return self.K * ((3 * u**4 - 12 * u**2 + 10) * p + 8 * (u**2 - 1) * p**3 + 1.6 * p**5)

    def dx_dp(self, u, p):
        return self.K * ((3 * u**4 - 12 * u**2 + 10) + 24 * (u**2 - 1) * p**2 + 8 * p**4)

    def dx_du(self, u, p):
        return self.K * ((12 * u**3 - 24 * u) * p + 16 * u * p**3)

    def d2x_dp2(self, u, p):
        return self.K * (48 * (u**2 - 1) * p + 32 * p**3)

    def d2x_du2(self, u, p):
        return self.K * ((36 * u**2 - 24) * p + 16 * p**3)

    def d2x_dudp(self, u, p):
        return self.K * (12 * u**3 - 24 * u + 48 * u * p**2)

    def f(self, s):
        return self.x_up(1.0, 2.0 * np.asarray(s, float) - 1.0)

    def n(self, s):
        p = 2.0 * np.asarray(s, float) - 1.0
        return -(20.0 * PI / 13.0) * p * (4.0 * p * p - 3.0)

    def N(self, s):
        p = 2.0 * np.asarray(s, float) - 1.0
        return -(10.0 * PI / 13.0) * (p**4 - 1.5 * p**2)

    def g(self, s):
        return np.full_like(np.asarray(s, float), -PI / 2)

    def h(self, t):
        return np.full_like(np.asarray(t, float), PI / 2)

    def data(self) -> CauchyGoursatData:
        """Cauchy data on u = 1 and Goursat constants -π/2, +π/2 on the axes."""
        return CauchyGoursatData(1.0, self.g, self.h, self.f, self.n, self.N, name="polynomial-diamond")

    @staticmethod
    def in_diamond(s, t):
        """Domain of dependence of the Cauchy data: s, t <= 1 and s + t >= 1."""
        s, t = np.asarray(s, float), np.asarray(t, float)
        return (s <= 1.0) & (t <= 1.0) & (s + t >= 1.0)


class ProductSolution:
    """The surface w(x, y) = A exp(-y) cos x with w_xx w_yy - w_xy² = -A² exp(-2y).

    Its curvature function is λ(y) = A exp(-y), so u = A exp(-y) and λ(u) = u.
    """

    name = "product"

    def __init__(self, A: float = 1.0):
        if A <= 0:
            raise ValueError("A must be positive")
        self.A = float(A)
        self.profile = make_profile("linear", [1.0])

    def _e(self, y):
        return self.A * np.exp(-np.asarray(y, float))

    def w(self, x, y):
        return self._e(y) * np.cos(x)

    def w_x(self, x, y):
        return -self._e(y) * np.sin(x)

    def w_y(self, x, y):
        return -self._e(y) * np.cos(x)

    def w_xx(self, x, y):
        return -self._e(y) * np.cos(x)

    def w_xy(self, x, y):
        return self._e(y) * np.sin(x)

    def w_yy(self, x, y):
        return self._e(y) * np.cos(x)

    def lam_y(self, y):
        return self._e(y)

    def u(self, y):
        return self._e(y)

    def y_of_u(self, u):
        return np.log(self.A / np.asarray(u, float))

    def gauss_curvature(self, y):
        """Gauss curvature of the graph, -A² e^{-2y} / (1 + A² e^{-2y})², at x = 0."""
        e2 = self._e(y) ** 2
        return -e2 / (1.0 + e2) ** 2

    def ma_residual(self, x, y):
        return self.w_xx(x, y) * self.w_yy(x, y) - self.w_xy(x, y) ** 2 + self.lam_y(y) ** 2

    def hodograph_point(self, x, y):
        """(s, t) image of a physical point with |x| < π/2."""
        u = self.u(y)
        p = self.w_x(x, y)
        return 0.5 * (u + p), 0.5 * (u - p)


def epd_residual(oracle: HodographOracle, u, p) -> float:
    """Max of |u (x_uu - x_pp) + x_u| over the probe points."""
    u, p = np.asarray(u, float), np.asarray(p, float)
    r = u * (oracle.d2x_du2(u, p) - oracle.d2x_dp2(u, p)) + oracle.dx_du(u, p)
    return float(np.max(np.abs(r))) if r.size else 0.0


class ConstantSolution(HodographOracle):
    name = "constant"

    def __init__(self, value: float = 1.0):
        self.value = float(value)

    def x_up(self, u, p):
        return np.full(np.broadcast(np.asarray(u), np.asarray(p)).shape, self.value)

    def dx_du(self, u, p):
        return np.zeros(np.broadcast(np.asarray(u), np.asarray(p)).shape)

    dx_dp = d2x_du2 = d2x_dp2 = d2x_dudp = dx_du


def arcsine(c: float = 1.0) -> ArcsineSolution:
    return ArcsineSolution(c)


def product(A: float = 1.0) -> ProductSolution:
    return ProductSolution(A)


def polynomial() -> PolynomialSolution:
    return PolynomialSolution()


ORACLES = {"arcsine": arcsine, "product": product, "polynomial": polynomial}
