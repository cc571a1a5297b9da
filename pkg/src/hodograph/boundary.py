"""Cauchy-Goursat boundary data, weak-compatibility checks and the forcing term.

Data layout on the truncated cone ``s, t >= 0, s + t >= c``:

* ``g(s)``, s >= c: value of x on the s-axis (t = 0);
* ``h(t)``, t >= c: value of x on the t-axis (s = 0);
* ``f(s)``, 0 <= s <= c: value of x on the Cauchy line, ``x(s, c - s)``;
* ``n(s)``, 0 < s < c: normal derivative ``(d_s + d_t) x(s, c - s)``.  It may
  blow up at both ends as long as it is integrable.

Samplers must accept numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from hodograph.curvature import CurvatureProfile

QUAD_TOL = 1e-12
CORNER_TOL = 1e-8


class BoundaryDataError(ValueError):
    """Raised when boundary samplers cannot be evaluated where they must be."""


@dataclass(frozen=True)
class CauchyGoursatData:
    c: float
    g: Callable
    h: Callable
    f: Callable
    n: Callable
    N: Callable | None = None
    name: str = "custom"

    @classmethod
    def zero(cls, c: float) -> "CauchyGoursatData":
        z = lambda v: np.zeros_like(np.asarray(v, dtype=float))  # noqa: E731
        return cls(c, z, z, z, z, z, name="zero")

    def combine(self, a: float, other: "CauchyGoursatData", b: float) -> "CauchyGoursatData":
        """Data ``a*self + b*other`` on the same Cauchy line."""
        if other.c != self.c:
            raise BoundaryDataError("cannot combine data with different c")

        def lin(p, q):
            return lambda v: a * p(v) + b * q(v)

        N = lin(self.N, other.N) if (self.N is not None and other.N is not None) else None
        return CauchyGoursatData(
            self.c, lin(self.g, other.g), lin(self.h, other.h), lin(self.f, other.f),
            lin(self.n, other.n), N, name=f"{a}*{self.name}+{b}*{other.name}",
        )


@dataclass
class ValidationReport:
    corner_gap_c0: float
    corner_gap_0c: float
    n_l1: float
    n_l1_converged: bool
    fprime_l1: float
    fprime_l1_converged: bool
    tol: float
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def as_dict(self) -> dict:
        out = {
            "corner_gap_c0": self.corner_gap_c0,
            "corner_gap_0c": self.corner_gap_0c,
            "n_l1": self.n_l1,
            "n_l1_converged": self.n_l1_converged,
            "fprime_l1": self.fprime_l1,
            "fprime_l1_converged": self.fprime_l1_converged,
            "corner_tol": self.tol,
        }
        out.update({f"check.{k}": v for k, v in self.checks.items()})
        out["verdict"] = "pass" if self.passed else "fail"
        return out


# -- graded quadrature ------------------------------------------------------

def _theta(sigma, c):
    return np.arcsin(np.sqrt(np.clip(sigma / c, 0.0, 1.0)))


def graded_integral(fn: Callable, a: float, b: float, c: float, tol: float = QUAD_TOL) -> float:
    """int_a^b fn(σ) dσ for 0 <= a <= b <= c, clustered as square roots at 0 and c.

    Uses σ = c sin²θ, dσ = c sin(2θ) dθ, which turns inverse-square-root end
    singularities into bounded integrands.
    """
    if b == a:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    ta, tb = float(_theta(a, c)), float(_theta(b, c))

    def integrand(th):
        sig = c * math.sin(th) ** 2
        return float(fn(np.asarray(sig))) * c * math.sin(2.0 * th)

    val, _ = integrate.quad(integrand, ta, tb, epsabs=tol, epsrel=tol, limit=400)
    return sign * val


def cumulative_n_integral(data: CauchyGoursatData, nodes: np.ndarray) -> np.ndarray:
    """int_0^{nodes[k]} n(σ) dσ for increasing nodes in [0, c]."""
    nodes = np.asarray(nodes, dtype=float)
    if data.N is not None:
        return np.asarray(data.N(nodes), dtype=float) - float(data.N(np.asarray(0.0)))
    pieces = [graded_integral(data.n, a, b, data.c) for a, b in zip(nodes[:-1], nodes[1:])]
    first = graded_integral(data.n, 0.0, nodes[0], data.c) if nodes.size else 0.0
    return first + np.concatenate([[0.0], np.cumsum(pieces)])


def _l1_with_exclusion(fn, c, levels=range(2, 15)):
    """L1 norms of fn over [ε, c-ε] for ε = c 10^-k; returns (values, converged)."""
    vals = []
    for k in levels:
        eps = c * 10.0 ** (-k)
        vals.append(graded_integral(lambda v: np.abs(fn(v)), eps, c - eps, c, tol=1e-10))
    vals = np.array(vals)
    d = np.abs(np.diff(vals))
    # integrable end singularities give geometrically shrinking increments
    tiny = 1e-12 * max(1.0, vals[-1])
    if np.all(d[-3:] <= tiny):
        return vals, True
    ratios = d[-3:] / np.maximum(d[-4:-1], tiny)
    r = float(np.max(ratios))
    tail = d[-1] * r / (1.0 - r) if r < 1 else math.inf
    return vals, bool(r < 0.9 and tail <= 1e-3 * max(1.0, vals[-1]))


def _total_variation(fn, c, sizes=(1024, 4096, 16384)):
    tvs = []
    for n in sizes:
        th = np.linspace(0.0, 0.5 * math.pi, n + 1)
        vals = np.asarray(fn(c * np.sin(th) ** 2), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise BoundaryDataError("f is not finite on the Cauchy line")
        tvs.append(float(np.sum(np.abs(np.diff(vals)))))
    converged = abs(tvs[-1] - tvs[-2]) <= 1e-3 * max(1.0, tvs[-1])
    return tvs[-1], converged


def validate_weak_compatibility(data: CauchyGoursatData, tol: float = CORNER_TOL,
                                exclusion: float = 1e-3) -> ValidationReport:
    """Check corner continuity and integrability of f' and n.

    Args:
        data: Boundary data.
        tol: Absolute tolerance for the corner gaps.
        exclusion: Relative width of the end zones of the Cauchy line skipped when
            spot-checking n for evaluation failures.

    Raises:
        BoundaryDataError: If a sampler fails or returns non-finite values at
            interior points.
    """
    c = data.c
    interior = np.linspace(exclusion * c, (1.0 - exclusion) * c, 257)
    try:
        for name, fn, pts in (("f", data.f, np.linspace(0.0, c, 257)), ("n", data.n, interior),
                              ("g", data.g, c * (1.0 + np.linspace(0.0, 1.0, 17))),
                              ("h", data.h, c * (1.0 + np.linspace(0.0, 1.0, 17)))):
            vals = np.asarray(fn(pts), dtype=float)
            if not np.all(np.isfinite(vals)):
                raise BoundaryDataError(f"sampler {name} returned non-finite values at interior points")
    except BoundaryDataError:
        raise
    except Exception as exc:  # sampler blew up
        raise BoundaryDataError(f"sampler evaluation failed: {exc}") from exc

    gap_c0 = abs(float(data.g(np.asarray(c))) - float(data.f(np.asarray(c))))
    gap_0c = abs(float(data.h(np.asarray(c))) - float(data.f(np.asarray(0.0))))
    with np.errstate(all="ignore"):
        n_vals, n_ok = _l1_with_exclusion(data.n, c)
    tv, tv_ok = _total_variation(data.f, c)
    checks = {
        "corner_c0": gap_c0 <= tol,
        "corner_0c": gap_0c <= tol,
        "n_integrable": n_ok,
        "fprime_integrable": tv_ok,
    }
    return ValidationReport(gap_c0, gap_0c, float(n_vals[-1]), n_ok, tv, tv_ok, tol, checks)


# -- forcing term -----------------------------------------------------------

def _goursat_branch(trace, profile, c, x):
    """2 λ(x) q(x) - λ(c) q(c) - int_c^x q λ' for x > c (q = g or h)."""
    val, _ = integrate.quad(lambda v: float(trace(np.asarray(v))) * float(profile.dlam(v)), c, x,
                            epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)
    return (2.0 * float(profile.lam(x)) * float(trace(np.asarray(x)))
            - float(profile.lam(c)) * float(trace(np.asarray(c))) - val)


def assemble_G(data: CauchyGoursatData, profile: CurvatureProfile, s: float, t: float) -> float:
    """Boundary forcing at a point of the closed cone."""
    c = data.c
    if s < 0 or t < 0 or s + t < c * (1 - 1e-12):
        raise BoundaryDataError(f"({s}, {t}) lies outside the closed domain")
    lam_c = float(profile.lam(c))
    part_s = lam_c * float(data.f(np.asarray(s))) if s <= c else _goursat_branch(data.g, profile, c, s)
    part_t = lam_c * float(data.f(np.asarray(c - t))) if t <= c else _goursat_branch(data.h, profile, c, t)
    lo, hi = max(c - t, 0.0), min(c, s)
    if data.N is not None:
        n_part = float(data.N(np.asarray(hi))) - float(data.N(np.asarray(lo)))
    else:
        n_part = graded_integral(data.n, lo, hi, c)
    return part_s + part_t + lam_c * n_part


def _branch_on_nodes(trace, profile, c, m, nodes):
    """Goursat branch of the forcing at the axis nodes nodes[m:], cumulative quad per cell."""
    out = np.empty(nodes.size)
    lam_c = float(profile.lam(c))
    tr = np.asarray(trace(nodes[m:]), dtype=float)
    out[m:] = 2.0 * profile.lam(nodes[m:]) * tr - lam_c * float(trace(np.asarray(c)))
    cells = [
        integrate.quad(lambda v: float(trace(np.asarray(v))) * float(profile.dlam(v)), a, b,
                       epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=100)[0]
        for a, b in zip(nodes[m:-1], nodes[m + 1:])
    ]
    out[m:] -= np.concatenate([[0.0], np.cumsum(cells)])
    return out


def forcing_on_grid(data: CauchyGoursatData, profile: CurvatureProfile, grid) -> np.ndarray:
    """The boundary forcing G at every node of a truncated-cone grid."""
    c, m = grid.c, grid.m
    if abs(c - data.c) > 1e-12 * max(1.0, c):
        raise BoundaryDataError(f"grid c = {grid.c} differs from data c = {data.c}")
    lam_c = float(profile.lam(c))
    cauchy_nodes = np.arange(m + 1) * grid.h
    f_nodes = np.asarray(data.f(cauchy_nodes), dtype=float)

    part_s = np.empty(grid.ns + 1)
    part_s[: m + 1] = lam_c * f_nodes
    part_s[m + 1:] = _branch_on_nodes(data.g, profile, c, m, grid.s)[m + 1:]
    part_t = np.empty(grid.nt + 1)
    part_t[: m + 1] = lam_c * f_nodes[::-1]  # f(c - t)
    part_t[m + 1:] = _branch_on_nodes(data.h, profile, c, m, grid.t)[m + 1:]

    cum_n = cumulative_n_integral(data, cauchy_nodes)
    hi = np.minimum(np.arange(grid.ns + 1), m)
    lo = np.maximum(m - np.arange(grid.nt + 1), 0)
    n_part = cum_n[hi][:, None] - cum_n[lo][None, :]
    G = part_s[:, None] + part_t[None, :] + lam_c * n_part
    G[~grid.mask] = np.nan
    return G


def kernels(profile: CurvatureProfile):
    """Kernel evaluators K1(s, t, σ), K2(s, t, τ) of the Volterra equation."""

    def _check(s, t):
        if np.any(np.asarray(s) + np.asarray(t) <= 0):
            raise ValueError("kernels are undefined at s + t = 0")

    def K1(s, t, sigma):
        _check(s, t)
        return profile.dlam(np.asarray(sigma) + t) / (2.0 * profile.lam(np.asarray(s) + t))

    def K2(s, t, tau):
        _check(s, t)
        return profile.dlam(np.asarray(s) + tau) / (2.0 * profile.lam(np.asarray(s) + t))

    return K1, K2


def forcing_F(data: CauchyGoursatData, profile: CurvatureProfile, s: float, t: float) -> float:
    if s + t <= 0:
        raise ValueError("F is undefined at s + t = 0")
    return assemble_G(data, profile, s, t) / (2.0 * float(profile.lam(s + t)))


def kernel_integral_sum(profile: CurvatureProfile, s, t):
    """int_0^s K1 dσ + int_0^t K2 dτ in closed form: 1 - (λ(s)+λ(t)) / (2 λ(s+t))."""
    return 1.0 - (profile.lam(s) + profile.lam(t)) / (2.0 * profile.lam(np.asarray(s) + t))
