"""Uniform grids in characteristic coordinates and scalar fields on them.

A grid is the node set ``{(i h, j h)}`` of the rectangle ``[0, S] x [0, T]``
restricted to ``s + t >= c``.  With ``c = 0`` it is the full rectangle used by
the corrector problem; with ``c > 0`` it is the truncated cone of the
Cauchy-Goursat problem.  Field values are stored on the full rectangle array,
indexed ``[i, j]``, with NaN at nodes outside the cone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ALIGN_TOL = 1e-9


class GridError(ValueError):
    """Raised on mismatched or malformed grids."""


class Grid:
    """Node set of ``[0, S] x [0, T]`` with ``s + t >= c``; ``c`` is a multiple of h."""

    kind = "grid"

    def __init__(self, S: float, T: float, h: float, c: float = 0.0):
        if h <= 0 or S <= 0 or T <= 0 or c < 0:
            raise GridError("need h, S, T > 0 and c >= 0")
        m = int(round(c / h))
        if abs(m * h - c) > ALIGN_TOL * max(1.0, c):
            raise GridError(f"c = {c} is not an integer multiple of h = {h}")
        ns = int(math.floor(S / h + ALIGN_TOL))
        nt = int(math.floor(T / h + ALIGN_TOL))
        if ns < m or nt < m:
            raise GridError("need S >= c and T >= c")
        self.h = float(h)
        self.m = m
        self.c = m * self.h
        self.ns, self.nt = ns, nt
        self.S, self.T = ns * self.h, nt * self.h
        self.s = np.arange(ns + 1) * self.h
        self.t = np.arange(nt + 1) * self.h
        ii, jj = np.meshgrid(np.arange(ns + 1), np.arange(nt + 1), indexing="ij")
        self.mask = (ii + jj) >= m
        self.S2, self.T2 = np.meshgrid(self.s, self.t, indexing="ij")
        self.U = self.S2 + self.T2

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ns + 1, self.nt + 1)

    def row_start(self, j: int) -> int:
        """First s-index of the cone on the row t = j h."""
        return max(self.m - j, 0)

    def col_start(self, i: int) -> int:
        return max(self.m - i, 0)

    def index(self, s: float, t: float) -> tuple[int, int]:
        """Indices of the node at (s, t); raises if (s, t) is not a node."""
        i, j = s / self.h, t / self.h
        ri, rj = int(round(i)), int(round(j))
        if abs(ri - i) > 1e-7 or abs(rj - j) > 1e-7:
            raise GridError(f"({s}, {t}) is not a grid node")
        if not (0 <= ri <= self.ns and 0 <= rj <= self.nt) or not self.mask[ri, rj]:
            raise GridError(f"({s}, {t}) lies outside the grid")
        return ri, rj

    def params(self) -> dict:
        return {"kind": self.kind, "c": self.c, "S": self.S, "T": self.T, "h": self.h}

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and (self.m, self.ns, self.nt) == (other.m, other.ns, other.nt)
            and self.h == other.h
        )

    def __hash__(self):
        return hash((self.m, self.ns, self.nt, self.h))

    def __repr__(self):
        return f"{type(self).__name__}(c={self.c}, S={self.S}, T={self.T}, h={self.h})"

    def empty(self) -> np.ndarray:
        out = np.full(self.shape, np.nan)
        out[self.mask] = 0.0
        return out

    def sample(self, fn) -> np.ndarray:
        """Evaluate ``fn(s, t)`` (vectorised) on the cone nodes."""
        out = np.full(self.shape, np.nan)
        out[self.mask] = fn(self.S2[self.mask], self.T2[self.mask])
        return out


class TruncatedConeGrid(Grid):
    kind = "cone"

    def __init__(self, c: float, S: float, T: float, h: float):
        if c <= 0:
            raise GridError("truncated cone needs c > 0")
        super().__init__(S, T, h, c)


class RectangleGrid(Grid):
    kind = "rectangle"

    def __init__(self, S: float, T: float, h: float):
        super().__init__(S, T, h, 0.0)


def _grad_masked(values: np.ndarray, mask: np.ndarray, h: float, axis: int) -> np.ndarray:
    # centred in the interior, second-order one-sided at both ends of each segment
    a = np.moveaxis(values, axis, 0)
    mk = np.moveaxis(mask, axis, 0)
    out = np.full(a.shape, np.nan)
    for k in range(a.shape[1]):
        idx = np.flatnonzero(mk[:, k])
        if idx.size == 0:
            continue
        seg = a[idx[0]: idx[-1] + 1, k]
        if seg.size >= 3:
            out[idx[0]: idx[-1] + 1, k] = np.gradient(seg, h, edge_order=2)
        elif seg.size == 2:
            out[idx[0]: idx[-1] + 1, k] = (seg[1] - seg[0]) / h
    return np.moveaxis(out, 0, axis)


@dataclass
class Field:
    """Scalar grid function x(s, t) on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray
    label: str = "x"
    generation: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise GridError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.values[self.grid.mask])):
            raise GridError(f"field {self.label!r} has non-finite values on the grid")

    @classmethod
    def from_function(cls, grid: Grid, fn, label: str = "x") -> "Field":
        return cls(grid, grid.sample(fn), label)

    def __getitem__(self, ij):
        return self.values[ij]

    def at(self, s: float, t: float) -> float:
        return float(self.values[self.grid.index(s, t)])

    def d_s(self) -> np.ndarray:
        """Stencil x_s; NaN on rows with a single node (see :meth:`gradient`)."""
        return _grad_masked(self.values, self.grid.mask, self.grid.h, 0)

    def d_t(self) -> np.ndarray:
        return _grad_masked(self.values, self.grid.mask, self.grid.h, 1)

    def gradient(self) -> tuple[np.ndarray, np.ndarray]:
        xs, xt = self.d_s(), self.d_t()
        # single-node rows/columns (corners of a grid with S = c or T = c):
        # combine the other derivative with a difference along the Cauchy line
        v, h, mk = self.values, self.grid.h, self.grid.mask
        for i, j in zip(*np.nonzero(mk & np.isnan(xs))):
            if i > 0 and j + 1 < v.shape[1] and mk[i - 1, j + 1]:
                xs[i, j] = (v[i, j] - v[i - 1, j + 1]) / h + xt[i, j]
        for i, j in zip(*np.nonzero(mk & np.isnan(xt))):
            if j > 0 and i + 1 < v.shape[0] and mk[i + 1, j - 1]:
                xt[i, j] = (v[i, j] - v[i + 1, j - 1]) / h + xs[i, j]
        return xs, xt

    def hessian(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Stencil approximations of (x_ss, x_st, x_tt)."""
        mk, h = self.grid.mask, self.grid.h
        xs, xt = self.gradient()
        xss = _grad_masked(xs, mk, h, 0)
        xst = 0.5 * (_grad_masked(xs, mk, h, 1) + _grad_masked(xt, mk, h, 0))
        xtt = _grad_masked(xt, mk, h, 1)
        return xss, xst, xtt

    def interpolate(self, s: float, t: float) -> float:
        """Bilinear interpolation, or linear on the upper triangle of a cell cut by s + t = c."""
        g = self.grid
        fi, fj = s / g.h, t / g.h
        i0 = min(max(int(math.floor(fi + 1e-12)), 0), g.ns - 1)
        j0 = min(max(int(math.floor(fj + 1e-12)), 0), g.nt - 1)
        a, b = fi - i0, fj - j0
        if not (-1e-9 <= a <= 1 + 1e-9 and -1e-9 <= b <= 1 + 1e-9):
            raise GridError(f"({s}, {t}) lies outside the grid")
        corners = self.values[i0: i0 + 2, j0: j0 + 2]
        if not np.isfinite(corners[0, 0]) and np.all(np.isfinite(corners.flat[1:])) and a + b >= 1 - 1e-12:
            # cell cut by the Cauchy line: linear interpolation on the upper triangle
            return float((1 - b) * corners[1, 0] + (1 - a) * corners[0, 1] + (a + b - 1) * corners[1, 1])
        weights = np.array([[(1 - a) * (1 - b), (1 - a) * b], [a * (1 - b), a * b]])
        used = weights != 0
        if np.any(~np.isfinite(corners[used])):
            raise GridError(f"({s}, {t}) needs nodes outside the cone")
        return float(np.sum(np.where(used, corners, 0.0) * weights))

    def sup_diff(self, other: "Field", where: np.ndarray | None = None) -> float:
        if other.grid != self.grid:
            raise GridError("grid mismatch")
        sel = self.grid.mask if where is None else (self.grid.mask & where)
        if not np.any(sel):
            return 0.0
        return float(np.max(np.abs(self.values[sel] - other.values[sel])))

    def __add__(self, other: "Field") -> "Field":
        if other.grid != self.grid:
            raise GridError("grid mismatch")
        return Field(self.grid, self.values + other.values, f"{self.label}+{other.label}")

    def __sub__(self, other: "Field") -> "Field":
        if other.grid != self.grid:
            raise GridError("grid mismatch")
        return Field(self.grid, self.values - other.values, f"{self.label}-{other.label}")

    def scaled(self, a: float) -> "Field":
        return Field(self.grid, a * self.values, self.label, self.generation)


def sqrt_cusp_weights(n: int) -> np.ndarray:
    """Trapezoid defect for sqrt(σ) on [0, k] at k = 0..n.

    Entry k is int_0^k sqrt(σ) dσ minus its composite trapezoid value with unit
    spacing.  It tends to -zeta(-1/2) = 0.2079 as k grows.
    """
    k = np.arange(n + 1, dtype=float)
    r = np.sqrt(k)
    trap = np.concatenate([[0.0], np.cumsum(0.5 * (r[:-1] + r[1:]))])
    return (2.0 / 3.0) * k ** 1.5 - trap


def _cusp_correction(values: np.ndarray, start: np.ndarray, h: float) -> np.ndarray:
    """Correction making the cumulative trapezoid exact for a + b sqrt(σ) along axis 0.

    Line k starts at index start[k] and the square root is anchored at index 0.
    """
    n = values.shape[0] - 1
    wts = sqrt_cusp_weights(n)
    out = np.zeros(values.shape)
    cols = np.flatnonzero(start < n)
    k0 = start[cols]
    dw = values[k0 + 1, cols] - values[k0, cols]
    dr = np.sqrt(k0 + 1.0) - np.sqrt(k0)
    out[:, cols] = h * (dw / dr)[None, :] * (wts[:, None] - wts[k0][None, :])
    return out


def cumtrapz_s(values: np.ndarray, grid: Grid, cusp: bool = False) -> np.ndarray:
    """int_{(c-t)^+}^{s} values(σ, t) dσ at every node, by composite trapezoid.

    With ``cusp=True`` each row is integrated exactly for ``a + b sqrt(σ)``,
    with b fitted on the first cell of the row.  Solutions of weakly compatible
    problems behave like that near the characteristic s = 0 through the corner
    (0, c).  The correction removes the O(h^1.5) trapezoid error of the cusp
    and is O(h²) on smooth rows.
    """
    inc = 0.5 * grid.h * (values[:-1, :] + values[1:, :])
    inc = np.where(grid.mask[:-1, :], inc, 0.0)
    out = np.zeros(grid.shape)
    np.cumsum(inc, axis=0, out=out[1:, :])
    if cusp:
        start = np.maximum(grid.m - np.arange(grid.nt + 1), 0)
        out += _cusp_correction(np.where(grid.mask, values, 0.0), start, grid.h)
    out[~grid.mask] = np.nan
    return out


def cumtrapz_t(values: np.ndarray, grid: Grid, cusp: bool = False) -> np.ndarray:
    """int_{(c-s)^+}^{t} values(s, τ) dτ at every node; see :func:`cumtrapz_s`."""
    inc = 0.5 * grid.h * (values[:, :-1] + values[:, 1:])
    inc = np.where(grid.mask[:, :-1], inc, 0.0)
    out = np.zeros(grid.shape)
    np.cumsum(inc, axis=1, out=out[:, 1:])
    if cusp:
        start = np.maximum(grid.m - np.arange(grid.ns + 1), 0)
        out += _cusp_correction(np.where(grid.mask, values, 0.0).T, start, grid.h).T
    out[~grid.mask] = np.nan
    return out


def area_integral(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Integral of ``values`` over the cone part of ``[0, s] x [0, t]`` at every node.

    Evaluated as the iterated trapezoid int dτ int dσ, rows first.  Rows and
    columns on the axes (or on s + t = c) come out exactly zero.
    """
    rows = cumtrapz_s(np.where(grid.mask, values, 0.0), grid)
    return cumtrapz_t(np.where(grid.mask, rows, 0.0), grid)


# -- text serialisation ----------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def write_field_tsv(path, fld: Field, extra: dict[str, np.ndarray] | None = None) -> None:
    """Three-column (s, t, x) TSV plus optional extra columns; one '#' header line."""
    g = fld.grid
    extra = extra or {}
    params = " ".join(f"{k}={v}" for k, v in g.params().items())
    cols = ["s", "t", fld.label, *extra]
    lines = ["# " + "\t".join(cols) + f"\t| {params} generation={fld.generation}"]
    ii, jj = np.nonzero(g.mask)
    for i, j in zip(ii, jj):
        row = [_fmt(g.s[i]), _fmt(g.t[j]), _fmt(fld.values[i, j])]
        row += [_fmt(arr[i, j]) for arr in extra.values()]
        lines.append("\t".join(row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_field_tsv(path) -> Field:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        data = np.loadtxt(fh, ndmin=2)
    meta = dict(kv.split("=", 1) for kv in header.split("|", 1)[1].split())
    c, S, T, h = (float(meta[k]) for k in ("c", "S", "T", "h"))
    grid = TruncatedConeGrid(c, S, T, h) if c > 0 else RectangleGrid(S, T, h)
    values = np.full(grid.shape, np.nan)
    ii = np.rint(data[:, 0] / h).astype(int)
    jj = np.rint(data[:, 1] / h).astype(int)
    values[ii, jj] = data[:, 2]
    label = header[1:].split("|")[0].split()[2]
    return Field(grid, values, label, int(meta.get("generation", 0)))
