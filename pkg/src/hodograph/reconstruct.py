"""Inverse hodograph map: slopes, heights, folds, Monge-Ampere residual, gluing.

On the hodograph grid p = s - t is the slope w_x and u = s + t the hodograph
time.  The remaining slope q = w_y and the height w follow from the exact
1-forms

    dq = λ(u) (x_s ds - x_t dt),      dw = p dx + q dy,   dy = -(ds + dt)/λ(u),

integrated along grid rows and columns.  On a row dq = λ dx and on a column
dq = -λ dx, so each edge increment is λ(edge midpoint) times the jump of x
across the edge; no derivative stencils are needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from hodograph.curvature import CurvatureProfile
from hodograph.grid import Field, Grid, GridError, _grad_masked

FOLD_REL_TOL = 1e-6


# -- path integration --------------------------------------------------------

def _path_integrate(d_row: np.ndarray, d_col: np.ndarray, mask: np.ndarray, anchor, ref: float,
                    order: str = "row") -> np.ndarray:
    """Node values from edge increments, starting at ``anchor`` with value ``ref``.

    ``d_row[i, j]`` is the increment from (i, j) to (i+1, j) and
    ``d_col[i, j]`` the one from (i, j) to (i, j+1).  ``order="row"`` walks
    the anchor row first and then every column; ``"col"`` does the reverse.
    """
    if order == "col":
        return _path_integrate(d_col.T, d_row.T, mask.T, anchor[::-1], ref, "row").T
    ns, nt = mask.shape
    out = np.full(mask.shape, np.nan)
    ia, ja = anchor
    if not mask[ia, ja]:
        raise GridError("anchor lies outside the grid")
    # anchor row (cone rows and columns are contiguous runs of nodes)
    out[ia, ja] = ref
    run = mask[:, ja]
    hi = ia + 1 + int(np.argmin(np.append(run[ia + 1:], False)))
    lo = ia - int(np.argmin(np.append(run[:ia][::-1], False)))
    out[ia + 1: hi, ja] = ref + np.cumsum(d_row[ia: hi - 1, ja])
    out[lo: ia, ja] = ref - np.cumsum(d_row[lo: ia, ja][::-1])[::-1]
    # every column through the anchor row
    cols = np.flatnonzero(np.isfinite(out[:, ja]))
    up = np.cumsum(d_col[cols, ja:], axis=1)
    out[cols, ja + 1:] = out[cols, ja][:, None] + up
    down = np.cumsum(d_col[cols, :ja][:, ::-1], axis=1)[:, ::-1]
    out[cols, :ja] = out[cols, ja][:, None] - down
    out[~mask] = np.nan
    # nodes in columns that miss the anchor row: extend along rows
    for _ in range(ns + nt):
        missing = mask & np.isnan(out)
        if not missing.any():
            break
        progress = False
        for i, j in zip(*np.nonzero(missing)):
            if i > 0 and np.isfinite(out[i - 1, j]):
                out[i, j] = out[i - 1, j] + d_row[i - 1, j]
            elif i + 1 < ns and np.isfinite(out[i + 1, j]):
                out[i, j] = out[i + 1, j] - d_row[i, j]
            elif j > 0 and np.isfinite(out[i, j - 1]):
                out[i, j] = out[i, j - 1] + d_col[i, j - 1]
            elif j + 1 < nt and np.isfinite(out[i, j + 1]):
                out[i, j] = out[i, j + 1] - d_col[i, j]
            else:
                continue
            progress = True
        if not progress:
            break
    return out


def _cell_loops(d_row: np.ndarray, d_col: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Circulation of the edge increments around every grid cell (NaN if not in the grid)."""
    loop = d_row[:, :-1] + d_col[1:, :] - d_row[:, 1:] - d_col[:-1, :]
    full = mask[:-1, :-1] & mask[1:, :-1] & mask[:-1, 1:] & mask[1:, 1:]
    return np.where(full, loop, np.nan)


def _q_increments(x: Field, profile: CurvatureProfile):
    g = x.grid
    v = x.values
    lam_row = profile.lam(g.U[:-1, :] + 0.5 * g.h)
    lam_col = profile.lam(g.U[:, :-1] + 0.5 * g.h)
    d_row = lam_row * (v[1:, :] - v[:-1, :])
    d_col = -lam_col * (v[:, 1:] - v[:, :-1])
    return d_row, d_col


def default_anchor(grid: Grid):
    """Node (c, c) when it is on the grid, else the node nearest the middle."""
    try:
        return grid.index(max(grid.c, grid.h), max(grid.c, grid.h))
    except GridError:
        ii, jj = np.nonzero(grid.mask)
        k = len(ii) // 2
        return int(ii[k]), int(jj[k])


def product_anchor_values(x: Field, profile: CurvatureProfile, anchor):
    """(q_ref, w_ref) of the product surface w = u cos x at the anchor for λ(u) = u, else (0, 0)."""
    uu = np.linspace(0.0, max(1.0, float(x.grid.U.max())), 65)
    if np.allclose(profile.lam(uu), uu, atol=1e-14) and np.allclose(profile.dlam(uu), 1.0, atol=1e-14):
        i, j = anchor
        u, xa = x.grid.U[i, j], x.values[i, j]
        return float(-u * np.cos(xa)), float(u * np.cos(xa))
    return 0.0, 0.0


def compute_q(x: Field, profile: CurvatureProfile, anchor=None, q_ref: float | None = None,
              order: str = "row"):
    """q = w_y by path integration of λ(x_s ds - x_t dt).

    Args:
        x: Hodograph field.
        profile: Curvature profile.
        anchor: Node indices (i, j); defaults to :func:`default_anchor`.
        q_ref: Value at the anchor; defaults per :func:`product_anchor_values`.
        order: ``"row"`` or ``"col"``; path used for the integration.

    Returns:
        (q, loops): node values and per-cell loop residuals.
    """
    anchor = default_anchor(x.grid) if anchor is None else tuple(anchor)
    if q_ref is None:
        q_ref = product_anchor_values(x, profile, anchor)[0]
    d_row, d_col = _q_increments(x, profile)
    q = _path_integrate(d_row, d_col, x.grid.mask, anchor, q_ref, order)
    return q, _cell_loops(d_row, d_col, x.grid.mask)


def y_on_grid(profile: CurvatureProfile, grid: Grid, u_ref: float = 1.0, y_ref: float = 0.0) -> np.ndarray:
    """y(u) = y_ref + int_u^u_ref dη/λ(η) at every node, one quadrature per diagonal cell."""
    ks = np.arange(grid.m, grid.ns + grid.nt + 1)
    us = ks * grid.h
    if us[0] <= 0:
        raise GridError("y diverges at u = 0; restrict the grid to u > 0")
    cells = np.array([
        integrate.quad(lambda e: 1.0 / float(profile.lam(e)), a, b, epsabs=1e-13, epsrel=1e-13)[0]
        for a, b in zip(us[:-1], us[1:])
    ])
    cum = np.concatenate([[0.0], np.cumsum(cells)])  # int_{u0}^{u_k} dη/λ
    if u_ref == us[0]:
        to_ref = 0.0
    else:
        to_ref = integrate.quad(lambda e: 1.0 / float(profile.lam(e)), us[0], u_ref,
                                epsabs=1e-13, epsrel=1e-13, limit=200)[0]
    y_diag = y_ref + to_ref - cum
    k = np.rint(grid.U / grid.h).astype(int)
    out = np.full(grid.shape, np.nan)
    out[grid.mask] = y_diag[k[grid.mask] - grid.m]
    return out


@dataclass
class FoldMask:
    """Per-node x_p = (x_s - x_t)/2 and the edges across which it vanishes or changes sign."""

    xp: np.ndarray
    tol: float
    edges_s: np.ndarray
    edges_t: np.ndarray
    small: np.ndarray

    @property
    def nodes(self) -> np.ndarray:
        """Nodes touching a folded edge or with |x_p| below tolerance."""
        n = self.small.copy()
        n[:-1, :] |= self.edges_s
        n[1:, :] |= self.edges_s
        n[:, :-1] |= self.edges_t
        n[:, 1:] |= self.edges_t
        return n

    @property
    def empty(self) -> bool:
        return not (self.edges_s.any() or self.edges_t.any() or self.small.any())


def detect_folds(x: Field, fold_tol: float | None = None, where: np.ndarray | None = None) -> FoldMask:
    """Flag edges where x_p changes sign or nearly vanishes.

    Args:
        x: Hodograph field.
        fold_tol: Absolute threshold on |x_p|; defaults to 1e-6 max |x_p|.
        where: Optional node mask restricting the search (e.g. excluding
            nodes on the axes where stencils see the boundary cusp).
    """
    g = x.grid
    xs, xt = x.gradient()
    xp = 0.5 * (xs - xt)
    sel = g.mask & np.isfinite(xp)
    if where is not None:
        sel &= where
    big = float(np.max(np.abs(xp[sel]))) if np.any(sel) else 0.0
    tol = FOLD_REL_TOL * big if fold_tol is None else float(fold_tol)
    small = sel & (np.abs(xp) < tol)
    sgn = np.where(sel, np.sign(xp), 0.0)
    es = sel[:-1, :] & sel[1:, :] & ((sgn[:-1, :] * sgn[1:, :] < 0) | small[:-1, :] | small[1:, :])
    et = sel[:, :-1] & sel[:, 1:] & ((sgn[:, :-1] * sgn[:, 1:] < 0) | small[:, :-1] | small[:, 1:])
    return FoldMask(xp, tol, es, et, small)


@dataclass
class PhysicalSurface:
    grid: Grid
    u: np.ndarray
    p: np.ndarray
    x: np.ndarray
    y: np.ndarray
    q: np.ndarray
    w: np.ndarray
    anchor: tuple
    q_ref: float
    w_ref: float
    loops_q: np.ndarray = field(repr=False)
    loops_w: np.ndarray = field(repr=False)
    folds: FoldMask | None = None

    def columns(self) -> dict:
        fold = self.folds.nodes.astype(float) if self.folds is not None else np.zeros(self.grid.shape)
        return {"u": self.u, "p": self.p, "y": self.y, "q": self.q, "w": self.w, "fold": fold}


def compute_surface(x: Field, q: np.ndarray, profile: CurvatureProfile, u_ref: float = 1.0,
                    y_ref: float = 0.0, w_ref: float | None = None, anchor=None,
                    q_ref: float | None = None, loops_q: np.ndarray | None = None,
                    order: str = "row", fold_tol: float | None = None) -> PhysicalSurface:
    """Physical coordinates and height from x and q.

    y comes from y(u) = y_ref + int_u^{u_ref} dη/λ, and w from
    dw = p dx + q dy integrated edge by edge with trapezoid averages of p, q.

    Args:
        x: Hodograph field on a grid with c > 0.
        q: Node values of w_y (e.g. from :func:`compute_q`).
        profile: Curvature profile.
        u_ref, y_ref: Normalisation of y.
        w_ref: Height at the anchor; defaults per :func:`product_anchor_values`.
        anchor: Anchor node; defaults to :func:`default_anchor`.
        q_ref: Recorded anchor slope (informational).
        loops_q: Loop residuals of q, stored on the surface.
        order: Path order for w.
        fold_tol: Passed to :func:`detect_folds`.
    """
    g = x.grid
    anchor = default_anchor(g) if anchor is None else tuple(anchor)
    qa, wa = product_anchor_values(x, profile, anchor)
    w_ref = wa if w_ref is None else w_ref
    q_ref = qa if q_ref is None else q_ref
    y = y_on_grid(profile, g, u_ref, y_ref)
    p = np.where(g.mask, g.S2 - g.T2, np.nan)
    v = x.values

    def incr(a0, a1, x0, x1, y0, y1, q0, q1):
        return 0.5 * (a0 + a1) * (x1 - x0) + 0.5 * (q0 + q1) * (y1 - y0)

    d_row = incr(p[:-1, :], p[1:, :], v[:-1, :], v[1:, :], y[:-1, :], y[1:, :], q[:-1, :], q[1:, :])
    d_col = incr(p[:, :-1], p[:, 1:], v[:, :-1], v[:, 1:], y[:, :-1], y[:, 1:], q[:, :-1], q[:, 1:])
    d_row = np.nan_to_num(d_row)
    d_col = np.nan_to_num(d_col)
    w = _path_integrate(d_row, d_col, g.mask, anchor, w_ref, order)
    if loops_q is None:
        loops_q = _cell_loops(*_q_increments(x, profile), g.mask)
    return PhysicalSurface(g, np.where(g.mask, g.U, np.nan), p, v.copy(), y, q, w, anchor, q_ref, w_ref,
                           loops_q, _cell_loops(d_row, d_col, g.mask), detect_folds(x, fold_tol))


def reconstruct(x: Field, profile: CurvatureProfile, u_ref: float = 1.0, y_ref: float = 0.0,
                anchor=None, q_ref=None, w_ref=None, fold_tol=None, order: str = "row") -> PhysicalSurface:
    """compute_q followed by compute_surface."""
    anchor = default_anchor(x.grid) if anchor is None else tuple(anchor)
    q, loops = compute_q(x, profile, anchor, q_ref, order)
    return compute_surface(x, q, profile, u_ref, y_ref, w_ref, anchor, q_ref, loops, order, fold_tol)


# -- Monge-Ampere residual ---------------------------------------------------

@dataclass
class MAResidual:
    values: np.ma.MaskedArray
    excluded: np.ndarray
    reasons: dict
    w_xx: np.ndarray = field(repr=False)
    w_xy: np.ndarray = field(repr=False)
    w_yy: np.ndarray = field(repr=False)

    def sup(self, where: np.ndarray | None = None) -> float:
        vals = self.values
        sel = ~np.ma.getmaskarray(vals)
        if where is not None:
            sel &= where
        return float(np.max(np.abs(vals.data[sel]))) if np.any(sel) else 0.0


def ma_residual(surface: PhysicalSurface, profile: CurvatureProfile, fold_tol: float | None = None) -> MAResidual:
    """w_xx w_yy - w_xy² + λ² at every node via the inverse Jacobian of (s, t) -> (x, y).

    p_s = 1 and p_t = -1 exactly; q_s and q_t are stencils of the
    reconstructed q; x_s and x_t are stencils of x; y_s = y_t = -1/λ.
    Nodes with |x_p| below the fold tolerance are excluded, not set to NaN.
    """
    g = surface.grid
    fld = Field(g, surface.x)
    xs, xt = fld.gradient()
    qs = _grad_masked(surface.q, g.mask, g.h, 0)
    qt = _grad_masked(surface.q, g.mask, g.h, 1)
    lam = profile.lam(g.U)
    ys = yt = -1.0 / np.where(g.mask, lam, np.nan)
    xp = 0.5 * (xs - xt)
    folds = detect_folds(fld, fold_tol)
    bad_fold = g.mask & (np.abs(xp) < folds.tol)
    bad_stencil = g.mask & ~(np.isfinite(xs) & np.isfinite(xt) & np.isfinite(qs) & np.isfinite(qt))
    excluded = bad_fold | bad_stencil | ~g.mask
    with np.errstate(all="ignore"):
        det = xs * yt - xt * ys
        s_x, s_y = yt / det, -xt / det
        t_x, t_y = -ys / det, xs / det
        p_x, p_y = s_x - t_x, s_y - t_y
        q_x, q_y = qs * s_x + qt * t_x, qs * s_y + qt * t_y
        w_xx, w_yy = p_x, q_y
        w_xy = 0.5 * (p_y + q_x)
        res = w_xx * w_yy - w_xy * w_xy + lam * lam
    reasons = {}
    for i, j in zip(*np.nonzero(bad_fold)):
        reasons[(int(i), int(j))] = "fold"
    for i, j in zip(*np.nonzero(bad_stencil & ~bad_fold)):
        reasons[(int(i), int(j))] = "stencil"
    data = np.where(excluded, 0.0, res)
    return MAResidual(np.ma.MaskedArray(data, mask=excluded), excluded, reasons, w_xx, w_xy, w_yy)


# -- periodic extension and convexity ---------------------------------------

@dataclass
class PeriodicSurface:
    """w on a regular x grid over one period [-x₊, 3x₊), rows indexed by y."""

    x: np.ndarray
    y: np.ndarray
    w: np.ndarray
    x_plus: float
    seam_jump: float
    wx_mismatch: float
    wxx_seam: float
    patch: np.ndarray = field(repr=False)

    def rows(self):
        for k, yy in enumerate(self.y):
            for xx, ww in zip(self.x, self.w[k]):
                yield xx, yy, ww


def patch_from_surface(surface: PhysicalSurface, nx: int = 257, x_plus: float = 0.5 * np.pi,
                       tol: float = 1e-9):
    """Tabulate w on a regular x grid over [-x₊, x₊] along each complete diagonal.

    Every node of a diagonal shares one y, and x is monotone along it on a
    fold-free patch, so each diagonal gives one row w(x) by cubic spline.

    Raises:
        GridError: If no diagonal spans [-x₊, x₊] or x is not monotone on one.
    """
    g = surface.grid
    xg = np.linspace(-x_plus, x_plus, nx)
    rows, ys, coeffs = [], [], []
    for k in range(max(g.m, 2), min(g.ns, g.nt) + 1):
        i = np.arange(0, k + 1)
        j = k - i
        xd, wd = surface.x[i, j], surface.w[i, j]
        order = np.argsort(xd)
        xd, wd = xd[order], wd[order]
        if abs(xd[0] + x_plus) > tol or abs(xd[-1] - x_plus) > tol:
            continue
        if np.any(np.diff(xd) <= 0):
            raise GridError(f"x is not monotone along diagonal u = {k * g.h}")
        spl = CubicSpline(xd, wd)
        rows.append(spl(xg))
        ys.append(surface.y[i[0], j[0]])
        coeffs.append(spl)
    if not rows:
        raise GridError(f"no diagonal reaches x = ±{x_plus} within {tol}")
    return xg, np.array(ys), np.array(rows), coeffs


def extend_periodic(x: np.ndarray, y: np.ndarray, w: np.ndarray, splines=None,
                    x_plus: float | None = None, tol: float = 1e-9) -> PeriodicSurface:
    """Glue a patch on [-x₊, x₊] with its antisymmetric copy w(x + 2x₊) = -w(x).

    Args:
        x: Regular grid over [-x₊, x₊] (first and last entries are the seams).
        y: Row coordinates.
        w: Heights, shape (len(y), len(x)).
        splines: Optional per-row interpolants with ``derivative``; used for
            one-sided seam derivatives, otherwise second-order differences.
        x_plus: Half width; defaults to x[-1].

    Returns:
        PeriodicSurface over [-x₊, 3x₊) with seam diagnostics: the jump
        |w(x₊) + w(-x₊)|, the mismatch of w_x across the seam and the largest
        one-sided |w_xx| at the seams.

    Raises:
        GridError: If the grid is not symmetric about 0 within ``tol``.
    """
    x = np.asarray(x, float)
    w = np.atleast_2d(np.asarray(w, float))
    xp = float(x[-1]) if x_plus is None else float(x_plus)
    if abs(x[0] + xp) > tol or abs(x[-1] - xp) > tol:
        raise GridError("patch must span [-x₊, x₊]")
    jump = float(np.max(np.abs(w[:, -1] + w[:, 0])))
    if splines is not None:
        wx_l = np.array([s(xp, 1) for s in splines])
        wx_r = -np.array([s(-xp, 1) for s in splines])  # derivative of -w(x - 2x₊) at x₊⁺
        wxx = np.array([max(abs(s(xp, 2)), abs(s(-xp, 2))) for s in splines])
    else:
        dx = x[1] - x[0]
        wx_l = (3 * w[:, -1] - 4 * w[:, -2] + w[:, -3]) / (2 * dx)
        wx_r = -(-3 * w[:, 0] + 4 * w[:, 1] - w[:, 2]) / (2 * dx)
        wxx_r = (2 * w[:, -1] - 5 * w[:, -2] + 4 * w[:, -3] - w[:, -4]) / dx**2
        wxx_l = (2 * w[:, 0] - 5 * w[:, 1] + 4 * w[:, 2] - w[:, 3]) / dx**2
        wxx = np.maximum(np.abs(wxx_r), np.abs(wxx_l))
    full_x = np.concatenate([x, x[1:-1] + 2 * xp])
    full_w = np.concatenate([w, -w[:, 1:-1]], axis=1)
    return PeriodicSurface(full_x, np.asarray(y, float), full_w, xp, jump,
                           float(np.max(np.abs(wx_l - wx_r))), float(np.max(wxx)), w)


@dataclass
class ConvexityVerdict:
    applicable: bool
    sign: int
    violation: tuple | None
    note: str = ""


def _sign_verdict(vals, nodes) -> ConvexityVerdict:
    sgn = np.sign(vals)
    nz = sgn[sgn != 0]
    if nz.size == 0:
        return ConvexityVerdict(True, 0, None, "w_xx vanishes on the patch")
    ref = int(nz[0])
    bad = np.flatnonzero(sgn == -ref)
    if bad.size:
        return ConvexityVerdict(True, 0, tuple(int(v) for v in nodes[bad[0]]), "w_xx changes sign")
    return ConvexityVerdict(True, ref, None)


def check_partial_convexity(surface, profile: CurvatureProfile | None = None, interior=None,
                            fold_tol: float | None = None, margin: float = 0.05):
    """Check that w_xx keeps one sign.

    Args:
        surface: A :class:`PhysicalSurface` (then ``profile`` is required and
            w_xx comes from the Monge-Ampere derivative pipeline) or a
            :class:`PeriodicSurface` (then one verdict per half-period patch,
            from centred differences on the regular x grid).
        interior: Optional node mask for the hodograph case.
        margin: For periodic surfaces, the fraction of x₊ next to each seam
            left out; w_xx vanishes on the seams, so its sign there is noise.

    Returns:
        A :class:`ConvexityVerdict`, or a list of two for a periodic surface.
    """
    if isinstance(surface, PeriodicSurface):
        x, w, xp = surface.x, surface.w, surface.x_plus
        dx = x[1] - x[0]
        wxx = (w[:, 2:] - 2 * w[:, 1:-1] + w[:, :-2]) / dx**2
        xm = x[1:-1]
        verdicts = []
        for centre in (0.0, 2.0 * xp):
            cols = np.flatnonzero(np.abs(xm - centre) < (1.0 - margin) * xp)
            blk = wxx[:, cols]
            idx = np.array([(r, c + 1) for r in range(blk.shape[0]) for c in cols])
            verdicts.append(_sign_verdict(blk.ravel(), idx))
        return verdicts
    folds = surface.folds
    sel = surface.grid.mask if interior is None else (surface.grid.mask & interior)
    if folds is not None and np.any(folds.nodes & sel):
        first = tuple(int(v) for v in np.argwhere(folds.nodes & sel)[0])
        return ConvexityVerdict(False, 0, first, f"not applicable: fold at node {first}")
    res = ma_residual(surface, profile, fold_tol)
    sel = sel & ~res.excluded & np.isfinite(res.w_xx)
    idx = np.argwhere(sel)
    return _sign_verdict(res.w_xx[sel], idx)
