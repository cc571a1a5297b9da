"""Command-line driver.

Usage::

    hodograph COMMAND CONFIG [--out DIR]

Commands: solve-cg, solve-goursat, energy, stability, reconstruct, validate,
oracle-check.  The config file holds ``key = value`` lines with dotted keys
(``grid.h = 1/128``); ``#`` starts a comment.  Every run writes
``report.kv`` and ``manifest.kv`` into the output directory (``--out DIR``,
else ``<output.dir>/<command>``), plus the command's grids as tab-separated
text.  Table paths in the config are relative to the config file.

Exit codes: 0 success, 1 oracle failure, 2 invalid config or data,
3 no convergence, 4 I/O error, 5 contraction certificate not below one.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import math
import os
import sys
import tempfile
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from hodograph import __version__
from hodograph.boundary import BoundaryDataError, CauchyGoursatData, validate_weak_compatibility
from hodograph.curvature import ProfileError, make_profile
from hodograph.grid import Field, GridError, RectangleGrid, TruncatedConeGrid, write_field_tsv

EXIT_OK, EXIT_ORACLE, EXIT_VALIDATION, EXIT_CONVERGENCE, EXIT_IO, EXIT_CERTIFICATE = 0, 1, 2, 3, 4, 5

COMMANDS = ("solve-cg", "solve-goursat", "energy", "stability", "reconstruct", "validate", "oracle-check")

DEFAULTS = {
    "profile.kind": "linear",
    "profile.params": "1",
    "profile.table": "",
    "profile.u_max": "",
    "profile.offset": "0",
    "boundary.name": "arcsine",
    "boundary.c": "",
    "boundary.g": "",
    "boundary.h": "",
    "boundary.f": "",
    "boundary.n": "",
    "grid.c": "1",
    "grid.S": "3",
    "grid.T": "3",
    "grid.h": "1/64",
    "solver.tol": "1e-10",
    "solver.max_iter": "500",
    "solver.cusp": "true",
    "validate.corner_tol": "1e-8",
    "validate.delta": "",
    "fold_tol": "",
    "energy.case": "solve",
    "energy.levels": "1",
    "energy.u": "",
    "stability.eps": "1e-3",
    "stability.C": "",
    "stability.perturbations": "scaling, linear, sine, cubic",
    "reconstruct.u_ref": "1",
    "reconstruct.y_ref": "0",
    "reconstruct.nx": "257",
    "oracle.seed": "20240601",
    "oracle.probes": "100",
    "run.deterministic": "true",
    "run.workers": "1",
    "output.dir": "out",
}


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


class OracleFailure(RuntimeError):
    pass


# -- configuration -----------------------------------------------------------

def _number(text: str) -> float:
    text = text.strip()
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        try:
            return float(text)
        except ValueError as exc:
            raise ConfigError(f"not a number: {text!r}") from exc


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


class RunConfig:
    """Flat key/value configuration with defaults; values stay strings until read."""

    def __init__(self, command: str, values: dict[str, str], source: str = ""):
        unknown = sorted(set(values) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        self.command = command
        self.source = source
        self.values = {**DEFAULTS, **values}
        self.base_dir = Path(source).parent if source else Path(".")
        self._check()

    @classmethod
    def from_file(cls, command: str, path) -> "RunConfig":
        text = Path(path).read_text(encoding="utf-8")
        parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",),
                                           inline_comment_prefixes=("#",), delimiters=("=",))
        parser.optionxform = str
        try:
            parser.read_string("[run-config]\n" + text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        return cls(command, dict(parser["run-config"]), str(path))

    def str(self, key: str) -> str:
        return self.values[key].strip()

    def num(self, key: str) -> float:
        return _number(self.values[key])

    def opt_num(self, key: str) -> float | None:
        return None if not self.str(key) else self.num(key)

    def int(self, key: str) -> int:
        v = self.num(key)
        if v != int(v):
            raise ConfigError(f"{key} must be an integer")
        return int(v)

    def flag(self, key: str) -> bool:
        return _bool(self.values[key])

    def path(self, key: str) -> Path:
        p = Path(self.str(key))
        return p if p.is_absolute() else self.base_dir / p

    @property
    def workers(self) -> int:
        return 1 if self.flag("run.deterministic") else max(1, self.int("run.workers"))

    def _check(self):
        for key in ("solver.tol", "validate.corner_tol", "grid.h", "stability.eps"):
            if not self.num(key) > 0:
                raise ConfigError(f"{key} must be positive")
        if self.int("solver.max_iter") < 1:
            raise ConfigError("solver.max_iter must be at least 1")
        ft = self.opt_num("fold_tol")
        if ft is not None and not ft > 0:
            raise ConfigError("fold_tol must be positive")
        c, h = self.num("grid.c"), self.num("grid.h")
        if self.command != "solve-goursat" and c > 0 and abs(c / h - round(c / h)) > 1e-9:
            raise ConfigError(f"grid.h = {h} does not divide grid.c = {c}")

    def echo(self) -> dict:
        return {f"config.{k}": v for k, v in sorted(self.values.items())}


def build_profile(cfg: RunConfig, semi_infinite: bool = False):
    kind = cfg.str("profile.kind")
    u_max = cfg.opt_num("profile.u_max")
    if kind == "tabulated":
        table = np.loadtxt(cfg.path("profile.table"), ndmin=2)
        return make_profile(kind, table.tolist(), u_max, semi_infinite)
    params = [_number(v) for v in cfg.str("profile.params").split(",") if v.strip()]
    if u_max is None:
        u_max = max(10.0, cfg.num("grid.S") + cfg.num("grid.T"))
    return make_profile(kind, params, u_max, semi_infinite, cfg.num("profile.offset"))


def _table_sampler(path: Path):
    data = np.loadtxt(path, ndmin=2)
    if data.shape[1] != 2 or np.any(np.diff(data[:, 0]) <= 0):
        raise ConfigError(f"{path}: expected two columns with increasing abscissae")
    xs, ys = data[:, 0].copy(), data[:, 1].copy()

    def sampler(v):
        return np.interp(np.asarray(v, float), xs, ys)

    return sampler


def build_data(cfg: RunConfig):
    """Boundary data and, for built-ins, the oracle that induced it."""
    from hodograph.exact_solutions import ArcsineSolution, PolynomialSolution

    tables = {k: cfg.str(f"boundary.{k}") for k in "ghfn"}
    if any(tables.values()):
        if not all(tables.values()):
            raise ConfigError("table boundary data needs boundary.g, .h, .f and .n")
        c = cfg.opt_num("boundary.c") or cfg.num("grid.c")
        samplers = {k: _table_sampler(cfg.path(f"boundary.{k}")) for k in "ghfn"}
        return CauchyGoursatData(c, samplers["g"], samplers["h"], samplers["f"], samplers["n"],
                                 name="tables"), None
    name = cfg.str("boundary.name")
    if name == "arcsine":
        o = ArcsineSolution(cfg.num("grid.c"))
        return o.data(), o
    if name == "polynomial-diamond":
        if cfg.num("grid.c") != 1.0:
            raise ConfigError("polynomial-diamond data live on c = 1")
        o = PolynomialSolution()
        return o.data(), o
    if name == "zero":
        return CauchyGoursatData.zero(cfg.num("grid.c")), None
    raise ConfigError(f"unknown boundary.name {name!r}")


def build_cone(cfg: RunConfig) -> TruncatedConeGrid:
    return TruncatedConeGrid(cfg.num("grid.c"), cfg.num("grid.S"), cfg.num("grid.T"), cfg.num("grid.h"))


# -- output --------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(e) for e in v)
    return str(v)


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_kv(path: Path, items: dict):
    lines = [f"{k} = {_fmt(v)}" for k, v in items.items()]
    _atomic_write(path, "\n".join(lines) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Run:
    """Collects report entries and output files for one command."""

    def __init__(self, cfg: RunConfig, out_dir: Path):
        self.cfg = cfg
        self.out = out_dir
        self.report: dict = {"command": cfg.command}
        self.files: list[Path] = []
        self.out.mkdir(parents=True, exist_ok=True)

    def field(self, name: str, fld: Field, extra=None):
        path = self.out / name
        write_field_tsv(path, fld, extra)
        self.files.append(path)

    def table(self, name: str, header: list[str], rows):
        path = self.out / name
        lines = ["# " + "\t".join(header)]
        lines += ["\t".join(_fmt(float(v)) for v in row) for row in rows]
        _atomic_write(path, "\n".join(lines) + "\n")
        self.files.append(path)

    def finish(self, status: str, exit_code: int, wall: float, error: str = ""):
        self.report["status"] = status
        self.report["exit_code"] = exit_code
        if error:
            self.report["error"] = error
        rpath = self.out / "report.kv"
        write_kv(rpath, self.report)
        manifest = {"artifact": "hodograph", "version": __version__, "command": self.cfg.command,
                    "status": status, "exit_code": exit_code, "wall_time_s": round(wall, 3)}
        if error:
            manifest["error"] = error
        manifest.update(self.cfg.echo())
        for p in [*self.files, rpath]:
            manifest[f"file.{p.name}.sha256"] = _sha256(p)
        manifest.update({f"report.{k}": v for k, v in self.report.items()})
        write_kv(self.out / "manifest.kv", manifest)


# -- commands ------------------------------------------------------------------

def _validated(cfg: RunConfig, run: Run):
    data, oracle = build_data(cfg)
    rep = validate_weak_compatibility(data, cfg.num("validate.corner_tol"))
    run.report.update({f"validation.{k}": v for k, v in rep.as_dict().items()})
    if not rep.passed:
        failed = [k for k, ok in rep.checks.items() if not ok]
        raise BoundaryDataError("weak compatibility failed: " + ", ".join(failed)
                                + f" (corner gaps {rep.corner_gap_c0!r}, {rep.corner_gap_0c!r})")
    return data, oracle


def _solve_cone(cfg: RunConfig, run: Run, data, profile, grid=None):
    from hodograph.volterra_cg import solve_picard

    grid = build_cone(cfg) if grid is None else grid
    x, rep = solve_picard(data, profile, grid, cfg.num("solver.tol"), cfg.int("solver.max_iter"),
                          workers=cfg.workers, cusp=cfg.flag("solver.cusp"))
    return x, rep


def cmd_validate(cfg, run):
    _validated(cfg, run)


def cmd_solve_cg(cfg, run):
    from hodograph.volterra_cg import check_attainment, verify_contour_identity

    profile = build_profile(cfg)
    data, oracle = _validated(cfg, run)
    x, rep = _solve_cone(cfg, run, data, profile)
    grid = x.grid
    att = check_attainment(x, data, cfg.opt_num("validate.delta"))
    rep.attainment = {k: v for k, v in att.items() if k != "dn_errors"}
    probes = [(grid.S, grid.T), (grid.c, grid.c), (0.5 * grid.c, grid.T), (grid.S, 0.5 * grid.c)]
    for pt in probes:
        pt = (round(pt[0] / grid.h) * grid.h, round(pt[1] / grid.h) * grid.h)
        try:
            rep.contour_residuals.append((pt, "unified", verify_contour_identity(x, data, profile, pt)))
        except (GridError, ValueError):
            continue
    run.report.update(rep.as_dict())
    extra = None
    if oracle is not None:
        exact = grid.sample(oracle.x)
        err = np.where(grid.mask, x.values - exact, np.nan)
        extra = {"error": err}
        if hasattr(oracle, "in_diamond"):
            sel = grid.mask & oracle.in_diamond(grid.S2, grid.T2)
        else:
            sel = grid.mask
        run.report["oracle"] = oracle.name
        run.report["oracle.max_error"] = float(np.max(np.abs(err[sel])))
    run.field("field.tsv", x, extra)


def cmd_solve_goursat(cfg, run):
    from hodograph.parametrix import solve_goursat

    profile = build_profile(cfg, semi_infinite=True)
    grid = RectangleGrid(cfg.num("grid.S"), cfg.num("grid.T"), cfg.num("grid.h"))
    out = solve_goursat(profile, grid, cfg.num("solver.tol"), cfg.int("solver.max_iter"))
    rep = out["report"]
    run.report.update(rep.as_dict())
    run.report["sup_abs_H"] = float(np.max(np.abs(out["H"].values)))
    run.report["sup_abs_corrector"] = float(np.max(np.abs(out["x_corr"].values)))
    run.field("x_p.tsv", out["x_p"])
    run.field("residual.tsv", out["H"])
    run.field("forcing.tsv", out["f"])
    run.field("corrector.tsv", out["x_corr"])
    run.field("base.tsv", out["x_base"])


def _manufactured(grid):
    return Field.from_function(grid, lambda s, t: s * t * np.sin(s + 2.0 * t), "x_m")


def cmd_energy(cfg, run):
    from hodograph.energy import (divergence_flag, energy_identity_residual, energy_trace,
                                  gronwall_bound, line_energy)
    from hodograph.parametrix import discrete_pde_residual

    profile = build_profile(cfg)
    case = cfg.str("energy.case")
    grid = build_cone(cfg)
    top = min(grid.ns, grid.nt) * grid.h
    if case == "manufactured":
        x = _manufactured(grid)
        g = Field(grid, np.where(grid.mask, discrete_pde_residual(x, profile), np.nan), "g")
        trace = energy_trace(x, profile)
        res = energy_identity_residual(x, g, profile, grid.c, top)
        bounds = np.array([gronwall_bound(trace.E[0], g, profile, grid.c, u) for u in trace.u])
        run.report["energy.identity_residual"] = res
        run.report["energy.gronwall_dominates"] = bool(np.all(trace.E <= bounds))
        run.table("energy.tsv", ["u", "E", "gronwall_bound"], zip(trace.u, trace.E, bounds))
        return
    if case != "solve":
        raise ConfigError(f"unknown energy.case {case!r}")
    data, _ = _validated(cfg, run)
    x, rep = _solve_cone(cfg, run, data, profile, grid)
    run.report["solver.iterations"] = rep.iterations
    trace = energy_trace(x, profile)
    run.table("energy.tsv", ["u", "E"], zip(trace.u, trace.E))
    levels = cfg.int("energy.levels")
    if levels > 1:
        u_probe = cfg.opt_num("energy.u") or 0.5 * (grid.c + top)
        vals = []
        for k in range(levels):
            gk = TruncatedConeGrid(grid.c, grid.S, grid.T, grid.h / 2**k)
            xk = x if k == 0 else _solve_cone(cfg, run, data, profile, gk)[0]
            vals.append(line_energy(xk, profile, round(u_probe / gk.h) * gk.h))
        run.report["energy.probe_u"] = u_probe
        run.report["energy.refinement_values"] = vals
        run.report["energy.divergent"] = divergence_flag(vals)


def _perturbations(cfg, lam0, c, C):
    from hodograph.energy import Perturbation

    eps = cfg.num("stability.eps")
    mid = 0.5 * (c + C)
    table = {
        "scaling": lambda: Perturbation.scaling(eps, c, C),
        "linear": lambda: Perturbation(lambda u: eps * (np.asarray(u) - mid),
                                       lambda u: np.full_like(np.asarray(u, float), eps), c, C, "linear"),
        "sine": lambda: Perturbation(lambda u: eps * np.sin(2 * np.pi * (np.asarray(u) - c) / (C - c)),
                                     lambda u: eps * 2 * np.pi / (C - c)
                                     * np.cos(2 * np.pi * (np.asarray(u) - c) / (C - c)), c, C, "sine"),
        "cubic": lambda: Perturbation.from_delta_lambda(lambda u: eps * np.asarray(u) ** 3,
                                                        lambda u: 3 * eps * np.asarray(u) ** 2,
                                                        lam0, c, C, "cubic"),
    }
    names = [n.strip() for n in cfg.str("stability.perturbations").split(",") if n.strip()]
    bad = [n for n in names if n not in table]
    if bad:
        raise ConfigError(f"unknown perturbations: {', '.join(bad)}")
    return [table[n]() for n in names]


def cmd_stability(cfg, run):
    from hodograph.energy import stability_experiment

    profile = build_profile(cfg)
    data, _ = _validated(cfg, run)
    x0, rep0 = _solve_cone(cfg, run, data, profile)
    c = x0.grid.c
    C = cfg.opt_num("stability.C") or c + 1.0
    tol, max_iter = cfg.num("solver.tol"), cfg.int("solver.max_iter")
    for pert in _perturbations(cfg, profile, c, C):
        r = stability_experiment(x0, profile, pert, tol, max_iter, cfg.workers)
        run.report.update(r.as_dict())
        if not pert.constant:
            r0 = stability_experiment(x0, profile, pert.mean_free(), tol, max_iter, cfg.workers)
            diff = float(np.max(np.abs(r.x1.values - r0.x1.values)[x0.grid.mask]))
            run.report[f"stability.{pert.name}.meanfree_x1_diff"] = diff
        run.field(f"x1_{pert.name}.tsv", r.x1)


def cmd_reconstruct(cfg, run):
    from hodograph.exact_solutions import ProductSolution
    from hodograph.reconstruct import (check_partial_convexity, extend_periodic, ma_residual,
                                       patch_from_surface, reconstruct)

    profile = build_profile(cfg)
    data, oracle = _validated(cfg, run)
    x, rep = _solve_cone(cfg, run, data, profile)
    g = x.grid
    surf = reconstruct(x, profile, cfg.num("reconstruct.u_ref"), cfg.num("reconstruct.y_ref"),
                       fold_tol=cfg.opt_num("fold_tol"))
    run.report["solver.iterations"] = rep.iterations
    run.report["anchor"] = f"s={float(g.s[surf.anchor[0]])!r} t={float(g.t[surf.anchor[1]])!r}"
    run.report["q_ref"] = surf.q_ref
    run.report["w_ref"] = surf.w_ref
    folds = surf.folds
    run.report["folds.node_count"] = int(np.count_nonzero(folds.nodes))
    run.report["folds.tol"] = folds.tol
    run.report["loops_q.sup"] = float(np.nanmax(np.abs(surf.loops_q)))
    run.report["loops_w.sup"] = float(np.nanmax(np.abs(surf.loops_w)))
    interior = (g.S2 >= 0.25) & (g.T2 >= 0.25) & (g.U >= g.c + 0.25)
    ma = ma_residual(surf, profile, cfg.opt_num("fold_tol"))
    run.report["ma.sup_interior"] = ma.sup(interior)
    run.report["ma.excluded"] = int(np.count_nonzero(ma.excluded & g.mask))
    conv = check_partial_convexity(surf, profile, interior, cfg.opt_num("fold_tol"))
    run.report["convexity"] = conv.note or ("w_xx < 0" if conv.sign < 0 else "w_xx > 0")
    if oracle is not None and oracle.name == "arcsine" and cfg.num("reconstruct.u_ref") == 1.0 \
            and cfg.num("reconstruct.y_ref") == 0.0:
        P = ProductSolution(1.0)
        run.report["product.max_w_error"] = float(np.nanmax(np.abs(surf.w - P.w(surf.x, surf.y))))
    run.field("surface.tsv", x, surf.columns())
    if folds.empty:
        try:
            xg, ys, W, spl = patch_from_surface(surf, cfg.int("reconstruct.nx"))
        except GridError as exc:
            run.report["periodic"] = f"skipped: {exc}"
            return
        per = extend_periodic(xg, ys, W, spl)
        run.report["periodic.seam_jump"] = per.seam_jump
        run.report["periodic.wx_mismatch"] = per.wx_mismatch
        run.report["periodic.wxx_seam"] = per.wxx_seam
        v = check_partial_convexity(per)
        run.report["periodic.patch_signs"] = [p.sign for p in v]
        run.table("periodic.tsv", ["x", "y", "w"], per.rows())


def oracle_suite(seed: int = 20240601, probes: int = 100, tol: float = 1e-12) -> dict:
    """Residual checks of the closed-form solutions; returns a flat report."""
    from hodograph.boundary import validate_weak_compatibility as validate
    from hodograph.exact_solutions import (ArcsineSolution, PolynomialSolution, ProductSolution,
                                           epd_residual)

    rng = np.random.default_rng(seed)
    out: dict = {}
    a = ArcsineSolution(1.0)
    s = rng.uniform(0.05, 3.0, probes)
    t = rng.uniform(0.05, 3.0, probes)
    out["arcsine.pde_residual"] = float(np.max(np.abs(a.pde_residual(a.profile, s, t))))
    out["arcsine.epd_residual"] = epd_residual(a, s + t, s - t)
    P = ProductSolution(1.0)
    xx = rng.uniform(-0.5 * math.pi, 0.5 * math.pi, probes)
    yy = rng.uniform(-1.0, 1.0, probes)
    out["product.ma_residual"] = float(np.max(np.abs(P.ma_residual(xx, yy))))
    poly = PolynomialSolution()
    ss = rng.uniform(0.0, 1.0, probes)
    tt = rng.uniform(0.0, 1.0, probes)
    flip = ss + tt < 1.0
    ss[flip], tt[flip] = 1.0 - tt[flip], 1.0 - ss[flip]
    out["polynomial.epd_residual"] = epd_residual(poly, ss + tt, ss - tt)
    out["polynomial.x(1,1)"] = float(poly.x_up(1.0, 1.0))
    out["polynomial.xp(3/2,0)"] = float(poly.dx_dp(1.5, 0.0))
    out["polynomial.xp(3/2,0).target"] = 145.0 * math.pi / 416.0
    gs = a.g(np.linspace(1.0, 3.0, 9))
    out["arcsine.g_max_dev"] = float(np.max(np.abs(gs + 0.5 * math.pi)))
    rep = validate(a.data())
    out["arcsine.n_l1"] = rep.n_l1
    out["arcsine.n_l1_converged"] = rep.n_l1_converged
    checks = {
        "arcsine.pde": out["arcsine.pde_residual"] <= tol,
        "arcsine.epd": out["arcsine.epd_residual"] <= tol,
        "product.ma": out["product.ma_residual"] <= tol,
        "polynomial.epd": out["polynomial.epd_residual"] <= tol,
        "polynomial.x(1,1)": abs(out["polynomial.x(1,1)"] + 0.5 * math.pi) <= 4e-16,
        "polynomial.xp(3/2,0)": abs(out["polynomial.xp(3/2,0)"] - out["polynomial.xp(3/2,0).target"]) <= 4e-16,
        "arcsine.g": out["arcsine.g_max_dev"] == 0.0,
        "arcsine.n_integrable": rep.n_l1_converged and abs(rep.n_l1 - 2.0) < 1e-5,
    }
    out.update({f"check.{k}": v for k, v in checks.items()})
    out["verdict"] = "pass" if all(checks.values()) else "fail"
    return out


def cmd_oracle_check(cfg, run):
    rep = oracle_suite(cfg.int("oracle.seed"), cfg.int("oracle.probes"))
    run.report.update({f"oracle.{k}": v for k, v in rep.items()})
    if rep["verdict"] != "pass":
        failed = [k for k, v in rep.items() if k.startswith("check.") and not v]
        raise OracleFailure("oracle checks failed: " + ", ".join(failed))


HANDLERS = {
    "solve-cg": cmd_solve_cg,
    "solve-goursat": cmd_solve_goursat,
    "energy": cmd_energy,
    "stability": cmd_stability,
    "reconstruct": cmd_reconstruct,
    "validate": cmd_validate,
    "oracle-check": cmd_oracle_check,
}


def run_command(command: str, config_path, out_dir=None) -> int:
    """Run one command; returns its exit code.  Always writes the manifest once the output dir is known."""
    from hodograph.parametrix import CertificateError
    from hodograph.volterra_cg import ConvergenceError

    start = time.perf_counter()
    try:
        cfg = RunConfig.from_file(command, config_path)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    out = Path(out_dir) if out_dir else Path(cfg.str("output.dir")) / command
    try:
        run = Run(cfg, out)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_IO
    code, status, err = EXIT_OK, "ok", ""
    try:
        HANDLERS[command](cfg, run)
    except (ConfigError, BoundaryDataError, ProfileError, GridError) as exc:
        code, status, err = EXIT_VALIDATION, "validation-failed", str(exc)
    except ConvergenceError as exc:
        code, status, err = EXIT_CONVERGENCE, "convergence-failed", str(exc)
        run.report["increments"] = [float(v) for v in exc.increments]
    except CertificateError as exc:
        code, status, err = EXIT_CERTIFICATE, "certificate-failed", str(exc)
        run.report["certificate"] = exc.certificate
    except OracleFailure as exc:
        code, status, err = EXIT_ORACLE, "oracle-failed", str(exc)
    except OSError as exc:
        code, status, err = EXIT_IO, "io-failed", str(exc)
    try:
        run.finish(status, code, time.perf_counter() - start, err)
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_IO
    if err:
        print(f"error: {err}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="hodograph", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("config", help="path to a key = value config file")
    parser.add_argument("--out", metavar="DIR", help="output directory (default <output.dir>/<command>)")
    args = parser.parse_args(argv)
    return run_command(args.command, args.config, args.out)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
