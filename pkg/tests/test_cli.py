import hashlib

import numpy as np
import pytest

from hodograph.cli import (EXIT_CERTIFICATE, EXIT_CONVERGENCE, EXIT_IO, EXIT_OK, EXIT_VALIDATION,
                           ConfigError, RunConfig, main, oracle_suite, run_command)

ARCSINE = """\
# arcsine data on a small cone
profile.kind = linear
profile.params = 1
boundary.name = arcsine
grid.c = 1
grid.S = 2
grid.T = 2
grid.h = 1/16   # fractions are allowed
"""


def _cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _kv(path):
    out = {}
    for line in path.read_text().splitlines():
        k, _, v = line.partition(" = ")
        out[k] = v
    return out


def test_config_parsing(tmp_path):
    cfg = RunConfig.from_file("solve-cg", _cfg(tmp_path, ARCSINE))
    assert cfg.num("grid.h") == 1 / 16
    assert cfg.str("boundary.name") == "arcsine"
    assert cfg.workers == 1


@pytest.mark.parametrize("text", ["bogus.key = 1\n", "solver.tol = -1\n", "grid.h = 0.3\n",
                                  "solver.max_iter = 2.5\n", "run.deterministic = maybe\n"])
def test_bad_config_exit_2(tmp_path, text):
    assert run_command("solve-cg", _cfg(tmp_path, text), tmp_path / "out") == EXIT_VALIDATION


def test_missing_config_exit_4(tmp_path):
    assert run_command("solve-cg", tmp_path / "nope.cfg") == EXIT_IO


def test_solve_cg_outputs_and_manifest(tmp_path):
    out = tmp_path / "out"
    assert main(["solve-cg", str(_cfg(tmp_path, ARCSINE)), "--out", str(out)]) == EXIT_OK
    field = (out / "field.tsv").read_text().splitlines()
    assert field[0].startswith("# s\tt\tx\terror")
    assert sum(line.startswith("#") for line in field) == 1
    rep = _kv(out / "report.kv")
    assert rep["status"] == "ok" and rep["oracle"] == "arcsine"
    assert float(rep["oracle.max_error"]) < 1e-3
    assert "wall" not in (out / "report.kv").read_text()
    man = _kv(out / "manifest.kv")
    for name in ("field.tsv", "report.kv"):
        assert man[f"file.{name}.sha256"] == hashlib.sha256((out / name).read_bytes()).hexdigest()
    assert man["version"] and float(man["wall_time_s"]) >= 0
    assert man["config.grid.h"] == "1/16"


def test_max_iter_one_exit_3_with_history(tmp_path):
    out = tmp_path / "out"
    code = run_command("solve-cg", _cfg(tmp_path, ARCSINE + "solver.max_iter = 1\n"), out)
    assert code == EXIT_CONVERGENCE
    rep = _kv(out / "report.kv")
    assert rep["status"] == "convergence-failed" and len(rep["increments"].split(",")) == 1
    assert (out / "manifest.kv").exists()


def test_corrupted_tables_exit_2_with_corner_gaps(tmp_path):
    s = np.linspace(0, 1, 101)
    t = np.linspace(1, 2, 51)
    np.savetxt(tmp_path / "g.txt", np.c_[t, np.full_like(t, -np.pi / 2)])
    np.savetxt(tmp_path / "h.txt", np.c_[t, np.full_like(t, np.pi / 2)])
    np.savetxt(tmp_path / "f.txt", np.c_[s, np.arcsin(1 - 2 * s) + 0.25])
    np.savetxt(tmp_path / "n.txt", np.c_[s, np.zeros_like(s)])
    text = "boundary.g = g.txt\nboundary.h = h.txt\nboundary.f = f.txt\nboundary.n = n.txt\n" \
           "grid.S = 2\ngrid.T = 2\ngrid.h = 1/16\n"
    out = tmp_path / "out"
    assert run_command("solve-cg", _cfg(tmp_path, text), out) == EXIT_VALIDATION
    rep = _kv(out / "report.kv")
    assert float(rep["validation.corner_gap_c0"]) == pytest.approx(0.25)
    assert "corner gaps" in rep["error"]


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_table_boundary_data_solves(tmp_path):
    s = np.linspace(0, 1, 401)
    t = np.linspace(1, 2, 51)
    n = np.zeros_like(s)
    n[1:-1] = -(1 - 2 * s[1:-1]) / np.sqrt(s[1:-1] * (1 - s[1:-1]))
    np.savetxt(tmp_path / "g.txt", np.c_[t, np.full_like(t, -np.pi / 2)])
    np.savetxt(tmp_path / "h.txt", np.c_[t, np.full_like(t, np.pi / 2)])
    np.savetxt(tmp_path / "f.txt", np.c_[s, np.arcsin(1 - 2 * s)])
    np.savetxt(tmp_path / "n.txt", np.c_[s, n])
    text = "boundary.g = g.txt\nboundary.h = h.txt\nboundary.f = f.txt\nboundary.n = n.txt\n" \
           "grid.S = 2\ngrid.T = 2\ngrid.h = 1/16\n"
    assert run_command("solve-cg", _cfg(tmp_path, text), tmp_path / "out") == EXIT_OK


def test_solve_goursat_outputs(tmp_path):
    text = "profile.kind = polynomial\nprofile.params = 1, 0.5\ngrid.S = 1/2\ngrid.T = 1/2\ngrid.h = 1/32\n"
    out = tmp_path / "out"
    assert run_command("solve-goursat", _cfg(tmp_path, text), out) == EXIT_OK
    for name in ("x_p.tsv", "residual.tsv", "corrector.tsv", "base.tsv"):
        assert (out / name).exists()
    assert float(_kv(out / "report.kv")["certificate"]) < 1


def test_solve_goursat_certificate_failure_exit_5(tmp_path):
    text = "profile.kind = polynomial\nprofile.params = 1, -0.4\nprofile.u_max = 2\n" \
           "grid.S = 1\ngrid.T = 1\ngrid.h = 1/16\n"
    out = tmp_path / "out"
    assert run_command("solve-goursat", _cfg(tmp_path, text), out) == EXIT_CERTIFICATE
    assert _kv(out / "report.kv")["status"] == "certificate-failed"


def test_energy_manufactured(tmp_path):
    text = ARCSINE + "energy.case = manufactured\n"
    out = tmp_path / "out"
    assert run_command("energy", _cfg(tmp_path, text), out) == EXIT_OK
    rep = _kv(out / "report.kv")
    assert rep["energy.gronwall_dominates"] == "true"


def test_energy_divergence_levels(tmp_path):
    out = tmp_path / "out"
    assert run_command("energy", _cfg(tmp_path, ARCSINE + "energy.levels = 3\n"), out) == EXIT_OK
    assert _kv(out / "report.kv")["energy.divergent"] == "true"


def test_stability_and_reconstruct(tmp_path):
    cfg = _cfg(tmp_path, ARCSINE)
    assert run_command("stability", cfg, tmp_path / "st") == EXIT_OK
    rep = _kv(tmp_path / "st" / "report.kv")
    assert float(rep["stability.scaling.sup_E1"]) == 0.0
    assert run_command("reconstruct", cfg, tmp_path / "rc") == EXIT_OK
    rep = _kv(tmp_path / "rc" / "report.kv")
    assert rep["folds.node_count"] == "0"
    assert (tmp_path / "rc" / "surface.tsv").exists()


def test_validate_and_oracle_check(tmp_path):
    cfg = _cfg(tmp_path, ARCSINE)
    assert run_command("validate", cfg, tmp_path / "v") == EXIT_OK
    assert run_command("oracle-check", cfg, tmp_path / "o") == EXIT_OK
    assert oracle_suite(probes=10)["verdict"] == "pass"


def test_unknown_boundary_name(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig("solve-cg", {"boundary.bogus": "x"})
    assert run_command("solve-cg", _cfg(tmp_path, "boundary.name = nope\n"), tmp_path / "o") == EXIT_VALIDATION
