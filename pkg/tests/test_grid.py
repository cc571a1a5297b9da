import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hodograph.grid import (Field, GridError, RectangleGrid, TruncatedConeGrid, area_integral,
                            cumtrapz_s, cumtrapz_t, read_field_tsv, sqrt_cusp_weights, write_field_tsv)


def test_cone_mask_and_alignment():
    g = TruncatedConeGrid(1.0, 2.0, 1.5, 0.25)
    assert g.shape == (9, 7)
    assert g.mask[4, 0] and not g.mask[3, 0]
    assert g.row_start(1) == 3 and g.row_start(6) == 0
    with pytest.raises(GridError):
        TruncatedConeGrid(1.0, 2.0, 2.0, 0.3)
    with pytest.raises(GridError):
        TruncatedConeGrid(1.0, 0.5, 2.0, 0.25)


def test_index_rejects_off_grid_points():
    g = TruncatedConeGrid(1.0, 2.0, 2.0, 0.25)
    assert g.index(1.0, 0.5) == (4, 2)
    with pytest.raises(GridError):
        g.index(0.1, 0.1)
    with pytest.raises(GridError):
        g.index(0.25, 0.25)


def test_field_rejects_nonfinite_values():
    g = RectangleGrid(1.0, 1.0, 0.5)
    v = np.zeros(g.shape)
    v[1, 1] = np.nan
    with pytest.raises(GridError):
        Field(g, v)


def test_cumtrapz_exact_for_linear_rows():
    g = TruncatedConeGrid(1.0, 2.0, 2.0, 1 / 16)
    vals = 3.0 + 2.0 * g.S2
    out = cumtrapz_s(vals, g)
    lo = np.maximum(1.0 - g.T2, 0.0)
    exact = 3.0 * (g.S2 - lo) + (g.S2**2 - lo**2)
    np.testing.assert_allclose(out[g.mask], exact[g.mask], atol=1e-13)


def test_sqrt_cusp_weights_limit():
    w = sqrt_cusp_weights(20000)
    assert w[0] == 0.0
    # the defect tends to -zeta(-1/2) with an O(k^-1/2) Euler-Maclaurin tail
    k = 20000
    assert w[-1] == pytest.approx(0.2078862250 - 1 / (24 * math.sqrt(k)), abs=1e-7)


@settings(max_examples=20, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_cusp_quadrature_exact_for_sqrt(a, b):
    g = TruncatedConeGrid(1.0, 2.0, 2.0, 1 / 16)
    vals = a + b * np.sqrt(g.S2)
    out = cumtrapz_s(vals, g, cusp=True)
    lo = np.maximum(1.0 - g.T2, 0.0)
    exact = a * (g.S2 - lo) + b * (2 / 3) * (g.S2**1.5 - lo**1.5)
    np.testing.assert_allclose(out[g.mask], exact[g.mask], atol=1e-12)
    outt = cumtrapz_t(a + b * np.sqrt(g.T2), g, cusp=True)
    lot = np.maximum(1.0 - g.S2, 0.0)
    exactt = a * (g.T2 - lot) + b * (2 / 3) * (g.T2**1.5 - lot**1.5)
    np.testing.assert_allclose(outt[g.mask], exactt[g.mask], atol=1e-12)


def test_area_integral_rectangle():
    g = RectangleGrid(1.0, 2.0, 1 / 8)
    out = area_integral(g.S2 * g.T2, g)
    np.testing.assert_allclose(out, 0.25 * g.S2**2 * g.T2**2, atol=1e-12)
    assert np.all(out[0, :] == 0) and np.all(out[:, 0] == 0)


def test_gradient_second_order():
    errs = []
    for n in (16, 32):
        g = TruncatedConeGrid(1.0, 2.0, 2.0, 1 / n)
        f = Field.from_function(g, lambda s, t: np.sin(s) * np.cos(2 * t))
        xs, xt = f.gradient()
        e = np.nanmax(np.abs(xs - np.cos(g.S2) * np.cos(2 * g.T2))[g.mask])
        errs.append(e)
    assert math.log2(errs[0] / errs[1]) > 1.8


def test_gradient_filled_at_single_node_corners():
    g = TruncatedConeGrid(1.0, 1.0, 1.0, 1 / 8)
    f = Field.from_function(g, lambda s, t: s + 2 * t)
    xs, xt = f.gradient()
    assert np.all(np.isfinite(xs[g.mask])) and np.all(np.isfinite(xt[g.mask]))
    np.testing.assert_allclose(xs[g.mask], 1.0, atol=1e-12)
    np.testing.assert_allclose(xt[g.mask], 2.0, atol=1e-12)


def test_interpolate_bilinear_and_cut_cell():
    g = TruncatedConeGrid(1.0, 2.0, 2.0, 0.25)
    f = Field.from_function(g, lambda s, t: 1 + s - 3 * t)
    assert f.interpolate(1.1, 0.6) == pytest.approx(1 + 1.1 - 1.8)
    # cell cut by s + t = 1
    assert f.interpolate(0.6, 0.45) == pytest.approx(1 + 0.6 - 1.35)
    with pytest.raises(GridError):
        f.interpolate(0.3, 0.3)


def test_tsv_roundtrip(tmp_path):
    g = TruncatedConeGrid(0.5, 1.0, 1.0, 0.125)
    f = Field.from_function(g, lambda s, t: np.exp(s - t))
    write_field_tsv(tmp_path / "f.tsv", f, {"twice": 2 * f.values})
    text = (tmp_path / "f.tsv").read_text().splitlines()
    assert text[0].startswith("# s\tt\tx\ttwice")
    assert sum(line.startswith("#") for line in text) == 1
    back = read_field_tsv(tmp_path / "f.tsv")
    assert back.grid == g
    np.testing.assert_array_equal(back.values[g.mask], f.values[g.mask])
