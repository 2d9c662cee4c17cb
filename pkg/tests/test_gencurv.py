import math

import numpy as np
import pytest

from conftest import point_geometry
from genriem import gencurv
from genriem.gencore import MINUS, PLUS, DilatonData
from genriem.oracle import block, full_assembly, full_ricci
from genriem.riemannian import h_squared_tensors, riemann_classical

PTS = {"G4": [0.11, -0.23, 0.17, 0.29], "G5": [0.13, -0.07, 0.21], "G3": [0.2, -0.1, 0.3]}


def zero_dd(pg):
    return DilatonData.zero(pg.dim)


def test_flat_vanishes():
    pg = point_geometry("G0", [0.1, 0.2, 0.3])
    dd = zero_dd(pg)
    for s in (PLUS, MINUS):
        assert not gencurv.rm_pure(pg, dd, s).any()
        assert not gencurv.rm_mixed(pg, dd, s).any()
    assert gencurv.gen_scalar(pg, dd) == 0.0
    assert gencurv.kretschmann(pg, dd) == 0.0


def test_sphere_values():
    pg = point_geometry("G1", [math.pi / 4, 0.0])
    dd = DilatonData.from_point(pg)
    Rm = riemann_classical(pg).comps
    assert gencurv.rm_pure(pg, dd, PLUS)[0, 1, 0, 1] == pytest.approx(0.5, abs=1e-15)
    np.testing.assert_allclose(gencurv.rm_pure(pg, dd, MINUS), -Rm, atol=1e-15)
    np.testing.assert_allclose(2 * gencurv.rm_mixed(pg, dd, PLUS), Rm, atol=1e-15)
    np.testing.assert_allclose(-2 * gencurv.rm_mixed(pg, dd, MINUS), Rm, atol=1e-15)
    for s in (PLUS, MINUS):
        np.testing.assert_allclose(gencurv.full_ricci_pure(pg, dd, s), pg.g, atol=1e-14)
        np.testing.assert_allclose(gencurv.ricci_mixed(pg, dd, s), pg.g, atol=1e-14)
    assert gencurv.gen_scalar(pg, dd) == pytest.approx(2.0, abs=1e-14)
    assert gencurv.trace_E(pg, dd) == 0.0
    assert gencurv.kretschmann(pg, dd) == pytest.approx(16.0, abs=1e-12)


def test_constant_h_values():
    pg = point_geometry("G2", [0.0, 0.0, 0.0])
    dd = zero_dd(pg)
    for s in (PLUS, MINUS):
        np.testing.assert_allclose(gencurv.full_ricci_pure(pg, dd, s), -0.015 * np.eye(3), atol=1e-15)
        np.testing.assert_allclose(gencurv.ricci_mixed(pg, dd, s), -0.045 * np.eye(3), atol=1e-15)
    assert gencurv.gen_scalar(pg, dd) == pytest.approx(-0.045, abs=1e-15)
    assert gencurv.trace_E(pg, dd) == 0.0
    assert gencurv.kretschmann(pg, dd) > 0.0


def test_g3_trace_vanishes():
    pg = point_geometry("G3", [0.0, 0.0, 0.0])
    dd = DilatonData.from_point(pg)
    assert gencurv.trace_E(pg, dd) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("name", ["G3", "G4", "G5"])
def test_pure_block_symmetries(name):
    pg = point_geometry(name, PTS[name])
    dd = DilatonData.from_point(pg)
    for s in (PLUS, MINUS):
        R = gencurv.rm_pure(pg, dd, s)
        assert np.abs(R + np.einsum("abvw->bavw", R)).max() < 1e-12
        assert np.abs(R + np.einsum("abvw->abwv", R)).max() < 1e-12
        assert np.abs(R - np.einsum("abvw->vwab", R)).max() < 1e-12


@pytest.mark.parametrize("name", ["G3", "G4", "G5"])
def test_closed_forms_match_assembly(name):
    pg = point_geometry(name, PTS[name])
    dd = DilatonData.from_point(pg)
    R = full_assembly(pg, dd)
    Rc = full_ricci(R, pg.g)
    for s in (PLUS, MINUS):
        assert np.abs(gencurv.rm_pure(pg, dd, s) - block(R, (s, s, s, s))).max() < 1e-12
        assert np.abs(gencurv.rm_mixed(pg, dd, s) - block(R, (s, -s, s, s))).max() < 1e-12
        assert np.abs(gencurv.full_ricci_pure(pg, dd, s) - block(Rc, (s, s))).max() < 1e-12
        assert np.abs(gencurv.ricci_mixed(pg, dd, s) - block(Rc, (-s, s))).max() < 1e-12


@pytest.mark.parametrize("name", ["G3", "G4", "G5"])
def test_full_ricci_is_band_trace(name):
    pg = point_geometry(name, PTS[name])
    dd = DilatonData.from_point(pg)
    for s in (PLUS, MINUS):
        traced = np.einsum("ac,abcd->bd", pg.g_inv, gencurv.rm_pure(pg, dd, s)) * s
        assert np.abs(traced - gencurv.full_ricci_pure(pg, dd, s)).max() < 1e-12


@pytest.mark.parametrize("name", ["G3", "G4", "G5"])
def test_scalar_is_half_trace(name):
    pg = point_geometry(name, PTS[name])
    dd = DilatonData.from_point(pg)
    tr = sum(np.einsum("mn,mn->", pg.g_inv, gencurv.full_ricci_pure(pg, dd, s)) for s in (PLUS, MINUS))
    assert gencurv.gen_scalar(pg, dd) == pytest.approx(0.5 * tr, abs=1e-12)


@pytest.mark.parametrize("name", ["G3", "G4", "G5"])
def test_index_paths(name):
    pg = point_geometry(name, PTS[name])
    dd = DilatonData.from_point(pg)
    for s in (PLUS, MINUS):
        diff = gencurv.ricci_mixed(pg, dd, s) - gencurv.ricci_mixed_index(pg, dd, s)
        assert np.abs(diff).max() < 1e-12
    assert abs(gencurv.gen_scalar(pg, dd) - gencurv.gen_scalar_index(pg, dd)) < 1e-12
    assert abs(gencurv.trace_E(pg, dd) - gencurv.trace_E_index(pg, dd)) < 1e-12


@pytest.mark.parametrize("name", ["G4", "G5"])
def test_zero_dilaton_form_agrees(name):
    """Metric-divergence statement with +1/36, +1/36, +1/18 and its own slot orders."""
    pg = point_geometry(name, PTS[name])
    dd = zero_dd(pg)
    Rm = riemann_classical(pg).comps
    _, H2 = h_squared_tensors(pg)
    H2 = H2.comps
    other = (Rm + np.einsum("avwb->abvw", H2) / 36.0 + np.einsum("vbwa->abvw", H2) / 36.0
             + np.einsum("vwba->abvw", H2) / 18.0)
    for s in (PLUS, MINUS):
        assert np.abs(s * gencurv.rm_pure(pg, dd, s) - other).max() < 1e-13


def test_mixed_reduces_on_constant_h():
    pg = point_geometry("G2", [0.0, 0.1, 0.0])
    dd = zero_dd(pg)
    R = full_assembly(pg, dd)
    for s in (PLUS, MINUS):
        assert np.abs(gencurv.rm_mixed(pg, dd, s) - block(R, (s, -s, s, s))).max() < 1e-13


def test_dimension_guard():
    pg = point_geometry("G0", [0.0, 0.0, 0.0])
    small = type(pg)(**{**pg.__dict__, "g": np.eye(1)})
    with pytest.raises(ValueError):
        gencurv.rm_pure(small, zero_dd(pg), PLUS)


@pytest.mark.parametrize("name", sorted(gencurv.DEFAULT_COEFFS))
def test_mutation_breaks_agreement(name, g4_pg, g4_dd):
    R = full_assembly(g4_pg, g4_dd)

    def worst():
        return max(max(np.abs(gencurv.rm_pure(g4_pg, g4_dd, s) - block(R, (s, s, s, s))).max(),
                       np.abs(gencurv.rm_mixed(g4_pg, g4_dd, s) - block(R, (s, -s, s, s))).max())
                   for s in (PLUS, MINUS))

    assert worst() < 1e-12
    with gencurv.mutate_coefficient(name):
        assert worst() > 1e-8
    assert gencurv.COEFFS == gencurv.DEFAULT_COEFFS


def test_mutate_unknown_name():
    with pytest.raises(KeyError):
        with gencurv.mutate_coefficient("nope"):
            pass


def test_curvature_report_fields(g4_pg):
    rep = gencurv.curvature_report(g4_pg)
    assert set(rep.scalars()) == {"gen_scalar", "trace_E", "kretschmann", "Sc", "H_norm2", "Rm_norm2"}
    assert max(rep.residuals.values()) < 1e-12
    assert rep.rm_mixed_plus.shape == (4, 4, 4, 4)
