import numpy as np
import pytest

from conftest import load_builtin, point_geometry
from genriem import gencurv
from genriem.expr import Jet2, eval_jet2, parse_expression
from genriem.gencore import DilatonData
from genriem.riemannian import eval_point_geometry
from genriem.sugra import compatibility_report, nsns_residuals, string_rewrite_identity, vector_residuals

G4_POINT = [0.11, -0.23, 0.17, 0.29]


def phi_jet(gd, src, point):
    return eval_jet2(parse_expression(src, gd.symbols), gd.coords, np.asarray(point, float), gd.params)


def constant_phi(d, value=0.0):
    return Jet2(value, np.zeros(d), np.zeros((d, d)))


def test_flat_vacuum_is_exact():
    pg = point_geometry("G0", [0.3, -0.1, 0.2])
    for value in (0.0, 1.7):
        res = nsns_residuals(pg, constant_phi(3, value))
        assert not res.symmetric.any() and not res.antisymmetric.any()
        assert res.scalar == 0.0 and res.trace_E == 0.0
        assert max(res.two_path.values()) == 0.0


def test_linear_dilaton_on_flat_space():
    gd = load_builtin("G0")
    x = [0.3, -0.1, 0.2]
    res = nsns_residuals(eval_point_geometry(gd, x), phi_jet(gd, "0.5*x", x))
    assert res.scalar == pytest.approx(-1.0, abs=1e-15)
    assert not res.symmetric.any()


def test_constant_h_with_dilaton():
    gd = load_builtin("G2")
    x = [0.1, 0.2, -0.3]
    pg = eval_point_geometry(gd, x)
    phi = phi_jet(gd, "0.2*z", x)
    assert string_rewrite_identity(pg, phi) < 1e-10
    res = nsns_residuals(pg, phi)
    assert max(res.two_path.values()) < 1e-12
    # H_{rmn} d^r phi contributes -0.2 H_{z mn} to the antisymmetric part
    assert res.antisymmetric[0, 1] == pytest.approx(-0.2 * 0.3, abs=1e-15)
    assert string_rewrite_identity(point_geometry("G0", x), phi) == 0.0


@pytest.mark.parametrize("name, src", [("G4", "0.3*x0*x1 - sin(x3)"), ("G5", "exp(x/3)*cos(y) + z^2")])
def test_nsns_two_paths_agree(name, src):
    gd = load_builtin(name)
    x = np.full(gd.dim, 0.15)
    pg = eval_point_geometry(gd, x)
    res = nsns_residuals(pg, phi_jet(gd, src, x))
    assert max(res.two_path.values()) < 1e-10, res.two_path
    # X = 0 and xi = 2 d(phi): the trace scalar vanishes identically
    assert abs(res.trace_E) < 1e-12


def test_vector_mode_on_torus_chart():
    pg = point_geometry("G3", [0.0, 0.0, 0.0])
    res = vector_residuals(pg)
    assert res.compatible
    assert max(res.compatibility.values()) < 1e-12
    assert res.scalar == pytest.approx(-1.045, abs=1e-9)
    assert abs(res.trace_E) < 1e-10
    assert max(res.two_path.values()) < 1e-12


def test_vector_scalar_along_x():
    # |Xt|^2 = (1 + lambda^2 x^2) / 4 on the torus chart
    x = 0.4
    res = vector_residuals(point_geometry("G3", [x, 0.0, 0.0]))
    assert res.scalar == pytest.approx(-0.045 - (1 + 0.09 * x * x), abs=1e-12)


def test_non_killing_vector_is_flagged():
    gd = load_builtin("G3")
    bad = gd.with_fields(X={0: parse_expression("x", gd.symbols)})
    pg = eval_point_geometry(bad, [0.2, 0.0, 0.0])
    rep = compatibility_report(pg, DilatonData.from_point(pg))
    assert rep["killing"] == pytest.approx(2.0)
    assert not vector_residuals(pg).compatible


def test_vector_two_paths_on_generic_data(g4_pg):
    """Without compatibility the index forms differ by exactly the violated assumptions."""
    res = vector_residuals(g4_pg)
    assert not res.compatible
    assert res.two_path["trace_E_index"] < 1e-12
    assert res.two_path["symmetric"] == pytest.approx(0.5 * res.compatibility["killing"], rel=1e-12)
    assert res.two_path["antisymmetric"] == pytest.approx(0.5 * res.compatibility["dxi_minus_iXH"], rel=1e-12)


def test_residual_components_match_curvature():
    pg = point_geometry("G5", [0.13, -0.07, 0.21])
    dd = DilatonData.from_point(pg)
    res = vector_residuals(pg, dd)
    plus = gencurv.ricci_mixed(pg, dd, 1)
    np.testing.assert_allclose(res.symmetric + res.antisymmetric, plus, atol=1e-15)
    assert res.scalar == gencurv.gen_scalar(pg, dd)
