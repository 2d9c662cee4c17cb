import math

import numpy as np
import pytest

from conftest import load_builtin, point_geometry
from genriem.chart import parse_chart_file
from genriem.riemannian import (
    SingularMetricError,
    bismut_apply,
    codifferential_H,
    cov_deriv,
    divergence,
    eval_point_geometry,
    exterior_derivative,
    h_norm_squared,
    h_squared_tensors,
    killing_residual,
    ricci_scalar_classical,
    riemann_classical,
)
from genriem.tensors import TensorValue, norm_squared

G4_POINTS = [[0.11, -0.23, 0.17, 0.29], [-0.3, 0.05, 0.2, -0.1], [0.0, 0.0, 0.0, 0.0]]


def test_flat_has_zero_connection_and_curvature():
    pg = point_geometry("G0", [0.3, -0.2, 0.1])
    assert not pg.Gamma.any() and not pg.dGamma.any()
    assert not riemann_classical(pg).comps.any()
    Rc, Sc = ricci_scalar_classical(pg)
    assert not Rc.comps.any() and Sc == 0.0


def test_sphere_christoffel_and_curvature():
    t = math.pi / 4
    pg = point_geometry("G1", [t, 0.0])
    assert pg.Gamma[0, 1, 1] == pytest.approx(-0.5, abs=1e-15)
    assert pg.Gamma[1, 0, 1] == pytest.approx(1.0, abs=1e-15)
    Rm = riemann_classical(pg).comps
    assert Rm[0, 1, 0, 1] == pytest.approx(math.sin(t) ** 2, abs=1e-15)
    Rc, Sc = ricci_scalar_classical(pg)
    np.testing.assert_allclose(Rc.comps, pg.g, atol=1e-15)
    assert Sc == pytest.approx(2.0, abs=1e-14)
    assert norm_squared(TensorValue.down(Rm), pg.g, pg.g_inv) == pytest.approx(4.0, abs=1e-13)


def test_sphere_christoffels_against_finite_differences():
    gd = load_builtin("G1")
    x = np.array([0.9, 0.4])
    h = 1e-5
    pg = eval_point_geometry(gd, x)
    for m in range(2):
        e = np.zeros(2)
        e[m] = h
        fd = (eval_point_geometry(gd, x + e).Gamma - eval_point_geometry(gd, x - e).Gamma) / (2 * h)
        np.testing.assert_allclose(pg.dGamma[m], fd, atol=1e-8)


def test_lower_on_sphere():
    pg = point_geometry("G1", [math.pi / 4, 0.0])
    assert (pg.g @ np.array([0.0, 1.0]))[1] == pytest.approx(0.5)


def test_singular_metric():
    with pytest.raises(SingularMetricError):
        point_geometry("G1", [0.0, 0.0])
    gd = parse_chart_file("dim: 2\ncoords: x y\ng 0 0: x\ng 1 1: 1\n")
    with pytest.raises(SingularMetricError):
        eval_point_geometry(gd, [0.0, 1.0])


@pytest.mark.parametrize("point", G4_POINTS)
def test_random_metric_symmetries(point):
    pg = point_geometry("G4", point)
    Rm = riemann_classical(pg).comps
    assert np.abs(Rm + np.einsum("abvw->bavw", Rm)).max() < 1e-12
    assert np.abs(Rm + np.einsum("abvw->abwv", Rm)).max() < 1e-12
    assert np.abs(Rm - np.einsum("abvw->vwab", Rm)).max() < 1e-12
    bianchi = Rm + np.einsum("abvw->avwb", Rm) + np.einsum("abvw->awbv", Rm)
    assert np.abs(bianchi).max() < 1e-12
    Rc, _ = ricci_scalar_classical(pg)
    assert np.abs(Rc.comps - Rc.comps.T).max() < 1e-10


@pytest.mark.parametrize("point", G4_POINTS)
def test_codifferential_two_ways(point):
    pg = point_geometry("G4", point)
    a = codifferential_H(pg, "covariant").comps
    b = codifferential_H(pg, "density").comps
    assert np.abs(a - b).max() < 1e-10
    assert np.abs(a + a.T).max() < 1e-12
    with pytest.raises(ValueError):
        codifferential_H(pg, "bogus")


def test_constant_h_values():
    pg = point_geometry("G2", [0.1, 0.2, 0.3])
    assert h_norm_squared(pg) == pytest.approx(0.54, abs=1e-15)
    H2, H2_4 = h_squared_tensors(pg)
    np.testing.assert_allclose(H2.comps, 0.18 * np.eye(3), atol=1e-15)
    assert not codifferential_H(pg).comps.any()
    assert not cov_deriv(pg, TensorValue.down(pg.H), pg.dH).comps.any()


def test_h_squared_symmetries_on_g4():
    pg = point_geometry("G4", G4_POINTS[0])
    _, T = h_squared_tensors(pg)
    T = T.comps
    assert np.abs(T + np.einsum("abce->bace", T)).max() < 1e-11
    assert np.abs(T + np.einsum("abce->abec", T)).max() < 1e-11
    assert np.abs(T - np.einsum("abce->ceab", T)).max() < 1e-11


def test_exterior_derivative_of_one_form():
    # d(lambda x dy) = lambda dx^dy
    lam = 0.3
    form = np.zeros(3)
    dform = np.zeros((3, 3))
    dform[0, 1] = lam
    d = exterior_derivative(form, dform)
    assert d[0, 1] == lam and d[1, 0] == -lam
    assert not exterior_derivative(np.ones(3), np.zeros((3, 3))).any()


@pytest.mark.parametrize("name", ["G2", "G3", "G4", "G5"])
def test_builtin_h_is_closed(name):
    gd = load_builtin(name)
    pg = eval_point_geometry(gd, np.full(gd.dim, 0.12))
    assert np.abs(exterior_derivative(pg.H, pg.dH)).max() < 1e-12


def test_bismut_difference_is_h():
    pg = point_geometry("G4", G4_POINTS[1])
    rng = np.random.default_rng(3)
    v, w, dw = rng.normal(size=4), rng.normal(size=4), rng.normal(size=(4, 4))
    diff = bismut_apply(pg, 1, v, w, dw) - bismut_apply(pg, -1, v, w, dw)
    np.testing.assert_allclose(diff, pg.g_inv @ np.einsum("abc,a,b->c", pg.H, v, w), atol=1e-13)
    flat = point_geometry("G1", [1.0, 0.0])
    assert np.array_equal(bismut_apply(flat, 1, v[:2], w[:2], dw[:2, :2]),
                          bismut_apply(flat, -1, v[:2], w[:2], dw[:2, :2]))


def test_killing():
    pg = point_geometry("G3", [0.0, 0.0, 0.0])
    assert not killing_residual(pg, pg.X, pg.dX).comps.any()
    # x d/dx dilates
    X, dX = np.array([0.2, 0.0, 0.0]), np.diag([1.0, 0.0, 0.0])
    np.testing.assert_array_equal(killing_residual(pg, X, dX).comps, np.diag([2.0, 0.0, 0.0]))
    # rotation of the sphere about its axis is Killing and divergence free
    sph = point_geometry("G1", [0.8, 0.3])
    assert np.abs(killing_residual(sph, np.array([0.0, 1.0]), np.zeros((2, 2))).comps).max() < 1e-15
    assert divergence(sph, np.array([0.0, 1.0]), np.zeros((2, 2))) == 0.0
