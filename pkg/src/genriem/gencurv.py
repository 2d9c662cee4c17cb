"""Closed-form generalized curvature of D = D0 + S.

Arrays are over coordinate sections of one band. ``rm_pure(pg, dd, s)[a, b, v, w]``
has all four insertions in band s. ``rm_mixed(pg, dd, s)[a, bbar, v, w]`` has
bbar in the opposite band. ``ricci_mixed(pg, dd, s)[m, n]`` is Rc^s with its
first slot in band -s and its second in band s.

Every displayed coefficient is looked up in ``COEFFS`` so that tests can flip
one at a time (see ``mutate_coefficient``).
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .gencore import DilatonData, d0_chi_deriv_all, d0_e
from .riemannian import (
    PointGeometry,
    codifferential_H,
    cov_deriv,
    h_norm_squared,
    h_squared_tensors,
    nabla_vector,
    ricci_scalar_classical,
    riemann_classical,
)
from .tensors import TensorValue, norm_squared

# Multipliers of the displayed terms. The d-dependent ones are stored as the
# numerator over (d-1) or (d-1)^2.
DEFAULT_COEFFS = {
    "pure_h2_a": 1.0 / 36.0,
    "pure_h2_b": 1.0 / 36.0,
    "pure_h2_c": 1.0 / 18.0,
    "pure_chi": 0.5,          # 1/(2(d-1))
    "pure_quad": 0.5,         # 1/(2(d-1)^2)
    "mixed_nabla_a_h": 0.5,
    "mixed_nabla_b_h": 1.0 / 6.0,
    "mixed_h2_a": 1.0 / 12.0,
    "mixed_h2_b": 1.0 / 12.0,
    "mixed_h2_c": 1.0 / 6.0,
    "mixed_chi": 1.0,         # 1/(d-1)
}
COEFFS = dict(DEFAULT_COEFFS)


@contextmanager
def mutate_coefficient(name: str, factor: float = -1.0):
    """Temporarily multiply one displayed coefficient (default: flip its sign)."""
    if name not in COEFFS:
        raise KeyError(f"unknown coefficient {name!r}; known: {sorted(COEFFS)}")
    old = COEFFS[name]
    COEFFS[name] = old * factor
    try:
        yield
    finally:
        COEFFS[name] = old


def _check_dim(pg: PointGeometry) -> int:
    d = pg.dim
    if d < 2:
        raise ValueError("dimension must be at least 2")
    return d


def _e_vec(pg: PointGeometry, dd: DilatonData, s: int) -> np.ndarray:
    return dd.e(pg, s).vec


def rm_pure(pg: PointGeometry, dd: DilatonData, band: int) -> np.ndarray:
    """Rm^D on four coordinate sections of ``band``, as array [a, b, v, w]."""
    d = _check_dim(pg)
    s = band
    g = pg.g
    k = COEFFS
    Rm = riemann_classical(pg).comps
    _, H2 = h_squared_tensors(pg)
    H2 = H2.comps
    h2_terms = (- k["pure_h2_a"] * np.einsum("avbw->abvw", H2)
                - k["pure_h2_b"] * np.einsum("bvwa->abvw", H2)
                - k["pure_h2_c"] * np.einsum("vwab->abvw", H2))

    # DX[u, v, w, x] = [D0_u chi](v, w, x)
    DX = d0_chi_deriv_all(pg, dd, s, s)
    chi_terms = (np.einsum("vwba->abvw", DX) - np.einsum("wvba->abvw", DX)
                 + np.einsum("bavw->abvw", DX) - np.einsum("abvw->abvw", DX))
    chi_terms = s * k["pure_chi"] / (d - 1) * chi_terms

    e = _e_vec(pg, dd, s)
    ee = float(e @ g @ e)
    ge = g @ e
    quad = (2.0 * ee * (np.einsum("wa,vb->abvw", g, g) - np.einsum("va,wb->abvw", g, g))
            + np.einsum("a,wb,v->abvw", ge, g, ge) - np.einsum("a,vb,w->abvw", ge, g, ge)
            + np.einsum("b,va,w->abvw", ge, g, ge) - np.einsum("b,wa,v->abvw", ge, g, ge))
    quad = k["pure_quad"] / (d - 1) ** 2 * quad

    return s * (Rm + h2_terms + chi_terms + quad)


def rm_mixed(pg: PointGeometry, dd: DilatonData, band: int) -> np.ndarray:
    """Rm^D(a, bbar, v, w) with a, v, w in ``band`` and bbar in the other band."""
    d = _check_dim(pg)
    s = band
    k = COEFFS
    Rm = riemann_classical(pg).comps
    _, H2 = h_squared_tensors(pg)
    H2 = H2.comps
    nH = cov_deriv(pg, TensorValue.down(pg.H), pg.dH).comps  # [l, a, b, c] = (nabla_l H)_{abc}

    rhs = (Rm
           - s * k["mixed_nabla_a_h"] * nH
           + s * k["mixed_nabla_b_h"] * np.einsum("bavw->abvw", nH)
           - k["mixed_h2_a"] * np.einsum("bwav->abvw", H2)
           - k["mixed_h2_b"] * np.einsum("wabv->abvw", H2)
           - k["mixed_h2_c"] * H2)
    DX = d0_chi_deriv_all(pg, dd, s, -s)  # [bbar, a, v, w]
    rhs = rhs + s * k["mixed_chi"] / (d - 1) * np.einsum("bavw->abvw", DX)
    return s * rhs / 2.0


def _sym(t: np.ndarray) -> np.ndarray:
    return 0.5 * (t + t.T)


def _antisym(t: np.ndarray) -> np.ndarray:
    return 0.5 * (t - t.T)


def full_ricci_pure(pg: PointGeometry, dd: DilatonData, band: int) -> np.ndarray:
    d = _check_dim(pg)
    s = band
    g = pg.g
    Rc, _ = ricci_scalar_classical(pg)
    H2, _ = h_squared_tensors(pg)
    ef = dd.e_field(pg, s)
    div_e = float(np.trace(nabla_vector(pg, ef.vec, ef.dvec)))
    # [g nabla e]^sym(a, b) = (g(D0_a e, b) + g(D0_b e, a)) / 2
    g_de = _sym(d0_e(pg, dd, s, s) @ g)
    ge = g @ ef.vec
    ee = float(ef.vec @ ge)
    return (Rc.comps - H2.comps / 12.0
            + s * div_e / (d - 1) * g
            + s * (d - 2) / (d - 1) * g_de
            + (3 - 2 * d) / (2 * (d - 1) ** 2) * ee * g
            + (d - 2) / (2 * (d - 1) ** 2) * np.outer(ge, ge))


def ricci_mixed(pg: PointGeometry, dd: DilatonData, band: int) -> np.ndarray:
    """Rc^band = (4 Rc - H^2 -+ 2 d*H + 4 [nabla xi]^sym +- 4 [nabla gX]^antisym -+ 2 H(xi)) / 4."""
    _check_dim(pg)
    s = band
    Rc, _ = ricci_scalar_classical(pg)
    H2, _ = h_squared_tensors(pg)
    dstar = codifferential_H(pg).comps
    n_xi = cov_deriv(pg, TensorValue.down(dd.xi), dd.dxi).comps
    gX = pg.g @ dd.X
    dgX = np.einsum("mab,b->ma", pg.dg, dd.X) + dd.dX @ pg.g
    n_gX = cov_deriv(pg, TensorValue.down(gX), dgX).comps
    h_xi = np.einsum("rmn,r->mn", pg.H, pg.g_inv @ dd.xi)
    return (4 * Rc.comps - H2.comps - 2 * s * dstar + 4 * _sym(n_xi)
            + 4 * s * _antisym(n_gX) - 2 * s * h_xi) / 4.0


def ricci_mixed_index(pg: PointGeometry, dd: DilatonData, band: int) -> np.ndarray:
    """Index form: 4Rc - H_mrs H_n^rs + 4 nabla_(m xi_n) +- 2 nabla^r H_rmn +- 4 nabla_[m X_n] -+ 2 H_rmn xi^r."""
    s = band
    gi = pg.g_inv
    Rc, _ = ricci_scalar_classical(pg)
    HH = np.einsum("mrs,nab,ra,sb->mn", pg.H, pg.H, gi, gi)
    # divergence of H through the density form |g|^{-1/2} d(|g|^{1/2} H^{r..})
    div_h = -codifferential_H(pg, method="density").comps
    n_xi = dd.dxi - np.einsum("lmn,l->mn", pg.Gamma, dd.xi)
    X_low = pg.g @ dd.X
    dX_low = np.einsum("mab,b->ma", pg.dg, dd.X) + dd.dX @ pg.g
    n_X = dX_low - np.einsum("lmn,l->mn", pg.Gamma, X_low)
    xi_up = gi @ dd.xi
    h_xi = np.einsum("rmn,r->mn", pg.H, xi_up)
    four = (4 * Rc.comps - HH + 2 * (n_xi + n_xi.T) + 2 * s * div_h
            + 2 * s * (n_X - n_X.T) - 2 * s * h_xi)
    return four / 4.0


def gen_scalar(pg: PointGeometry, dd: DilatonData) -> float:
    """Sc - |H|^2/12 + div_g(pi(e_+ - e_-)) - |e|^2_G / 2."""
    _check_dim(pg)
    _, Sc = ricci_scalar_classical(pg)
    ep, em = dd.e_field(pg, 1), dd.e_field(pg, -1)
    div_diff = float(np.trace(nabla_vector(pg, ep.vec - em.vec, ep.dvec - em.dvec)))
    return Sc - h_norm_squared(pg) / 12.0 + div_diff - 0.5 * dd.norm_e_squared(pg)


def gen_scalar_index(pg: PointGeometry, dd: DilatonData) -> float:
    """Sc - H_mnr H^mnr / 12 + 2 nabla_m xi^m - X^m X_m - xi^m xi_m."""
    _, Sc = ricci_scalar_classical(pg)
    gi = pg.g_inv
    # nabla_m xi^m = g^{mn} (d_m xi_n - Gamma^l_{mn} xi_l)
    div_xi = float(np.einsum("mn,mn->", gi, dd.dxi) - np.einsum("mn,lmn,l->", gi, pg.Gamma, dd.xi))
    return (Sc - h_norm_squared(pg) / 12.0 + 2.0 * div_xi
            - float(dd.X @ pg.g @ dd.X) - float(dd.xi @ gi @ dd.xi))


def trace_E(pg: PointGeometry, dd: DilatonData) -> float:
    """2 div_g(pi e) - (|e_+|^2_G - |e_-|^2_G), with pi e = pi e_+ + pi e_-."""
    _check_dim(pg)
    ep, em = dd.e_field(pg, 1), dd.e_field(pg, -1)
    div_e = float(np.trace(nabla_vector(pg, ep.vec + em.vec, ep.dvec + em.dvec)))
    g = pg.g
    return 2.0 * div_e - (float(ep.vec @ g @ ep.vec) - float(em.vec @ g @ em.vec))


def trace_E_index(pg: PointGeometry, dd: DilatonData) -> float:
    """4 (nabla_m X^m - xi_m X^m)."""
    div_X = float(np.trace(dd.dX) + np.einsum("mml,l->", pg.Gamma, dd.X))
    return 4.0 * (div_X - float(dd.xi @ dd.X))


def kretschmann(pg: PointGeometry, dd: DilatonData) -> float:
    """|Rm^D|^2_G from the definitional full assembly."""
    from .oracle import full_assembly, kretschmann_from_assembly

    _check_dim(pg)
    return kretschmann_from_assembly(full_assembly(pg, dd), pg.g)


@dataclass
class CurvatureReport:
    point: list[float]
    rm_pure_plus: np.ndarray
    rm_pure_minus: np.ndarray
    rm_mixed_plus: np.ndarray
    rm_mixed_minus: np.ndarray
    full_ricci_plus: np.ndarray
    full_ricci_minus: np.ndarray
    ricci_plus: np.ndarray
    ricci_minus: np.ndarray
    gen_scalar: float
    trace_E: float
    kretschmann: float
    classical: dict[str, float] = field(default_factory=dict)
    classical_ricci: np.ndarray | None = None
    residuals: dict[str, float] = field(default_factory=dict)

    def scalars(self) -> dict[str, float]:
        return {"gen_scalar": self.gen_scalar, "trace_E": self.trace_E,
                "kretschmann": self.kretschmann, **self.classical}


def curvature_report(pg: PointGeometry, dd: DilatonData | None = None) -> CurvatureReport:
    from .oracle import full_assembly, full_ricci, block, kretschmann_from_assembly

    dd = DilatonData.from_point(pg) if dd is None else dd
    g = pg.g
    R = full_assembly(pg, dd)
    Rc_cl, Sc = ricci_scalar_classical(pg)
    rm = riemann_classical(pg)
    report = CurvatureReport(
        point=[float(x) for x in pg.point],
        rm_pure_plus=rm_pure(pg, dd, 1), rm_pure_minus=rm_pure(pg, dd, -1),
        rm_mixed_plus=rm_mixed(pg, dd, 1), rm_mixed_minus=rm_mixed(pg, dd, -1),
        full_ricci_plus=full_ricci_pure(pg, dd, 1), full_ricci_minus=full_ricci_pure(pg, dd, -1),
        ricci_plus=ricci_mixed(pg, dd, 1), ricci_minus=ricci_mixed(pg, dd, -1),
        gen_scalar=gen_scalar(pg, dd), trace_E=trace_E(pg, dd),
        kretschmann=kretschmann_from_assembly(R, g),
        classical={"Sc": Sc, "H_norm2": h_norm_squared(pg),
                   "Rm_norm2": norm_squared(rm, g, pg.g_inv)},
        classical_ricci=Rc_cl.comps,
    )
    Rc = full_ricci(R, g)
    res = {}
    for s, name in ((1, "plus"), (-1, "minus")):
        res[f"rm_pure_{name}"] = float(np.abs(rm_pure(pg, dd, s) - block(R, (s, s, s, s))).max())
        res[f"rm_mixed_{name}"] = float(np.abs(rm_mixed(pg, dd, s) - block(R, (s, -s, s, s))).max())
        res[f"full_ricci_{name}"] = float(np.abs(full_ricci_pure(pg, dd, s) - block(Rc, (s, s))).max())
        res[f"ricci_{name}"] = float(np.abs(ricci_mixed(pg, dd, s) - block(Rc, (-s, s))).max())
    report.residuals = res
    return report
