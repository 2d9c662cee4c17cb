"""NS-NS and vector-deformed supergravity residuals.

Both modes compute the residual tensors twice: once through the invariant
curvature operations in ``gencurv`` and once through the index-notation
expressions, and report the deviation between the two.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gencurv
from .expr import Jet2
from .gencore import DilatonData
from .riemannian import (
    PointGeometry,
    codifferential_H,
    cov_deriv,
    h_norm_squared,
    h_squared_tensors,
    killing_residual,
    ricci_scalar_classical,
)
from .tensors import TensorValue

COMPAT_TOL = 1e-12


@dataclass
class SugraResiduals:
    """Residuals of Rc^+- = 0 and Sc = 0.

    ``antisymmetric`` is the part of Rc^+; that of Rc^- is its negative.
    """

    mode: str
    symmetric: np.ndarray
    antisymmetric: np.ndarray
    scalar: float
    trace_E: float
    compatibility: dict[str, float] = field(default_factory=dict)
    two_path: dict[str, float] = field(default_factory=dict)

    @property
    def compatible(self) -> bool:
        return all(v < COMPAT_TOL for v in self.compatibility.values())


def _split(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return 0.5 * (t + t.T), 0.5 * (t - t.T)


def _max_abs(t) -> float:
    return float(np.abs(np.asarray(t)).max(initial=0.0))


def _div_h(pg: PointGeometry) -> np.ndarray:
    """nabla^r H_{rmn}."""
    return -codifferential_H(pg).comps


def dilaton_data(pg: PointGeometry, phi: Jet2) -> DilatonData:
    """X = 0 and xi = 2 d(phi)."""
    d = pg.dim
    return DilatonData(np.zeros(d), np.zeros((d, d)), 2.0 * np.asarray(phi.grad), 2.0 * np.asarray(phi.hess))


def _invariant_path(pg: PointGeometry, dd: DilatonData) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    plus = gencurv.ricci_mixed(pg, dd, 1)
    minus = gencurv.ricci_mixed(pg, dd, -1)
    sym, anti = _split(plus)
    return sym, anti, minus, gencurv.gen_scalar(pg, dd)


def nsns_residuals(pg: PointGeometry, phi: Jet2) -> SugraResiduals:
    dd = dilaton_data(pg, phi)
    sym, anti, minus, scalar = _invariant_path(pg, dd)

    # Rc - H^2/4 + 2 nabla d(phi) +- 1/2 nabla^r H_rmn -+ H_rmn d^r(phi)
    Rc, Sc = ricci_scalar_classical(pg)
    H2, _ = h_squared_tensors(pg)
    dphi = np.asarray(phi.grad, dtype=float)
    hess = np.asarray(phi.hess, dtype=float) - np.einsum("lmn,l->mn", pg.Gamma, dphi)
    idx_sym = Rc.comps - 0.25 * H2.comps + 2.0 * hess
    idx_anti = 0.5 * _div_h(pg) - np.einsum("rmn,r->mn", pg.H, pg.g_inv @ dphi)
    lap = float(np.einsum("mn,mn->", pg.g_inv, hess))
    idx_scalar = Sc - h_norm_squared(pg) / 12.0 + 4.0 * lap - 4.0 * float(dphi @ pg.g_inv @ dphi)

    two_path = {
        "symmetric": _max_abs(sym - idx_sym),
        "antisymmetric": _max_abs(anti - idx_anti),
        "minus_band": _max_abs(minus - (idx_sym - idx_anti)),
        "scalar": abs(scalar - idx_scalar),
        "string_rewrite": string_rewrite_identity(pg, phi),
    }
    return SugraResiduals("nsns", sym, anti, scalar, gencurv.trace_E(pg, dd), {}, two_path)


def string_rewrite_identity(pg: PointGeometry, phi: Jet2) -> float:
    """max |nabla^r H_rmn - 2 H_rmn d^r phi - e^{2phi} nabla^r(e^{-2phi} H_rmn)|."""
    dphi = np.asarray(phi.grad, dtype=float)
    lhs = _div_h(pg) - 2.0 * np.einsum("rmn,r->mn", pg.H, pg.g_inv @ dphi)
    w = np.exp(-2.0 * phi.value)
    F = w * pg.H
    dF = w * (pg.dH - 2.0 * np.einsum("l,abc->labc", dphi, pg.H))
    nF = cov_deriv(pg, TensorValue.down(F), dF).comps
    rhs = np.exp(2.0 * phi.value) * np.einsum("rs,srmn->mn", pg.g_inv, nF)
    return _max_abs(lhs - rhs)


def compatibility_report(pg: PointGeometry, dd: DilatonData) -> dict[str, float]:
    """Killing residual of X, |d xi - i_X H| and |xi(X)|."""
    dxi = dd.dxi - dd.dxi.T
    i_x_h = np.einsum("r,rmn->mn", dd.X, pg.H)
    return {
        "killing": _max_abs(killing_residual(pg, dd.X, dd.dX).comps),
        "dxi_minus_iXH": _max_abs(dxi - i_x_h),
        "xi_of_X": abs(float(dd.xi @ dd.X)),
    }


def vector_residuals(pg: PointGeometry, dd: DilatonData | None = None) -> SugraResiduals:
    dd = DilatonData.from_point(pg) if dd is None else dd
    sym, anti, minus, scalar = _invariant_path(pg, dd)
    compat = compatibility_report(pg, dd)

    g, gi = pg.g, pg.g_inv
    # Xt = (-X + xi^sharp) / 2, lowered: (-gX + xi) / 2
    Xt = 0.5 * (-dd.X + gi @ dd.xi)
    Xt_low = 0.5 * (-(g @ dd.X) + dd.xi)
    dXt_low = 0.5 * (-(np.einsum("mab,b->ma", pg.dg, dd.X) + dd.dX @ g) + dd.dxi)
    nXt = dXt_low - np.einsum("lmn,l->mn", pg.Gamma, Xt_low)  # nabla_m Xt_n

    Rc, Sc = ricci_scalar_classical(pg)
    H2, _ = h_squared_tensors(pg)
    idx_sym = Rc.comps - 0.25 * H2.comps + (nXt + nXt.T)
    idx_anti = 0.5 * _div_h(pg) - (nXt - nXt.T) - np.einsum("rmn,r->mn", pg.H, Xt)
    div_Xt = float(np.einsum("mn,mn->", gi, nXt))
    idx_scalar = Sc - h_norm_squared(pg) / 12.0 + 4.0 * div_Xt - 4.0 * float(Xt @ Xt_low)

    # 2 nabla.xi - |X|^2 - |xi|^2 = 4 nabla.Xt - 4 |Xt|^2 needs div X = 0 and xi(X) = 0
    nxi = dd.dxi - np.einsum("lmn,l->mn", pg.Gamma, dd.xi)
    lhs = 2.0 * float(np.einsum("mn,mn->", gi, nxi)) - float(dd.X @ g @ dd.X) - float(dd.xi @ gi @ dd.xi)
    rewrite = abs(lhs - (4.0 * div_Xt - 4.0 * float(Xt @ Xt_low)))

    tr_e = gencurv.trace_E(pg, dd)
    two_path = {
        "symmetric": _max_abs(sym - idx_sym),
        "antisymmetric": _max_abs(anti - idx_anti),
        "minus_band": _max_abs(minus - (idx_sym - idx_anti)),
        "scalar": abs(scalar - idx_scalar),
        "scalar_rewrite": rewrite,
        "trace_E_index": abs(tr_e - gencurv.trace_E_index(pg, dd)),
    }
    return SugraResiduals("vector", sym, anti, scalar, tr_e, compat, two_path)
