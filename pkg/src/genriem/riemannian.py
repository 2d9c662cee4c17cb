"""Classical geometry on a chart at a point.

Array conventions: derivative indices come first, e.g. ``dg[r, m, n]`` is
d_r g_{mn}, ``Gamma[r, m, n]`` is Gamma^r_{mn}, ``dX[m, n]`` is d_m X^n.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .chart import GeometryData
from .expr import eval_jet2
from .tensors import DOWN, UP, TensorValue


class GeometryError(ValueError):
    pass


class SingularMetricError(GeometryError):
    pass


class ClosednessError(GeometryError):
    pass


DET_FLOOR = 1e-10
CLOSEDNESS_TOL = 1e-9


@dataclass(frozen=True)
class PointGeometry:
    point: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    dg: np.ndarray
    d2g: np.ndarray
    Gamma: np.ndarray
    dGamma: np.ndarray
    H: np.ndarray
    dH: np.ndarray
    X: np.ndarray
    dX: np.ndarray
    xi: np.ndarray
    dxi: np.ndarray

    @property
    def dim(self) -> int:
        return self.g.shape[0]


def _perm_parity3(i: int, j: int, k: int) -> tuple[tuple[int, int, int], int]:
    order = sorted((i, j, k))
    inversions = sum(1 for a, b in ((i, j), (i, k), (j, k)) if a > b)
    return tuple(order), (-1) ** inversions


def christoffel(g_inv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    lower = 0.5 * (np.einsum("msn->smn", dg) + np.einsum("nsm->smn", dg) - dg)
    return np.einsum("rs,smn->rmn", g_inv, lower)


def christoffel_derivative(g_inv: np.ndarray, dg: np.ndarray, d2g: np.ndarray) -> np.ndarray:
    lower = 0.5 * (np.einsum("msn->smn", dg) + np.einsum("nsm->smn", dg) - dg)
    # d2g[l, r, m, n] = d_l d_r g_mn
    dlower = 0.5 * (np.einsum("lmsn->lsmn", d2g) + np.einsum("lnsm->lsmn", d2g) - d2g)
    dg_inv = -np.einsum("ra,lab,bs->lrs", g_inv, dg, g_inv)
    return np.einsum("lrs,smn->lrmn", dg_inv, lower) + np.einsum("rs,lsmn->lrmn", g_inv, dlower)


def eval_point_geometry(gd: GeometryData, point: Sequence[float]) -> PointGeometry:
    """Evaluate all field jets at ``point`` and derive g^{-1} and Christoffels."""
    d = gd.dim
    x = np.asarray(point, dtype=float)
    if x.shape != (d,):
        raise GeometryError(f"point must have {d} components")

    def jet(node):
        return eval_jet2(node, gd.coords, x, gd.params)

    g = np.zeros((d, d))
    dg = np.zeros((d, d, d))
    d2g = np.zeros((d, d, d, d))
    for (i, j), node in gd.g.items():
        J = jet(node)
        for a, b in {(i, j), (j, i)}:
            g[a, b] = J.value
            dg[:, a, b] = J.grad
            d2g[:, :, a, b] = J.hess

    det = np.linalg.det(g)
    if not np.isfinite(det) or abs(det) <= DET_FLOOR:
        raise SingularMetricError(f"metric is singular at {x.tolist()} (det = {det:.3g})")
    g_inv = np.linalg.inv(g)

    H = np.zeros((d, d, d))
    dH = np.zeros((d, d, d, d))
    for (i, j, k), node in gd.H.items():
        J = jet(node)
        for a in (i, j, k):
            for b in (i, j, k):
                for c in (i, j, k):
                    if len({a, b, c}) < 3:
                        continue
                    _, sign = _perm_parity3(a, b, c)
                    H[a, b, c] = sign * J.value
                    dH[:, a, b, c] = sign * J.grad

    X = np.zeros(d)
    dX = np.zeros((d, d))
    for i, node in gd.X.items():
        J = jet(node)
        X[i] = J.value
        dX[:, i] = J.grad
    xi = np.zeros(d)
    dxi = np.zeros((d, d))
    for i, node in gd.xi.items():
        J = jet(node)
        xi[i] = J.value
        dxi[:, i] = J.grad

    closed = exterior_derivative(H, dH)
    scale = max(1.0, float(np.abs(dH).max(initial=0.0)))
    if np.abs(closed).max(initial=0.0) > CLOSEDNESS_TOL * scale:
        raise ClosednessError(f"H is not closed at {x.tolist()} (|dH| = {np.abs(closed).max():.3g})")

    return PointGeometry(
        point=x, g=g, g_inv=g_inv, dg=dg, d2g=d2g,
        Gamma=christoffel(g_inv, dg), dGamma=christoffel_derivative(g_inv, dg, d2g),
        H=H, dH=dH, X=X, dX=dX, xi=xi, dxi=dxi,
    )


# --------------------------------------------------------------------------
# Curvature
# --------------------------------------------------------------------------

def riemann_up(pg: PointGeometry) -> np.ndarray:
    """R^r_{s m n} with R(v,w)b = nabla_v nabla_w b - nabla_w nabla_v b - nabla_[v,w] b."""
    G, dG = pg.Gamma, pg.dGamma
    return (np.einsum("mrns->rsmn", dG) - np.einsum("nrms->rsmn", dG)
            + np.einsum("rml,lns->rsmn", G, G) - np.einsum("rnl,lms->rsmn", G, G))


def riemann_classical(pg: PointGeometry) -> TensorValue:
    """Rm(a, b, v, w) = g(R(v, w) b, a), all indices down."""
    return TensorValue.down(np.einsum("ar,rbvw->abvw", pg.g, riemann_up(pg)))


def ricci_scalar_classical(pg: PointGeometry) -> tuple[TensorValue, float]:
    Rc = np.einsum("rsrn->sn", riemann_up(pg))
    return TensorValue.down(Rc), float(np.einsum("mn,mn->", pg.g_inv, Rc))


def cov_deriv(pg: PointGeometry, t: TensorValue, dt: np.ndarray) -> TensorValue:
    """Levi-Civita covariant derivative; the new derivative slot is first and down."""
    dt = np.asarray(dt, dtype=float)
    d = pg.dim
    if dt.shape != (d,) + t.comps.shape:
        raise GeometryError(f"partials have shape {dt.shape}, expected {(d,) + t.comps.shape}")
    out = dt.copy()
    G = pg.Gamma
    for slot, v in enumerate(t.variance):
        if v == UP:
            # + Gamma^a_{m l} t^{..l..}
            term = np.tensordot(G, t.comps, axes=([2], [slot]))  # [a, m, ...rest]
            term = np.moveaxis(term, 0, slot + 1)                 # [m, ..., a at slot, ...]
            out = out + term
        else:
            # - Gamma^l_{m b} t_{..l..}
            term = np.tensordot(G, t.comps, axes=([0], [slot]))  # [m, b, ...rest]
            term = np.moveaxis(term, 1, slot + 1)
            out = out - term
    return TensorValue(out, (DOWN,) + t.variance)


def exterior_derivative(form: np.ndarray, dform: np.ndarray) -> np.ndarray:
    """(dw)_{m0..mk} = sum_i (-1)^i d_{mi} w_{m0..^mi..mk} on component arrays."""
    form = np.asarray(form, dtype=float)
    k = form.ndim
    if k > 3:
        raise GeometryError("exterior derivative implemented for forms of degree <= 3")
    dform = np.asarray(dform, dtype=float)
    out = np.zeros(dform.shape)
    for i in range(k + 1):
        # move the derivative axis (0) to position i
        out = out + (-1) ** i * np.moveaxis(dform, 0, i)
    return out


def codifferential_H(pg: PointGeometry, method: str = "covariant") -> TensorValue:
    """(d*H)_{mn} = -nabla^r H_{rmn}.

    ``method='density'`` uses nabla_r H^{rmn} = |g|^{-1/2} d_r(|g|^{1/2} H^{rmn})
    instead of Christoffel corrections.
    """
    if method == "covariant":
        nH = cov_deriv(pg, TensorValue.down(pg.H), pg.dH).comps
        return TensorValue.down(-np.einsum("sr,srmn->mn", pg.g_inv, nH))
    if method == "density":
        gi = pg.g_inv
        dgi = -np.einsum("ra,lab,bs->lrs", gi, pg.dg, gi)
        Hup = np.einsum("ra,sb,tc,abc->rst", gi, gi, gi, pg.H)
        dHup = (np.einsum("lra,sb,tc,abc->lrst", dgi, gi, gi, pg.H)
                + np.einsum("ra,lsb,tc,abc->lrst", gi, dgi, gi, pg.H)
                + np.einsum("ra,sb,ltc,abc->lrst", gi, gi, dgi, pg.H)
                + np.einsum("ra,sb,tc,labc->lrst", gi, gi, gi, pg.dH))
        # d_r log sqrt|g| = 1/2 g^{ab} d_r g_ab
        dlog = 0.5 * np.einsum("ab,rab->r", gi, pg.dg)
        div_up = np.einsum("rrst->st", dHup) + np.einsum("r,rst->st", dlog, Hup)
        return TensorValue.down(-np.einsum("ms,nt,st->mn", pg.g, pg.g, div_up))
    raise ValueError(f"unknown method {method!r}")


def h_squared_tensors(pg: PointGeometry) -> tuple[TensorValue, TensorValue]:
    """H^2_{mn} = H_{mrs} H_n^{rs} and H2_4(a,b,c,e) = g^{mn} H_{mab} H_{nce}."""
    H, gi = pg.H, pg.g_inv
    H2_4 = np.einsum("mn,mab,nce->abce", gi, H, H)
    H2 = np.einsum("rs,arbs->ab", gi, H2_4)
    return TensorValue.down(H2), TensorValue.down(H2_4)


def h_norm_squared(pg: PointGeometry) -> float:
    gi = pg.g_inv
    return float(np.einsum("abc,ad,be,cf,def->", pg.H, gi, gi, gi, pg.H))


def h_contract(pg: PointGeometry, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Vector g^{-1} H(u, v, .)."""
    return pg.g_inv @ np.einsum("abc,a,b->c", pg.H, u, v)


def nabla_vector(pg: PointGeometry, V: np.ndarray, dV: np.ndarray) -> np.ndarray:
    """nabla_m V^n as array [m, n]."""
    return dV + np.einsum("nml,l->mn", pg.Gamma, V)


def bismut_apply(pg: PointGeometry, sign: int, v: np.ndarray, w: np.ndarray, dw: np.ndarray) -> np.ndarray:
    """nabla^{+-}_v w = nabla_v w +- (1/2) g^{-1} H(v, w, .)."""
    return v @ nabla_vector(pg, w, dw) + 0.5 * sign * h_contract(pg, v, w)


def killing_residual(pg: PointGeometry, X: np.ndarray, dX: np.ndarray) -> TensorValue:
    """(L_X g)_{mn} = nabla_m X_n + nabla_n X_m."""
    nX = nabla_vector(pg, X, dX) @ pg.g
    return TensorValue.down(nX + nX.T)


def divergence(pg: PointGeometry, V: np.ndarray, dV: np.ndarray) -> float:
    return float(np.trace(nabla_vector(pg, V, dV)))


def lower_field(pg: PointGeometry, V: np.ndarray, dV: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Components and partials of the one-form gV."""
    return pg.g @ V, np.einsum("mab,b->ma", pg.dg, V) + dV @ pg.g


def raise_field(pg: PointGeometry, a: np.ndarray, da: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Components and partials of the vector g^{-1} a."""
    gi = pg.g_inv
    dgi = -np.einsum("ra,lab,bs->lrs", gi, pg.dg, gi)
    return gi @ a, np.einsum("lrs,s->lr", dgi, a) + da @ gi
