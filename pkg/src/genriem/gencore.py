"""Exact Courant algebroid E = TM + T*M with an H-twisted Dorfman bracket.

Sections of the bands E_+ and E_- are carried by their anchor image: a
``GenSection(band, vec)`` stands for ``vec + band * g(vec)`` in TM + T*M.
The pairing is <X + a, Y + b> = (a(Y) + b(X)) / 2, so <u, v> = +g on E_+,
-g on E_-, and the bands are orthogonal.

Frame arrays over E use the coordinate sections f_m^+ at index m and
f_m^- at index dim + m.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .riemannian import (
    PointGeometry,
    h_contract,
    lower_field,
    nabla_vector,
    raise_field,
)

PLUS, MINUS = 1, -1
BANDS = (PLUS, MINUS)
CONNECTIONS = ("naive", "D0", "Dcan")


@dataclass(frozen=True)
class GenSection:
    """Element of E_+ or E_- at a point, given by its vector part."""

    band: int
    vec: np.ndarray

    def __post_init__(self):
        if self.band not in BANDS:
            raise ValueError(f"band must be +1 or -1, got {self.band!r}")
        object.__setattr__(self, "vec", np.asarray(self.vec, dtype=float))


@dataclass(frozen=True)
class SectionField:
    """Band section with first partials of its vector part, dvec[m, n] = d_m vec^n."""

    band: int
    vec: np.ndarray
    dvec: np.ndarray

    def at(self) -> GenSection:
        return GenSection(self.band, self.vec)

    @classmethod
    def constant(cls, band: int, vec) -> "SectionField":
        vec = np.asarray(vec, dtype=float)
        return cls(band, vec, np.zeros((vec.shape[0],) * 2))


@dataclass(frozen=True)
class TField:
    """Element X + alpha of TM + T*M with partials (dX[m, n] = d_m X^n, dalpha[m, n] = d_m alpha_n)."""

    X: np.ndarray
    dX: np.ndarray
    alpha: np.ndarray
    dalpha: np.ndarray


@dataclass(frozen=True)
class DilatonData:
    """The pair (X, xi) with e = 2(X + xi); partials as d_m X^n, d_m xi_n."""

    X: np.ndarray
    dX: np.ndarray
    xi: np.ndarray
    dxi: np.ndarray

    @classmethod
    def from_point(cls, pg: PointGeometry) -> "DilatonData":
        return cls(pg.X, pg.dX, pg.xi, pg.dxi)

    @classmethod
    def zero(cls, dim: int) -> "DilatonData":
        z = np.zeros(dim)
        return cls(z, np.zeros((dim, dim)), z, np.zeros((dim, dim)))

    def is_zero(self) -> bool:
        return not (self.X.any() or self.dX.any() or self.xi.any() or self.dxi.any())

    def e_field(self, pg: PointGeometry, band: int) -> SectionField:
        """e_+- as a band section: vector part X +- g^{-1} xi."""
        up, dup = raise_field(pg, self.xi, self.dxi)
        return SectionField(band, self.X + band * up, self.dX + band * dup)

    def e(self, pg: PointGeometry, band: int) -> GenSection:
        return self.e_field(pg, band).at()

    def norm_e_squared(self, pg: PointGeometry) -> float:
        """|e|^2_G = |X_+|^2 + |X_-|^2."""
        return sum(gmetric(pg.g, self.e(pg, s), self.e(pg, s)) for s in BANDS)


# --------------------------------------------------------------------------
# Pairing and generalized metric
# --------------------------------------------------------------------------

def pairing(g: np.ndarray, a: GenSection, b: GenSection) -> float:
    if a.band != b.band:
        return 0.0
    return a.band * float(a.vec @ g @ b.vec)


def gmetric(g: np.ndarray, a: GenSection, b: GenSection) -> float:
    if a.band != b.band:
        return 0.0
    return float(a.vec @ g @ b.vec)


def eta_matrix(g: np.ndarray) -> np.ndarray:
    """Gram matrix of the pairing on the coordinate frame."""
    d = g.shape[0]
    out = np.zeros((2 * d, 2 * d))
    out[:d, :d] = g
    out[d:, d:] = -g
    return out


def gmetric_matrix(g: np.ndarray) -> np.ndarray:
    d = g.shape[0]
    out = np.zeros((2 * d, 2 * d))
    out[:d, :d] = g
    out[d:, d:] = g
    return out


def frame(dim: int) -> list[GenSection]:
    eye = np.eye(dim)
    return [GenSection(PLUS, eye[m]) for m in range(dim)] + [GenSection(MINUS, eye[m]) for m in range(dim)]


def frame_fields(dim: int) -> list[SectionField]:
    return [SectionField.constant(s.band, s.vec) for s in frame(dim)]


def to_tfield(pg: PointGeometry, v: SectionField) -> TField:
    form, dform = lower_field(pg, v.vec, v.dvec)
    return TField(v.vec, v.dvec, v.band * form, v.band * dform)


def project(pg: PointGeometry, X: np.ndarray, alpha: np.ndarray, band: int) -> GenSection:
    """Band component of the element X + alpha: vector part (X +- g^{-1} alpha) / 2."""
    return GenSection(band, 0.5 * (X + band * (pg.g_inv @ alpha)))


# --------------------------------------------------------------------------
# Dorfman bracket
# --------------------------------------------------------------------------

def dorfman_bracket(pg: PointGeometry, u: TField, v: TField) -> tuple[np.ndarray, np.ndarray]:
    """[X + a, Y + b]_H = [X, Y] + L_X b - i_Y da + H(X, Y, .) at the point."""
    X, Y = u.X, v.X
    lie = X @ v.dX - Y @ u.dX
    lie_b = X @ v.dalpha + u.dX @ v.alpha
    da = u.dalpha - u.dalpha.T  # (da)_{mn} = d_m a_n - d_n a_m
    i_y_da = Y @ da
    h_term = np.einsum("abc,a,b->c", pg.H, X, Y)
    return lie, lie_b - i_y_da + h_term


def lie_bracket(X: np.ndarray, dX: np.ndarray, Y: np.ndarray, dY: np.ndarray) -> np.ndarray:
    return X @ dY - Y @ dX


# --------------------------------------------------------------------------
# Connections
# --------------------------------------------------------------------------

def d0_apply(pg: PointGeometry, u: GenSection, v: SectionField) -> GenSection:
    """D0_u v for the canonical connection with metric divergence.

    Same band: nabla_{pi u} pi v +- (1/6) g^{-1} H(pi u, pi v, .) (sign of the band).
    Opposite bands: the Bismut connection nabla^{band of v}.
    """
    coeff = 1.0 / 6.0 if u.band == v.band else 0.5
    vec = u.vec @ nabla_vector(pg, v.vec, v.dvec) + v.band * coeff * h_contract(pg, u.vec, v.vec)
    return GenSection(v.band, vec)


def naive_apply(pg: PointGeometry, u: GenSection, v: SectionField) -> GenSection:
    """Lift of nabla on the bands plus bracket projections across bands."""
    if u.band == v.band:
        return GenSection(v.band, u.vec @ nabla_vector(pg, v.vec, v.dvec))
    # tensorial in u across bands, so any extension of u will do
    uf = to_tfield(pg, SectionField.constant(u.band, u.vec))
    X, alpha = dorfman_bracket(pg, uf, to_tfield(pg, v))
    return project(pg, X, alpha, v.band)


def chi_apply(g: np.ndarray, e: GenSection, a: GenSection, b: GenSection) -> GenSection:
    """chi^e(a, b) = <a, b> e - a <e, b>; zero unless all three share a band."""
    if not (e.band == a.band == b.band):
        return GenSection(b.band, np.zeros_like(b.vec))
    return GenSection(b.band, pairing(g, a, b) * e.vec - pairing(g, e, b) * a.vec)


def chi_3form(g: np.ndarray, e: GenSection, a: GenSection, b: GenSection, c: GenSection) -> float:
    return pairing(g, chi_apply(g, e, a, b), c)


def s_apply(pg: PointGeometry, dd: DilatonData, u: GenSection, v: GenSection) -> GenSection:
    """S_u v = (chi_+ + chi_-)(u, v) / (dim - 1)."""
    d = pg.dim
    if d < 2:
        raise ValueError("dimension must be at least 2")
    out = chi_apply(pg.g, dd.e(pg, v.band), u, v)
    return GenSection(out.band, out.vec / (d - 1))


def dcan_apply(pg: PointGeometry, dd: DilatonData, u: GenSection, v: SectionField) -> GenSection:
    """Canonical generalized Levi-Civita connection D = D0 + S."""
    base = d0_apply(pg, u, v)
    return GenSection(v.band, base.vec + s_apply(pg, dd, u, v.at()).vec)


def connection_apply(pg: PointGeometry, dd: DilatonData | None, kind: str,
                     u: GenSection, v: SectionField) -> GenSection:
    if kind == "naive":
        return naive_apply(pg, u, v)
    if kind == "D0":
        return d0_apply(pg, u, v)
    if kind == "Dcan":
        if dd is None:
            raise ValueError("Dcan needs dilaton data")
        return dcan_apply(pg, dd, u, v)
    raise ValueError(f"unknown connection {kind!r}; expected one of {CONNECTIONS}")


def connection_coefficients(pg: PointGeometry, dd: DilatonData | None, kind: str) -> np.ndarray:
    """C[I, J, K] = <D_{f_I} f_J, f_K> on the coordinate frame."""
    fr = frame(pg.dim)
    ff = frame_fields(pg.dim)
    out = np.zeros((len(fr),) * 3)
    for I, u in enumerate(fr):
        for J, v in enumerate(ff):
            Duv = connection_apply(pg, dd, kind, u, v)
            for K, w in enumerate(fr):
                out[I, J, K] = pairing(pg.g, Duv, w)
    return out


def frame_brackets(pg: PointGeometry) -> np.ndarray:
    """B[I, J, K] = <[f_I, f_J]_H, f_K>."""
    fr = frame(pg.dim)
    tf = [to_tfield(pg, f) for f in frame_fields(pg.dim)]
    out = np.zeros((len(fr),) * 3)
    for I in range(len(fr)):
        for J in range(len(fr)):
            X, alpha = dorfman_bracket(pg, tf[I], tf[J])
            for K, w in enumerate(fr):
                # <X + alpha, W + b g W> = (alpha(W) + b g(W, X)) / 2
                out[I, J, K] = 0.5 * (alpha @ w.vec + w.band * (w.vec @ pg.g @ X))
    return out


def gen_torsion(pg: PointGeometry, connection: str = "Dcan", dd: DilatonData | None = None) -> np.ndarray:
    """T(u,v,w) = <D_u v - D_v u - [u,v], w> + <D_w u, v> on the coordinate frame."""
    C = connection_coefficients(pg, dd, connection)
    B = frame_brackets(pg)
    return C - np.einsum("jik->ijk", C) - B + np.einsum("kij->ijk", C)


def metricity_residual(pg: PointGeometry, connection: str = "Dcan", dd: DilatonData | None = None) -> np.ndarray:
    """pi(u)<v, w> - <D_u v, w> - <v, D_u w> on the coordinate frame."""
    d = pg.dim
    C = connection_coefficients(pg, dd, connection)
    deta = np.zeros((2 * d,) * 3)
    deta[:d, :d, :d] = pg.dg
    deta[:d, d:, d:] = -pg.dg
    deta[d:, :d, :d] = pg.dg
    deta[d:, d:, d:] = -pg.dg
    return deta - C - np.einsum("ikj->ijk", C)


def gen_divergence(pg: PointGeometry, dd: DilatonData | None, connection: str, v: SectionField) -> float:
    """div^D(v) = tr(u -> D_u v) using the pairing-dual frame."""
    d = pg.dim
    fr = frame(d)
    eta_inv = np.linalg.inv(eta_matrix(pg.g))
    vals = np.array([[pairing(pg.g, connection_apply(pg, dd, connection, u, v), w) for w in fr] for u in fr])
    return float(np.einsum("ij,ij->", eta_inv, vals))


def metric_divergence(pg: PointGeometry, v: SectionField) -> float:
    """div^G(v) = div_g(pi v)."""
    return float(np.trace(nabla_vector(pg, v.vec, v.dvec)))


def s_tensor(pg: PointGeometry, dd: DilatonData) -> np.ndarray:
    """S[I, J, K] = <S_{f_I} f_J, f_K> on the coordinate frame."""
    fr = frame(pg.dim)
    return np.array([[[pairing(pg.g, s_apply(pg, dd, u, v), w) for w in fr] for v in fr] for u in fr])


def d0_e(pg: PointGeometry, dd: DilatonData, band: int, u_band: int) -> np.ndarray:
    """pi(D0_{f_m} e_band)^n for u = f_m in ``u_band``, as array [m, n]."""
    e = dd.e_field(pg, band)
    coeff = 1.0 / 6.0 if u_band == band else 0.5
    return nabla_vector(pg, e.vec, e.dvec) + band * coeff * np.einsum("mbc,b,cn->mn", pg.H, e.vec, pg.g_inv)


def d0_chi_deriv(pg: PointGeometry, dd: DilatonData, u: GenSection, band: int) -> np.ndarray:
    """[D0_u chi^{e_band}](v, w, x) on coordinate sections v, w, x of ``band``.

    Equals G(v,w) G(D0_u e, x) - G(D0_u e, w) G(v, x).
    """
    De = d0_apply(pg, u, dd.e_field(pg, band)).vec
    De_low = pg.g @ De
    return np.einsum("vw,x->vwx", pg.g, De_low) - np.einsum("w,vx->vwx", De_low, pg.g)


def d0_chi_deriv_all(pg: PointGeometry, dd: DilatonData, band: int, u_band: int) -> np.ndarray:
    """As d0_chi_deriv for every coordinate u in ``u_band``: array [u, v, w, x]."""
    De_low = d0_e(pg, dd, band, u_band) @ pg.g
    return np.einsum("vw,ux->uvwx", pg.g, De_low) - np.einsum("uw,vx->uvwx", De_low, pg.g)


# --------------------------------------------------------------------------
# Prolongation of so(V) and the trace map
# --------------------------------------------------------------------------

def _null_space(M: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    if M.size == 0:
        return np.eye(M.shape[1])
    _, s, vt = np.linalg.svd(M)
    rank = int(np.sum(s > tol * max(1.0, s.max(initial=0.0))))
    return vt[rank:].T


def prolongation_check(n: int, signature: tuple[int, int] | None = None,
                       e_vector: Sequence[float] | None = None, tol: float = 1e-10) -> dict:
    """Linear-algebra facts about so(V)^<1> = ker(cyclic sum) in V* x L2 V*.

    Checks the dimension count, surjectivity of the trace map, nondegeneracy
    of ker tr, and that chi^e is orthogonal to ker tr with trace (1-n)<e,.>.
    """
    if not 2 <= n <= 5:
        raise ValueError(f"n must lie in 2..5, got {n}")
    p, q = signature if signature is not None else (n, 0)
    if p + q != n or p < 0 or q < 0:
        raise ValueError(f"signature {signature} does not match n={n}")
    eta = np.diag([1.0] * p + [-1.0] * q)
    eta_inv = np.linalg.inv(eta)
    e = np.zeros(n) if e_vector is None else np.asarray(e_vector, dtype=float)
    if e_vector is None:
        e[0] = 1.0

    # basis of V* x L2 V*: S(u, v, w) antisymmetric in (v, w)
    pairs = [(j, k) for j in range(n) for k in range(j + 1, n)]
    basis = []
    for i in range(n):
        for (j, k) in pairs:
            S = np.zeros((n, n, n))
            S[i, j, k] = 1.0
            S[i, k, j] = -1.0
            basis.append(S.ravel())
    basis = np.array(basis).T  # columns

    def cyclic(S):
        S = S.reshape(n, n, n)
        return S + np.einsum("jki->ijk", S) + np.einsum("kij->ijk", S)

    triples = list(itertools.combinations(range(n), 3))
    d_matrix = np.array([[cyclic(basis[:, c])[t] for c in range(basis.shape[1])] for t in triples]).reshape(
        len(triples), basis.shape[1])
    ker_d = basis @ _null_space(d_matrix) if triples else basis

    def trace_map(S):
        # tr(S)(v) = sum_i S(e_i, v, e^i)
        S = S.reshape(n, n, n)
        return np.einsum("ivk,ki->v", S, eta_inv)

    tr_matrix = np.array([trace_map(ker_d[:, c]) for c in range(ker_d.shape[1])]).T
    tr_rank = int(np.linalg.matrix_rank(tr_matrix, tol=tol)) if tr_matrix.size else 0
    ker_tr = ker_d @ _null_space(tr_matrix) if ker_d.shape[1] else ker_d
    if ker_tr.shape[1]:
        q_, _ = np.linalg.qr(ker_tr)
        ker_tr = q_

    metric3 = np.einsum("ad,be,cf->abcdef", eta_inv, eta_inv, eta_inv).reshape(n**3, n**3)
    gram = ker_tr.T @ metric3 @ ker_tr
    gram_det = float(np.linalg.det(gram)) if gram.size else 1.0

    chi = np.einsum("ab,c->abc", eta, eta @ e) - np.einsum("ac,b->abc", eta, eta @ e)
    chi_flat = chi.ravel()
    chi_ortho = float(np.abs(ker_tr.T @ metric3 @ chi_flat).max(initial=0.0))
    chi_trace_err = float(np.abs(trace_map(chi_flat) - (1 - n) * (eta @ e)).max())
    chi_cyclic = float(np.abs(cyclic(chi_flat)).max())

    expected_dim = n * n * (n - 1) // 2 - math.comb(n, 3)
    report = {
        "n": n,
        "signature": [p, q],
        "dim_ker_cyclic": int(ker_d.shape[1]),
        "expected_dim_ker_cyclic": expected_dim,
        "trace_rank": tr_rank,
        "dim_ker_trace": int(ker_tr.shape[1]),
        "gram_det": gram_det,
        "chi_orthogonality": chi_ortho,
        "chi_trace_error": chi_trace_err,
        "chi_cyclic_sum": chi_cyclic,
    }
    report["passed"] = bool(
        ker_d.shape[1] == expected_dim
        and tr_rank == n
        and abs(gram_det) > tol
        and chi_ortho < tol
        and chi_trace_err < tol
        and chi_cyclic < tol
    )
    return report
