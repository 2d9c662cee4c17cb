"""Definitional generalized Riemann tensor and the identity suite.

The oracle builds the connection coefficients of the canonical generalized
Levi-Civita connection directly from g, H and e (no closed-form curvature
coefficients), differentiates them with first-order dual numbers, and
evaluates

    Rm(a,b,v,w) = 1/2 { <(D2_{v,w} - D2_{w,v}) b, a> + <(D2_{b,a} - D2_{a,b}) v, w>
                        - tr_E(<D v, w> <D b, a>) },   D2_{v,w} = D_v D_w - D_{D_v w}

on the 2d coordinate frame (f_m^+ at index m, f_m^- at index d + m).
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import expr
from .chart import GeometryData
from .gencore import (
    BANDS,
    DilatonData,
    GenSection,
    SectionField,
    chi_3form,
    connection_coefficients,
    eta_matrix,
    gen_divergence,
    gen_torsion,
    gmetric_matrix,
    metric_divergence,
    metricity_residual,
    pairing,
)
from .riemannian import GeometryError, PointGeometry, eval_point_geometry

MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 generator; uniform() returns (x >> 11) * 2**-53."""

    GAMMA = 0x9E3779B97F4A7C15
    MUL1 = 0xBF58476D1CE4E5B9
    MUL2 = 0x94D049BB133111EB

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + self.GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * self.MUL1) & MASK64
        z = ((z ^ (z >> 27)) * self.MUL2) & MASK64
        return z ^ (z >> 31)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        return lo + (hi - lo) * ((self.next_u64() >> 11) * 2.0**-53)

    def uniform_vector(self, n: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        return np.array([self.uniform(lo, hi) for _ in range(n)])


# --------------------------------------------------------------------------
# First-order dual numbers over arrays
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Dual:
    """Array value with directional derivatives; der[m, ...] = d_m val[...]."""

    val: np.ndarray
    der: np.ndarray

    @classmethod
    def const(cls, val, dim: int) -> "Dual":
        val = np.asarray(val, dtype=float)
        return cls(val, np.zeros((dim,) + val.shape))

    @property
    def dim(self) -> int:
        return self.der.shape[0]

    def __add__(self, other: "Dual") -> "Dual":
        return Dual(self.val + other.val, self.der + other.der)

    def __sub__(self, other: "Dual") -> "Dual":
        return Dual(self.val - other.val, self.der - other.der)

    def __neg__(self) -> "Dual":
        return Dual(-self.val, -self.der)

    def scale(self, c: float) -> "Dual":
        return Dual(c * self.val, c * self.der)

    def transpose(self, spec: str) -> "Dual":
        lhs, rhs = spec.split("->")
        return Dual(np.einsum(spec, self.val), np.einsum(f"Z{lhs}->Z{rhs}", self.der))

    def inv(self) -> "Dual":
        ai = np.linalg.inv(self.val)
        return Dual(ai, -np.einsum("ab,mbc,cd->mad", ai, self.der, ai))


def dual_einsum(spec: str, *ops: Dual) -> Dual:
    """einsum with the product rule; the derivative index is carried as 'Z'."""
    lhs, rhs = spec.split("->")
    terms = lhs.split(",")
    if "Z" in spec:
        raise ValueError("index letter Z is reserved")
    val = np.einsum(spec, *(o.val for o in ops))
    der = np.zeros((ops[0].dim,) + val.shape)
    for k in range(len(ops)):
        sub = ",".join(("Z" + t) if i == k else t for i, t in enumerate(terms))
        args = [o.der if i == k else o.val for i, o in enumerate(ops)]
        der = der + np.einsum(f"{sub}->Z{rhs}", *args)
    return Dual(val, der)


# --------------------------------------------------------------------------
# Connection coefficients as duals
# --------------------------------------------------------------------------

def _coefficient_duals(pg: PointGeometry, dd: DilatonData) -> Dual:
    """C[I, J, K] with D_{f_I} f_J = sum_K C[I, J, K] f_K, with first derivatives."""
    d = pg.dim
    g = Dual(pg.g, pg.dg)
    dg = Dual(pg.dg, pg.d2g)
    gi = g.inv()
    # Gamma^r_{mn} = 1/2 g^{rs} (d_m g_{sn} + d_n g_{sm} - d_s g_{mn})
    lower = (dg.transpose("msn->smn") + dg.transpose("nsm->smn") - dg).scale(0.5)
    gamma = dual_einsum("rs,smn->rmn", gi, lower)
    H = Dual(pg.H, pg.dH)
    h_up = dual_einsum("mns,sr->mnr", H, gi)  # g^{-1} H(d_m, d_n, .)
    X = Dual(dd.X, dd.dX)
    xi = Dual(dd.xi, dd.dxi)
    xi_up = dual_einsum("rs,s->r", gi, xi)
    delta = Dual.const(np.eye(d), d)

    C_val = np.zeros((2 * d,) * 3)
    C_der = np.zeros((d,) + C_val.shape)
    gamma_mn = gamma.transpose("rmn->mnr")
    for si, s in enumerate(BANDS):
        E = X + xi_up.scale(s)
        E_low = dual_einsum("ab,b->a", g, E)
        for ti, t in enumerate(BANDS):
            c = 1.0 / 6.0 if s == t else 0.5
            block = gamma_mn + h_up.scale(t * c)
            if s == t:
                # S_u v = (<u, v> e_s - u <e_s, v>) / (d - 1), <.,.> = s g on band s
                chi = (dual_einsum("mn,r->mnr", g, E) - dual_einsum("rm,n->mnr", delta, E_low)).scale(s / (d - 1))
                block = block + chi
            I0, J0 = si * d, ti * d
            C_val[I0:I0 + d, J0:J0 + d, J0:J0 + d] = block.val
            C_der[:, I0:I0 + d, J0:J0 + d, J0:J0 + d] = block.der
    return Dual(C_val, C_der)


def oracle_coefficients(pg: PointGeometry, dd: DilatonData | None = None) -> np.ndarray:
    """Frame-expansion coefficients of D (value only)."""
    dd = DilatonData.from_point(pg) if dd is None else dd
    return _coefficient_duals(pg, dd).val


def full_assembly(pg: PointGeometry, dd: DilatonData | None = None) -> np.ndarray:
    """All (2d)^4 components Rm[A, B, V, W] of the generalized Riemann tensor."""
    dd = DilatonData.from_point(pg) if dd is None else dd
    Cd = _coefficient_duals(pg, dd)
    C = Cd.val
    # d_{pi f_I} C[J, L, M]: f_m^+ and f_m^- both project to d_m
    dC = np.concatenate([Cd.der, Cd.der], axis=0)
    N = eta_matrix(pg.g)
    N_inv = np.linalg.inv(N)

    # D2[I, J, L, M]: (D_{f_I} D_{f_J} f_L - D_{D_{f_I} f_J} f_L) along f_M
    D2 = dC + np.einsum("jlk,ikm->ijlm", C, C) - np.einsum("ijk,klm->ijlm", C, C)
    Q = np.einsum("ijlm,ma->ijla", D2, N)         # <D2_{I,J} f_L, f_A>
    term1 = np.einsum("vwba->abvw", Q) - np.einsum("wvba->abvw", Q)
    term2 = np.einsum("bavw->abvw", Q) - np.einsum("abvw->abvw", Q)
    K = np.einsum("ivm,mw->ivw", C, N)            # <D_{f_I} f_V, f_W>
    term3 = np.einsum("ij,ivw,jba->abvw", N_inv, K, K)
    return 0.5 * (term1 + term2 - term3)


def _coeff_vector(s: GenSection) -> np.ndarray:
    d = s.vec.shape[0]
    out = np.zeros(2 * d)
    if s.band > 0:
        out[:d] = s.vec
    else:
        out[d:] = s.vec
    return out


def rm_oracle(pg: PointGeometry, dd: DilatonData | None, a: GenSection, b: GenSection,
              v: GenSection, w: GenSection, assembly: np.ndarray | None = None) -> float:
    R = full_assembly(pg, dd) if assembly is None else assembly
    return float(np.einsum("abvw,a,b,v,w->", R, *map(_coeff_vector, (a, b, v, w))))


def band_slice(dim: int, band: int) -> slice:
    return slice(0, dim) if band > 0 else slice(dim, 2 * dim)


def block(R: np.ndarray, bands: Sequence[int]) -> np.ndarray:
    """Sub-array of the full assembly with the given band per slot."""
    d = R.shape[0] // 2
    return R[tuple(band_slice(d, s) for s in bands)]


def full_ricci(R: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Rc(a, b) = tr_E Rm(., a, ., b) via the pairing-dual frame."""
    return np.einsum("ij,iajb->ab", np.linalg.inv(eta_matrix(g)), R)


def kretschmann_from_assembly(R: np.ndarray, g: np.ndarray) -> float:
    Gi = np.linalg.inv(gmetric_matrix(g))
    return float(np.einsum("abcd,ai,bj,ck,dl,ijkl->", R, Gi, Gi, Gi, Gi, R))


def symmetry_residuals(R: np.ndarray) -> dict[str, float]:
    return {
        "antisym_12": float(np.abs(R + np.einsum("bavw->abvw", R)).max()),
        "antisym_34": float(np.abs(R + np.einsum("abwv->abvw", R)).max()),
        "pair_symmetry": float(np.abs(R - np.einsum("vwab->abvw", R)).max()),
        "bianchi": float(np.abs(R + np.einsum("avwb->abvw", R) + np.einsum("awbv->abvw", R)).max()),
    }


def off_type_magnitude(R: np.ndarray) -> float:
    """Largest component of blocks that are neither pure nor mixed (two insertions per band)."""
    worst = 0.0
    for bands in itertools.product(BANDS, repeat=4):
        if sum(1 for s in bands if s > 0) == 2:
            worst = max(worst, float(np.abs(block(R, bands)).max()))
    return worst


# --------------------------------------------------------------------------
# Identity suite
# --------------------------------------------------------------------------

@dataclass
class Residual:
    abs: float = 0.0
    rel: float = 0.0
    worst_point: list[float] | None = None

    def update(self, diff: float, scale: float, point: np.ndarray) -> None:
        rel = diff / max(scale, 1e-300) if diff else 0.0
        if self.worst_point is None or diff > self.abs:
            self.worst_point = [float(x) for x in point]
            self.abs = diff
        self.rel = max(self.rel, rel)


@dataclass
class SuiteReport:
    n_points: int
    seed: int
    box: tuple[float, float]
    centre: list[float]
    tol: float
    residuals: dict[str, Residual] = field(default_factory=dict)
    info: dict[str, float] = field(default_factory=dict)
    failures: list[dict] = field(default_factory=list)
    points: list[list[float]] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.failures and all(r.abs < self.tol for r in self.residuals.values())

    def worst(self) -> tuple[str, Residual] | None:
        if not self.residuals:
            return None
        return max(self.residuals.items(), key=lambda kv: kv[1].abs)


def sample_points(dim: int, n_points: int, seed: int, box: tuple[float, float],
                  centre: Sequence[float] | None = None) -> list[np.ndarray]:
    rng = SplitMix64(seed)
    c = np.zeros(dim) if centre is None else np.asarray(centre, dtype=float)
    return [c + rng.uniform_vector(dim, box[0], box[1]) for _ in range(n_points)]


def _diff(a, b) -> tuple[float, float]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = float(np.abs(a - b).max(initial=0.0))
    scale = max(float(np.abs(a).max(initial=0.0)), float(np.abs(b).max(initial=0.0)))
    return diff, scale


def point_checks(pg: PointGeometry, dd: DilatonData, gd: GeometryData | None = None,
                 rng: SplitMix64 | None = None) -> tuple[dict[str, tuple[float, float]], dict[str, float]]:
    """All identity residuals at one point as {name: (abs diff, scale)}, plus info values."""
    from . import gencurv  # closed forms are only compared here

    d = pg.dim
    g = pg.g
    out: dict[str, tuple[float, float]] = {}
    info: dict[str, float] = {}
    rng = SplitMix64(0) if rng is None else rng

    # connection axioms
    T = gen_torsion(pg, "Dcan", dd)
    out["torsion_Dcan"] = (float(np.abs(T).max()), 1.0)
    out["metricity_Dcan"] = _diff(metricity_residual(pg, "Dcan", dd), 0.0)
    div_worst, div_scale = 0.0, 0.0
    for s in BANDS:
        for m in range(d):
            vec = np.zeros(d)
            vec[m] = 1.0
            v = SectionField(s, vec, np.zeros((d, d)))
            lhs = gen_divergence(pg, dd, "Dcan", v)
            rhs = metric_divergence(pg, v) - pairing(g, dd.e(pg, s), v.at())
            a, b = _diff(lhs, rhs)
            div_worst, div_scale = max(div_worst, a), max(div_scale, b)
    out["divergence_Dcan"] = (div_worst, div_scale)
    # D - D0 against an independent evaluation of (chi_+ + chi_-)/(d-1)
    dC = connection_coefficients(pg, dd, "Dcan") - connection_coefficients(pg, dd, "D0")
    fr = [GenSection(s, np.eye(d)[m]) for s in BANDS for m in range(d)]
    expected = np.zeros_like(dC)
    for I, u in enumerate(fr):
        for J, v in enumerate(fr):
            for K, w in enumerate(fr):
                if u.band == v.band == w.band:
                    s = u.band
                    eg = g @ dd.e(pg, s).vec
                    # <u,v><e,w> - <u,w><e,v>, each pairing carrying a factor s
                    expected[I, J, K] = (g[u.vec.argmax(), v.vec.argmax()] * eg[w.vec.argmax()]
                                         - g[u.vec.argmax(), w.vec.argmax()] * eg[v.vec.argmax()]) / (d - 1)
    out["S_tensor"] = _diff(dC, expected)
    chi_worst = 0.0
    for s in BANDS:
        e = dd.e(pg, s)
        for _ in range(3):
            a, b, c = (GenSection(s, rng.uniform_vector(d, -1, 1)) for _ in range(3))
            cyc = chi_3form(g, e, a, b, c) + chi_3form(g, e, b, c, a) + chi_3form(g, e, c, a, b)
            chi_worst = max(chi_worst, abs(cyc))
    out["chi_cyclic"] = (chi_worst, 1.0)

    # curvature: closed forms vs the definitional assembly
    R = full_assembly(pg, dd)
    sym = symmetry_residuals(R)
    for name, val in sym.items():
        out[f"oracle_{name}"] = (val, float(np.abs(R).max(initial=0.0)))
    info["off_type_block_max"] = off_type_magnitude(R)

    pure = [_diff(gencurv.rm_pure(pg, dd, s), block(R, (s, s, s, s))) for s in BANDS]
    out["rm_pure"] = (max(p[0] for p in pure), max(p[1] for p in pure))
    mixed = [_diff(gencurv.rm_mixed(pg, dd, s), block(R, (s, -s, s, s))) for s in BANDS]
    out["rm_mixed"] = (max(p[0] for p in mixed), max(p[1] for p in mixed))

    Rc = full_ricci(R, g)
    fr_pure = [_diff(gencurv.full_ricci_pure(pg, dd, s), block(Rc, (s, s))) for s in BANDS]
    out["full_ricci_pure"] = (max(p[0] for p in fr_pure), max(p[1] for p in fr_pure))
    rc_mixed = [_diff(gencurv.ricci_mixed(pg, dd, s), block(Rc, (-s, s))) for s in BANDS]
    out["ricci_mixed"] = (max(p[0] for p in rc_mixed), max(p[1] for p in rc_mixed))
    Gi = np.linalg.inv(gmetric_matrix(g))
    sc_trace = 0.5 * float(np.einsum("ab,ab->", Gi, Rc))
    out["gen_scalar"] = _diff(gencurv.gen_scalar(pg, dd), sc_trace)
    tr_e = float(np.einsum("ab,ab->", np.linalg.inv(eta_matrix(g)), Rc))
    out["trace_E"] = _diff(gencurv.trace_E(pg, dd), tr_e)

    # index-notation translation layer
    out["index_gen_scalar"] = _diff(gencurv.gen_scalar(pg, dd), gencurv.gen_scalar_index(pg, dd))
    out["index_trace_E"] = _diff(gencurv.trace_E(pg, dd), gencurv.trace_E_index(pg, dd))
    idx = [_diff(gencurv.ricci_mixed(pg, dd, s), gencurv.ricci_mixed_index(pg, dd, s)) for s in BANDS]
    out["index_ricci_mixed"] = (max(p[0] for p in idx), max(p[1] for p in idx))

    if gd is not None and not gd.H and not gd.X and not gd.xi:
        from .riemannian import riemann_classical
        from .tensors import norm_squared
        K = kretschmann_from_assembly(R, g)
        rm2 = norm_squared(riemann_classical(pg), g, pg.g_inv)
        out["kretschmann_degeneration"] = _diff(K, 4.0 * rm2)
    return out, info


def identity_suite(gd: GeometryData, n_points: int = 20, seed: int = 42,
                   box: tuple[float, float] = (-0.4, 0.4), tol: float = 1e-8,
                   centre: Sequence[float] | None = None) -> SuiteReport:
    if n_points < 1:
        raise ValueError("n_points must be at least 1")
    t0 = time.perf_counter()
    c = [0.0] * gd.dim if centre is None else [float(x) for x in centre]
    report = SuiteReport(n_points, seed, (float(box[0]), float(box[1])), c, tol)
    rng = SplitMix64(seed ^ 0x5DEECE66D)
    for x in sample_points(gd.dim, n_points, seed, box, c):
        report.points.append([float(v) for v in x])
        try:
            pg = eval_point_geometry(gd, x)
            res, info = point_checks(pg, DilatonData.from_point(pg), gd, rng)
        except (GeometryError, expr.ExprError, np.linalg.LinAlgError) as exc:
            report.failures.append({"point": [float(v) for v in x], "error": str(exc)})
            continue
        for name, (diff, scale) in res.items():
            report.residuals.setdefault(name, Residual()).update(diff, scale, x)
        for name, val in info.items():
            report.info[name] = max(report.info.get(name, 0.0), val)
    report.elapsed = time.perf_counter() - t0
    return report


# --------------------------------------------------------------------------
# Finite-difference audit of the jets
# --------------------------------------------------------------------------

def finite_diff_audit(gd: GeometryData, point: Sequence[float], step: float = 1e-4) -> dict:
    """Compare jet derivatives of every field against central differences."""
    x0 = np.asarray(point, dtype=float)
    if not step > 1e-12 * max(1.0, float(np.abs(x0).max(initial=0.0))):
        raise ValueError(f"finite-difference step {step} underflows at this point")
    entries = [("g", k, n) for k, n in gd.g.items()] + [("H", k, n) for k, n in gd.H.items()]
    entries += [("X", k, n) for k, n in gd.X.items()] + [("xi", k, n) for k, n in gd.xi.items()]
    per_field = {}
    for kind, key, node in entries:
        label = f"{kind}{key if isinstance(key, int) else ''.join(map(str, key))}"
        per_field[label] = expr.jet_consistency_check(node, gd.coords, x0, step, gd.params)
    return {"point": [float(v) for v in x0], "step": step,
            "max_rel": max(per_field.values(), default=0.0), "fields": per_field}
