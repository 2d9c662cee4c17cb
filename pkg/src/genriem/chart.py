"""Chart files: parsing, canonical serialization and linear coordinate changes.

A chart file is line oriented. ``#`` starts a comment, blank lines are
ignored, and the accepted directives are::

    dim: <int >= 2>
    coords: <dim identifiers>
    param <name>: <decimal>
    g <i> <j>: <expression>          # 0-based, symmetric closure
    H <i> <j> <k>: <expression>      # i < j < k, antisymmetric closure
    X <i>: <expression>
    xi <i>: <expression>

``dim`` and ``coords`` must come before any field line. Entries that are not
given are zero.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import expr
from .expr import BinOp, Node, Num, number, parse_expression, pretty, substitute

FORMAT_VERSION = 1

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_DECIMAL = re.compile(r"^[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?$")
_RESERVED = set(expr.FUNCTIONS) | set(expr.CONSTANTS)


class ChartError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass
class GeometryData:
    """Expression tables for g, H, X and xi on one chart."""

    dim: int
    coords: tuple[str, ...]
    params: dict[str, float] = field(default_factory=dict)
    g: dict[tuple[int, int], Node] = field(default_factory=dict)
    H: dict[tuple[int, int, int], Node] = field(default_factory=dict)
    X: dict[int, Node] = field(default_factory=dict)
    xi: dict[int, Node] = field(default_factory=dict)

    def __post_init__(self):
        self.coords = tuple(self.coords)
        if self.dim < 2:
            raise ChartError(f"dim must be at least 2 (got {self.dim}); curvature formulas divide by dim-1")
        if len(self.coords) != self.dim:
            raise ChartError(f"{len(self.coords)} coordinates for dim {self.dim}")
        for (i, j) in self.g:
            if not 0 <= i <= j < self.dim:
                raise ChartError(f"g index ({i},{j}) must satisfy 0 <= i <= j < dim")
        for (i, j, k) in self.H:
            if not 0 <= i < j < k < self.dim:
                raise ChartError(f"H index ({i},{j},{k}) must satisfy 0 <= i < j < k < dim")
        for table in (self.X, self.xi):
            for i in table:
                if not 0 <= i < self.dim:
                    raise ChartError(f"vector index {i} out of range")
        if not any(i == j for (i, j) in self.g):
            raise ChartError("metric has no diagonal entry")

    @property
    def symbols(self) -> set[str]:
        return set(self.coords) | set(self.params)

    def with_fields(self, **changes) -> "GeometryData":
        data = dict(dim=self.dim, coords=self.coords, params=dict(self.params),
                    g=dict(self.g), H=dict(self.H), X=dict(self.X), xi=dict(self.xi))
        data.update(changes)
        return GeometryData(**data)


@dataclass
class ChartFile:
    geometry: GeometryData
    path: str | None = None
    version: int = FORMAT_VERSION


def _parse_indices(tokens: Sequence[str], count: int, lineno: int, dim: int) -> tuple[int, ...]:
    if len(tokens) != count:
        raise ChartError(f"expected {count} indices, got {len(tokens)}", lineno)
    try:
        idx = tuple(int(t) for t in tokens)
    except ValueError:
        raise ChartError(f"indices must be integers: {' '.join(tokens)}", lineno) from None
    for i in idx:
        if not 0 <= i < dim:
            raise ChartError(f"index {i} out of range for dim {dim}", lineno)
    return idx


def parse_chart_file(text: str, path: str | None = None) -> GeometryData:
    dim: int | None = None
    coords: tuple[str, ...] | None = None
    params: dict[str, float] = {}
    pending: list[tuple[str, tuple[int, ...], str, int, int]] = []
    seen: set[tuple] = set()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise ChartError(f"unknown directive {line!r}", lineno)
        head, body = line.split(":", 1)
        body_offset = raw.index(":") + 1
        body_lstrip = len(body) - len(body.lstrip())
        body = body.strip()
        words = head.split()
        if not words:
            raise ChartError("missing directive name", lineno)
        key = words[0]

        if key == "dim":
            if len(words) != 1 or dim is not None:
                raise ChartError("duplicate or malformed dim", lineno)
            if not re.fullmatch(r"\d+", body):
                raise ChartError(f"dim must be an integer, got {body!r}", lineno)
            dim = int(body)
            if dim < 2:
                raise ChartError(f"dim must be at least 2 (got {dim}); curvature formulas divide by dim-1", lineno)
            continue
        if key == "coords":
            if len(words) != 1 or coords is not None:
                raise ChartError("duplicate or malformed coords", lineno)
            if dim is None:
                raise ChartError("coords before dim", lineno)
            names = tuple(body.split())
            if len(names) != dim:
                raise ChartError(f"expected {dim} coordinate names, got {len(names)}", lineno)
            for n in names:
                if not _IDENT.match(n) or n in _RESERVED:
                    raise ChartError(f"invalid coordinate name {n!r}", lineno)
            if len(set(names)) != len(names):
                raise ChartError("repeated coordinate name", lineno)
            coords = names
            continue
        if key == "param":
            if len(words) != 2 or not _IDENT.match(words[1]) or words[1] in _RESERVED:
                raise ChartError(f"malformed parameter declaration {head!r}", lineno)
            name = words[1]
            if name in params:
                raise ChartError(f"duplicate parameter {name!r}", lineno)
            if not _DECIMAL.match(body):
                raise ChartError(f"parameter value must be a decimal, got {body!r}", lineno)
            params[name] = float(body)
            continue

        arity = {"g": 2, "H": 3, "X": 1, "xi": 1}.get(key)
        if arity is None:
            raise ChartError(f"unknown directive {key!r}", lineno)
        if dim is None or coords is None:
            raise ChartError("field lines must follow dim and coords", lineno)
        idx = _parse_indices(words[1:], arity, lineno, dim)
        if key == "g":
            idx = tuple(sorted(idx))
        if key == "H" and not (idx[0] < idx[1] < idx[2]):
            raise ChartError(f"H indices must be strictly increasing, got {idx}", lineno)
        if (key, idx) in seen:
            raise ChartError(f"duplicate entry {key} {' '.join(map(str, idx))}", lineno)
        seen.add((key, idx))
        pending.append((key, idx, body, lineno, body_offset + body_lstrip))

    if dim is None or coords is None:
        raise ChartError("chart must declare dim and coords")
    clash = set(params) & set(coords)
    if clash:
        raise ChartError(f"parameter names clash with coordinates: {sorted(clash)}")

    symbols = set(coords) | set(params)
    tables: dict[str, dict] = {"g": {}, "H": {}, "X": {}, "xi": {}}
    for key, idx, body, lineno, col in pending:
        try:
            node = parse_expression(body, symbols)
        except expr.ExprError as exc:
            raise ChartError(f"{exc} (column {col + (exc.pos or 0) + 1})", lineno) from exc
        tables[key][idx if arity_of(key) > 1 else idx[0]] = node
    return GeometryData(dim, coords, params, tables["g"], tables["H"], tables["X"], tables["xi"])


def arity_of(key: str) -> int:
    return {"g": 2, "H": 3, "X": 1, "xi": 1}[key]


def load_chart(path: str | Path) -> ChartFile:
    path = Path(path)
    return ChartFile(parse_chart_file(path.read_text(encoding="utf-8"), str(path)), str(path))


def format_chart(gd: GeometryData) -> str:
    """Canonical text form; ``parse_chart_file(format_chart(gd))`` equals ``gd``."""
    lines = [f"dim: {gd.dim}", f"coords: {' '.join(gd.coords)}"]
    for name in sorted(gd.params):
        lines.append(f"param {name}: {gd.params[name]!r}")
    for (i, j) in sorted(gd.g):
        lines.append(f"g {i} {j}: {pretty(gd.g[i, j])}")
    for (i, j, k) in sorted(gd.H):
        lines.append(f"H {i} {j} {k}: {pretty(gd.H[i, j, k])}")
    for i in sorted(gd.X):
        lines.append(f"X {i}: {pretty(gd.X[i])}")
    for i in sorted(gd.xi):
        lines.append(f"xi {i}: {pretty(gd.xi[i])}")
    return "\n".join(lines) + "\n"


def chart_hash(gd: GeometryData) -> str:
    return hashlib.sha256(format_chart(gd).encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------
# Linear coordinate changes x = A y + c
# --------------------------------------------------------------------------

def _sum(terms: list[Node]) -> Node | None:
    out = None
    for t in terms:
        out = t if out is None else BinOp("+", out, t)
    return out


def _scaled(c: float, node: Node) -> Node:
    return node if c == 1.0 else BinOp("*", number(c), node)


def linear_transform(gd: GeometryData, A: np.ndarray, shift: Sequence[float] | None = None,
                     names: Sequence[str] | None = None) -> GeometryData:
    """Re-express the chart in coordinates y with x = A y + shift.

    Tensor components pick up Jacobian factors: covariant slots transform with
    A, contravariant ones with A^{-1}.
    """
    A = np.asarray(A, dtype=float)
    d = gd.dim
    shift = np.zeros(d) if shift is None else np.asarray(shift, dtype=float)
    names = tuple(names) if names else tuple(f"{c}_" for c in gd.coords)
    Ainv = np.linalg.inv(A)

    mapping = {}
    for mu, cname in enumerate(gd.coords):
        terms = [_scaled(A[mu, a], expr.Var(names[a])) for a in range(d) if A[mu, a] != 0.0]
        if shift[mu] != 0.0:
            terms.append(number(shift[mu]))
        mapping[cname] = _sum(terms) or Num(0.0)

    def comp(table: Mapping, key) -> Node | None:
        node = table.get(key)
        return None if node is None else substitute(node, mapping)

    def g_entry(i, j):
        return comp(gd.g, tuple(sorted((i, j))))

    def h_entry(i, j, k):
        idx = (i, j, k)
        if len(set(idx)) < 3:
            return None, 0
        order = sorted(idx)
        perm = [order.index(v) for v in idx]
        sign = 1
        for p in range(3):
            for q in range(p + 1, 3):
                if perm[p] > perm[q]:
                    sign = -sign
        return comp(gd.H, tuple(order)), sign

    new_g = {}
    for a in range(d):
        for b in range(a, d):
            terms = []
            for mu in range(d):
                for nu in range(d):
                    c = A[mu, a] * A[nu, b]
                    node = g_entry(mu, nu)
                    if c != 0.0 and node is not None:
                        terms.append(_scaled(c, node))
            s = _sum(terms)
            if s is not None:
                new_g[a, b] = s
    new_h = {}
    for a in range(d):
        for b in range(a + 1, d):
            for c_ in range(b + 1, d):
                terms = []
                for mu in range(d):
                    for nu in range(d):
                        for rho in range(d):
                            node, sign = h_entry(mu, nu, rho)
                            c = sign * A[mu, a] * A[nu, b] * A[rho, c_]
                            if c != 0.0 and node is not None:
                                terms.append(_scaled(c, node))
                s = _sum(terms)
                if s is not None:
                    new_h[a, b, c_] = s

    def vector(table, inverse):
        out = {}
        for a in range(d):
            terms = []
            for mu in range(d):
                c = Ainv[a, mu] if inverse else A[mu, a]
                node = comp(table, mu)
                if c != 0.0 and node is not None:
                    terms.append(_scaled(c, node))
            s = _sum(terms)
            if s is not None:
                out[a] = s
        return out

    return GeometryData(d, names, dict(gd.params), new_g, new_h,
                        vector(gd.X, inverse=True), vector(gd.xi, inverse=False))
