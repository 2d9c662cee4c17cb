"""Built-in chart corpus G0..G5 shipped as chart files next to this module."""

from __future__ import annotations

import math
from importlib import resources
from pathlib import Path

from .chart import ChartFile, GeometryData, format_chart, load_chart, parse_chart_file
from .oracle import SplitMix64

BUILTIN = ("G0", "G1", "G2", "G3", "G4", "G5")
ACCEPTANCE = ("G0", "G1", "G2", "G3", "G4")

# Sampling boxes are [lo, hi] around these centres; G1 is centred away from the poles.
CENTRES = {"G1": (math.pi / 2, 0.0)}

G4_SEED = 20240607
G5_SEED = 7


def chart_dir() -> Path:
    return Path(str(resources.files("genriem") / "charts"))


def builtin_path(name: str) -> Path:
    if name not in BUILTIN:
        raise KeyError(f"unknown built-in chart {name!r}; choose from {', '.join(BUILTIN)}")
    return chart_dir() / f"{name}.chart"


def centre(name: str | None, dim: int) -> list[float]:
    return list(CENTRES.get(name or "", (0.0,) * dim))


def load(name_or_path: str) -> tuple[ChartFile, str | None]:
    """Load a built-in chart by name or a chart file by path; returns (chart, builtin name)."""
    if name_or_path in BUILTIN:
        return load_chart(builtin_path(name_or_path)), name_or_path
    return load_chart(name_or_path), None


def _coef(rng: SplitMix64, scale: float = 1.0) -> float:
    return round(scale * rng.uniform(-1.0, 1.0), 3)


def _poly(terms: list[tuple[float, str]]) -> str:
    parts = []
    for c, mono in terms:
        if c == 0.0:
            continue
        sign = "-" if c < 0 else "+"
        body = f"{abs(c)!r}" if not mono else f"{abs(c)!r}*{mono}"
        parts.append((sign, body))
    if not parts:
        return "0"
    head = ("-" if parts[0][0] == "-" else "") + parts[0][1]
    return " ".join([head] + [f"{s} {b}" for s, b in parts[1:]])


def make_g4(seed: int = G4_SEED, dim: int = 4) -> GeometryData:
    """Random polynomial geometry: g = delta + 0.1*quadratic, H = dB for linear B, linear X and xi."""
    rng = SplitMix64(seed)
    xs = [f"x{i}" for i in range(dim)]
    quad = [(k, l) for k in range(dim) for l in range(k, dim)]
    lines = [f"dim: {dim}", f"coords: {' '.join(xs)}"]
    for i in range(dim):
        for j in range(i, dim):
            terms = [(_coef(rng), f"{xs[k]}*{xs[l]}" if k != l else f"{xs[k]}^2") for k, l in quad]
            body = f"0.1*({_poly(terms)})"
            lines.append(f"g {i} {j}: " + (f"1 + {body}" if i == j else body))
    # B_ij = sum_k b[i][j][k] x_k, so (dB)_ijk = b_jk,i - b_ik,j + b_ij,k (constants)
    b = {}
    for i in range(dim):
        for j in range(i + 1, dim):
            b[i, j] = [_coef(rng, 0.5) for _ in range(dim)]

    def B_deriv(i, j, k):
        if i == j:
            return 0.0
        return b[i, j][k] if i < j else -b[j, i][k]

    for i in range(dim):
        for j in range(i + 1, dim):
            for k in range(j + 1, dim):
                h = B_deriv(j, k, i) + B_deriv(k, i, j) + B_deriv(i, j, k)
                lines.append(f"H {i} {j} {k}: {round(h, 6)!r}")
    for key in ("X", "xi"):
        for i in range(dim):
            terms = [(_coef(rng, 0.3), "")] + [(_coef(rng, 0.3), xs[k]) for k in range(dim)]
            lines.append(f"{key} {i}: {_poly(terms)}")
    return parse_chart_file("\n".join(lines) + "\n")


def make_g5(seed: int = G5_SEED) -> GeometryData:
    """Three-dimensional non-polynomial geometry with non-constant closed H."""
    rng = SplitMix64(seed)
    c = [_coef(rng, 0.2) for _ in range(12)]
    lines = [
        "dim: 3",
        "coords: x y z",
        f"g 0 0: exp({c[0]!r}*y) + {abs(c[1])!r}*z^2",
        f"g 0 1: {c[2]!r}*sin(x + z)",
        f"g 1 1: 1 + {abs(c[3])!r}*cosh(x)",
        f"g 1 2: {c[4]!r}*x*y",
        f"g 2 2: 1/(1 + {abs(c[5])!r}*x^2)",
        f"H 0 1 2: 0.3 + {c[6]!r}*cos(y) + {c[7]!r}*x*z",
        f"X 0: {c[8]!r} + sin(y)/4",
        f"X 1: {c[9]!r}*z",
        f"xi 1: {c[10]!r} + x*z/5",
        f"xi 2: {c[11]!r}*exp(y/2)",
    ]
    return parse_chart_file("\n".join(lines) + "\n")


GENERATORS = {"G4": make_g4, "G5": make_g5}


def regenerate(name: str) -> str:
    """Canonical text of a generated built-in chart (used to write and to verify the shipped file)."""
    header = f"# {name}: generated by genriem.builtin.{GENERATORS[name].__name__}; do not edit\n"
    return header + format_chart(GENERATORS[name]())
