"""Dense tensors at a point with per-slot variance."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

UP, DOWN = "u", "d"


class TensorError(ValueError):
    pass


@dataclass(frozen=True)
class TensorValue:
    """Components of a tensor at one point; ``variance[k]`` is 'u' or 'd'."""

    comps: np.ndarray
    variance: tuple[str, ...]

    def __post_init__(self):
        comps = np.asarray(self.comps, dtype=float)
        object.__setattr__(self, "comps", comps)
        variance = tuple(self.variance)
        object.__setattr__(self, "variance", variance)
        if any(v not in (UP, DOWN) for v in variance):
            raise TensorError(f"bad variance {variance!r}")
        if comps.ndim != len(variance):
            raise TensorError(f"rank {len(variance)} but array has {comps.ndim} axes")
        if comps.ndim and len(set(comps.shape)) != 1:
            raise TensorError(f"non-square shape {comps.shape}")

    @classmethod
    def down(cls, comps) -> "TensorValue":
        comps = np.asarray(comps, dtype=float)
        return cls(comps, (DOWN,) * comps.ndim)

    @property
    def rank(self) -> int:
        return len(self.variance)

    @property
    def dim(self) -> int:
        return self.comps.shape[0] if self.rank else 0

    def __add__(self, other: "TensorValue") -> "TensorValue":
        if self.variance != other.variance:
            raise TensorError("variance mismatch")
        return TensorValue(self.comps + other.comps, self.variance)

    def __sub__(self, other: "TensorValue") -> "TensorValue":
        if self.variance != other.variance:
            raise TensorError("variance mismatch")
        return TensorValue(self.comps - other.comps, self.variance)

    def __mul__(self, c: float) -> "TensorValue":
        return TensorValue(self.comps * c, self.variance)

    __rmul__ = __mul__


def _check_slot(t: TensorValue, slot: int) -> None:
    if not 0 <= slot < t.rank:
        raise TensorError(f"slot {slot} out of range for rank {t.rank}")


def tensor_product(s: TensorValue, t: TensorValue) -> TensorValue:
    return TensorValue(np.multiply.outer(s.comps, t.comps), s.variance + t.variance)


def contract(t: TensorValue, slot_a: int, slot_b: int, metric: np.ndarray | None = None) -> TensorValue:
    """Trace over two slots.

    Mixed-variance pairs use the natural pairing. Like-variance pairs need
    ``metric``: the inverse metric for two down slots, the metric for two up slots.
    """
    _check_slot(t, slot_a)
    _check_slot(t, slot_b)
    if slot_a == slot_b:
        raise TensorError("contraction slots must differ")
    a, b = sorted((slot_a, slot_b))
    comps = t.comps
    if t.variance[a] == t.variance[b]:
        if metric is None:
            raise TensorError("like-variance contraction needs a metric")
        comps = np.moveaxis(np.tensordot(comps, np.asarray(metric), axes=([b], [1])), -1, b)
    out = np.trace(comps, axis1=a, axis2=b)
    variance = tuple(v for k, v in enumerate(t.variance) if k not in (a, b))
    return TensorValue(out, variance)


def raise_lower(t: TensorValue, slot: int, g: np.ndarray, g_inv: np.ndarray) -> TensorValue:
    """Flip the variance of one slot using g (lowering) or g_inv (raising)."""
    _check_slot(t, slot)
    m = g if t.variance[slot] == UP else g_inv
    comps = np.moveaxis(np.tensordot(np.asarray(m), t.comps, axes=([1], [slot])), 0, slot)
    variance = list(t.variance)
    variance[slot] = DOWN if t.variance[slot] == UP else UP
    return TensorValue(comps, tuple(variance))


def _permute(t: TensorValue, slots: Sequence[int], signed: bool) -> TensorValue:
    slots = list(slots)
    for s in slots:
        _check_slot(t, s)
    if len(set(t.variance[s] for s in slots)) > 1:
        raise TensorError("(anti)symmetrization over slots of mixed variance")
    if len(set(slots)) != len(slots):
        raise TensorError("repeated slot")
    out = np.zeros_like(t.comps)
    axes = list(range(t.rank))
    for perm in itertools.permutations(range(len(slots))):
        order = axes.copy()
        for k, p in enumerate(perm):
            order[slots[k]] = slots[p]
        sign = _perm_sign(perm) if signed else 1
        out += sign * np.transpose(t.comps, order)
    return TensorValue(out / math.factorial(len(slots)), t.variance)


def _perm_sign(perm: Sequence[int]) -> int:
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def symmetrize(t: TensorValue, slots: Sequence[int]) -> TensorValue:
    """Weight-1/k! symmetrization over ``slots``."""
    return _permute(t, slots, signed=False)


def antisymmetrize(t: TensorValue, slots: Sequence[int]) -> TensorValue:
    """Weight-1/k! antisymmetrization over ``slots``."""
    return _permute(t, slots, signed=True)


def norm_squared(t: TensorValue, g: np.ndarray, g_inv: np.ndarray) -> float:
    """Full contraction of t with itself, one metric factor per slot."""
    other = t.comps
    for slot, v in enumerate(t.variance):
        m = g_inv if v == DOWN else g
        other = np.moveaxis(np.tensordot(m, other, axes=([1], [slot])), 0, slot)
    return float(np.sum(t.comps * other))
