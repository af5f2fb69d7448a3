"""Finitely supported model of the standard Hilbert module over the compacts.

A :class:`ModuleVector` is a Z-indexed sequence of window operators with
finite support.  Shifts translate the support, so no index horizon is ever
imposed on a vector.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .core import BasisWindow, CompactOp, op_norm, projection_P
from .errors import MalformedInputError, PreconditionError, WindowMismatchError

__all__ = [
    "IndexRange",
    "ModuleVector",
    "STORAGE_THRESHOLD",
    "inner_product",
    "norm2",
    "dense_class_element",
    "ptilde",
    "add",
    "sub",
    "scale",
    "distance",
    "to_json",
    "from_json",
]

STORAGE_THRESHOLD = 1e-15


@dataclass(frozen=True)
class IndexRange:
    """The symmetric module index range [J] = {-J, ..., J}."""

    J: int

    def __post_init__(self):
        if int(self.J) != self.J or self.J < 0:
            raise MalformedInputError(f"J must be a nonnegative integer, got {self.J!r}")

    def __iter__(self):
        return iter(range(-self.J, self.J + 1))

    def __contains__(self, j):
        return -self.J <= j <= self.J

    def __len__(self):
        return 2 * self.J + 1


def _as_range(J) -> IndexRange:
    return J if isinstance(J, IndexRange) else IndexRange(J)


class ModuleVector:
    """Immutable finitely supported sequence ``xi -> x_xi``.

    Coefficients whose Frobenius norm is at most ``threshold`` are dropped on
    construction; since the Frobenius norm dominates the operator norm, every
    dropped coefficient has operator norm below the threshold as well.
    """

    __slots__ = ("window", "_coeffs")

    def __init__(self, window: BasisWindow, coeffs: Mapping[int, CompactOp] | None = None,
                 threshold: float = STORAGE_THRESHOLD):
        kept = {}
        for xi, c in (coeffs or {}).items():
            if not isinstance(c, CompactOp):
                c = CompactOp(window, c)
            elif c.window != window:
                raise WindowMismatchError(f"coefficient at {xi} lives on a different window")
            if c.frobenius() > threshold:
                kept[int(xi)] = c
        self.window = window
        self._coeffs = MappingProxyType(dict(sorted(kept.items())))

    @classmethod
    def zero(cls, window):
        return cls(window, {})

    @property
    def coeffs(self) -> Mapping[int, CompactOp]:
        return self._coeffs

    @property
    def support(self) -> frozenset:
        return frozenset(self._coeffs)

    def __getitem__(self, xi) -> CompactOp:
        c = self._coeffs.get(xi)
        if c is None:
            return CompactOp._trusted(self.window, np.zeros((self.window.dim,) * 2, dtype=complex))
        return c

    def __len__(self):
        return len(self._coeffs)

    def __repr__(self):
        return f"ModuleVector(m_max={self.window.m_max}, support={sorted(self._coeffs)})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, c):
        return scale(self, c)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)


def _same_window(x: ModuleVector, y: ModuleVector):
    if x.window != y.window:
        raise WindowMismatchError(
            f"module vectors on windows m_max={x.window.m_max} and m_max={y.window.m_max}")


def inner_product(x: ModuleVector, y: ModuleVector) -> CompactOp:
    """The A-valued inner product <x, y> = sum_j x_j^* y_j."""
    _same_window(x, y)
    acc = np.zeros((x.window.dim,) * 2, dtype=complex)
    for xi in x.support & y.support:
        acc += x.coeffs[xi].entries.conj().T @ y.coeffs[xi].entries
    return CompactOp._trusted(x.window, acc)


def norm2(x: ModuleVector) -> float:
    if not len(x):
        return 0.0
    return float(np.sqrt(op_norm(inner_product(x, x))))


def dense_class_element(J, m: int, coeffs: Mapping[int, CompactOp], window: BasisWindow | None = None) -> ModuleVector:
    """Element of the dense class: x_j = P_m coeffs[j] on [J], zero elsewhere."""
    J = _as_range(J)
    if window is None:
        if not coeffs:
            raise MalformedInputError("window is required when no coefficients are given")
        window = next(iter(coeffs.values())).window
    p = projection_P(window, m)
    out = {}
    for j, c in coeffs.items():
        if j not in J:
            raise PreconditionError(f"coefficient index {j} lies outside [{J.J}]")
        out[j] = p @ c
    return ModuleVector(window, out)


def ptilde(window: BasisWindow, J, m: int) -> ModuleVector:
    J = _as_range(J)
    p = projection_P(window, m)
    return ModuleVector(window, {j: p for j in J})


def add(x: ModuleVector, y: ModuleVector) -> ModuleVector:
    _same_window(x, y)
    out = dict(x.coeffs)
    for xi, c in y.coeffs.items():
        out[xi] = out[xi] + c if xi in out else c
    return ModuleVector(x.window, out)


def sub(x: ModuleVector, y: ModuleVector) -> ModuleVector:
    _same_window(x, y)
    out = dict(x.coeffs)
    for xi, c in y.coeffs.items():
        out[xi] = out[xi] - c if xi in out else -c
    return ModuleVector(x.window, out)


def scale(x: ModuleVector, c: complex) -> ModuleVector:
    return ModuleVector(x.window, {xi: v * c for xi, v in x.coeffs.items()})


def distance(x: ModuleVector, y: ModuleVector) -> float:
    return norm2(sub(x, y))


def to_json(x: ModuleVector) -> str:
    doc = {
        "m_max": x.window.m_max,
        "coeffs": [
            {"xi": xi, "re": c.entries.real.tolist(), "im": c.entries.imag.tolist()}
            for xi, c in x.coeffs.items()
        ],
    }
    return json.dumps(doc)


def from_json(text: str) -> ModuleVector:
    try:
        doc = json.loads(text)
        window = BasisWindow(int(doc["m_max"]))
        coeffs = {}
        for item in doc["coeffs"]:
            xi = int(item["xi"])
            if xi in coeffs:
                raise MalformedInputError(f"duplicate module index {xi}")
            coeffs[xi] = CompactOp(window, np.asarray(item["re"], float) + 1j * np.asarray(item["im"], float))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, MalformedInputError):
            raise
        raise MalformedInputError(f"bad module-vector document: {exc}") from exc
    return ModuleVector(window, coeffs)
