"""Generalized bilateral weighted shifts on the truncated Hilbert module.

``(T x)_xi = W_xi x_{xi-1} U`` and its inverse ``(S y)_xi = W_{xi+1}^{-1} y_{xi+1} U^*``.
Powers are evaluated in closed form through the ordered weight products
:func:`forward_product` and :func:`inverse_product`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import CompactOp, UnitaryOp, identity, inverse, lower_bound_m, op_norm, INVERSION_THRESHOLD
from .errors import MalformedInputError, PreconditionError, SingularityError, WeightBoundError, WindowMismatchError
from .module_space import STORAGE_THRESHOLD, ModuleVector

__all__ = [
    "WeightFamily",
    "ShiftOperator",
    "apply_T",
    "apply_S",
    "apply_T_power",
    "apply_S_power",
    "apply_C_avg",
    "forward_product",
    "inverse_product",
    "identity_family",
]

_BOUND_SLACK = 1e-10


class WeightFamily:
    """Total function ``j -> W_j`` with declared bounds ``||W_j|| <= M``, ``||W_j^-1|| <= M_inv``.

    Bounds are checked lazily the first time an index is requested.  Families
    built from truncated translations supply ``inverse_provider`` (a
    pseudo-inverse exact away from the window boundary) and ``max_shift``,
    the number of basis positions a single factor can move a vector; see
    :meth:`safe_horizon`.
    """

    def __init__(self, window, provider: Callable[[int], CompactOp], M: float, M_inv: float,
                 inverse_provider: Callable[[int], CompactOp] | None = None,
                 max_shift: int = 0, name: str = "custom"):
        if not (np.isfinite(M) and np.isfinite(M_inv)) or M <= 0 or M_inv <= 0:
            raise MalformedInputError("weight bounds must be finite and positive")
        self.window = window
        self.provider = provider
        self.inverse_provider = inverse_provider
        self.M = float(M)
        self.M_inv = float(M_inv)
        self.max_shift = int(max_shift)
        self.name = name
        self._w = {}
        self._winv = {}

    def __repr__(self):
        return f"WeightFamily({self.name!r}, M={self.M:g}, M_inv={self.M_inv:g}, m_max={self.window.m_max})"

    @property
    def truncated(self) -> bool:
        return self.inverse_provider is not None and self.max_shift > 0

    def weight(self, j: int) -> CompactOp:
        w = self._w.get(j)
        if w is None:
            w = self.provider(j)
            if not isinstance(w, CompactOp):
                w = CompactOp(self.window, w)
            if w.window != self.window:
                raise WindowMismatchError(f"W_{j} lives on a different window")
            nrm = op_norm(w)
            if nrm > self.M * (1 + _BOUND_SLACK):
                raise WeightBoundError(f"||W_{j}|| = {nrm:.6g} exceeds declared M = {self.M:g}")
            if self.inverse_provider is None:
                smin = lower_bound_m(w)
                if smin <= INVERSION_THRESHOLD:
                    raise SingularityError(f"W_{j} is not invertible", smin)
            self._w[j] = w
        return w

    def inverse(self, j: int) -> CompactOp:
        w = self._winv.get(j)
        if w is None:
            if self.inverse_provider is None:
                w = inverse(self.weight(j))
            else:
                self.weight(j)
                w = self.inverse_provider(j)
                if not isinstance(w, CompactOp):
                    w = CompactOp(self.window, w)
            nrm = op_norm(w)
            if nrm > self.M_inv * (1 + _BOUND_SLACK):
                raise WeightBoundError(f"||W_{j}^-1|| = {nrm:.6g} exceeds declared M_inv = {self.M_inv:g}")
            self._winv[j] = w
        return w

    def safe_horizon(self, m: int) -> int | None:
        """Largest product length that is exact on operators with range in P_m.

        ``None`` means every product is exact (no truncation involved).
        """
        if not self.truncated:
            return None
        return max(self.window.m_max - m, 0) // self.max_shift

    @classmethod
    def scalar(cls, window, values: Callable[[int], complex], M: float, M_inv: float, name="scalar"):
        """Family ``W_j = values(j) * I``."""
        eye = np.eye(window.dim, dtype=complex)
        return cls(window, lambda j: CompactOp(window, complex(values(j)) * eye), M, M_inv, name=name)

    @classmethod
    def constant(cls, window, w: CompactOp, name="constant"):
        """Family with the same operator at every index."""
        M = op_norm(w)
        M_inv = op_norm(inverse(w))
        return cls(window, lambda j: w, M, M_inv, name=name)


@dataclass(frozen=True, eq=False)
class ShiftOperator:
    weights: WeightFamily
    U: UnitaryOp

    def __post_init__(self):
        if self.U.window != self.weights.window:
            raise WindowMismatchError("weights and unitary live on different windows")

    @property
    def window(self):
        return self.weights.window


def forward_product(weights: WeightFamily, j: int, n: int) -> CompactOp:
    """``W_{j+n} W_{j+n-1} ... W_{j+1}``, accumulated left to right."""
    if n < 1:
        raise PreconditionError(f"product length must be >= 1, got {n}")
    acc = weights.weight(j + n).entries
    for i in range(j + n - 1, j, -1):
        acc = acc @ weights.weight(i).entries
    return CompactOp._trusted(weights.window, acc)


def inverse_product(weights: WeightFamily, j: int, n: int) -> CompactOp:
    """``W_{j-n+1}^-1 W_{j-n+2}^-1 ... W_j^-1``, accumulated left to right."""
    if n < 1:
        raise PreconditionError(f"product length must be >= 1, got {n}")
    acc = weights.inverse(j - n + 1).entries
    for i in range(j - n + 2, j + 1):
        acc = acc @ weights.inverse(i).entries
    return CompactOp._trusted(weights.window, acc)


def _check_vector(op: ShiftOperator, x: ModuleVector):
    if x.window != op.window:
        raise WindowMismatchError("vector and operator live on different windows")


def apply_T(op: ShiftOperator, x: ModuleVector) -> ModuleVector:
    _check_vector(op, x)
    u = op.U.matrix
    return ModuleVector(op.window, {xi + 1: op.weights.weight(xi + 1) @ c @ u for xi, c in x.coeffs.items()})


def apply_S(op: ShiftOperator, y: ModuleVector) -> ModuleVector:
    _check_vector(op, y)
    us = op.U.power(-1)
    return ModuleVector(op.window, {xi - 1: op.weights.inverse(xi) @ c @ us for xi, c in y.coeffs.items()})


def _check_power(n):
    if int(n) != n or n < 1:
        raise PreconditionError(f"power must be a positive integer, got {n!r}")


def apply_T_power(op: ShiftOperator, n: int, x: ModuleVector,
                  threshold: float = STORAGE_THRESHOLD) -> ModuleVector:
    """Closed form: coefficient ``x_xi`` moves to ``xi + n`` as ``W_{xi+n}...W_{xi+1} x_xi U^n``.

    ``threshold`` is the storage threshold of the result; pass 0 when the
    output will be amplified later (dropped dust does not stay small).
    """
    _check_power(n)
    _check_vector(op, x)
    un = op.U.power(n)
    return ModuleVector(op.window, {xi + n: forward_product(op.weights, xi, n) @ c @ un
                                    for xi, c in x.coeffs.items()}, threshold)


def apply_S_power(op: ShiftOperator, n: int, y: ModuleVector,
                  threshold: float = STORAGE_THRESHOLD) -> ModuleVector:
    """Closed form: ``y_xi`` moves to ``xi - n`` as ``W_{xi-n+1}^-1...W_xi^-1 y_xi U^{*n}``."""
    _check_power(n)
    _check_vector(op, y)
    usn = op.U.power(-n)
    return ModuleVector(op.window, {xi - n: inverse_product(op.weights, xi, n) @ c @ usn
                                    for xi, c in y.coeffs.items()}, threshold)


def apply_C_avg(op: ShiftOperator, n: int, x: ModuleVector) -> ModuleVector:
    return (apply_T_power(op, n, x) + apply_S_power(op, n, x)) * 0.5


def identity_family(window) -> WeightFamily:
    eye = identity(window)
    return WeightFamily(window, lambda j: eye, 1.0, 1.0, name="identity")
