"""Dense complex-matrix kernel over symmetric basis windows.

Every Hilbert-space operator lives on a :class:`BasisWindow`, the span of
``e_{-m_max}, ..., e_{m_max}``.  Row/column ``p`` of a matrix corresponds to
basis index ``p - m_max``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    MalformedInputError,
    SingularityError,
    WindowMismatchError,
    WindowOverflowError,
)

__all__ = [
    "BasisWindow",
    "CompactOp",
    "UnitaryOp",
    "op_norm",
    "lower_bound_m",
    "projection_P",
    "matmul",
    "add",
    "adjoint",
    "inverse",
    "identity",
    "INVERSION_THRESHOLD",
]

INVERSION_THRESHOLD = 1e-10
SVD_MAX_DIM = 256
POWER_ITER_TOL = 1e-12
POWER_ITER_MAX = 10_000
REUNITARIZE_EVERY = 64


@dataclass(frozen=True)
class BasisWindow:
    m_max: int

    def __post_init__(self):
        if int(self.m_max) != self.m_max or self.m_max < 0:
            raise MalformedInputError(f"m_max must be a nonnegative integer, got {self.m_max!r}")

    @property
    def dim(self) -> int:
        return 2 * self.m_max + 1

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.m_max, self.m_max + 1)

    def position(self, index: int) -> int:
        """Array position of basis index ``index``."""
        if abs(index) > self.m_max:
            raise WindowOverflowError(f"basis index {index} outside window of m_max={self.m_max}")
        return index + self.m_max

    def basis_vector(self, index: int) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.position(index)] = 1.0
        return v


@dataclass(frozen=True, eq=False)
class CompactOp:
    """A d x d complex matrix standing in for a compact operator."""

    window: BasisWindow
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.array(self.entries, dtype=complex)
        d = self.window.dim
        if a.shape != (d, d):
            raise MalformedInputError(f"expected a {d}x{d} matrix, got shape {a.shape}")
        if not np.isfinite(a).all():
            raise MalformedInputError("operator has non-finite entries")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @classmethod
    def _trusted(cls, window, entries):
        # internal fast path for results of finite arithmetic on validated operands
        obj = object.__new__(cls)
        entries = np.asarray(entries, dtype=complex)
        entries.setflags(write=False)
        object.__setattr__(obj, "window", window)
        object.__setattr__(obj, "entries", entries)
        return obj

    def _check(self, other):
        if not isinstance(other, CompactOp):
            return NotImplemented
        if other.window != self.window:
            raise WindowMismatchError(f"window m_max={self.window.m_max} vs m_max={other.window.m_max}")
        return other

    def __matmul__(self, other):
        if isinstance(other, np.ndarray):
            return self.entries @ other
        if self._check(other) is NotImplemented:
            return NotImplemented
        return CompactOp._trusted(self.window, self.entries @ other.entries)

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return CompactOp._trusted(self.window, self.entries + other.entries)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return CompactOp._trusted(self.window, self.entries - other.entries)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return CompactOp(self.window, self.entries * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return CompactOp._trusted(self.window, -self.entries)

    @property
    def H(self) -> "CompactOp":
        return CompactOp._trusted(self.window, self.entries.conj().T)

    def frobenius(self) -> float:
        return float(np.linalg.norm(self.entries))

    def allclose(self, other: "CompactOp", atol: float = 1e-12) -> bool:
        self._check(other)
        return bool(np.max(np.abs(self.entries - other.entries), initial=0.0) <= atol)


def identity(window: BasisWindow) -> CompactOp:
    return CompactOp._trusted(window, np.eye(window.dim, dtype=complex))


def _power_iteration_norm(a: np.ndarray) -> float:
    gram = a.conj().T @ a
    rng = np.random.default_rng(0)
    v = rng.standard_normal(a.shape[1]) + 1j * rng.standard_normal(a.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(POWER_ITER_MAX):
        w = gram @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        new_lam = float(np.real(np.vdot(v, w)))
        v = w / nw
        if abs(new_lam - lam) <= POWER_ITER_TOL * max(abs(new_lam), 1.0):
            lam = new_lam
            break
        lam = new_lam
    return float(np.sqrt(max(lam, 0.0)))


def op_norm(a: CompactOp) -> float:
    """Largest singular value of ``a``."""
    m = _entries(a)
    if m.shape[0] <= SVD_MAX_DIM:
        return float(np.linalg.svd(m, compute_uv=False)[0]) if m.size else 0.0
    return _power_iteration_norm(m)


def lower_bound_m(a: CompactOp) -> float:
    """Smallest singular value, i.e. the best constant C with ||a h|| >= C ||h||."""
    m = _entries(a)
    return float(np.linalg.svd(m, compute_uv=False)[-1])


def _entries(a) -> np.ndarray:
    if isinstance(a, CompactOp):
        return a.entries
    m = np.asarray(a, dtype=complex)
    if not np.isfinite(m).all():
        raise MalformedInputError("operator has non-finite entries")
    return m


def projection_P(window: BasisWindow, m: int) -> CompactOp:
    """Orthogonal projection onto span{e_-m, ..., e_m}."""
    if m < 0:
        raise MalformedInputError(f"projection index must be nonnegative, got {m}")
    if m > window.m_max:
        raise WindowOverflowError(f"P_{m} does not fit in window m_max={window.m_max}")
    diag = (np.abs(window.indices) <= m).astype(complex)
    return CompactOp._trusted(window, np.diag(diag))


def matmul(a: CompactOp, b: CompactOp) -> CompactOp:
    return a @ b


def add(a: CompactOp, b: CompactOp) -> CompactOp:
    return a + b


def adjoint(a: CompactOp) -> CompactOp:
    return a.H


def inverse(a: CompactOp, threshold: float = INVERSION_THRESHOLD) -> CompactOp:
    smin = lower_bound_m(a)
    if smin <= threshold:
        raise SingularityError("operator is numerically singular", smin)
    return CompactOp(a.window, np.linalg.inv(a.entries))


def _polar(u: np.ndarray) -> np.ndarray:
    w, _, vh = np.linalg.svd(u)
    return w @ vh


@dataclass(frozen=True, eq=False)
class UnitaryOp:
    """Unitary on a window: identity, diagonal phases, a basis permutation, or dense.

    ``perm[p] = q`` means the operator sends the basis vector at position ``p``
    to the one at position ``q``.
    """

    window: BasisWindow
    kind: str
    theta: np.ndarray | None = field(default=None, repr=False)
    perm: np.ndarray | None = field(default=None, repr=False)
    dense: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        d = self.window.dim
        if self.kind == "identity":
            pass
        elif self.kind == "diagonal-phase":
            theta = np.asarray(self.theta, dtype=float)
            if theta.shape != (d,) or not np.isfinite(theta).all():
                raise MalformedInputError("phase vector must be finite with one angle per basis index")
            object.__setattr__(self, "theta", theta)
        elif self.kind == "basis-permutation":
            perm = np.asarray(self.perm, dtype=int)
            if perm.shape != (d,) or sorted(perm.tolist()) != list(range(d)):
                raise MalformedInputError("not a permutation of the window positions")
            object.__setattr__(self, "perm", perm)
        elif self.kind == "dense":
            u = np.array(self.dense, dtype=complex)
            if u.shape != (d, d) or not np.isfinite(u).all():
                raise MalformedInputError("dense unitary has wrong shape or non-finite entries")
            err = np.linalg.norm(u.conj().T @ u - np.eye(d), 2)
            if err > 1e-12:
                raise MalformedInputError(f"matrix is not unitary (||U*U - I|| = {err:.2e})")
            object.__setattr__(self, "dense", u)
        else:
            raise MalformedInputError(f"unknown unitary kind {self.kind!r}")

    @classmethod
    def identity(cls, window):
        return cls(window, "identity")

    @classmethod
    def phases(cls, window, theta):
        return cls(window, "diagonal-phase", theta=theta)

    @classmethod
    def permutation(cls, window, perm):
        return cls(window, "basis-permutation", perm=perm)

    @classmethod
    def shift(cls, window, s: int):
        """Cyclic basis shift e_i -> e_{i+s} (indices wrap around the window)."""
        d = window.dim
        return cls(window, "basis-permutation", perm=(np.arange(d) + s) % d)

    @classmethod
    def from_matrix(cls, window, u):
        return cls(window, "dense", dense=u)

    @classmethod
    def random(cls, window, rng):
        """Haar-distributed dense unitary."""
        d = window.dim
        z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
        q, r = np.linalg.qr(z)
        q = q * (np.diag(r) / np.abs(np.diag(r)))
        return cls(window, "dense", dense=_polar(q))

    @property
    def matrix(self) -> CompactOp:
        return self.power(1)

    def power(self, n: int) -> CompactOp:
        """U**n as a matrix; negative ``n`` gives powers of the adjoint."""
        d = self.window.dim
        if self.kind == "identity" or n == 0:
            return identity(self.window)
        if self.kind == "diagonal-phase":
            return CompactOp._trusted(self.window, np.diag(np.exp(1j * n * self.theta)))
        if self.kind == "basis-permutation":
            p = self.perm if n > 0 else np.argsort(self.perm)
            q = np.arange(d)
            base, e = p, abs(n)
            while e:
                if e & 1:
                    q = base[q]
                base = base[base]
                e >>= 1
            m = np.zeros((d, d), dtype=complex)
            m[q, np.arange(d)] = 1.0
            return CompactOp._trusted(self.window, m)
        u = self.dense if n > 0 else self.dense.conj().T
        acc = np.eye(d, dtype=complex)
        for step in range(1, abs(n) + 1):
            acc = acc @ u
            if step % REUNITARIZE_EVERY == 0:
                acc = _polar(acc)
        return CompactOp._trusted(self.window, acc)
