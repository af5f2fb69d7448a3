"""Shifts ``T_{Phi,b}(a) = b Phi(a)`` on a C*-algebra ideal inside a unital algebra.

Two instantiations:

* commutative: functions on Z that are constant outside a finite stretch
  (:class:`ZFunction`), represented exactly, with ``Phi(f) = f o alpha`` for
  the translation ``alpha(n) = n - step``.  The ideal is the finitely
  supported functions, approximate units are plateau indicators.
* compact: matrices on a :class:`BasisWindow` with ``Phi(F) = U^* F U`` and
  approximate units ``P_m``.  Truncation makes ``A = A_1`` here; powers of
  ``Phi`` are only trusted up to a declared horizon because a finite unitary
  is eventually periodic.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .core import BasisWindow, CompactOp, UnitaryOp, identity, inverse, op_norm, projection_P
from .criteria import DEFAULT_TOL, PowerSchedule
from .errors import (
    HorizonExceededError,
    MalformedInputError,
    PreconditionError,
    ProviderError,
    ShiftlabError,
    SingularityError,
)
from .report import CriterionReport, Row, limit_verdict

__all__ = [
    "ZFunction",
    "AlgebraContext",
    "Automorphism",
    "PhiShift",
    "commutative_context",
    "compact_context",
    "compact_phi_shift",
    "apply_T_phi",
    "apply_S_phi",
    "apply_T_phi_power",
    "apply_S_phi_power",
    "forward_multiplier",
    "inverse_multiplier",
    "check_hc_criterion_phi",
    "check_pointwise_multiplier",
    "corollary_provider",
    "sup_product_expression",
    "cstar_identity_error",
    "homomorphism_error",
]

_INV_THRESHOLD = 1e-10


@dataclass(frozen=True, eq=False)
class ZFunction:
    """``f: Z -> C`` equal to ``values[n - lo]`` on ``[lo, lo + len)``, ``left`` below, ``right`` above."""

    lo: int
    values: np.ndarray
    left: complex = 0.0
    right: complex = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=complex).reshape(-1)
        if not (np.isfinite(v).all() and np.isfinite(self.left) and np.isfinite(self.right)):
            raise MalformedInputError("function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "lo", int(self.lo))
        object.__setattr__(self, "left", complex(self.left))
        object.__setattr__(self, "right", complex(self.right))

    @classmethod
    def constant(cls, c: complex) -> "ZFunction":
        return cls(0, [], c, c)

    @classmethod
    def by_sign(cls, negative: complex, nonnegative: complex) -> "ZFunction":
        """``negative`` on n < 0 and ``nonnegative`` on n >= 0."""
        return cls(0, [], negative, nonnegative)

    @classmethod
    def indicator(cls, lo: int, hi: int) -> "ZFunction":
        """Indicator of the integer interval [lo, hi]."""
        return cls(lo, np.ones(hi - lo + 1))

    @property
    def hi(self) -> int:
        """One past the last explicitly stored index."""
        return self.lo + self.values.size

    def at(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=np.int64)
        out = np.where(n < self.lo, self.left, self.right).astype(complex)
        inside = (n >= self.lo) & (n < self.hi)
        out[inside] = self.values[n[inside] - self.lo]
        return out

    def __call__(self, n: int) -> complex:
        return complex(self.at(np.array([n]))[0])

    def _binary(self, other: "ZFunction", op) -> "ZFunction":
        lo, hi = min(self.lo, other.lo), max(self.hi, other.hi)
        grid = np.arange(lo, hi)
        return ZFunction(lo, op(self.at(grid), other.at(grid)), op(self.left, other.left),
                         op(self.right, other.right)).trimmed()

    def trimmed(self) -> "ZFunction":
        v = self.values
        a, b = 0, v.size
        while a < b and v[a] == self.left:
            a += 1
        while b > a and v[b - 1] == self.right:
            b -= 1
        if a == 0 and b == v.size:
            return self
        return ZFunction(self.lo + a, v[a:b], self.left, self.right)

    def __add__(self, other):
        return self._binary(other, lambda x, y: x + y)

    def __sub__(self, other):
        return self._binary(other, lambda x, y: x - y)

    def __mul__(self, other):
        if isinstance(other, ZFunction):
            return self._binary(other, lambda x, y: x * y)
        c = complex(other)
        return ZFunction(self.lo, self.values * c, self.left * c, self.right * c)

    __rmul__ = __mul__

    def conj(self) -> "ZFunction":
        return ZFunction(self.lo, self.values.conj(), np.conj(self.left), np.conj(self.right))

    def shift(self, s: int) -> "ZFunction":
        """``n -> f(n - s)``."""
        return ZFunction(self.lo + int(s), self.values, self.left, self.right)

    def sup_norm(self) -> float:
        parts = [abs(self.left), abs(self.right)]
        if self.values.size:
            parts.append(float(np.max(np.abs(self.values))))
        return float(max(parts))

    def reciprocal(self) -> "ZFunction":
        mags = np.abs(np.concatenate([self.values, [self.left, self.right]]))
        if mags.min() <= _INV_THRESHOLD:
            raise SingularityError("function is not invertible in the bounded functions", float(mags.min()))
        return ZFunction(self.lo, 1.0 / self.values, 1.0 / self.left, 1.0 / self.right)

    @property
    def finitely_supported(self) -> bool:
        return self.left == 0 and self.right == 0

    def support(self) -> frozenset:
        if not self.finitely_supported:
            raise PreconditionError("support of a function with nonzero tails is infinite")
        return frozenset(int(i) for i in np.nonzero(self.values)[0] + self.lo)

    def __repr__(self):
        return f"ZFunction(lo={self.lo}, len={self.values.size}, left={self.left}, right={self.right})"


@dataclass(frozen=True)
class AlgebraContext:
    """Operations of the unital algebra ``A_1`` plus the ideal ``A`` and its approximate unit."""

    name: str
    mul: Callable[[Any, Any], Any]
    add: Callable[[Any, Any], Any]
    adjoint: Callable[[Any], Any]
    norm: Callable[[Any], float]
    inv: Callable[[Any], Any]
    unit: Any
    in_ideal: Callable[[Any], bool]
    approx_unit: Callable[[int], Any]
    random_element: Callable[..., Any] = field(repr=False)
    validate: Callable[[Any], None] = field(repr=False)

    def sub(self, a, b):
        return self.add(a, self.scale(b, -1.0))

    @staticmethod
    def scale(a, c):
        return a * c


@dataclass(frozen=True)
class Automorphism:
    """``Phi`` on ``A_1`` via ``power(n, a) = Phi^n(a)`` (n of either sign).

    ``aperiodicity(alpha)`` returns the smallest ``N`` with
    ``Phi^n(p_alpha) p_alpha = 0`` for ``N <= n <= horizon`` or ``None``.
    ``horizon`` is ``None`` when powers are exact for every n.
    """

    name: str
    power: Callable[[int, Any], Any]
    aperiodicity: Callable[[int], int | None]
    horizon: int | None = None

    def __call__(self, a):
        return self.power(1, a)

    def inverse(self, a):
        return self.power(-1, a)


@dataclass(frozen=True, eq=False)
class PhiShift:
    ctx: AlgebraContext
    phi: Automorphism
    b: Any
    b_inv: Any = field(init=False, repr=False)

    def __post_init__(self):
        self.ctx.validate(self.b)
        b_inv = self.ctx.inv(self.b)
        err = self.ctx.norm(self.ctx.sub(self.ctx.mul(self.b, b_inv), self.ctx.unit))
        if err > 1e-9:
            raise SingularityError(f"b is not invertible: ||b b^-1 - 1|| = {err:.3g}", float("nan"))
        object.__setattr__(self, "b_inv", b_inv)


# ---------------------------------------------------------------- contexts


def _zf_random(half: int):
    def draw(rng: np.random.Generator, ideal: bool = True) -> ZFunction:
        n = 2 * half + 1
        vals = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        vals[rng.random(n) < 0.3] = 0.0
        if ideal:
            return ZFunction(-half, vals).trimmed()
        tails = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        return ZFunction(-half, vals, tails[0], tails[1]).trimmed()
    return draw


def _zf_validate(a):
    if not isinstance(a, ZFunction):
        raise MalformedInputError(f"commutative context expects a ZFunction, got {type(a).__name__}")


def commutative_context(window_size: int, alpha_step: int) -> tuple[AlgebraContext, Automorphism]:
    """Bounded functions on Z, ideal of finitely supported ones, ``Phi(f)(n) = f(n - alpha_step)``.

    ``window_size`` (odd) fixes the stretch ``[-half, half]`` on which
    random elements live and bounds the plateau radius of ``p_r``, the
    indicator of ``[-r, r]``.  Since ``Phi^n(p_r) p_r`` is the indicator of
    the overlap of two intervals, ``N_r`` is exact: the smallest n with
    ``n |step| >= 2r + 1``.
    """
    if int(alpha_step) != alpha_step or alpha_step == 0:
        raise MalformedInputError("alpha_step must be a nonzero integer")
    if window_size < 1:
        raise MalformedInputError("window_size must be positive")
    step = int(alpha_step)
    half = (int(window_size) - 1) // 2

    def approx_unit(r: int) -> ZFunction:
        if not 0 <= r <= half:
            raise PreconditionError(f"plateau radius {r} outside [0, {half}]")
        return ZFunction.indicator(-r, r)

    def norm(a):
        return a.sup_norm()

    ctx = AlgebraContext(
        name=f"commutative(window={2 * half + 1})",
        mul=lambda a, b: a * b,
        add=lambda a, b: a + b,
        adjoint=lambda a: a.conj(),
        norm=norm,
        inv=lambda a: a.reciprocal(),
        unit=ZFunction.constant(1.0),
        in_ideal=lambda a: isinstance(a, ZFunction) and a.finitely_supported,
        approx_unit=approx_unit,
        random_element=_zf_random(half),
        validate=_zf_validate,
    )

    def power(n: int, a: ZFunction) -> ZFunction:
        _zf_validate(a)
        return a.shift(n * step)

    def aperiodicity(r: int) -> int:
        approx_unit(r)
        return -(-(2 * r + 1) // abs(step))

    return ctx, Automorphism(f"translation(step={step})", power, aperiodicity)


def compact_context(window: BasisWindow, U: UnitaryOp, horizon: int | None = None
                    ) -> tuple[AlgebraContext, Automorphism]:
    """Matrices on ``window`` with ``Phi(F) = U^* F U``; ``|n| > horizon`` raises.

    ``horizon`` defaults to ``m_max``.  ``N_m`` is the smallest n such
    that ``||P_m U^n P_m|| < 1e-12`` for every n up to the horizon, or
    ``None`` when the condition fails at the horizon itself.
    """
    if not isinstance(U, UnitaryOp) or U.window != window:
        raise MalformedInputError("U must be a unitary on the given window")
    u = U.matrix.entries
    if not np.allclose(u.conj().T @ u, np.eye(window.dim), atol=1e-10):
        raise MalformedInputError("U is not unitary")
    horizon = window.m_max if horizon is None else int(horizon)
    if horizon < 1:
        raise MalformedInputError("horizon must be positive")

    def validate(a):
        if not isinstance(a, CompactOp) or a.window != window:
            raise MalformedInputError("compact context expects operators on its window")

    def random_element(rng: np.random.Generator, ideal: bool = True) -> CompactOp:
        d = window.dim
        return CompactOp(window, (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(d))

    ctx = AlgebraContext(
        name=f"compact(m_max={window.m_max})",
        mul=lambda a, b: a @ b,
        add=lambda a, b: a + b,
        adjoint=lambda a: a.H,
        norm=op_norm,
        inv=inverse,
        unit=identity(window),
        in_ideal=lambda a: isinstance(a, CompactOp) and a.window == window,
        approx_unit=lambda m: projection_P(window, m),
        random_element=random_element,
        validate=validate,
    )

    @functools.lru_cache(maxsize=None)
    def upow(n: int) -> CompactOp:
        return U.power(n)

    def power(n: int, a: CompactOp) -> CompactOp:
        validate(a)
        if abs(n) > horizon:
            raise HorizonExceededError(f"Phi^{n} exceeds the declared horizon {horizon}")
        if n == 0:
            return a
        return upow(-n) @ a @ upow(n)

    def aperiodicity(m: int) -> int | None:
        p = projection_P(window, m)
        vals = [op_norm(p @ upow(n) @ p) for n in range(1, horizon + 1)]
        if vals[-1] >= 1e-12:
            return None
        n = horizon
        while n > 1 and vals[n - 2] < 1e-12:
            n -= 1
        return n

    return ctx, Automorphism(f"conj-by-U*({U.kind})", power, aperiodicity, horizon)


def compact_phi_shift(window: BasisWindow, W: CompactOp, U: UnitaryOp, horizon: int | None = None) -> PhiShift:
    """``T_{Phi, WU}`` on the compact context, which acts as ``F -> W F U``."""
    ctx, phi = compact_context(window, U, horizon)
    return PhiShift(ctx, phi, W @ U.matrix)


# ---------------------------------------------------------------- operators


def _check(ps: PhiShift, a):
    ps.ctx.validate(a)


def apply_T_phi(ps: PhiShift, a):
    _check(ps, a)
    return ps.ctx.mul(ps.b, ps.phi(a))


def apply_S_phi(ps: PhiShift, a):
    _check(ps, a)
    return ps.ctx.mul(ps.phi.inverse(ps.b_inv), ps.phi.inverse(a))


def _npow(n):
    if int(n) != n or n < 1:
        raise PreconditionError(f"power must be a positive integer, got {n!r}")
    return int(n)


def apply_T_phi_power(ps: PhiShift, n: int, a):
    """``b Phi(b) ... Phi^{n-1}(b) Phi^n(a)``."""
    n = _npow(n)
    _check(ps, a)
    acc = ps.b
    for i in range(1, n):
        acc = ps.ctx.mul(acc, ps.phi.power(i, ps.b))
    return ps.ctx.mul(acc, ps.phi.power(n, a))


def apply_S_phi_power(ps: PhiShift, n: int, a):
    """``Phi^-1(b^-1) Phi^-2(b^-1) ... Phi^-n(b^-1) Phi^-n(a)``."""
    n = _npow(n)
    _check(ps, a)
    acc = ps.phi.power(-1, ps.b_inv)
    for i in range(2, n + 1):
        acc = ps.ctx.mul(acc, ps.phi.power(-i, ps.b_inv))
    return ps.ctx.mul(acc, ps.phi.power(-n, a))


def forward_multiplier(ps: PhiShift, n: int):
    """``Phi^{-n}(b) Phi^{-n+1}(b) ... Phi^{-1}(b)``."""
    n = _npow(n)
    acc = ps.phi.power(-n, ps.b)
    for i in range(n - 1, 0, -1):
        acc = ps.ctx.mul(acc, ps.phi.power(-i, ps.b))
    return acc


def inverse_multiplier(ps: PhiShift, n: int):
    """``Phi^{n-1}(b^-1) ... Phi(b^-1) b^-1``."""
    n = _npow(n)
    acc = ps.phi.power(n - 1, ps.b_inv)
    for i in range(n - 2, -1, -1):
        acc = ps.ctx.mul(acc, ps.phi.power(i, ps.b_inv))
    return acc


class _Multipliers:
    """Incremental multipliers along an increasing schedule.

    ``F_n = Phi^{-n}(b) F_{n-1}`` and ``G_n = Phi^{n-1}(b^-1) G_{n-1}``.
    """

    def __init__(self, ps: PhiShift):
        self.ps = ps
        self.n = 0
        self.f = ps.ctx.unit
        self.g = ps.ctx.unit

    def advance(self, n: int):
        ctx, phi = self.ps.ctx, self.ps.phi
        while self.n < n:
            self.n += 1
            self.f = ctx.mul(phi.power(-self.n, self.ps.b), self.f)
            self.g = ctx.mul(phi.power(self.n - 1, self.ps.b_inv), self.g)
        return self.f, self.g


def _directions(aperiodic):
    return {"direction": "criterion implies hypercyclicity only; the converse needs a hypercyclic vector oracle",
            "aperiodicity_N": aperiodic}


def check_hc_criterion_phi(ps: PhiShift, alpha: int, sched: PowerSchedule,
                           provider: Callable[[int], tuple], tol: float = DEFAULT_TOL) -> CriterionReport:
    """Approximation errors of ``q_k, d_k`` to ``p_alpha^2`` and both multiplier decays.

    The ``j`` column of the report carries ``alpha``.  The aperiodicity
    index is recorded when available; the sufficient direction does not
    need it.
    """
    if not tol > 0:
        raise PreconditionError("tolerance must be positive")
    ctx = ps.ctx
    p = ctx.approx_unit(alpha)
    p2 = ctx.mul(p, p)
    mult = _Multipliers(ps)
    rows, table = [], {}
    for k, n in sched:
        try:
            q, d = provider(k)
        except ShiftlabError:
            raise
        except Exception as exc:
            raise ProviderError(f"provider failed at k={k}: {exc}") from exc
        for label, e in (("q", q), ("d", d)):
            ctx.validate(e)
            if not ctx.in_ideal(e):
                raise ProviderError(f"{label}_{k} does not lie in the ideal A")
        f, g = mult.advance(n)
        vals = {
            "approx_q": ctx.norm(ctx.sub(q, p2)),
            "approx_d": ctx.norm(ctx.sub(d, p2)),
            "forward": ctx.norm(ctx.mul(f, q)),
            "inverse": ctx.norm(ctx.mul(g, d)),
        }
        for name, v in vals.items():
            rows.append(Row(alpha, k, n, name, float(v)))
            table.setdefault(name, []).append(float(v))
    satisfied, first = limit_verdict(table, tol)
    try:
        aper = ps.phi.aperiodicity(alpha)
    except HorizonExceededError:
        aper = None
    flags = [] if aper is not None else [{"aperiodicity": "not attained within horizon"}]
    notes = {"alpha": alpha, "context": ctx.name, "automorphism": ps.phi.name, **_directions(aper)}
    return CriterionReport("hc_criterion_phi", "equivalence", satisfied, tol,
                           sorted(rows, key=lambda r: (r.k, r.quantity)), first, len(sched), flags, notes)


def check_pointwise_multiplier(ps: PhiShift, omega1: Sequence, omega2: Sequence, sched: PowerSchedule,
                               tol: float = DEFAULT_TOL) -> CriterionReport:
    """``||F_n x||`` for x in Omega_1 and ``||G_n y||`` for y in Omega_2 over the schedule."""
    if not omega1 or not omega2:
        raise PreconditionError("Omega_1 and Omega_2 must be nonempty")
    for e in list(omega1) + list(omega2):
        ps.ctx.validate(e)
    mult = _Multipliers(ps)
    rows, table = [], {}
    for k, n in sched:
        f, g = mult.advance(n)
        vals = {f"forward[{i}]": ps.ctx.norm(ps.ctx.mul(f, x)) for i, x in enumerate(omega1)}
        vals.update({f"inverse[{i}]": ps.ctx.norm(ps.ctx.mul(g, y)) for i, y in enumerate(omega2)})
        for name, v in vals.items():
            rows.append(Row(0, k, n, name, float(v)))
            table.setdefault(name, []).append(float(v))
    satisfied, first = limit_verdict(table, tol)
    return CriterionReport("pointwise_multiplier", "sufficient condition", satisfied, tol,
                           sorted(rows, key=lambda r: (r.k, r.quantity)), first, len(sched), [],
                           {"context": ps.ctx.name, "automorphism": ps.phi.name})


def corollary_provider(ps: PhiShift, alpha: int, omega1: Sequence, omega2: Sequence) -> Callable[[int], tuple]:
    """Provider ``k -> (q, d)`` taking the elements of Omega_1, Omega_2 nearest to ``p_alpha^2``."""
    ctx = ps.ctx
    p = ctx.approx_unit(alpha)
    p2 = ctx.mul(p, p)

    def nearest(omega):
        return min(omega, key=lambda e: ctx.norm(ctx.sub(e, p2)))

    q, d = nearest(omega1), nearest(omega2)
    return lambda k: (q, d)


def sup_product_expression(b: Callable[[int], complex], step: int, K: Sequence[int], n: int) -> float:
    """``sup_{t in K} prod_{j=0}^{n-1} |b(alpha^{j-n}(t))|`` with ``alpha(t) = t - step``, pointwise."""
    best = 0.0
    for t in K:
        prod = 1.0
        for j in range(n):
            prod *= abs(b(t - (j - n) * step))
        best = max(best, prod)
    return best


# ---------------------------------------------------------------- spot checks


def cstar_identity_error(ctx: AlgebraContext, rng: np.random.Generator, trials: int = 20) -> float:
    """Largest relative deviation from ``||a^* a|| = ||a||^2`` on random elements."""
    worst = 0.0
    for _ in range(trials):
        a = ctx.random_element(rng, ideal=bool(rng.random() < 0.5))
        n = ctx.norm(a)
        if n == 0:
            continue
        worst = max(worst, abs(ctx.norm(ctx.mul(ctx.adjoint(a), a)) - n * n) / (n * n))
    return worst


def homomorphism_error(ctx: AlgebraContext, phi: Automorphism, rng: np.random.Generator,
                       trials: int = 100) -> dict:
    """Largest errors of multiplicativity, *-preservation and isometry of Phi."""
    out = {"multiplicative": 0.0, "adjoint": 0.0, "isometry": 0.0}
    for _ in range(trials):
        a = ctx.random_element(rng, ideal=bool(rng.random() < 0.5))
        b = ctx.random_element(rng, ideal=bool(rng.random() < 0.5))
        pa = phi(a)
        out["multiplicative"] = max(out["multiplicative"], ctx.norm(ctx.sub(phi(ctx.mul(a, b)), ctx.mul(pa, phi(b)))))
        out["adjoint"] = max(out["adjoint"], ctx.norm(ctx.sub(phi(ctx.adjoint(a)), ctx.adjoint(pa))))
        out["isometry"] = max(out["isometry"], abs(ctx.norm(pa) - ctx.norm(a)))
    return out
