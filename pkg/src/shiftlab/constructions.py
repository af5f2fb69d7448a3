"""Concrete weight families, approximants, and the constructive witnesses.

Weighted translations act on grid functions over ``t_i = i h``; the grid is
identified with the basis window, so ``e_i`` is the indicator of ``t_i``.
Truncating a translation to the grid loses mass at the boundary, so these
families carry a pseudo-inverse and a safe horizon instead of a genuine
inverse (see :meth:`shiftlab.shift.WeightFamily.safe_horizon`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import BasisWindow, CompactOp, identity, op_norm, projection_P
from .criteria import ApproximantProvider, geometric_tail, series_terms
from .errors import (
    ConstructionFailedError,
    HorizonExceededError,
    MalformedInputError,
    PreconditionError,
)
from .module_space import IndexRange, ModuleVector, norm2
from .shift import (
    ShiftOperator,
    WeightFamily,
    apply_C_avg,
    apply_S_power,
    apply_T_power,
    forward_product,
    inverse_product,
)

__all__ = [
    "salas_weights",
    "salas_shift_matrix",
    "GridModel",
    "TranslationWeightParams",
    "translation_weights",
    "mixed_translation_weights",
    "cutoff_DG",
    "cutoff_provider",
    "build_transitivity_witness",
    "build_avg_witness",
    "build_periodic_point",
]


def salas_weights(window: BasisWindow, lam: float, first_decaying: int = 1) -> WeightFamily:
    """Scalar family ``W_j = lam^-1 I`` for ``j >= first_decaying`` and ``lam I`` below.

    With the default split ``W_0 = lam I``, so at ``j = 0`` the forward and
    inverse products both have norm ``lam^-n``.
    """
    if not lam > 1:
        raise MalformedInputError(f"lambda must exceed 1, got {lam}")
    eye = np.eye(window.dim, dtype=complex)
    hi, lo = CompactOp(window, lam * eye), CompactOp(window, eye / lam)
    return WeightFamily(window, lambda j: lo if j >= first_decaying else hi, lam, lam,
                        name=f"salas(lambda={lam:g})")


def salas_shift_matrix(window: BasisWindow, lam: float) -> CompactOp:
    """Cyclic weighted basis shift ``e_i -> w_i e_{i+1}``, ``w_i = 1/lam`` for i >= 0, ``lam`` below.

    The wrap-around entry keeps it invertible; powers up to ``m_max - m`` are
    exact on the range of ``P_m``.
    """
    if not lam > 1:
        raise MalformedInputError(f"lambda must exceed 1, got {lam}")
    d = window.dim
    w = np.where(window.indices >= 0, 1.0 / lam, lam)
    a = np.zeros((d, d), dtype=complex)
    a[(np.arange(d) + 1) % d, np.arange(d)] = w
    return CompactOp(window, a)


@dataclass(frozen=True)
class GridModel:
    """Uniform grid ``t_i = i h`` for ``|t_i| <= L``."""

    L: float
    h: float

    def __post_init__(self):
        if not self.h > 0:
            raise MalformedInputError("grid step must be positive")
        ratio = self.L / self.h
        if ratio < 0 or abs(ratio - round(ratio)) > 1e-9:
            raise MalformedInputError("L must be a nonnegative integer multiple of h")

    @classmethod
    def for_window(cls, window: BasisWindow, h: float = 1.0) -> "GridModel":
        return cls(window.m_max * h, h)

    @property
    def window(self) -> BasisWindow:
        return BasisWindow(int(round(self.L / self.h)))

    @property
    def t(self) -> np.ndarray:
        return self.window.indices * self.h

    def steps(self, r: float) -> int:
        s = r / self.h
        if abs(s - round(s)) > 1e-9:
            raise MalformedInputError(f"translation {r} is not a multiple of the grid step {self.h}")
        return int(round(s))


@dataclass(frozen=True)
class TranslationWeightParams:
    """Weight functions ``w_j`` and translation amounts ``r_j`` for ``W_j f = w_j (f o alpha_j)``.

    ``w(j, t)`` evaluates ``w_j`` on an array of grid points; ``r(j)`` is the
    translation amount; ``r_max`` bounds every ``r_j`` and ``C`` bounds them
    from below.
    """

    eps: float
    M: float
    w: Callable[[int, np.ndarray], np.ndarray] = field(repr=False)
    r: Callable[[int], float] = field(repr=False)
    r_max: float
    C: float
    name: str = "custom"

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise MalformedInputError("eps must lie in (0, 1)")
        if not self.M >= 1:
            raise MalformedInputError("M must be at least 1")
        if not 0 < self.C <= self.r_max:
            raise MalformedInputError("need 0 < C <= r_max")

    def validate(self, j: int, t: np.ndarray, w: np.ndarray, r: float, strict: bool = True):
        if not (self.C - 1e-12 <= r <= self.r_max + 1e-12):
            raise MalformedInputError(f"r_{j} = {r} outside [C, r_max] = [{self.C}, {self.r_max}]")
        if not np.isfinite(w).all() or np.any(w < 1 / self.M - 1e-12) or np.any(w > self.M + 1e-12):
            raise MalformedInputError(f"w_{j} leaves [1/M, M] on the grid")
        if not strict:
            return
        if j >= 0 and np.any(w[t >= 0] > 1 - self.eps + 1e-12):
            raise MalformedInputError(f"w_{j} exceeds 1 - eps on t >= 0")
        if j < 0 and np.any(w[t < 0] < 1 + self.eps - 1e-12):
            raise MalformedInputError(f"w_{j} falls below 1 + eps on t < 0")

    @classmethod
    def constant_by_sign(cls, eps: float, r: float = 1.0):
        """``w = 1 - eps`` on ``t >= 0`` and ``1/(1 - eps)`` on ``t < 0``, for every j."""
        lo, hi = 1 - eps, 1 / (1 - eps)
        return cls(eps, hi, lambda j, t: np.where(t >= 0, lo, hi), lambda j: r, r, r, "constant-by-sign")

    @classmethod
    def step(cls, eps: float, r: float = 1.0):
        """Only the constrained half deviates from 1: ``1 - eps`` on t >= 0 for j >= 0, ``1/(1 - eps)`` on t < 0 for j < 0."""
        lo, hi = 1 - eps, 1 / (1 - eps)

        def w(j, t):
            if j >= 0:
                return np.where(t >= 0, lo, 1.0)
            return np.where(t < 0, hi, 1.0)

        return cls(eps, hi, w, lambda j: r, r, r, "step")

    @classmethod
    def plateau(cls, eps: float, r: float = 1.0, width: float = 4.0, height: float | None = None):
        """Constant-by-sign with a raised plateau ``height`` on ``t < -width``."""
        lo, hi = 1 - eps, 1 / (1 - eps)
        height = hi * hi if height is None else height
        if height < hi:
            raise MalformedInputError("plateau height must be at least 1/(1 - eps)")
        M = max(height, hi)

        def w(j, t):
            return np.where(t >= 0, lo, np.where(t < -width, height, hi))

        return cls(eps, M, w, lambda j: r, r, r, "plateau")

    @classmethod
    def array(cls, eps: float, values_pos, values_neg=None, r: float = 1.0):
        """Explicit per-grid-point values: ``values_pos`` for j >= 0, ``values_neg`` for j < 0."""
        pos = np.asarray(values_pos, dtype=float)
        neg = pos if values_neg is None else np.asarray(values_neg, dtype=float)
        if pos.shape != neg.shape or pos.ndim != 1 or np.any(pos <= 0) or np.any(neg <= 0):
            raise MalformedInputError("weight arrays must be positive 1-D arrays of equal length")
        M = float(max(pos.max(), neg.max(), 1 / pos.min(), 1 / neg.min(), 1.0))

        def w(j, t):
            vals = pos if j >= 0 else neg
            if vals.shape != t.shape:
                raise MalformedInputError(f"weight array has {vals.size} points, grid has {t.size}")
            return vals

        return cls(eps, M, w, lambda j: r, r, r, "array")


def _translation_matrices(grid: GridModel, w: np.ndarray, s: int):
    d = grid.window.dim
    fwd = np.zeros((d, d), dtype=complex)
    inv = np.zeros((d, d), dtype=complex)
    rows = np.arange(d)
    ok = rows - s >= 0
    fwd[rows[ok], rows[ok] - s] = w[ok]
    ok = rows + s < d
    inv[rows[ok], rows[ok] + s] = 1.0 / w[rows[ok] + s]
    return fwd, inv


def translation_weights(grid: GridModel, params: TranslationWeightParams, strict: bool = True) -> WeightFamily:
    """``(W_j f)(t_i) = w_j(t_i) f(t_i - r_j)`` with zero padding outside the grid.

    ``strict=False`` skips the sign inequalities (the bounds ``1/M <= w <= M``
    and ``r_j >= C`` are always enforced), e.g. for pure translations.
    """
    window = grid.window
    t = grid.t
    cache = {}

    def build(j):
        if j not in cache:
            r = float(params.r(j))
            s = grid.steps(r)
            wj = np.asarray(params.w(j, t), dtype=float)
            params.validate(j, t, wj, r, strict)
            fwd, inv = _translation_matrices(grid, wj, s)
            cache[j] = (CompactOp(window, fwd), CompactOp(window, inv))
        return cache[j]

    return WeightFamily(window, lambda j: build(j)[0], params.M, params.M,
                        inverse_provider=lambda j: build(j)[1],
                        max_shift=max(grid.steps(params.r_max), 1),
                        name=f"translation({params.name}, eps={params.eps:g})")


def mixed_translation_weights(grid: GridModel, params: TranslationWeightParams,
                              translate_pos: Callable[[int], bool], translate_neg: Callable[[int], bool],
                              mult_pos: float, mult_neg: float) -> WeightFamily:
    """Translations at ``j in {n_k}`` (j >= 0) and ``j in {-n_i}`` (j < 0), multiplications elsewhere.

    ``translate_pos(j)`` decides membership of ``j >= 0`` in ``{n_k}`` and
    ``translate_neg(n)`` membership of ``n > 0`` in ``{n_i}``.  Off those
    indices ``W_j`` multiplies by ``mult_pos`` (j >= 0, in [1/M, 1]) or
    ``mult_neg`` (j < 0, in [1, M]).
    """
    M = params.M
    if not (1 / M - 1e-12 <= abs(mult_pos) <= 1 + 1e-12 and 1 - 1e-12 <= abs(mult_neg) <= M + 1e-12):
        raise MalformedInputError("multiplication weights violate 1/M <= |w| <= 1 (j >= 0) or 1 <= |w| <= M (j < 0)")
    base = translation_weights(grid, params)
    window = grid.window
    eye = np.eye(window.dim, dtype=complex)
    pos_op, neg_op = CompactOp(window, mult_pos * eye), CompactOp(window, mult_neg * eye)
    pos_inv, neg_inv = CompactOp(window, eye / mult_pos), CompactOp(window, eye / mult_neg)

    def translating(j):
        return translate_pos(j) if j >= 0 else translate_neg(-j)

    def fwd(j):
        if translating(j):
            return base.weight(j)
        return pos_op if j >= 0 else neg_op

    def inv(j):
        if translating(j):
            return base.inverse(j)
        return pos_inv if j >= 0 else neg_inv

    return WeightFamily(window, fwd, M, M, inverse_provider=inv, max_shift=base.max_shift,
                        name=f"mixed({params.name}, eps={params.eps:g})")


def cutoff_DG(window: BasisWindow, m: int, k: float, grid: GridModel | None = None) -> tuple:
    """``D = G = (multiplication by the indicator of [-k, k]) P_m`` on the grid."""
    grid = GridModel.for_window(window) if grid is None else grid
    if grid.window != window:
        raise MalformedInputError("grid does not match the window")
    chi = (np.abs(grid.t) <= k + 1e-12).astype(complex)
    d = CompactOp(window, np.diag(chi)) @ projection_P(window, m)
    return d, d


def cutoff_provider(window: BasisWindow, m: int, grid: GridModel | None = None) -> ApproximantProvider:
    """Provider ``(j, k) -> cutoff_DG(window, m, k, grid)``; independent of j."""
    grid = GridModel.for_window(window) if grid is None else grid
    projection_P(window, m)
    return ApproximantProvider(lambda j, k: cutoff_DG(window, m, k, grid), 1.0, name=f"cutoff(m={m})")


def _raw_sum(window: BasisWindow, *terms: ModuleVector) -> ModuleVector:
    """Sum without the storage threshold.

    Witnesses contain terms that a later power amplifies by up to ``M^n``;
    dropping them as dust would reappear as an O(1) error.
    """
    acc = {}
    for term in terms:
        for xi, c in term.coeffs.items():
            acc[xi] = acc[xi] + c if xi in acc else c
    return ModuleVector(window, acc, threshold=0.0)


def _require_dense(x: ModuleVector, J: IndexRange, m: int, label: str):
    p = projection_P(x.window, m)
    for xi, c in x.coeffs.items():
        if xi not in J:
            raise PreconditionError(f"{label} has a coefficient at {xi} outside [{J.J}]")
        if not (p @ c).allclose(c, atol=1e-12):
            raise PreconditionError(f"{label}_{xi} is not fixed by P_{m}")


def _horizon(op: ShiftOperator, m: int, n: int):
    h = op.weights.safe_horizon(m)
    if h is not None and n > h:
        raise HorizonExceededError(f"power {n} exceeds the safe horizon {h} of {op.weights.name}")


def _setup(op, x, y, J, m, n):
    J = J if isinstance(J, IndexRange) else IndexRange(J)
    if n <= 2 * J.J:
        raise PreconditionError(f"need power > 2J = {2 * J.J} for disjoint supports, got {n}")
    if x is not None:
        _require_dense(x, J, m, "x")
    _require_dense(y, J, m, "y")
    return J


def build_transitivity_witness(op: ShiftOperator, x: ModuleVector, y: ModuleVector,
                               prov: ApproximantProvider, t_k: int, J, m: int, k: int | None = None):
    """``eta = u + S^{t_k} v`` with ``u_j = D_j x_j`` and ``v_j = G_j y_j`` on [J].

    ``k`` selects the provider index (defaults to ``t_k``).  The diagnostics
    carry both approximation errors and the bounds obtained from the
    product norms, which dominate them.
    """
    J = _setup(op, x, y, J, m, t_k)
    _horizon(op, m, t_k)
    k = t_k if k is None else k
    p = projection_P(op.window, m)
    u, v = {}, {}
    x_bound = y_bound = 0.0
    approx_x = approx_y = 0.0
    for j in J:
        d, g = prov(j, k)
        u[j] = d @ x[j]
        v[j] = g @ y[j]
        approx_x += op_norm(d - p) * op_norm(x[j])
        approx_y += op_norm(g - p) * op_norm(y[j])
        x_bound += op_norm(inverse_product(op.weights, j, t_k) @ g) * op_norm(y[j])
        y_bound += op_norm(forward_product(op.weights, j, t_k) @ d) * op_norm(x[j])
    u = ModuleVector(op.window, u)
    v = ModuleVector(op.window, v)
    eta = _raw_sum(op.window, u, apply_S_power(op, t_k, v, threshold=0.0))
    diag = {
        "t_k": t_k,
        "k": k,
        "x_error": norm2(eta - x),
        "y_error": norm2(apply_T_power(op, t_k, eta) - y),
        "x_bound": approx_x + x_bound,
        "y_bound": approx_y + y_bound,
    }
    return eta, diag


def build_avg_witness(op: ShiftOperator, x: ModuleVector, y: ModuleVector,
                      prov: ApproximantProvider, n_k: int, J, m: int, k: int | None = None):
    """``eta = mu + T^{n_k} v + S^{n_k} v``; diagnostics against ``C^{(n_k)}``."""
    J = _setup(op, x, y, J, m, n_k)
    _horizon(op, m, 2 * n_k)
    k = n_k if k is None else k
    mu, v = {}, {}
    for j in J:
        d, g = prov(j, k)
        mu[j] = d @ x[j]
        v[j] = g @ y[j]
    mu = ModuleVector(op.window, mu)
    v = ModuleVector(op.window, v)
    eta = _raw_sum(op.window, mu, apply_T_power(op, n_k, v, threshold=0.0),
                   apply_S_power(op, n_k, v, threshold=0.0))
    diag = {
        "n_k": n_k,
        "k": k,
        "x_error": norm2(eta - x),
        "y_error": norm2(apply_C_avg(op, n_k, eta) - y),
    }
    return eta, diag


def build_periodic_point(op: ShiftOperator, y: ModuleVector, prov: ApproximantProvider, n_k: int,
                         J, m: int, series_cutoff: int = 8, tol: float = 1e-6, k: int | None = None):
    """Truncated ``q = sum_{l=0}^{L} T^{l n_k} Z + sum_{l=1}^{L} S^{l n_k} Z`` with ``Z_j = D_j y_j``.

    ``T^{n_k} q - q = T^{(L+1) n_k} Z - S^{L n_k} Z``, so ``tail_bound`` sums,
    over j, ``||y_j||`` times the geometric tail of the forward series beyond
    L plus the inverse series from L on.  ``series_bound`` is the estimate
    of ``||q - y||`` from the product norms.  ``tol`` is the level a
    periodic point is meant to approximate ``y`` at and is reported as
    ``within_tol``.
    """
    J = _setup(op, None, y, J, m, n_k)
    if series_cutoff < 2:
        raise PreconditionError("series_cutoff must be at least 2")
    L = series_cutoff
    _horizon(op, m, (L + 1) * n_k)
    k = n_k if k is None else k
    p = projection_P(op.window, m)

    z, tail_bound, series_bound = {}, 0.0, 0.0
    partial, failed = {}, []
    for j in J:
        d, _ = prov(j, k)
        z[j] = d @ y[j]
        yn = op_norm(y[j])
        fwd, inv = series_terms(op.weights, j, n_k, d, L)
        tf, sf = geometric_tail(fwd)
        ti, si = geometric_tail(inv)
        partial[j] = {"forward": float(fwd.sum()), "inverse": float(inv.sum()),
                      "forward_status": sf, "inverse_status": si}
        if not (math.isfinite(tf) and math.isfinite(ti)):
            failed.append(j)
            continue
        tail_bound += yn * (tf + inv[-1] + ti)
        series_bound += op_norm(d - p) * yn + yn * (fwd.sum() + tf + inv.sum() + ti)
    if failed:
        raise ConstructionFailedError(
            f"chaos series not summable at horizon for j in {failed} (n_k={n_k}, cutoff={L})", partial)

    # q keeps coefficients below the storage threshold: T^{n_k} amplifies the
    # far S-terms, so dropping them would show up as a periodicity defect
    zv = ModuleVector(op.window, z)
    t_terms, s_terms = [zv], []
    cur = zv
    for _ in range(L):
        cur = apply_T_power(op, n_k, cur, threshold=0.0)
        t_terms.append(cur)
    cur = zv
    for _ in range(L):
        cur = apply_S_power(op, n_k, cur, threshold=0.0)
        s_terms.append(cur)
    q = _raw_sum(op.window, *t_terms, *s_terms)
    defect = norm2(apply_T_power(op, n_k, q) - q)
    y_err = norm2(q - y)
    diag = {
        "n_k": n_k,
        "k": k,
        "series_cutoff": L,
        "periodicity_defect": defect,
        "y_error": y_err,
        "tail_bound": tail_bound,
        "series_bound": series_bound,
        "within_tol": bool(y_err < tol),
        "partial_sums": partial,
        "supports": [t.support for t in t_terms] + [s.support for s in s_terms],
    }
    return q, diag
