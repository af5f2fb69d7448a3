"""Finite-horizon checkers for the hypercyclicity, chaos and periodicity conditions.

Every checker walks a :class:`PowerSchedule` and records, per module index
``j`` in ``[J]`` and schedule position ``k``, the norms that the respective
condition requires to tend to zero.  "Tends to zero" is read as: below
``tol`` at some common recorded ``k`` and non-increasing over the final
three recorded ``k`` (see :func:`shiftlab.report.limit_verdict`).  A
negative verdict only means the horizon did not certify the condition.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import CompactOp, lower_bound_m, op_norm, projection_P
from .errors import HorizonExceededError, MalformedInputError, PreconditionError, ProviderError, ShiftlabError
from .module_space import IndexRange
from .report import CriterionReport, Row, limit_verdict
from .shift import ShiftOperator, WeightFamily, forward_product, inverse_product

__all__ = [
    "ApproximantProvider",
    "PowerSchedule",
    "TestVectorSets",
    "DEFAULT_TOL",
    "DEFAULT_MAX_K",
    "DEFAULT_SERIES_CUTOFF",
    "check_dense_hypercyclicity",
    "check_pointwise_sufficient",
    "check_chaos",
    "check_avg_transitivity",
    "check_necessary_periodic_T",
    "check_necessary_periodic_S",
    "series_terms",
    "geometric_tail",
]

DEFAULT_TOL = 1e-6
DEFAULT_MAX_K = 40
DEFAULT_SERIES_CUTOFF = 64

EQUIVALENCE = "equivalence"
SUFFICIENT = "sufficient condition"
NECESSARY = "necessary condition"

# relative growth of consecutive term ratios beyond which a series is treated as sub-geometric
_RATIO_GROWTH = 1e-9


@dataclass(frozen=True)
class PowerSchedule:
    """Strictly increasing powers ``t_1 < t_2 < ...``, cut off after ``max_k`` entries."""

    t: tuple
    max_k: int | None = None

    def __post_init__(self):
        t = tuple(int(v) for v in self.t)
        if any(int(v) != v for v in self.t):
            raise MalformedInputError("schedule entries must be integers")
        if self.max_k is not None:
            if self.max_k < 1:
                raise MalformedInputError("max_k must be positive")
            t = t[: self.max_k]
        if not t:
            raise MalformedInputError("schedule is empty")
        if t[0] < 1 or any(b <= a for a, b in zip(t, t[1:])):
            raise MalformedInputError(f"schedule must be strictly increasing positive integers: {t}")
        object.__setattr__(self, "t", t)

    @classmethod
    def arithmetic(cls, start=1, step=1, max_k=DEFAULT_MAX_K):
        return cls(tuple(start + step * i for i in range(max_k)))

    @classmethod
    def geometric(cls, start=1, ratio=2.0, max_k=DEFAULT_MAX_K):
        out, v = [], float(start)
        while len(out) < max_k:
            n = int(round(v))
            if not out or n > out[-1]:
                out.append(n)
            else:
                out.append(out[-1] + 1)
            v *= ratio
        return cls(tuple(out))

    def __len__(self):
        return len(self.t)

    def __iter__(self):
        return iter(enumerate(self.t, start=1))

    def without(self, positions) -> "PowerSchedule":
        """Schedule with the given 1-based positions removed."""
        drop = set(positions)
        return PowerSchedule(tuple(t for k, t in self if k not in drop))


@dataclass(frozen=True)
class ApproximantProvider:
    """``(j, k) -> (D_j^(k), G_j^(k))`` with a declared norm bound."""

    fn: Callable[[int, int], tuple]
    bound: float = float("inf")
    name: str = "custom"

    def __call__(self, j: int, k: int) -> tuple:
        try:
            d, g = self.fn(j, k)
        except ShiftlabError:
            raise
        except Exception as exc:  # provider code is user supplied
            raise ProviderError(f"provider {self.name!r} failed at (j={j}, k={k}): {exc}") from exc
        for label, op in (("D", d), ("G", g)):
            if not isinstance(op, CompactOp):
                raise ProviderError(f"provider {self.name!r} returned a non-operator {label}")
            if np.isfinite(self.bound) and op_norm(op) > self.bound * (1 + 1e-10):
                raise ProviderError(f"||{label}_{j}^({k})|| exceeds declared bound {self.bound:g}")
        return d, g

    @classmethod
    def constant(cls, window, m):
        p = projection_P(window, m)
        return cls(lambda j, k: (p, p), 1.0, name=f"constant-P_{m}")


@dataclass(frozen=True)
class TestVectorSets:
    """Per-index lists of unit vectors: ``h1[j]`` for forward decay, ``h2[j]`` for inverse decay."""

    h1: Mapping[int, Sequence[np.ndarray]]
    h2: Mapping[int, Sequence[np.ndarray]]

    __test__ = False  # not a pytest class

    def __post_init__(self):
        for sets in (self.h1, self.h2):
            for j, vecs in sets.items():
                for v in vecs:
                    n = np.linalg.norm(v)
                    if not np.isfinite(n) or abs(n - 1.0) > 1e-12:
                        raise MalformedInputError(f"test vector for j={j} is not of unit norm")

    @classmethod
    def normalized(cls, h1, h2):
        def norm(sets):
            return {j: [np.asarray(v, complex) / np.linalg.norm(v) for v in vecs] for j, vecs in sets.items()}
        return cls(norm(h1), norm(h2))

    @classmethod
    def uniform(cls, J, vectors):
        """Same vectors for both sets at every j in [J]."""
        J = J if isinstance(J, IndexRange) else IndexRange(J)
        sets = {j: list(vectors) for j in J}
        return cls.normalized(sets, sets)


def _range(J) -> IndexRange:
    return J if isinstance(J, IndexRange) else IndexRange(J)


def _guard(weights: WeightFamily, m: int, n: int):
    h = weights.safe_horizon(m)
    if h is not None and n > h:
        raise HorizonExceededError(
            f"product length {n} exceeds the safe horizon {h} of family {weights.name!r} "
            f"for range P_{m} (m_max={weights.window.m_max})")


def _check_tol(tol):
    if not tol > 0:
        raise PreconditionError(f"tolerance must be positive, got {tol}")


class _Products:
    """Per-checker memo of ordered products keyed by (direction, j, n)."""

    def __init__(self, weights):
        self.weights = weights
        self._memo = {}

    def fwd(self, j, n):
        key = ("f", j, n)
        if key not in self._memo:
            self._memo[key] = forward_product(self.weights, j, n)
        return self._memo[key]

    def inv(self, j, n):
        key = ("i", j, n)
        if key not in self._memo:
            self._memo[key] = inverse_product(self.weights, j, n)
        return self._memo[key]


def _assemble(check, condition, tol, rows, sched, table, flags=None, notes=None):
    satisfied, first = limit_verdict(table, tol)
    rows = sorted(rows, key=lambda r: (r.j, r.k, r.quantity))
    return CriterionReport(check, condition, satisfied, tol, rows, first, len(sched), flags or [], notes or {})


def _norm_series(check, condition, sched, J, tol, quantities, notes=None):
    """Shared driver: ``quantities(j, k, t) -> {name: value}``."""
    rows, table = [], {}
    for j in _range(J):
        for k, t in sched:
            for name, value in quantities(j, k, t).items():
                rows.append(Row(j, k, t, name, value))
                table.setdefault((j, name), []).append(value)
    return _assemble(check, condition, tol, rows, sched, table, notes=notes)


def check_dense_hypercyclicity(op: ShiftOperator, sched: PowerSchedule, prov: ApproximantProvider,
                               J, m: int, tol: float = DEFAULT_TOL) -> CriterionReport:
    """Approximant errors and both product decays for dense hypercyclicity of (T^{t_k})."""
    _check_tol(tol)
    w = op.weights
    p = projection_P(op.window, m)
    prods = _Products(w)

    def quantities(j, k, t):
        _guard(w, m, t)
        d, g = prov(j, k)
        return {
            "approx_D": op_norm(d - p),
            "approx_G": op_norm(g - p),
            "forward": op_norm(prods.fwd(j, t) @ d),
            "inverse": op_norm(prods.inv(j, t) @ g),
        }

    return _norm_series("dense_hypercyclicity", EQUIVALENCE, sched, J, tol, quantities,
                        notes={"J": _range(J).J, "m": m, "provider": prov.name, "family": w.name})


def check_pointwise_sufficient(op: ShiftOperator, sched: PowerSchedule, tv: TestVectorSets,
                               J, tol: float = DEFAULT_TOL) -> CriterionReport:
    """Decay of the ordered products on per-index test vectors."""
    _check_tol(tol)
    w = op.weights
    prods = _Products(w)
    reach = 0
    for sets in (tv.h1, tv.h2):
        for vecs in sets.values():
            for v in vecs:
                nz = np.nonzero(np.abs(v) > 0)[0]
                if nz.size:
                    reach = max(reach, int(np.max(np.abs(op.window.indices[nz]))))

    def quantities(j, k, t):
        _guard(w, reach, t)
        out = {}
        for i, h in enumerate(tv.h1.get(j, ())):
            out[f"forward[{i}]"] = float(np.linalg.norm(prods.fwd(j, t) @ h))
        for i, g in enumerate(tv.h2.get(j, ())):
            out[f"inverse[{i}]"] = float(np.linalg.norm(prods.inv(j, t) @ g))
        return out

    return _norm_series("pointwise_sufficient", SUFFICIENT, sched, J, tol, quantities,
                        notes={"J": _range(J).J, "family": w.name})


def geometric_tail(terms: Sequence[float]) -> tuple[float, str]:
    """Tail estimate beyond the last computed term from the ratio of the last two.

    Returns ``(tail, status)`` with status ``"geometric"``, ``"terminated"``
    (last term exactly zero), ``"unbounded"`` (ratio >= 1) or
    ``"sub-geometric"`` (ratios still growing, so a geometric extrapolation
    would understate the tail).  ``tail`` is ``inf`` unless the status is
    geometric or terminated.
    """
    a = np.asarray(terms, dtype=float)
    if a.size < 2:
        raise PreconditionError("need at least two terms for a tail estimate")
    last, prev = a[-1], a[-2]
    if last == 0.0:
        return 0.0, "terminated"
    if prev == 0.0:
        return float("inf"), "unbounded"
    r = last / prev
    if r >= 1.0:
        return float("inf"), "unbounded"
    if a.size >= 3 and a[-3] > 0.0:
        r_prev = prev / a[-3]
        if r > r_prev * (1 + _RATIO_GROWTH):
            return float("inf"), "sub-geometric"
    return float(last * r / (1.0 - r)), "geometric"


def series_terms(weights: WeightFamily, j: int, n: int, d: CompactOp, cutoff: int) -> tuple[np.ndarray, np.ndarray]:
    """Terms ``||W_{j+ln}...W_{j+1} d||`` and ``||W_{j-ln+1}^-1...W_j^-1 d||`` for l = 1..cutoff.

    The l-th product is built block by block: the new length-n block
    (itself accumulated left to right) multiplies the previous product.
    """
    fwd = np.empty(cutoff)
    inv = np.empty(cutoff)
    pf = pi = None
    for l in range(1, cutoff + 1):
        bf = forward_product(weights, j + (l - 1) * n, n).entries
        bi = inverse_product(weights, j - (l - 1) * n, n).entries
        pf = bf if pf is None else bf @ pf
        pi = bi if pi is None else bi @ pi
        fwd[l - 1] = op_norm(CompactOp._trusted(weights.window, pf @ d.entries))
        inv[l - 1] = op_norm(CompactOp._trusted(weights.window, pi @ d.entries))
        if not pf.any() and not pi.any():
            fwd[l:] = 0.0
            inv[l:] = 0.0
            break
    return fwd, inv


def check_chaos(op: ShiftOperator, sched: PowerSchedule, prov: ApproximantProvider, J, m: int,
                tol: float = DEFAULT_TOL, series_cutoff: int = DEFAULT_SERIES_CUTOFF) -> CriterionReport:
    """Partial sums plus geometric tail of both chaos series, per (j, k).

    The verdict treats ``partial + tail`` of each series, together with the
    approximant error, as the sequences that must vanish; an unbounded or
    sub-geometric tail counts as not below ``tol``.
    """
    _check_tol(tol)
    if series_cutoff < 2:
        raise PreconditionError("series_cutoff must be at least 2")
    w = op.weights
    p = projection_P(op.window, m)
    rows, table, flags = [], {}, []
    for j in _range(J):
        for k, n in sched:
            _guard(w, m, series_cutoff * n)
            d, _ = prov(j, k)
            fwd, inv = series_terms(w, j, n, d, series_cutoff)
            err = op_norm(d - p)
            rows.append(Row(j, k, n, "approx_D", err))
            table.setdefault((j, "approx_D"), []).append(err)
            for name, terms in (("forward", fwd), ("inverse", inv)):
                partial = float(np.sum(terms))
                tail, status = geometric_tail(terms)
                rows.append(Row(j, k, n, f"{name}_partial", partial))
                rows.append(Row(j, k, n, f"{name}_last_term", float(terms[-1])))
                if np.isfinite(tail):
                    rows.append(Row(j, k, n, f"{name}_tail", tail))
                    rows.append(Row(j, k, n, f"{name}_bound", partial + tail))
                else:
                    flags.append({"j": j, "k": k, "t_k": n, "series": name, "status": status})
                table.setdefault((j, f"{name}_bound"), []).append(partial + tail)
    notes = {"J": _range(J).J, "m": m, "series_cutoff": series_cutoff, "provider": prov.name,
             "family": w.name, "direction": "sufficient direction only; satisfied means the sufficient condition held"}
    return _assemble("chaos", SUFFICIENT, tol, rows, sched, table, flags, notes)


def check_avg_transitivity(op: ShiftOperator, sched: PowerSchedule, prov: ApproximantProvider,
                           J, m: int, tol: float = DEFAULT_TOL) -> CriterionReport:
    """The six product decays (lengths n_k and 2 n_k) for the averaged operators."""
    _check_tol(tol)
    w = op.weights
    p = projection_P(op.window, m)
    prods = _Products(w)

    def quantities(j, k, n):
        _guard(w, m, 2 * n)
        d, g = prov(j, k)
        f1, i1 = prods.fwd(j, n), prods.inv(j, n)
        return {
            "approx_D": op_norm(d - p),
            "approx_G": op_norm(g - p),
            "forward_D": op_norm(f1 @ d),
            "inverse_D": op_norm(i1 @ d),
            "forward_G": op_norm(f1 @ g),
            "inverse_G": op_norm(i1 @ g),
            "forward2_G": op_norm(prods.fwd(j, 2 * n) @ g),
            "inverse2_G": op_norm(prods.inv(j, 2 * n) @ g),
        }

    return _norm_series("avg_transitivity", SUFFICIENT, sched, J, tol, quantities,
                        notes={"J": _range(J).J, "m": m, "provider": prov.name, "family": w.name,
                               "direction": "sufficient direction only"})


def _restricted_m(prod: CompactOp, m: int | None) -> float:
    if m is None:
        return lower_bound_m(prod)
    cols = np.abs(prod.window.indices) <= m
    return float(np.linalg.svd(prod.entries[:, cols], compute_uv=False)[-1])


def _necessary(name, weights, sched, J, tol, m, product):
    _check_tol(tol)
    if weights.truncated and m is None:
        raise PreconditionError(
            "truncated families lose injectivity at the window boundary; pass m to restrict "
            "the lower bound to the range of P_m")

    def quantities(j, k, n):
        if m is not None:
            _guard(weights, m, n)
        return {"m_lower_bound": _restricted_m(product(weights, j, n), m if weights.truncated else None)}

    notes = {"J": _range(J).J, "family": weights.name, "restricted_to_P_m": m}
    return _norm_series(name, NECESSARY, sched, J, tol, quantities, notes=notes)


def check_necessary_periodic_T(weights: WeightFamily, sched: PowerSchedule, J,
                               tol: float = DEFAULT_TOL, m: int | None = None) -> CriterionReport:
    """Lower bounds m(W_{j+n_k} ... W_{j+1}) over the schedule."""
    return _necessary("necessary_periodic_T", weights, sched, J, tol, m, forward_product)


def check_necessary_periodic_S(weights: WeightFamily, sched: PowerSchedule, J,
                               tol: float = DEFAULT_TOL, m: int | None = None) -> CriterionReport:
    """Lower bounds m(W_{j-n_k+1}^-1 ... W_j^-1) over the schedule."""
    return _necessary("necessary_periodic_S", weights, sched, J, tol, m, inverse_product)
