"""Criterion reports: tidy (j, k, t_k, quantity, value) rows plus a verdict."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["Row", "CriterionReport", "limit_verdict", "SATISFIED", "NOT_SATISFIED", "CSV_HEADER"]

SATISFIED = "satisfied-at-tolerance"
NOT_SATISFIED = "not-satisfied-within-horizon"
CSV_HEADER = ("check", "j", "k", "t_k", "quantity", "value")

TAIL_LENGTH = 3
_TAIL_REL_SLACK = 1e-12


@dataclass(frozen=True)
class Row:
    j: int
    k: int
    t_k: int
    quantity: str
    value: float


def limit_verdict(table: dict, tol: float, tail: int = TAIL_LENGTH) -> tuple[bool, int | None]:
    """Finite-horizon stand-in for "every sequence tends to zero".

    ``table`` maps a key (e.g. ``(j, quantity)``) to values over the recorded
    k's, all of the same length; ``inf`` marks an unavailable value.  The
    verdict holds when some common k has every value below ``tol`` and every
    sequence is non-increasing over its last ``tail`` entries.  Returns the
    verdict and the first (1-based) k where all values are below ``tol``.
    """
    if not table:
        return False, None
    arr = np.array([np.asarray(v, dtype=float) for v in table.values()])
    if arr.ndim != 2 or arr.shape[1] == 0:
        return False, None
    below = np.all(arr < tol, axis=0)
    first = int(np.argmax(below)) + 1 if below.any() else None
    end = arr[:, -tail:]
    slack = _TAIL_REL_SLACK * np.abs(end[:, :-1]) + 1e-9 * tol
    finite = np.isfinite(end).all()
    monotone = bool(finite and np.all(end[:, 1:] <= end[:, :-1] + slack))
    return bool(first is not None and monotone), first


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


@dataclass
class CriterionReport:
    check: str
    condition: str
    satisfied: bool
    tol: float
    rows: list = field(default_factory=list)
    first_k: int | None = None
    horizon: int = 0
    flags: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return SATISFIED if self.satisfied else NOT_SATISFIED

    def quantities(self) -> list:
        return sorted({r.quantity for r in self.rows})

    def js(self) -> list:
        return sorted({r.j for r in self.rows})

    def series(self, quantity: str, j: int) -> np.ndarray:
        vals = sorted((r.k, r.value) for r in self.rows if r.quantity == quantity and r.j == j)
        return np.array([v for _, v in vals])

    def t_values(self, quantity: str, j: int) -> np.ndarray:
        vals = sorted((r.k, r.t_k) for r in self.rows if r.quantity == quantity and r.j == j)
        return np.array([t for _, t in vals])

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "condition": self.condition,
            "verdict": self.verdict,
            "tol": self.tol,
            "first_k": self.first_k,
            "horizon": self.horizon,
            "flags": self.flags,
            "notes": self.notes,
            "rows": [[r.j, r.k, r.t_k, r.quantity, r.value] for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in sorted(self.rows, key=lambda r: (r.j, r.k, r.quantity)):
            w.writerow([self.check, r.j, r.k, r.t_k, r.quantity, _fmt(r.value)])
        return buf.getvalue()

    def __post_init__(self):
        for r in self.rows:
            if not (math.isfinite(r.value) and r.value >= 0):
                raise ValueError(f"recorded value must be finite and nonnegative: {r}")
