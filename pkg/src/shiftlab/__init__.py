"""Numerical toolkit for generalized weighted shifts on the standard Hilbert module over the compacts.

Finite-horizon checkers for hypercyclicity, topological transitivity and
chaos of ``T_{U,W}``, the constructive witnesses behind them, and the
C*-algebraic shifts ``T_{Phi,b}``.
"""

from . import constructions, core, criteria, cstar, errors, module_space, report, shift
from .core import BasisWindow, CompactOp, UnitaryOp, lower_bound_m, op_norm, projection_P
from .criteria import ApproximantProvider, PowerSchedule, TestVectorSets
from .module_space import IndexRange, ModuleVector
from .report import CriterionReport
from .shift import ShiftOperator, WeightFamily

__version__ = "0.1.0"

__all__ = [
    "constructions", "core", "criteria", "cstar", "errors", "module_space", "report", "shift",
    "BasisWindow", "CompactOp", "UnitaryOp", "lower_bound_m", "op_norm", "projection_P",
    "ApproximantProvider", "PowerSchedule", "TestVectorSets", "IndexRange", "ModuleVector",
    "CriterionReport", "ShiftOperator", "WeightFamily",
]
