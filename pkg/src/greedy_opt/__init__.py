"""Weak biorthogonal greedy algorithms for sparse convex minimization over dictionaries."""
from .greedy import (ErrorSchedule, GreedyTrace, StopRule, WeaknessSchedule, run,
                     verify_conditions)
from .objectives import Composite, ShiftedPNorm, power_type_bound
from .vector_space import Dictionary, best_atom, build_dictionary

__all__ = [
    "Composite", "Dictionary", "ErrorSchedule", "GreedyTrace", "ShiftedPNorm", "StopRule",
    "WeaknessSchedule", "best_atom", "build_dictionary", "power_type_bound", "run",
    "verify_conditions",
]
__version__ = "0.1.0"
