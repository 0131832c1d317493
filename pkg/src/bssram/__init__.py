"""Register machines over first-order structures: interpreter, constructions and analysis."""

from .program import Program, make_program, parse_program, print_program, validate
from .runtime import ExplorationBudget, explore, run_deterministic, trace_configurations
from .structures import builtin_structure, with_identity

__all__ = [
    "Program", "make_program", "parse_program", "print_program", "validate",
    "ExplorationBudget", "explore", "run_deterministic", "trace_configurations",
    "builtin_structure", "with_identity",
]
__version__ = "0.1.0"
