"""Planning with virtual actions to explain why a task has no plan."""

from vaplan.diagnosis import (
    DiagnosisConfig,
    Diagnosed,
    GoalList,
    LayoutRing,
    MissingCapability,
    MixedMissing,
    NormalPlan,
    StaticUnmet,
    Undiagnosed,
    progressive_diagnose,
)
from vaplan.grounder import ground_actions
from vaplan.model import Atom, Condition, ConfigError, Domain, Literal, Problem, State
from vaplan.parser import ParseError, parse_domain, parse_problem
from vaplan.planner import Plan, Unsolvable, plan, validate_plan
from vaplan.virtual import generate_virtual_actions

__version__ = "0.1.0"

__all__ = [
    "Atom",
    "Condition",
    "ConfigError",
    "DiagnosisConfig",
    "Diagnosed",
    "Domain",
    "GoalList",
    "LayoutRing",
    "Literal",
    "MissingCapability",
    "MixedMissing",
    "NormalPlan",
    "ParseError",
    "Plan",
    "Problem",
    "State",
    "StaticUnmet",
    "Undiagnosed",
    "Unsolvable",
    "generate_virtual_actions",
    "ground_actions",
    "parse_domain",
    "parse_problem",
    "plan",
    "progressive_diagnose",
    "validate_plan",
]
