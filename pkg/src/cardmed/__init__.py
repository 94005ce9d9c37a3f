"""Cardinality mediation between composed services."""

from .classifier import CompatibilityCase, MediationGroup, classify_pair, mediation_group
from .fdsolve import basic_mediation, probable_mediation
from .model import (
    UNBOUNDED,
    CardinalityConstraint,
    Composition,
    ConstrainedSchema,
    DataFlow,
    DedupStrategy,
    Interval,
    MergeStrategy,
    SelectStrategy,
    ServiceSpec,
    StrategyPolicy,
    interval_intersects,
    interval_scale,
    interval_subset,
    validate_composition,
)
from .planner import PlannerConfig, plan_composition, plan_flow, runtime_feasibility

__version__ = "0.1.0"
