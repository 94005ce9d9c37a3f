"""Invocation planning for single flows and whole compositions."""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field

from . import fdsolve
from .classifier import CompatibilityCase, classify_pair
from .fdsolve import FdVariable, ProductInequality
from .model import (
    UNBOUNDED,
    Bound,
    Composition,
    DataFlow,
    Interval,
    ServiceSpec,
    cap,
    interval_intersects,
    interval_scale,
    interval_subset,
    validate_composition,
)

CEILING_ENV = "CARDMED_CEILING"


class PlanningError(ValueError):
    """Inputs cannot be planned at all (missing constraints, invalid composition)."""


@dataclass(frozen=True)
class PlannerConfig:
    search_ceiling: int = fdsolve.DEFAULT_CEILING
    optimize: bool = True

    def __post_init__(self) -> None:
        if self.search_ceiling < 1:
            raise ValueError("search_ceiling must be >= 1")

    @classmethod
    def from_env(cls, **overrides) -> "PlannerConfig":
        raw = os.environ.get(CEILING_ENV)
        if raw is not None and "search_ceiling" not in overrides:
            overrides["search_ceiling"] = int(raw)
        return cls(**overrides)


class GradeKind(enum.Enum):
    CERTAIN = "Certain"
    PROBABLE = "Probable"
    RUNTIME_ONLY = "RuntimeOnly"
    INFEASIBLE = "Infeasible"


# worst-last ordering used for exit codes and summaries
SEVERITY = {
    GradeKind.CERTAIN: 0,
    GradeKind.PROBABLE: 1,
    GradeKind.RUNTIME_ONLY: 1,
    GradeKind.INFEASIBLE: 2,
}


@dataclass(frozen=True)
class Grade:
    kind: GradeKind
    m: int | None = None
    n: int | None = None
    reason: str = ""

    @classmethod
    def certain(cls, m: int, n: int) -> "Grade":
        return cls(GradeKind.CERTAIN, m, n)

    @classmethod
    def probable(cls, m: int, n: int) -> "Grade":
        return cls(GradeKind.PROBABLE, m, n)

    @classmethod
    def runtime_only(cls) -> "Grade":
        return cls(GradeKind.RUNTIME_ONLY)

    @classmethod
    def infeasible(cls, reason: str) -> "Grade":
        return cls(GradeKind.INFEASIBLE, reason=reason)

    def __str__(self) -> str:
        if self.kind in (GradeKind.CERTAIN, GradeKind.PROBABLE):
            return f"{self.kind.value}(m={self.m}, n={self.n})"
        if self.kind is GradeKind.INFEASIBLE:
            return f"Infeasible({self.reason})"
        return self.kind.value


@dataclass(frozen=True)
class FlowPlan:
    flow: DataFlow
    grade: Grade
    case: CompatibilityCase
    at_ceiling: bool = False


@dataclass(frozen=True)
class CompositionPlan:
    invocations: dict[str, int]
    flow_plans: dict[str, FlowPlan]
    total_invocations: int
    diagnosis: tuple[str, ...] = ()
    at_ceiling: bool = False

    @property
    def feasible(self) -> bool:
        return all(p.grade.kind is not GradeKind.INFEASIBLE for p in self.flow_plans.values())

    @property
    def worst(self) -> GradeKind:
        kinds = [p.grade.kind for p in self.flow_plans.values()] or [GradeKind.CERTAIN]
        return max(kinds, key=lambda k: (SEVERITY[k], k is GradeKind.RUNTIME_ONLY))


def _constraints(sender: ServiceSpec, receiver: ServiceSpec, flow: DataFlow) -> tuple[Interval, Interval]:
    out, inp = sender.output, receiver.input
    if out is None or inp is None:
        raise PlanningError(f"flow {flow.name}: both ends need an active cardinality constraint")
    return out, inp


def _hits_ceiling(value: int, limit: Bound, ceiling: int) -> bool:
    return (limit is UNBOUNDED or limit > ceiling) and value >= ceiling


def plan_flow(
    flow: DataFlow, sender: ServiceSpec, receiver: ServiceSpec, cfg: PlannerConfig | None = None
) -> FlowPlan:
    cfg = cfg or PlannerConfig()
    sent, wanted = _constraints(sender, receiver, flow)
    case = classify_pair(sent, wanted)
    a, b, x, y = sent.lo, sent.hi, wanted.lo, wanted.hi
    ceiling = cfg.search_ceiling

    if not flow.dup:
        # duplicate removal happens per instance; nothing to decide statically
        return FlowPlan(flow, Grade.runtime_only(), case)

    if flow.sel:
        if x == 0:
            return FlowPlan(flow, Grade.certain(1, 1), case)
        mmax = cap(sender.inv_max, ceiling)
        if a == 0:
            return FlowPlan(flow, Grade.infeasible("sender may emit nothing"), case)
        m = -(-x // a)
        if m > mmax:
            return FlowPlan(
                flow,
                Grade.infeasible(f"needs {m} sender invocations, cap is {mmax}"),
                case,
                _hits_ceiling(mmax, sender.inv_max, ceiling),
            )
        return FlowPlan(flow, Grade.certain(m, 1), case, _hits_ceiling(m, sender.inv_max, ceiling))

    found = fdsolve.basic_mediation(a, b, x, y, sender.inv_max, receiver.inv_max, ceiling)
    kind = Grade.certain
    if found is None:
        found = fdsolve.probable_mediation(a, b, x, y, sender.inv_max, receiver.inv_max, ceiling)
        kind = Grade.probable
    if found is None:
        limited = sender.inv_max is UNBOUNDED or receiver.inv_max is UNBOUNDED
        return FlowPlan(
            flow,
            Grade.infeasible("no invocation counts within the caps"),
            case,
            limited,
        )
    m, n = found
    at_ceiling = _hits_ceiling(m, sender.inv_max, ceiling) or _hits_ceiling(
        n, receiver.inv_max, ceiling
    )
    return FlowPlan(flow, kind(m, n), case, at_ceiling)


_UNIT = "__unit__"


def _flow_constraints(
    flow: DataFlow, sent: Interval, wanted: Interval, subset: bool
) -> list[ProductInequality]:
    s, r = flow.sender, flow.receiver
    a, b, x, y = sent.lo, sent.hi, wanted.lo, wanted.hi
    never = ProductInequality(1, _UNIT, 0, _UNIT, flow.name)
    if flow.sel:
        if x == 0:
            return []
        return [ProductInequality(x, _UNIT, a, s, flow.name)]
    out = []
    if subset:
        out.append(ProductInequality(x, r, a, s, flow.name))
        if y is UNBOUNDED:
            pass
        elif b is UNBOUNDED:
            out.append(never)
        else:
            out.append(ProductInequality(b, s, y, r, flow.name))
    else:
        if b is not UNBOUNDED:
            out.append(ProductInequality(x, r, b, s, flow.name))
        if y is not UNBOUNDED:
            out.append(ProductInequality(a, s, y, r, flow.name))
    return out


def _solve(variables: list[FdVariable], constraints: list[ProductInequality], cfg: PlannerConfig):
    if cfg.optimize:
        return fdsolve.minimize_sum(variables, constraints)
    return fdsolve.first_solution(variables, constraints)


def plan_composition(c: Composition, cfg: PlannerConfig | None = None) -> CompositionPlan:
    """Joint invocation counts for every service of ``c``.

    Services sharing flows share one count.  With ``optimize`` the plan
    minimizes the total number of invocations, ties broken lexicographically
    in service-id order; without it the first lexicographic solution wins.
    If no all-certain plan exists, intersection (probable) conditions are
    tried before declaring the composition infeasible.
    """
    cfg = cfg or PlannerConfig()
    report = validate_composition(c)
    if not report.ok:
        raise PlanningError("; ".join(str(i) for i in report))
    services = c.by_id
    ceiling = cfg.search_ceiling

    variables = [FdVariable(_UNIT, 1, 1)] + [
        FdVariable(sid, 1, cap(services[sid].inv_max, ceiling)) for sid in sorted(services)
    ]
    pairs = {}
    cases = {}
    static_flows = []
    for f in c.flows:
        pairs[f.name] = _constraints(services[f.sender], services[f.receiver], f)
        cases[f.name] = classify_pair(*pairs[f.name])
        if f.dup:
            static_flows.append(f)

    def build(flows: list[DataFlow], subset: bool) -> list[ProductInequality]:
        out = []
        for f in flows:
            out.extend(_flow_constraints(f, *pairs[f.name], subset=subset))
        return out

    solution = _solve(variables, build(static_flows, True), cfg)
    relaxed = False
    if solution is None:
        solution = _solve(variables, build(static_flows, False), cfg)
        relaxed = True

    if solution is None:
        culprits = []
        for f in static_flows:
            rest = [g for g in static_flows if g is not f]
            if _solve(variables, build(rest, False), cfg) is not None:
                culprits.append(f.name)
        if not culprits:
            culprits = [f.name for f in static_flows if build([f], False)]
        reason = "joint constraints unsatisfiable; conflicting flows: " + ", ".join(culprits)
        flow_plans = {}
        for f in c.flows:
            grade = Grade.infeasible(reason) if f.dup else Grade.runtime_only()
            flow_plans[f.name] = FlowPlan(f, grade, cases[f.name])
        return CompositionPlan({}, flow_plans, 0, tuple(culprits))

    invocations = {sid: solution[sid] for sid in sorted(services)}
    flow_plans = {}
    any_ceiling = False
    for f in c.flows:
        m, n = invocations[f.sender], invocations[f.receiver]
        sent, wanted = pairs[f.name]
        if not f.dup:
            grade = Grade.runtime_only()
        elif f.sel:
            grade = Grade.certain(m, n)
        elif not relaxed or interval_subset(interval_scale(sent, m), interval_scale(wanted, n)):
            grade = Grade.certain(m, n)
        else:
            assert interval_intersects(interval_scale(sent, m), interval_scale(wanted, n))
            grade = Grade.probable(m, n)
        at_ceiling = _hits_ceiling(m, services[f.sender].inv_max, ceiling) or _hits_ceiling(
            n, services[f.receiver].inv_max, ceiling
        )
        any_ceiling |= at_ceiling
        flow_plans[f.name] = FlowPlan(f, grade, cases[f.name], at_ceiling)
    return CompositionPlan(
        invocations, flow_plans, sum(invocations.values()), at_ceiling=any_ceiling
    )


def runtime_feasibility(unique_count: int, receiver: Interval, sel: bool, nmax: int) -> int | None:
    """Receiver invocations able to absorb ``unique_count`` elements.

    Without selection: the smallest ``n <= nmax`` with
    ``n*x <= count <= n*y``.  With selection: the largest ``n <= nmax`` with
    ``n*x <= count`` (surplus is trimmed by selection); a receiver minimum of
    zero falls back to the fewest batches covering the count.
    """
    x, y = receiver.lo, receiver.hi
    if unique_count < 0 or nmax < 1:
        raise ValueError("count must be >= 0 and nmax >= 1")
    if sel:
        if x == 0:
            need = 1 if y is UNBOUNDED or y == 0 else max(1, -(-unique_count // y))
            return min(need, nmax)
        if unique_count < x:
            return None
        return min(nmax, unique_count // x)
    lo = 1
    if y is not UNBOUNDED:
        if y == 0:
            return 1 if unique_count == 0 else None
        lo = max(1, -(-unique_count // y))
    hi = nmax if x == 0 else min(nmax, unique_count // x)
    return lo if lo <= hi else None
