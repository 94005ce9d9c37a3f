"""Deterministic mock services and composition simulation.

Randomness comes from SplitMix64 so that a trace recorded here can be
regenerated by any other implementation:

* stream state for ``(seed, ordinal)`` starts at
  ``(seed + (ordinal + 1) * 0xD1B54A32D192ED03) mod 2**64``;
* each draw adds ``0x9E3779B97F4A7C15`` to the state and returns the
  SplitMix64 finalizer of it;
* an integer in ``[lo, hi]`` rejects draws ``>= 2**64 - 2**64 % span`` and
  returns ``lo + draw % span``;
* a Bernoulli(p) trial succeeds when ``(draw >> 11) * 2**-53 < p``.

Per invocation the generator first draws the element count, then for each
position one Bernoulli trial for recycling and, if recycling, the index of
the recycled key among all keys emitted before it.
"""

from __future__ import annotations

import graphlib
import json
from dataclasses import dataclass, field

from .mediator import Element, FlowResult, MediationTrace, execute_flow
from .model import UNBOUNDED, Composition, ServiceSpec, cap
from .planner import CompositionPlan, PlannerConfig

GENERATOR = "splitmix64"

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_ORDINAL_STEP = 0xD1B54A32D192ED03


class InvocationBudgetExceeded(RuntimeError):
    pass


class CycleError(ValueError):
    pass


class SplitMix64:
    def __init__(self, state: int):
        self.state = state & _MASK

    def next(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def integer(self, lo: int, hi: int) -> int:
        span = hi - lo + 1
        limit = (1 << 64) - (1 << 64) % span
        while True:
            v = self.next()
            if v < limit:
                return lo + v % span

    def chance(self, p: float) -> bool:
        return (self.next() >> 11) * (1.0 / (1 << 53)) < p

    @classmethod
    def for_invocation(cls, seed: int, ordinal: int) -> "SplitMix64":
        return cls(seed + (ordinal + 1) * _ORDINAL_STEP)


@dataclass(frozen=True)
class MockServiceSpec:
    service: ServiceSpec
    seed: int = 0
    duplicate_rate: float = 0.0
    provider_mode: bool | None = None
    count_ceiling: int = 100  # stand-in for an unbounded output maximum

    def __post_init__(self) -> None:
        if self.provider_mode is None:
            object.__setattr__(self, "provider_mode", self.service.is_provider)
        if not 0.0 <= self.duplicate_rate <= 1.0:
            raise ValueError("duplicate_rate must lie in [0, 1]")
        if self.provider_mode and self.duplicate_rate != 0.0:
            raise ValueError("data providers emit fresh keys; duplicate_rate must be 0")
        if self.service.output is None:
            raise ValueError(f"service {self.service.id} has no output constraint")


class MockService:
    """Replays a mock's invocations; output of ordinal k depends only on (seed, k)."""

    def __init__(self, spec: MockServiceSpec):
        self.spec = spec
        self._outputs: list[list[Element]] = []
        self._pool: list[Element] = []

    def _generate(self, ordinal: int) -> list[Element]:
        spec = self.spec
        sid = spec.service.id
        out_k = spec.service.output
        hi = out_k.hi if out_k.hi is not UNBOUNDED else max(out_k.lo, spec.count_ceiling)
        rng = SplitMix64.for_invocation(spec.seed, ordinal)
        count = rng.integer(out_k.lo, hi)
        out = []
        for pos in range(count):
            if self._pool and spec.duplicate_rate > 0 and rng.chance(spec.duplicate_rate):
                original = self._pool[rng.integer(0, len(self._pool) - 1)]
                e = Element(original.key, original.payload, (sid, ordinal, pos))
            else:
                key = f"{sid}#{ordinal}.{pos}"
                e = Element(key, key.encode(), (sid, ordinal, pos))
            out.append(e)
            self._pool.append(e)
        return out

    def invoke(self, ordinal: int) -> list[Element]:
        inv_max = self.spec.service.inv_max
        if ordinal < 0 or (inv_max is not UNBOUNDED and ordinal >= inv_max):
            raise InvocationBudgetExceeded(
                f"{self.spec.service.id}: invocation #{ordinal} exceeds inv_max {inv_max}"
            )
        while len(self._outputs) <= ordinal:
            self._outputs.append(self._generate(len(self._outputs)))
        return list(self._outputs[ordinal])


def derive_seeds(base: int, service_ids) -> dict[str, int]:
    """One seed per service, drawn from a SplitMix64 stream in sorted-id order."""
    rng = SplitMix64(base)
    return {sid: rng.next() for sid in sorted(service_ids)}


def mock_invoke(spec: MockServiceSpec, ordinal: int) -> list[Element]:
    return MockService(spec).invoke(ordinal)


@dataclass
class FlowOutcome:
    flow: str
    ok: bool
    batches: int = 0
    reason: str = ""
    emitted: int = 0
    delivered: int = 0
    result: FlowResult | None = None

    def record(self) -> dict:
        return {
            "flow": self.flow,
            "outcome": "Success" if self.ok else "Fail",
            "batches": self.batches,
            "reason": self.reason,
            "emitted": self.emitted,
            "delivered": self.delivered,
        }


@dataclass
class SimulationReport:
    seeds: dict[str, int]
    outcomes: list[FlowOutcome] = field(default_factory=list)
    invocations: dict[str, int] = field(default_factory=dict)
    planned: dict[str, int] = field(default_factory=dict)
    short_circuited: bool = False
    generator: str = GENERATOR

    @property
    def ok(self) -> bool:
        return not self.short_circuited and all(o.ok for o in self.outcomes)

    @property
    def traces(self) -> list[MediationTrace]:
        return [o.result.trace for o in self.outcomes if o.result is not None]

    def to_dict(self) -> dict:
        return {
            "generator": self.generator,
            "seeds": dict(sorted(self.seeds.items())),
            "ok": self.ok,
            "short_circuited": self.short_circuited,
            "invocations": dict(sorted(self.invocations.items())),
            "planned": dict(sorted(self.planned.items())),
            "flows": [o.record() for o in self.outcomes],
            "traces": [r for t in self.traces for r in t.records()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def trace_jsonl(self) -> str:
        return "".join(t.to_jsonl() for t in self.traces)


def topological_flows(c: Composition) -> list:
    """Flows ordered so every sender runs after the flows feeding it."""
    graph = graphlib.TopologicalSorter({s.id: set() for s in c.services})
    for f in c.flows:
        graph.add(f.receiver, f.sender)
    try:
        order = list(graph.static_order())
    except graphlib.CycleError as exc:
        raise CycleError(f"composition has a cycle through {exc.args[1]}") from None
    rank = {sid: i for i, sid in enumerate(order)}
    return sorted(c.flows, key=lambda f: (rank[f.sender], rank[f.receiver]))


def run_simulation(
    c: Composition,
    plan: CompositionPlan,
    seeds: dict[str, int] | int,
    duplicate_rates: dict[str, float] | None = None,
    cfg: PlannerConfig | None = None,
) -> SimulationReport:
    """Execute every flow of ``c`` in topological order against mock services.

    Invocations are broadcast: ordinal ``k`` of a service yields the same
    elements on each of its outgoing flows, so a service's count is the
    highest ordinal used by any flow, or the number of batches it received.
    """
    cfg = cfg or PlannerConfig()
    flows = topological_flows(c)
    services = c.by_id
    if isinstance(seeds, int):
        seeds = derive_seeds(seeds, services)
    rates = duplicate_rates or {}
    report = SimulationReport(dict(seeds), planned=dict(plan.invocations))
    if not plan.feasible:
        report.short_circuited = True
        return report

    mocks = {
        sid: MockService(
            MockServiceSpec(
                s,
                seed=seeds.get(sid, 0),
                duplicate_rate=0.0 if s.is_provider else rates.get(sid, 0.0),
                count_ceiling=cfg.search_ceiling,
            )
        )
        for sid, s in services.items()
    }
    ledger = {sid: 0 for sid in services}
    for f in flows:
        fp = plan.flow_plans[f.name]
        sender, receiver = services[f.sender], services[f.receiver]
        start = max(plan.invocations.get(f.sender, 1), ledger[f.sender])
        result = execute_flow(
            fp,
            f,
            mocks[f.sender].invoke,
            receiver.input,
            receiver_cap=cap(receiver.inv_max, cfg.search_ceiling),
            sender_cap=cap(sender.inv_max, cfg.search_ceiling),
            start_invocations=start,
        )
        ledger[f.sender] = max(ledger[f.sender], result.sender_invocations)
        ledger[f.receiver] = max(ledger[f.receiver], result.receiver_invocations)
        report.outcomes.append(
            FlowOutcome(
                f.name,
                result.ok,
                result.receiver_invocations,
                result.reason,
                result.emitted,
                result.delivered,
                result,
            )
        )
        if not result.ok:
            break
    report.invocations = ledger
    return report
