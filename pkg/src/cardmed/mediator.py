"""Instance-level mediation: selection, merging, duplicate removal, batching."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .model import (
    DataFlow,
    DedupStrategy,
    Interval,
    MergeKind,
    MergeStrategy,
    SelectKind,
    SelectStrategy,
)
from .planner import FlowPlan, GradeKind, runtime_feasibility


class MediationError(Exception):
    pass


class SelectionShortfall(MediationError):
    def __init__(self, wanted: int, available: int):
        self.wanted = wanted
        self.available = available
        self.deficit = wanted - available
        super().__init__(f"selection needs {wanted} elements, only {available} available (short by {self.deficit})")


class MergePolicyError(MediationError):
    pass


class PartitionError(MediationError):
    pass


class OrderViolation(MediationError):
    pass


@dataclass(frozen=True)
class Element:
    key: str
    payload: bytes = b""
    origin: tuple[str, int, int] = ("", 0, 0)


@dataclass(frozen=True)
class Batch:
    elements: tuple[Element, ...]
    destination: str

    def __len__(self) -> int:
        return len(self.elements)


def select(items: Sequence, strategy: SelectStrategy, k: int) -> list:
    """Keep ``k`` elements of ``items`` according to ``strategy``."""
    if k < 0:
        raise ValueError("k must be non-negative")
    kind = strategy.kind
    if kind is SelectKind.FIRST:
        if k > len(items):
            raise SelectionShortfall(k, len(items))
        return list(items[:k])
    if kind is SelectKind.LAST:
        if k > len(items):
            raise SelectionShortfall(k, len(items))
        return list(items[len(items) - k :])
    if kind is SelectKind.STRIDE:
        if strategy.step < 1:
            raise ValueError("stride step must be >= 1")
        picked = list(items[:: strategy.step])
        if k > len(picked):
            raise SelectionShortfall(k, len(picked))
        return picked[:k]
    indices = strategy.indices
    if len(set(indices)) != len(indices):
        raise ValueError("explicit selection repeats an index")
    if k > len(indices):
        raise SelectionShortfall(k, len(indices))
    chosen = indices[:k]
    bad = [i for i in chosen if not 0 <= i < len(items)]
    if bad:
        raise IndexError(f"explicit selection indices out of range: {bad}")
    return [items[i] for i in chosen]


def _interleave_pairs(l1: Sequence[Element], l2: Sequence[Element]) -> list[Element]:
    out: list[Element] = []
    i = j = 0
    while i < len(l1) and j < len(l2):
        out.extend(l1[i : i + 2])
        out.extend(l2[j : j + 2])
        i += 2
        j += 2
    out.extend(l1[i:])
    out.extend(l2[j:])
    return out


def merge(l1: Sequence[Element], l2: Sequence[Element], strategy: MergeStrategy) -> list[Element]:
    kind = strategy.kind
    if kind is MergeKind.CONCAT_AB:
        return [*l1, *l2]
    if kind is MergeKind.CONCAT_BA:
        return [*l2, *l1]
    if kind is MergeKind.INTERLEAVE_PAIRS:
        return _interleave_pairs(l1, l2)
    joined = [*l1, *l2]
    perm = strategy.permutation
    if len(perm) != len(joined) or sorted(perm) != list(range(len(joined))):
        raise MergePolicyError(
            f"explicit merge needs a permutation of 0..{len(joined) - 1}, got {list(perm)}"
        )
    return [joined[i] for i in perm]


def rm_dup(items: Iterable[Element], strategy: DedupStrategy) -> list[Element]:
    """Drop duplicate keys.

    ``REMOVE_LAST`` keeps each key's first occurrence, ``REMOVE_FIRST`` its
    last; survivors keep their relative order either way.
    """
    items = list(items)
    if strategy is DedupStrategy.REMOVE_LAST:
        seen: set[str] = set()
        out = []
        for e in items:
            if e.key not in seen:
                seen.add(e.key)
                out.append(e)
        return out
    last = {e.key: idx for idx, e in enumerate(items)}
    return [e for idx, e in enumerate(items) if last[e.key] == idx]


def batch_sizes(total: int, n: int, x: int, y) -> list[int]:
    if n < 1:
        raise PartitionError("need at least one batch")
    if not (n * x <= total <= n * y):
        raise PartitionError(f"{total} elements cannot fill {n} batches of [{x},{y}]")
    base, extra = divmod(total, n)
    # base >= x because total >= n*x; when extra > 0, base < total/n <= y so base+1 <= y
    return [base + 1] * extra + [base] * (n - extra)


def partition_batches(
    items: Sequence[Element], n: int, x: int, y, destination: str = ""
) -> list[Batch]:
    """Split ``items`` in order into ``n`` batches whose sizes lie in ``[x, y]``."""
    out = []
    start = 0
    for size in batch_sizes(len(items), n, x, y):
        out.append(Batch(tuple(items[start : start + size]), destination))
        start += size
    return out


@dataclass(frozen=True)
class TraceEvent:
    kind: str
    data: tuple[tuple[str, object], ...] = ()

    def record(self) -> dict:
        return {"event": self.kind, **dict(self.data)}

    def get(self, name: str, default=None):
        return dict(self.data).get(name, default)


def _event(kind: str, **data) -> TraceEvent:
    return TraceEvent(kind, tuple(data.items()))


@dataclass
class MediationTrace:
    flow: str
    events: list[TraceEvent] = field(default_factory=list)

    def add(self, kind: str, **data) -> None:
        self.events.append(_event(kind, **data))

    def of(self, kind: str) -> list[TraceEvent]:
        return [e for e in self.events if e.kind == kind]

    def records(self) -> list[dict]:
        return [{"flow": self.flow, **e.record()} for e in self.events]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records())


@dataclass
class FlowResult:
    flow: DataFlow
    batches: list[Batch]
    trace: MediationTrace
    sender_invocations: int
    ok: bool
    reason: str = ""
    emitted: int = 0
    delivered: int = 0

    @property
    def receiver_invocations(self) -> int:
        return len(self.batches)


def _effective_merge(flow: DataFlow) -> MergeStrategy:
    chosen = flow.policies.merge
    if flow.ord and chosen.kind not in (MergeKind.CONCAT_AB, MergeKind.EXPLICIT):
        return MergeStrategy(MergeKind.CONCAT_AB)
    return chosen


def _pick_n(plan: FlowPlan, flow: DataFlow, count: int, receiver: Interval, receiver_cap: int) -> int | None:
    grade = plan.grade
    x, y = receiver.lo, receiver.hi
    if grade.kind is GradeKind.CERTAIN:
        n = grade.n
        fits = n * x <= count and (flow.sel or count <= n * y)
        if fits:
            return n
        return runtime_feasibility(count, receiver, flow.sel, n)
    return runtime_feasibility(count, receiver, flow.sel, receiver_cap)


def execute_flow(
    plan: FlowPlan,
    flow: DataFlow,
    sender_stream: Callable[[int], list[Element]],
    receiver: Interval,
    receiver_cap: int,
    sender_cap: int,
    start_invocations: int | None = None,
) -> FlowResult:
    """Run one flow: invoke, merge, deduplicate, select, batch, deliver.

    ``sender_stream(ordinal)`` returns the elements of the sender's
    ``ordinal``-th invocation.  Probable and runtime-only plans escalate one
    extra sender invocation at a time, up to ``sender_cap``, until the unique
    count fits the receiver.
    """
    grade = plan.grade
    if grade.kind is GradeKind.INFEASIBLE:
        raise ValueError(f"flow {flow.name} has an infeasible plan")
    if flow.ord and flow.policies.select.kind is SelectKind.EXPLICIT:
        idx = flow.policies.select.indices
        if list(idx) != sorted(idx):
            raise OrderViolation(f"explicit selection {list(idx)} reorders an order-preserving flow")

    trace = MediationTrace(flow.name)
    merge_with = _effective_merge(flow)
    base = grade.m if grade.m is not None else 1
    if start_invocations is not None:
        base = max(base, start_invocations)
    base = min(base, sender_cap)
    can_escalate = grade.kind in (GradeKind.PROBABLE, GradeKind.RUNTIME_ONLY)

    merged: list[Element] = []
    emitted = 0
    used = 0

    def invoke() -> None:
        nonlocal merged, emitted, used
        trace.add("Invoke", service=flow.sender, ordinal=used)
        out = sender_stream(used)
        trace.add("Emit", service=flow.sender, ordinal=used, count=len(out))
        emitted += len(out)
        merged = list(out) if used == 0 else merge(merged, out, merge_with)
        used += 1

    for _ in range(base):
        invoke()
    while True:
        if used > 1:
            trace.add("Merge", strategy=str(merge_with), count=len(merged))
        unique = merged
        if not flow.dup:
            unique = rm_dup(merged, flow.policies.dedup)
            trace.add("Dedup", strategy=flow.policies.dedup.value, removed=len(merged) - len(unique))
        n = _pick_n(plan, flow, len(unique), receiver, receiver_cap)
        if n is not None:
            break
        if can_escalate and used < sender_cap:
            trace.add("Escalate", service=flow.sender, ordinal=used)
            invoke()
            continue
        reason = "InsufficientUnique" if not flow.dup else "NoFeasibleBatching"
        trace.add(
            "Fail",
            reason=reason,
            case=plan.case.letter,
            emitted=emitted,
            unique=len(unique),
            invocations=used,
        )
        return FlowResult(flow, [], trace, used, False, reason, emitted, 0)

    x, y = receiver.lo, receiver.hi
    if flow.sel and len(unique) > n * y:
        keep = n * y
        strategy = flow.policies.select
        if strategy.kind is SelectKind.STRIDE:
            keep = min(keep, len(unique[:: strategy.step]))
        if keep < n * x:
            reason = "SelectionShortfall"
            trace.add("Fail", reason=reason, case=plan.case.letter, emitted=emitted,
                      unique=len(unique), invocations=used)
            return FlowResult(flow, [], trace, used, False, reason, emitted, 0)
        kept = select(range(len(unique)), strategy, keep)
        trace.add("Select", strategy=str(strategy), kept=kept, dropped=len(unique) - len(kept))
        unique = [unique[i] for i in kept]
    batches = partition_batches(unique, n, x, y, flow.receiver)
    trace.add("Deliver", receiver=flow.receiver, sizes=[len(b) for b in batches])
    return FlowResult(flow, batches, trace, used, True, "", emitted, len(unique))


def trace_consistent(trace: MediationTrace) -> bool:
    """``emitted - removed - dropped == delivered`` for a successful trace."""
    emitted = sum(e.get("count") for e in trace.of("Emit"))
    dedups = trace.of("Dedup")
    removed = dedups[-1].get("removed") if dedups else 0
    dropped = sum(e.get("dropped") for e in trace.of("Select"))
    delivered = sum(sum(e.get("sizes")) for e in trace.of("Deliver"))
    return emitted - removed - dropped == delivered

