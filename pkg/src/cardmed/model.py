"""Core value types: cardinality intervals, constrained schemas, services, flows.

Everything here is an immutable value.  Constructors accept malformed
cardinalities (an inverted ``[7, 3]`` for instance) so that
:func:`validate_composition` can report every problem at once; the interval
operations themselves refuse malformed operands.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Union


class _Unbounded:
    """Sentinel for an unlimited upper bound.

    Compares greater than every integer and absorbs multiplication by a
    positive integer, so interval code can use plain ``<``, ``min`` and ``*``.
    """

    _instance: "_Unbounded | None" = None

    def __new__(cls) -> "_Unbounded":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UNBOUNDED"

    def __str__(self) -> str:
        return "unbounded"

    def __reduce__(self):
        return (_Unbounded, ())

    def __hash__(self) -> int:
        return hash("cardmed.UNBOUNDED")

    def __eq__(self, other: object) -> bool:
        return other is self

    def __lt__(self, other: object) -> bool:
        if other is self or isinstance(other, int):
            return False
        return NotImplemented

    def __le__(self, other: object) -> bool:
        if other is self:
            return True
        if isinstance(other, int):
            return False
        return NotImplemented

    def __gt__(self, other: object) -> bool:
        if other is self:
            return False
        if isinstance(other, int):
            return True
        return NotImplemented

    def __ge__(self, other: object) -> bool:
        if other is self or isinstance(other, int):
            return True
        return NotImplemented

    def __mul__(self, other: object) -> "_Unbounded":
        if isinstance(other, int) and not isinstance(other, bool) and other >= 1:
            return self
        if other is self:
            return self
        return NotImplemented

    __rmul__ = __mul__


UNBOUNDED = _Unbounded()

Bound = Union[int, _Unbounded]


def is_unbounded(value: object) -> bool:
    return value is UNBOUNDED


def _is_int(value: object) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def cap(bound: Bound, ceiling: int) -> int:
    """Replace an unbounded value by ``ceiling``; bounded values pass through."""
    return ceiling if bound is UNBOUNDED else min(bound, ceiling)


@dataclass(frozen=True)
class Interval:
    """Integer interval ``[lo, hi]``; ``hi`` may be :data:`UNBOUNDED`."""

    lo: int
    hi: Bound

    def __post_init__(self) -> None:
        if not _is_int(self.lo):
            raise TypeError(f"interval lower bound must be an int, got {self.lo!r}")
        if not (_is_int(self.hi) or self.hi is UNBOUNDED):
            raise TypeError(f"interval upper bound must be an int or UNBOUNDED, got {self.hi!r}")

    @property
    def well_formed(self) -> bool:
        return self.lo >= 0 and (self.hi is UNBOUNDED or self.lo <= self.hi)

    @property
    def bounded(self) -> bool:
        return self.hi is not UNBOUNDED

    def __contains__(self, value: int) -> bool:
        return self.lo <= value <= self.hi

    def __str__(self) -> str:
        return f"[{self.lo},{self.hi}]"


# A cardinality constraint k_r = [minCard, maxCard] is just an interval.
CardinalityConstraint = Interval


def _require_well_formed(*intervals: Interval) -> None:
    for k in intervals:
        if not k.well_formed:
            raise ValueError(f"malformed interval {k}")


def interval_scale(k: Interval, m: int) -> Interval:
    """Number of instances gathered by ``m`` invocations: ``[m*lo, m*hi]``."""
    _require_well_formed(k)
    if not _is_int(m) or m < 1:
        raise ValueError(f"scale factor must be a positive integer, got {m!r}")
    return Interval(m * k.lo, m * k.hi)


def interval_subset(p: Interval, q: Interval) -> bool:
    _require_well_formed(p, q)
    return q.lo <= p.lo and p.hi <= q.hi


def interval_intersects(p: Interval, q: Interval) -> bool:
    _require_well_formed(p, q)
    return max(p.lo, q.lo) <= min(p.hi, q.hi)


PropertyValue = Union[int, float, str, None]

CARDINALITY = "cardinality"


@dataclass(frozen=True)
class ConstrainedSchema:
    """Labelled schema graph whose property sets carry cardinality constraints.

    ``relationships`` maps a relationship name to its ``(source, target)``
    element types.  ``properties`` maps ``(node_or_edge, property_name)`` to a
    value; the ``"cardinality"`` property of ``active`` is the constraint used
    for mediation.
    """

    element_types: frozenset[str]
    relationships: Mapping[str, tuple[str, str]]
    properties: Mapping[tuple[str, str], object]
    active: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "element_types", frozenset(self.element_types))
        object.__setattr__(self, "relationships", MappingProxyType(dict(self.relationships)))
        object.__setattr__(self, "properties", MappingProxyType(dict(self.properties)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConstrainedSchema):
            return NotImplemented
        return (
            self.element_types == other.element_types
            and dict(self.relationships) == dict(other.relationships)
            and dict(self.properties) == dict(other.properties)
            and self.active == other.active
        )

    def __hash__(self) -> int:
        return hash((self.element_types, self.active, self.constraint))

    @classmethod
    def single(
        cls, constraint: Interval, container: str = "message", element: str = "item"
    ) -> "ConstrainedSchema":
        """One-part message whose single relationship carries ``constraint``."""
        rel = f"{container}/{element}"
        return cls(
            element_types=frozenset({container, element}),
            relationships={rel: (container, element)},
            properties={(rel, CARDINALITY): constraint},
            active=rel,
        )

    def source(self, relationship: str) -> str:
        return self.relationships[relationship][0]

    def target(self, relationship: str) -> str:
        return self.relationships[relationship][1]

    @property
    def constraint(self) -> Interval | None:
        value = self.properties.get((self.active, CARDINALITY))
        return value if isinstance(value, Interval) else None


@dataclass(frozen=True)
class ServiceSpec:
    id: str
    input_schema: ConstrainedSchema
    output_schema: ConstrainedSchema
    inv_max: Bound = 1
    is_provider: bool = False

    @classmethod
    def simple(
        cls,
        id: str,
        inp: tuple[int, Bound],
        out: tuple[int, Bound],
        inv_max: Bound = 1,
        provider: bool = False,
    ) -> "ServiceSpec":
        return cls(
            id,
            ConstrainedSchema.single(Interval(*inp)),
            ConstrainedSchema.single(Interval(*out)),
            inv_max,
            provider,
        )

    @property
    def input(self) -> Interval | None:
        return self.input_schema.constraint

    @property
    def output(self) -> Interval | None:
        return self.output_schema.constraint


class SelectKind(enum.Enum):
    FIRST = "first"
    STRIDE = "stride"
    LAST = "last"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class SelectStrategy:
    kind: SelectKind = SelectKind.FIRST
    step: int = 1
    indices: tuple[int, ...] = ()

    @classmethod
    def first(cls) -> "SelectStrategy":
        return cls(SelectKind.FIRST)

    @classmethod
    def last(cls) -> "SelectStrategy":
        return cls(SelectKind.LAST)

    @classmethod
    def stride(cls, step: int) -> "SelectStrategy":
        return cls(SelectKind.STRIDE, step=step)

    @classmethod
    def explicit(cls, indices: Iterable[int]) -> "SelectStrategy":
        return cls(SelectKind.EXPLICIT, indices=tuple(indices))

    def __str__(self) -> str:
        if self.kind is SelectKind.STRIDE:
            return f"stride({self.step})"
        if self.kind is SelectKind.EXPLICIT:
            return f"explicit{list(self.indices)}"
        return self.kind.value


class MergeKind(enum.Enum):
    CONCAT_AB = "concat_ab"
    INTERLEAVE_PAIRS = "interleave_pairs"
    CONCAT_BA = "concat_ba"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class MergeStrategy:
    kind: MergeKind = MergeKind.CONCAT_AB
    permutation: tuple[int, ...] = ()

    @classmethod
    def explicit(cls, permutation: Iterable[int]) -> "MergeStrategy":
        return cls(MergeKind.EXPLICIT, tuple(permutation))

    def __str__(self) -> str:
        if self.kind is MergeKind.EXPLICIT:
            return f"explicit{list(self.permutation)}"
        return self.kind.value


class DedupStrategy(enum.Enum):
    REMOVE_FIRST = "remove_first"  # drop earlier occurrences, keep the last
    REMOVE_LAST = "remove_last"  # drop later occurrences, keep the first


@dataclass(frozen=True)
class StrategyPolicy:
    select: SelectStrategy = field(default_factory=SelectStrategy.first)
    merge: MergeStrategy = field(default_factory=MergeStrategy)
    dedup: DedupStrategy = DedupStrategy.REMOVE_LAST


@dataclass(frozen=True)
class DataFlow:
    sender: str
    receiver: str
    dup: bool = True
    sel: bool = False
    ord: bool = True
    policies: StrategyPolicy = field(default_factory=StrategyPolicy)

    @property
    def name(self) -> str:
        return f"{self.sender}->{self.receiver}"

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Composition:
    services: tuple[ServiceSpec, ...]
    flows: tuple[DataFlow, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "services", tuple(self.services))
        object.__setattr__(self, "flows", tuple(self.flows))

    @property
    def by_id(self) -> dict[str, ServiceSpec]:
        return {s.id: s for s in self.services}

    def service(self, service_id: str) -> ServiceSpec:
        for s in self.services:
            if s.id == service_id:
                return s
        raise KeyError(service_id)

    def flows_of(self, service_id: str) -> list[DataFlow]:
        return [f for f in self.flows if service_id in (f.sender, f.receiver)]


class IssueCode(str, enum.Enum):
    DUPLICATE_ID = "DuplicateId"
    DANGLING_ENDPOINT = "DanglingEndpoint"
    SELF_LOOP = "SelfLoop"
    DUPLICATE_FLOW = "DuplicateFlow"
    PROVIDER_BOUNDED = "ProviderBounded"
    INVALID_INV_MAX = "InvalidInvMax"
    INVERTED_INTERVAL = "InvertedInterval"
    NEGATIVE_BOUND = "NegativeBound"
    MISSING_CONSTRAINT = "MissingConstraint"
    EMPTY_SCHEMA = "EmptySchema"
    DANGLING_RELATIONSHIP = "DanglingRelationship"
    INVALID_POLICY = "InvalidPolicy"


@dataclass(frozen=True)
class Issue:
    code: IssueCode
    locus: str
    message: str

    def __str__(self) -> str:
        return f"{self.code.value} at {self.locus}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[Issue, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.issues

    @property
    def codes(self) -> set[IssueCode]:
        return {i.code for i in self.issues}

    def __len__(self) -> int:
        return len(self.issues)

    def __iter__(self):
        return iter(self.issues)


def _check_interval(k: Interval, locus: str) -> list[Issue]:
    issues = []
    if k.lo < 0 or (_is_int(k.hi) and k.hi < 0):
        issues.append(Issue(IssueCode.NEGATIVE_BOUND, locus, f"negative bound in {k}"))
    elif k.hi is not UNBOUNDED and k.lo > k.hi:
        issues.append(Issue(IssueCode.INVERTED_INTERVAL, locus, f"min > max in {k}"))
    return issues


def _check_schema(schema: ConstrainedSchema, locus: str) -> list[Issue]:
    issues = []
    if not schema.element_types:
        issues.append(Issue(IssueCode.EMPTY_SCHEMA, locus, "schema has no element types"))
    for rel, (src, dst) in schema.relationships.items():
        for end in (src, dst):
            if end not in schema.element_types:
                issues.append(
                    Issue(
                        IssueCode.DANGLING_RELATIONSHIP,
                        f"{locus}.{rel}",
                        f"relationship endpoint {end!r} is not an element type",
                    )
                )
    k = schema.constraint
    if schema.active not in schema.relationships or k is None:
        issues.append(
            Issue(
                IssueCode.MISSING_CONSTRAINT,
                locus,
                f"active relationship {schema.active!r} carries no cardinality constraint",
            )
        )
    else:
        issues.extend(_check_interval(k, locus))
    return issues


def _check_policy(policy: StrategyPolicy, locus: str) -> list[Issue]:
    issues = []
    sel = policy.select
    if sel.kind is SelectKind.STRIDE and sel.step < 1:
        issues.append(Issue(IssueCode.INVALID_POLICY, locus, f"stride step {sel.step} < 1"))
    if sel.kind is SelectKind.EXPLICIT:
        if len(set(sel.indices)) != len(sel.indices):
            issues.append(Issue(IssueCode.INVALID_POLICY, locus, "explicit selection repeats an index"))
        if any(i < 0 for i in sel.indices):
            issues.append(Issue(IssueCode.INVALID_POLICY, locus, "explicit selection has a negative index"))
    merge = policy.merge
    if merge.kind is MergeKind.EXPLICIT and sorted(merge.permutation) != list(
        range(len(merge.permutation))
    ):
        issues.append(Issue(IssueCode.INVALID_POLICY, locus, "explicit merge is not a permutation"))
    return issues


def validate_composition(c: Composition) -> ValidationReport:
    """Collect every violated invariant of ``c``; an empty report means well-formed."""
    issues: list[Issue] = []
    seen: set[str] = set()
    for s in c.services:
        loc = f"services.{s.id}"
        if s.id in seen:
            issues.append(Issue(IssueCode.DUPLICATE_ID, loc, f"service id {s.id!r} declared twice"))
        seen.add(s.id)
        if s.is_provider and s.inv_max is not UNBOUNDED:
            issues.append(
                Issue(IssueCode.PROVIDER_BOUNDED, loc, f"data provider has bounded inv_max {s.inv_max}")
            )
        if s.inv_max is not UNBOUNDED and (not _is_int(s.inv_max) or s.inv_max < 1):
            issues.append(Issue(IssueCode.INVALID_INV_MAX, loc, f"inv_max {s.inv_max!r} is not >= 1"))
        issues.extend(_check_schema(s.input_schema, loc + ".in"))
        issues.extend(_check_schema(s.output_schema, loc + ".out"))

    pairs: set[tuple[str, str]] = set()
    for f in c.flows:
        loc = f"flows.{f.name}"
        for end in (f.sender, f.receiver):
            if end not in seen:
                issues.append(Issue(IssueCode.DANGLING_ENDPOINT, loc, f"unknown service {end!r}"))
        if f.sender == f.receiver:
            issues.append(Issue(IssueCode.SELF_LOOP, loc, "sender and receiver are the same service"))
        if (f.sender, f.receiver) in pairs:
            issues.append(Issue(IssueCode.DUPLICATE_FLOW, loc, "flow declared twice"))
        pairs.add((f.sender, f.receiver))
        issues.extend(_check_policy(f.policies, loc + ".policies"))
    return ValidationReport(tuple(issues))
