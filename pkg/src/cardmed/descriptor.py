"""Composition descriptors: the YAML contract read and written by the CLI.

The structure is pinned by ``schema/descriptor.schema.json``; unknown fields
are rejected and every error names a ``line:column`` position and a field
path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import yaml

from .model import (
    UNBOUNDED,
    Bound,
    Composition,
    DataFlow,
    DedupStrategy,
    MergeKind,
    MergeStrategy,
    SelectKind,
    SelectStrategy,
    ServiceSpec,
    StrategyPolicy,
    validate_composition,
)

VERSION = "cardmed/1"


def load_schema() -> dict:
    text = resources.files("cardmed").joinpath("schema/descriptor.schema.json").read_text()
    return json.loads(text)


class DescriptorError(ValueError):
    def __init__(self, message: str, locus: str = "", code: str = "Syntax"):
        self.locus = locus
        self.code = code
        super().__init__(f"{locus}: {message}" if locus else message)


@dataclass(frozen=True)
class SimulationConfig:
    seeds: dict[str, int] = field(default_factory=dict)
    duplicate_rates: dict[str, float] = field(default_factory=dict)


def _positions(text: str) -> dict[tuple, tuple[int, int]]:
    """Map each field path to the 1-based ``(line, column)`` where it starts."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}:{mark.column + 1}" if mark else "descriptor"
        raise DescriptorError(str(getattr(exc, "problem", exc)), where) from None
    out: dict[tuple, tuple[int, int]] = {}

    def walk(node, path: tuple) -> None:
        out.setdefault(path, (node.start_mark.line + 1, node.start_mark.column + 1))
        if isinstance(node, yaml.MappingNode):
            seen = set()
            for key_node, value_node in node.value:
                key = key_node.value
                here = (key_node.start_mark.line + 1, key_node.start_mark.column + 1)
                if key in seen:
                    raise DescriptorError(
                        f"duplicate field {key!r}", f"line {here[0]}:{here[1]} ({_dotted(path + (key,))})",
                        "DuplicateField",
                    )
                seen.add(key)
                out[path + (key,)] = here
                walk(value_node, path + (key,))
        elif isinstance(node, yaml.SequenceNode):
            for i, item in enumerate(node.value):
                walk(item, path + (i,))

    if root is not None:
        walk(root, ())
    return out


def _dotted(path) -> str:
    parts = []
    for p in path:
        if isinstance(p, int):
            parts.append(f"[{p}]")
        else:
            parts.append(("." if parts else "") + str(p))
    return "".join(parts) or "<root>"


def _where(positions, path) -> str:
    path = tuple(path)
    probe = path
    while probe not in positions and probe:
        probe = probe[:-1]
    line, col = positions.get(probe, (1, 1))
    return f"line {line}:{col} ({_dotted(path)})"


def _schema_error(err: jsonschema.ValidationError, positions) -> DescriptorError:
    path = tuple(err.absolute_path)
    if err.validator == "additionalProperties" and isinstance(err.instance, dict):
        allowed = set(err.schema.get("properties", {}))
        extra = sorted(k for k in err.instance if k not in allowed)
        if extra:
            return DescriptorError(
                f"unknown field {extra[0]!r}", _where(positions, path + (extra[0],)), "UnknownField"
            )
    return DescriptorError(err.message, _where(positions, path), "Schema")


def _bound(value) -> Bound:
    return UNBOUNDED if value == "unbounded" else value


def _unbound(value: Bound):
    return "unbounded" if value is UNBOUNDED else value


def _select(raw) -> SelectStrategy:
    if raw in ("first", None):
        return SelectStrategy.first()
    if raw == "last":
        return SelectStrategy.last()
    if "stride" in raw:
        return SelectStrategy.stride(raw["stride"])
    return SelectStrategy.explicit(raw["explicit"])


def _merge(raw) -> MergeStrategy:
    if raw is None:
        return MergeStrategy()
    if isinstance(raw, dict):
        return MergeStrategy.explicit(raw["explicit"])
    return MergeStrategy(MergeKind(raw))


def composition_from_dict(data: dict) -> tuple[Composition, SimulationConfig]:
    services = []
    for s in data["services"]:
        inv_max = _bound(s["inv_max"])
        services.append(
            ServiceSpec.simple(
                s["id"],
                (s["in"]["min"], _bound(s["in"]["max"])),
                (s["out"]["min"], _bound(s["out"]["max"])),
                inv_max,
                s.get("provider", False),
            )
        )
    flows = []
    for f in data["flows"]:
        pol = f.get("policies", {})
        flows.append(
            DataFlow(
                f["from"],
                f["to"],
                dup=f["duplicates_tolerated"],
                sel=f["selection_allowed"],
                ord=f["ordering_required"],
                policies=StrategyPolicy(
                    _select(pol.get("select")),
                    _merge(pol.get("merge")),
                    DedupStrategy(pol.get("dedup", DedupStrategy.REMOVE_LAST.value)),
                ),
            )
        )
    sim = data.get("simulation", {})
    return Composition(tuple(services), tuple(flows)), SimulationConfig(
        dict(sim.get("seeds", {})), dict(sim.get("duplicate_rates", {}))
    )


def parse_descriptor(text: str) -> tuple[Composition, SimulationConfig]:
    positions = _positions(text)
    data = yaml.safe_load(text)
    if not isinstance(data, dict):
        raise DescriptorError("descriptor must be a mapping", "line 1:1")
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        raise _schema_error(errors[0], positions)
    composition, sim = composition_from_dict(data)
    report = validate_composition(composition)
    if not report.ok:
        issue = report.issues[0]
        path = _issue_path(issue.locus, data)
        others = ""
        if len(report) > 1:
            others = " (also: " + ", ".join(i.code.value for i in report.issues[1:]) + ")"
        raise DescriptorError(
            f"{issue.code.value}: {issue.message}{others}", _where(positions, path), issue.code.value
        )
    known = {s.id for s in composition.services}
    for section in ("seeds", "duplicate_rates"):
        for sid in getattr(sim, section):
            if sid not in known:
                raise DescriptorError(
                    f"unknown service {sid!r}",
                    _where(positions, ("simulation", section, sid)),
                    "DanglingEndpoint",
                )
    return composition, sim


def _issue_path(locus: str, data: dict) -> tuple:
    """Translate a validation locus like ``services.ws1.in`` into a field path."""
    head, _, rest = locus.partition(".")
    if head == "services":
        sid, _, tail = rest.partition(".")
        for i, s in enumerate(data["services"]):
            if s["id"] == sid:
                return ("services", i) + ((tail,) if tail else ())
    if head == "flows":
        name, _, tail = rest.partition(".")
        for i, f in enumerate(data["flows"]):
            if f"{f['from']}->{f['to']}" == name:
                return ("flows", i) + ((tail,) if tail else ())
    return ()


def _select_raw(s: SelectStrategy):
    if s.kind in (SelectKind.FIRST, SelectKind.LAST):
        return s.kind.value
    if s.kind is SelectKind.STRIDE:
        return {"stride": s.step}
    return {"explicit": list(s.indices)}


def _merge_raw(m: MergeStrategy):
    if m.kind is MergeKind.EXPLICIT:
        return {"explicit": list(m.permutation)}
    return m.kind.value


def composition_to_dict(c: Composition, sim: SimulationConfig | None = None) -> dict:
    data: dict = {"version": VERSION, "services": [], "flows": []}
    for s in c.services:
        data["services"].append(
            {
                "id": s.id,
                "in": {"min": s.input.lo, "max": _unbound(s.input.hi)},
                "out": {"min": s.output.lo, "max": _unbound(s.output.hi)},
                "inv_max": _unbound(s.inv_max),
                "provider": s.is_provider,
            }
        )
    for f in c.flows:
        data["flows"].append(
            {
                "from": f.sender,
                "to": f.receiver,
                "duplicates_tolerated": f.dup,
                "selection_allowed": f.sel,
                "ordering_required": f.ord,
                "policies": {
                    "select": _select_raw(f.policies.select),
                    "merge": _merge_raw(f.policies.merge),
                    "dedup": f.policies.dedup.value,
                },
            }
        )
    if sim is not None and (sim.seeds or sim.duplicate_rates):
        data["simulation"] = {"seeds": dict(sim.seeds), "duplicate_rates": dict(sim.duplicate_rates)}
    return data


def serialize_descriptor(c: Composition, sim: SimulationConfig | None = None) -> str:
    return yaml.safe_dump(composition_to_dict(c, sim), sort_keys=False, default_flow_style=None)

