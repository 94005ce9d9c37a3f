"""``cardmed`` command line: classify, plan and simulate composition descriptors.

Exit codes
    0  success (all flows certain / every simulation run succeeded)
    1  some simulation run failed
    2  descriptor could not be read or parsed
    3  plan contains a Probable or RuntimeOnly flow
    4  plan is infeasible
"""

from __future__ import annotations

import argparse
import json
import logging
import pathlib
import sys
from typing import Sequence

from .classifier import classify_pair, mediation_group
from .descriptor import DescriptorError, SimulationConfig, parse_descriptor
from .harness import derive_seeds, run_simulation
from .model import Composition
from .planner import CompositionPlan, GradeKind, PlannerConfig, PlanningError, plan_composition

log = logging.getLogger("cardmed")

EXIT_OK = 0
EXIT_RUN_FAILED = 1
EXIT_PARSE = 2
EXIT_UNCERTAIN = 3
EXIT_INFEASIBLE = 4


def _load(path: str) -> tuple[Composition, SimulationConfig]:
    try:
        text = pathlib.Path(path).read_text()
    except OSError as exc:
        raise DescriptorError(f"cannot read descriptor: {exc.strerror}", path, "Io") from None
    return parse_descriptor(text)


def _table(header: Sequence[str], rows: list[Sequence[object]]) -> str:
    cells = [list(map(str, header))] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    return "\n".join(lines) + "\n"


def _jsonl(records: list[dict]) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)


def classify_records(c: Composition) -> list[dict]:
    services = c.by_id
    out = []
    for f in c.flows:
        sent, wanted = services[f.sender].output, services[f.receiver].input
        case = classify_pair(sent, wanted)
        out.append(
            {
                "flow": f.name,
                "sender": str(sent),
                "receiver": str(wanted),
                "case": case.letter,
                "label": case.label,
                "group": str(mediation_group(case)),
            }
        )
    return out


def cmd_classify(args) -> int:
    c, _ = _load(args.descriptor)
    records = classify_records(c)
    if args.format == "json-lines":
        sys.stdout.write(_jsonl(records))
    else:
        sys.stdout.write(
            _table(
                ["flow", "sender", "receiver", "case", "label", "group"],
                [[r[k] for k in ("flow", "sender", "receiver", "case", "label", "group")] for r in records],
            )
        )
    if args.figure:
        from .figures import classification_figure

        services = c.by_id
        rows = []
        for f in c.flows:
            sent, wanted = services[f.sender].output, services[f.receiver].input
            rows.append((f.name, sent, wanted, classify_pair(sent, wanted)))
        classification_figure(rows, pathlib.Path(args.figure))
    return EXIT_OK


def plan_exit_code(plan: CompositionPlan) -> int:
    kinds = {p.grade.kind for p in plan.flow_plans.values()}
    if GradeKind.INFEASIBLE in kinds:
        return EXIT_INFEASIBLE
    if kinds & {GradeKind.PROBABLE, GradeKind.RUNTIME_ONLY}:
        return EXIT_UNCERTAIN
    return EXIT_OK


def plan_records(plan: CompositionPlan) -> list[dict]:
    records: list[dict] = [
        {"kind": "service", "service": sid, "invocations": n} for sid, n in plan.invocations.items()
    ]
    for name, fp in plan.flow_plans.items():
        records.append(
            {
                "kind": "flow",
                "flow": name,
                "grade": fp.grade.kind.value,
                "m": fp.grade.m,
                "n": fp.grade.n,
                "case": fp.case.letter,
                "reason": fp.grade.reason,
                "at_ceiling": fp.at_ceiling,
            }
        )
    records.append(
        {
            "kind": "summary",
            "total_invocations": plan.total_invocations,
            "feasible": plan.feasible,
            "diagnosis": list(plan.diagnosis),
        }
    )
    return records


def _config(args) -> PlannerConfig:
    overrides = {"optimize": not getattr(args, "no_optimize", False)}
    if args.ceiling is not None:
        overrides["search_ceiling"] = args.ceiling
    return PlannerConfig.from_env(**overrides)


def _render_plan(plan: CompositionPlan) -> str:
    lines = [f"{sid}: {n} invocation{'s' if n != 1 else ''}" for sid, n in plan.invocations.items()]
    for name, fp in plan.flow_plans.items():
        g = fp.grade
        detail = f" (m={g.m}, n={g.n})" if g.m is not None else ""
        if g.reason:
            detail += f": {g.reason}"
        flag = " [at search ceiling]" if fp.at_ceiling else ""
        lines.append(f"{name}: grade {g.kind.value}{detail}, case {fp.case.letter} {fp.case.label}{flag}")
    if plan.diagnosis:
        lines.append("diagnosis (leave-one-out): " + ", ".join(plan.diagnosis))
    lines.append(f"total invocations: {plan.total_invocations}")
    return "\n".join(lines) + "\n"


def cmd_plan(args) -> int:
    c, _ = _load(args.descriptor)
    plan = plan_composition(c, _config(args))
    if args.format == "json-lines":
        sys.stdout.write(_jsonl(plan_records(plan)))
    else:
        sys.stdout.write(_render_plan(plan))
    return plan_exit_code(plan)


def run_seeds(c: Composition, sim: SimulationConfig, seed: int | None, run: int) -> dict[str, int]:
    """Per-service seeds for run ``run``; ``--seed`` overrides descriptor seeds."""
    ids = [s.id for s in c.services]
    if seed is not None:
        return derive_seeds(seed + run, ids)
    base = derive_seeds(run, ids)
    base.update({sid: s + run for sid, s in sim.seeds.items()})
    return base


def cmd_simulate(args) -> int:
    c, sim = _load(args.descriptor)
    cfg = _config(args)
    plan = plan_composition(c, cfg)
    if not plan.feasible:
        sys.stdout.write(_render_plan(plan) if args.format != "json-lines" else _jsonl(plan_records(plan)))
        sys.stdout.write("" if args.format == "json-lines" else "plan infeasible: 0 runs\n")
        return EXIT_INFEASIBLE

    runs = args.runs
    successes = 0
    totals = {s.id: 0 for s in c.services}
    delivered: dict[str, list[int]] = {f.name: [] for f in c.flows}
    failures: dict[str, int] = {f.name: 0 for f in c.flows}
    run_records = []
    trace_lines = []
    for r in range(runs):
        report = run_simulation(c, plan, run_seeds(c, sim, args.seed, r), sim.duplicate_rates, cfg)
        successes += report.ok
        for sid, n in report.invocations.items():
            totals[sid] += n
        for o in report.outcomes:
            if o.ok:
                delivered[o.flow].append(o.delivered)
            else:
                failures[o.flow] += 1
        run_records.append(
            {
                "kind": "run",
                "run": r,
                "ok": report.ok,
                "invocations": dict(sorted(report.invocations.items())),
                "failed": [o.flow for o in report.outcomes if not o.ok],
            }
        )
        if args.trace:
            for t in report.traces:
                for rec in t.records():
                    trace_lines.append(json.dumps({"run": r, **rec}, sort_keys=True) + "\n")
    ratio = successes / runs if runs else 0.0
    summary = {
        "kind": "summary",
        "runs": runs,
        "successes": successes,
        "success_ratio": ratio,
        "invocation_totals": dict(sorted(totals.items())),
        "planned": dict(sorted(plan.invocations.items())),
    }
    if args.format == "json-lines":
        sys.stdout.write(_jsonl(run_records + [summary]))
    else:
        sys.stdout.write(f"runs: {runs}  successes: {successes}  success ratio: {ratio:.4f}\n")
        sys.stdout.write(
            _table(
                ["service", "planned", "total invocations"],
                [[sid, plan.invocations[sid], totals[sid]] for sid in sorted(totals)],
            )
        )
    if args.trace:
        path = pathlib.Path(args.trace)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("".join(trace_lines))
    if args.figure:
        from .figures import simulation_figure

        simulation_figure(delivered, failures, pathlib.Path(args.figure))
    return EXIT_OK if successes == runs else EXIT_RUN_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cardmed", description=__doc__.splitlines()[0].strip("`"))
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("descriptor", help="composition descriptor (YAML)")
        p.add_argument("--format", choices=["table", "json-lines"], default="table")

    p = sub.add_parser("classify", help="compatibility case of every flow")
    common(p)
    p.add_argument("--figure", help="write an interval chart to this path")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("plan", help="invocation counts and per-flow grades")
    common(p)
    p.add_argument("--ceiling", type=int, help="search ceiling for unbounded services (env CARDMED_CEILING)")
    p.add_argument("--no-optimize", action="store_true", help="first lexicographic plan, not the cheapest")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="plan, then run seeded simulations")
    common(p)
    p.add_argument("--ceiling", type=int, help="search ceiling for unbounded services (env CARDMED_CEILING)")
    p.add_argument("--no-optimize", action="store_true")
    p.add_argument("--seed", type=int, help="base seed; overrides descriptor seeds")
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--trace", help="write line-delimited trace records to this path")
    p.add_argument("--figure", help="write a delivered-count histogram to this path")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    if getattr(args, "runs", 1) < 0:
        parser.error("--runs must be >= 0")
    try:
        return args.func(args)
    except DescriptorError as exc:
        print(f"error [{exc.code}] {exc}", file=sys.stderr)
        return EXIT_PARSE
    except PlanningError as exc:
        print(f"error [Planning] {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
