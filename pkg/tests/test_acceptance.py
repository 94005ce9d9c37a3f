"""Acceptance suite: eight numbered criteria, one PASS/FAIL line each.

Run alone with ``python3 -m pytest tests/test_acceptance.py`` (or execute this
file); the summary appears under "acceptance criteria" at the end of the run.
Expected values are independent oracles: brute-force grids, exact fractions,
set semantics, and frozen golden files.
"""

import random
import statistics
import time
from collections import Counter
from fractions import Fraction
from itertools import product

import pytest

from cardmed.classifier import CompatibilityCase, case_predicates, classify_pair, mediation_group
from cardmed.cli import main
from cardmed.fdsolve import FdVariable, ProductInequality, basic_mediation, label, propagate
from cardmed.harness import run_simulation
from cardmed.mediator import Element, execute_flow, merge, rm_dup
from cardmed.model import (
    UNBOUNDED,
    Composition,
    DataFlow,
    DedupStrategy,
    Interval,
    MergeKind,
    MergeStrategy,
    SelectStrategy,
    ServiceSpec,
    StrategyPolicy,
)
from cardmed.planner import GradeKind, plan_composition, plan_flow
from cardmed.descriptor import parse_descriptor

from conftest import FIXTURES, fixture_text

CAP = 10
BOUNDS = [(lo, hi) for lo in range(1, 13) for hi in range(lo, 13)]


def mediation_problem(a, b, x, y):
    variables = [FdVariable("M", 1, CAP), FdVariable("N", 1, CAP)]
    constraints = [ProductInequality(x, "N", a, "M"), ProductInequality(b, "M", y, "N")]
    return variables, constraints


def grid(a, b, x, y):
    return [(m, n) for m in range(1, CAP + 1) for n in range(1, CAP + 1) if n * x <= m * a and m * b <= n * y]


@pytest.mark.acceptance(1, "worked example (9,11)/(6,8) gives (2,3) in under 1 ms")
def test_criterion_1_worked_example():
    assert basic_mediation(9, 11, 6, 8, mmax=10, nmax=10) == (2, 3)
    samples = []
    for _ in range(51):
        start = time.perf_counter()
        basic_mediation(9, 11, 6, 8, mmax=10, nmax=10)
        samples.append(time.perf_counter() - start)
    assert statistics.median(samples) < 1e-3


@pytest.mark.acceptance(2, "propagation: M=1 empties N, M=2 narrows N to {3}")
def test_criterion_2_propagation_narrative():
    _, constraints = mediation_problem(9, 11, 6, 8)
    assert propagate({"M": (1, 1), "N": (1, 10)}, constraints) is None
    assert propagate({"M": (2, 2), "N": (1, 10)}, constraints) == {"M": (2, 2), "N": (3, 3)}


@pytest.mark.acceptance(3, "labeling equals brute-force grid, lexicographic, full sweep under 60 s")
def test_criterion_3_solver_oracle_equivalence():
    start = time.perf_counter()
    mismatches = []
    for (a, b), (x, y) in product(BOUNDS, BOUNDS):
        solved = [(s["M"], s["N"]) for s in label(*mediation_problem(a, b, x, y))]
        if solved != grid(a, b, x, y):
            mismatches.append((a, b, x, y))
    elapsed = time.perf_counter() - start
    assert mismatches == []
    assert elapsed < 60


@pytest.mark.acceptance(4, "success at (m,n) iff x/a <= m/n <= y/b, exact fractions")
def test_criterion_4_rational_condition():
    mismatches = []
    for (a, b), (x, y) in product(BOUNDS, BOUNDS):
        solved = {(s["M"], s["N"]) for s in label(*mediation_problem(a, b, x, y))}
        rational = [
            (m, n)
            for m in range(1, CAP + 1)
            for n in range(1, CAP + 1)
            if Fraction(x, a) <= Fraction(m, n) <= Fraction(y, b)
        ]
        if solved != set(rational):
            mismatches.append((a, b, x, y, "set"))
        first = rational[0] if rational else None
        if basic_mediation(a, b, x, y, CAP, CAP) != first:
            mismatches.append((a, b, x, y, "first"))
    assert mismatches == []


def _semantic_case(sent, wanted):
    """Classify by what the sender's possible counts can do to the receiver."""
    top = 14
    counts = range(sent.lo, (sent.hi if sent.bounded else top) + 1)
    below = [c for c in counts if c < wanted.lo]
    above = [c for c in counts if wanted.bounded and c > wanted.hi]
    if len(below) == len(counts):
        return "a"
    if len(above) == len(counts):
        return "e"
    if below and above:
        return "f"
    if below:
        return "b"
    if above:
        return "d"
    return "c"


@pytest.mark.acceptance(5, "classifier: exactly one case per pair, grouping matches lists")
def test_criterion_5_classifier_partition():
    intervals = [Interval(lo, hi) for lo in range(0, 13) for hi in range(lo, 13)]
    intervals += [Interval(lo, UNBOUNDED) for lo in range(0, 13)]
    lack, over = set("abf"), set("def")
    mismatches = []
    for sent, wanted in product(intervals, intervals):
        holding = [c for c, ok in case_predicates(sent, wanted).items() if ok]
        case = classify_pair(sent, wanted)
        group = mediation_group(case)
        expected = _semantic_case(sent, wanted)
        if (
            len(holding) != 1
            or holding[0] is not case
            or case.letter != expected
            or group.lack_possible != (expected in lack)
            or group.overabundance_possible != (expected in over)
            or group.compatible != (expected == "c")
        ):
            mismatches.append((str(sent), str(wanted)))
    assert mismatches == []
    assert {c.letter for c in CompatibilityCase} == set("abcdef")


def _certain_corpus(size, rng):
    corpus = []
    while len(corpus) < size:
        a = rng.randint(1, 12)
        b = rng.randint(a, 12)
        x = rng.randint(1, 12)
        y = rng.randint(x, 12)
        c = Composition(
            (
                ServiceSpec.simple("S", (1, 1), (a, b), rng.randint(1, 10)),
                ServiceSpec.simple("R", (x, y), (1, 1), rng.choice([rng.randint(1, 10), UNBOUNDED])),
            ),
            (DataFlow("S", "R", dup=True, sel=False, ord=rng.random() < 0.5),),
        )
        plan = plan_composition(c)
        if plan.feasible and plan.flow_plans["S->R"].grade.kind is GradeKind.CERTAIN:
            corpus.append((c, plan, rng.choice([0.0, 0.0, 0.5, 1.0])))
    return corpus


@pytest.mark.acceptance(6, "200 Certain flows x 1000 seeds: success ratio exactly 1.0")
def test_criterion_6_certainty():
    corpus = _certain_corpus(200, random.Random(20240601))
    runs = successes = 0
    for c, plan, rate in corpus:
        for seed in range(1000):
            runs += 1
            successes += run_simulation(c, plan, seed, {"S": rate}).ok
    assert runs == 200_000
    assert successes / runs == 1.0


CASES = 10_000


def _random_elements(rng, n, alphabet=12, origin="s"):
    return [Element(f"k{rng.randrange(alphabet)}", b"", (origin, 0, i)) for i in range(n)]


@pytest.mark.acceptance(7, "mediator properties over 10^4 random cases each")
def test_criterion_7_mediator_properties():
    rng = random.Random(7)
    failures = Counter()

    for _ in range(CASES):
        items = _random_elements(rng, rng.randrange(0, 30))
        strategy = rng.choice(list(DedupStrategy))
        once = rm_dup(items, strategy)
        if rm_dup(once, strategy) != once:
            failures["rm_dup idempotence"] += 1

    kinds = [MergeKind.CONCAT_AB, MergeKind.CONCAT_BA, MergeKind.INTERLEAVE_PAIRS, MergeKind.EXPLICIT]
    for _ in range(CASES):
        l1 = _random_elements(rng, rng.randrange(0, 15), origin="l")
        l2 = _random_elements(rng, rng.randrange(0, 15), origin="r")
        kind = rng.choice(kinds)
        if kind is MergeKind.EXPLICIT:
            perm = list(range(len(l1) + len(l2)))
            rng.shuffle(perm)
            strategy = MergeStrategy.explicit(perm)
        else:
            strategy = MergeStrategy(kind)
        if Counter(merge(l1, l2, strategy)) != Counter(l1 + l2):
            failures["merge multiset"] += 1

    ordered = 0
    while ordered < CASES:
        a = rng.randint(1, 9)
        b = rng.randint(a, 9)
        x = rng.randint(1, 9)
        y = rng.randint(x, 9)
        sender = ServiceSpec.simple("S", (1, 1), (a, b), 6)
        receiver = ServiceSpec.simple("R", (x, y), (1, 1), 6)
        flow = DataFlow(
            "S", "R", dup=True, sel=False, ord=True,
            policies=StrategyPolicy(merge=MergeStrategy(rng.choice(kinds[:3]))),
        )
        plan = plan_flow(flow, sender, receiver)
        if plan.grade.kind is not GradeKind.CERTAIN:
            continue
        ordered += 1
        sizes = [rng.randint(a, b) for _ in range(6)]
        emitted = []

        def stream(k, sizes=sizes, emitted=emitted):
            out = [Element(f"S#{k}.{p}", b"", ("S", k, p)) for p in range(sizes[k])]
            emitted.extend(out)
            return out

        res = execute_flow(plan, flow, stream, receiver.input, receiver_cap=6, sender_cap=6)
        delivered = [e for batch in res.batches for e in batch.elements]
        if not res.ok or delivered != emitted:
            failures["order preservation"] += 1
        if any(not x <= len(batch) <= y for batch in res.batches):
            failures["batch bounds (ordered)"] += 1

    for _ in range(CASES):
        a = rng.randint(0, 9)
        b = rng.randint(a, 9)
        x = rng.randint(0, 9)
        y = rng.randint(max(x, 1), 9)
        sender = ServiceSpec.simple("S", (1, 1), (a, b), rng.randint(1, 6))
        receiver = ServiceSpec.simple("R", (x, y), (1, 1), rng.randint(1, 6))
        flow = DataFlow(
            "S", "R", dup=rng.random() < 0.5, sel=rng.random() < 0.5, ord=rng.random() < 0.5,
            policies=StrategyPolicy(
                select=rng.choice([SelectStrategy.first(), SelectStrategy.last(), SelectStrategy.stride(2)]),
                dedup=rng.choice(list(DedupStrategy)),
            ),
        )
        plan = plan_flow(flow, sender, receiver)
        if plan.grade.kind is GradeKind.INFEASIBLE:
            continue
        outputs = [_random_elements(rng, rng.randint(a, b), alphabet=8) for _ in range(6)]
        res = execute_flow(
            plan, flow, outputs.__getitem__, receiver.input,
            receiver_cap=receiver.inv_max, sender_cap=sender.inv_max,
        )
        if any(not x <= len(batch) <= y for batch in res.batches) or (res.batches and not res.ok):
            failures["batch bounds"] += 1

    assert dict(failures) == {}


@pytest.mark.acceptance(8, "editor/printer end to end: success, conservation, byte-stable golden trace")
def test_criterion_8_editor_printer(tmp_path, capsys):
    c, sim = parse_descriptor(fixture_text("editor_printer.yaml"))
    plan = plan_composition(c)
    grade = plan.flow_plans["editor->printer"].grade
    assert (grade.kind, grade.m, grade.n) == (GradeKind.CERTAIN, 1, 7)

    report = run_simulation(c, plan, sim.seeds)
    (outcome,) = report.outcomes
    assert report.ok
    assert outcome.delivered == outcome.emitted == 7
    delivered = [e.origin for b in outcome.result.batches for e in b.elements]
    assert delivered == [("editor", 0, p) for p in range(7)]
    assert report.to_json() == run_simulation(c, plan, sim.seeds).to_json()

    golden = (FIXTURES / "golden" / "editor_printer_seed42.trace.jsonl").read_bytes()
    traces = []
    for attempt in range(2):
        path = tmp_path / f"trace{attempt}.jsonl"
        assert main(["simulate", str(FIXTURES / "editor_printer.yaml"), "--seed", "42", "--trace", str(path)]) == 0
        traces.append(path.read_bytes())
    capsys.readouterr()
    assert traces == [golden, golden]


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
