"""A small finite-domain solver for invocation counts.

Variables range over integer intervals and constraints are restricted to the
two-variable product form ``c*U <= d*V``.  Propagation is bounds consistency
iterated to a fixpoint; labeling fixes variables in the given order and tries
values ascending, re-propagating after each choice, so solutions come out in
lexicographic order.  Extending to general linear constraints would mean
replacing :func:`_revise` and the bound argument in :func:`minimize_sum`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

from .model import UNBOUNDED, Bound, cap

Domains = dict[str, tuple[int, int]]
Assignment = dict[str, int]

DEFAULT_CEILING = 100


@dataclass(frozen=True)
class FdVariable:
    name: str
    lo: int
    hi: int

    def __post_init__(self) -> None:
        if self.lo < 1:
            raise ValueError(f"domain of {self.name} must start at 1 or above, got {self.lo}")
        if self.lo > self.hi:
            raise ValueError(f"empty domain [{self.lo},{self.hi}] for {self.name}")


@dataclass(frozen=True)
class ProductInequality:
    """``left_coeff * left_var <= right_coeff * right_var``."""

    left_coeff: int
    left_var: str
    right_coeff: int
    right_var: str
    label: str = ""

    def __post_init__(self) -> None:
        if self.left_coeff < 0 or self.right_coeff < 0:
            raise ValueError("coefficients must be non-negative")

    def holds(self, values: Mapping[str, int]) -> bool:
        return self.left_coeff * values[self.left_var] <= self.right_coeff * values[self.right_var]

    def __str__(self) -> str:
        return f"{self.left_coeff}*{self.left_var} <= {self.right_coeff}*{self.right_var}"


def _ceil_div(p: int, q: int) -> int:
    return -(-p // q)


def _revise(c: ProductInequality, doms: Domains) -> tuple[bool, bool]:
    """Tighten both ends of one constraint. Returns ``(changed, consistent)``."""
    ulo, uhi = doms[c.left_var]
    vlo, vhi = doms[c.right_var]
    if c.left_coeff == 0:
        return False, True
    if c.right_coeff == 0:
        # c*U <= 0 with U >= 1 can never hold
        return False, False
    new_uhi = min(uhi, (c.right_coeff * vhi) // c.left_coeff)
    new_vlo = max(vlo, _ceil_div(c.left_coeff * ulo, c.right_coeff))
    if c.left_var == c.right_var:
        # c*U <= d*U reduces to c <= d
        return False, c.left_coeff <= c.right_coeff
    changed = new_uhi != uhi or new_vlo != vlo
    doms[c.left_var] = (ulo, new_uhi)
    doms[c.right_var] = (new_vlo, vhi)
    return changed, ulo <= new_uhi and new_vlo <= vhi


def propagate(
    domains: Mapping[str, tuple[int, int]], constraints: Iterable[ProductInequality]
) -> Domains | None:
    """Bounds-consistent domains, or ``None`` when some domain empties.

    ``None`` is an ordinary answer (the constraints are inconsistent with
    the domains), not an error.
    """
    doms = dict(domains)
    constraints = list(constraints)
    for c in constraints:
        if c.left_var not in doms or c.right_var not in doms:
            raise KeyError(f"constraint {c} references an unknown variable")
    if any(lo > hi for lo, hi in doms.values()):
        return None
    changed = True
    while changed:
        changed = False
        for c in constraints:
            did, ok = _revise(c, doms)
            if not ok:
                return None
            changed |= did
    return doms


def _domains_of(variables: Sequence[FdVariable]) -> Domains:
    return {v.name: (v.lo, v.hi) for v in variables}


def label(
    variables: Sequence[FdVariable], constraints: Iterable[ProductInequality]
) -> Iterator[Assignment]:
    """Lazily yield every solution, lexicographic in the order of ``variables``."""
    constraints = list(constraints)
    order = [v.name for v in variables]
    start = propagate(_domains_of(variables), constraints)
    if start is None:
        return
    yield from _search(order, 0, start, constraints)


def _search(
    order: list[str], depth: int, doms: Domains, constraints: list[ProductInequality]
) -> Iterator[Assignment]:
    if depth == len(order):
        yield {name: doms[name][0] for name in order}
        return
    name = order[depth]
    lo, hi = doms[name]
    for value in range(lo, hi + 1):
        trial = dict(doms)
        trial[name] = (value, value)
        reduced = propagate(trial, constraints)
        if reduced is not None:
            yield from _search(order, depth + 1, reduced, constraints)


def first_solution(
    variables: Sequence[FdVariable], constraints: Iterable[ProductInequality]
) -> Assignment | None:
    return next(label(variables, constraints), None)


def minimize_sum(
    variables: Sequence[FdVariable], constraints: Iterable[ProductInequality]
) -> Assignment | None:
    """Solution with the smallest sum of values, ties broken lexicographically.

    Branch and bound over the same ascending labeling.  The bound is the sum
    of current lower bounds, which only grows as a variable's value grows
    (propagation raises lower bounds monotonically), so once a value's bound
    reaches the incumbent no larger value of that variable can do better.
    """
    constraints = list(constraints)
    order = [v.name for v in variables]
    start = propagate(_domains_of(variables), constraints)
    if start is None:
        return None
    best: list = [None, None]  # [sum, assignment]

    def bound(doms: Domains) -> int:
        return sum(lo for lo, _ in doms.values())

    def walk(depth: int, doms: Domains) -> None:
        if best[0] is not None and bound(doms) >= best[0]:
            return
        if depth == len(order):
            best[0] = bound(doms)
            best[1] = {n: doms[n][0] for n in order}
            return
        name = order[depth]
        lo, hi = doms[name]
        for value in range(lo, hi + 1):
            trial = dict(doms)
            trial[name] = (value, value)
            reduced = propagate(trial, constraints)
            if reduced is None:
                continue
            if best[0] is not None and bound(reduced) >= best[0]:
                break
            walk(depth + 1, reduced)

    walk(0, start)
    return best[1]


def brute_force(
    variables: Sequence[FdVariable], constraints: Iterable[ProductInequality]
) -> list[Assignment]:
    """Every solution by exhaustive enumeration, lexicographic order."""
    from itertools import product

    constraints = list(constraints)
    names = [v.name for v in variables]
    ranges = [range(v.lo, v.hi + 1) for v in variables]
    out = []
    for combo in product(*ranges):
        values = dict(zip(names, combo))
        if all(c.holds(values) for c in constraints):
            out.append(values)
    return out


def _check_pair(lo: int, hi: Bound, what: str) -> None:
    if lo < 0 or (hi is not UNBOUNDED and hi < lo):
        raise ValueError(f"malformed {what} interval [{lo},{hi}]")


def _mediation_problem(
    a: int, b: Bound, x: int, y: Bound, mmax: Bound, nmax: Bound, ceiling: int, subset: bool
) -> tuple[list[FdVariable], list[ProductInequality]] | None:
    _check_pair(a, b, "sender")
    _check_pair(x, y, "receiver")
    for cap_value in (mmax, nmax):
        if cap_value is not UNBOUNDED and cap_value < 1:
            raise ValueError(f"invocation cap must be >= 1, got {cap_value}")
    variables = [FdVariable("M", 1, cap(mmax, ceiling)), FdVariable("N", 1, cap(nmax, ceiling))]
    if subset:
        # M*[a,b] within N*[x,y]:  N*x <= M*a  and  M*b <= N*y
        lower = ProductInequality(x, "N", a, "M", "lower")
        upper = (b, "M", y, "N")
    else:
        # M*[a,b] meets N*[x,y]:  N*x <= M*b  and  M*a <= N*y
        if b is UNBOUNDED:
            lower = None
        else:
            lower = ProductInequality(x, "N", b, "M", "lower")
        upper = (a, "M", y, "N")
    constraints = [lower] if lower is not None else []
    left_coeff, _, right_coeff, _ = upper
    if right_coeff is UNBOUNDED:
        pass
    elif left_coeff is UNBOUNDED:
        return None
    else:
        constraints.append(ProductInequality(left_coeff, "M", right_coeff, "N", "upper"))
    return variables, constraints


def basic_mediation(
    a: int,
    b: Bound,
    x: int,
    y: Bound,
    mmax: Bound,
    nmax: Bound,
    ceiling: int = DEFAULT_CEILING,
) -> tuple[int, int] | None:
    """First ``(m, n)`` in lexicographic order with ``m*[a,b]`` inside ``n*[x,y]``.

    Unbounded caps are clipped to ``ceiling`` before search.
    """
    problem = _mediation_problem(a, b, x, y, mmax, nmax, ceiling, subset=True)
    if problem is None:
        return None
    sol = first_solution(*problem)
    return None if sol is None else (sol["M"], sol["N"])


def probable_mediation(
    a: int,
    b: Bound,
    x: int,
    y: Bound,
    mmax: Bound,
    nmax: Bound,
    ceiling: int = DEFAULT_CEILING,
) -> tuple[int, int] | None:
    """First ``(m, n)`` in lexicographic order with ``m*[a,b]`` meeting ``n*[x,y]``."""
    problem = _mediation_problem(a, b, x, y, mmax, nmax, ceiling, subset=False)
    if problem is None:
        return None
    sol = first_solution(*problem)
    return None if sol is None else (sol["M"], sol["N"])
