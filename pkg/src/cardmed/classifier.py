"""Compatibility cases between a sender's output and a receiver's input constraint."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .model import Interval


class CompatibilityCase(enum.Enum):
    GUARANTEED_LACK = "a"
    POTENTIAL_LACK = "b"
    COMPATIBLE = "c"
    POTENTIAL_OVERABUNDANCE = "d"
    GUARANTEED_OVERABUNDANCE = "e"
    POTENTIAL_LACK_AND_OVERABUNDANCE = "f"

    @property
    def letter(self) -> str:
        return self.value

    @property
    def label(self) -> str:
        return _LABELS[self]


_LABELS = {
    CompatibilityCase.GUARANTEED_LACK: "GuaranteedLack",
    CompatibilityCase.POTENTIAL_LACK: "PotentialLack",
    CompatibilityCase.COMPATIBLE: "Compatible",
    CompatibilityCase.POTENTIAL_OVERABUNDANCE: "PotentialOverabundance",
    CompatibilityCase.GUARANTEED_OVERABUNDANCE: "GuaranteedOverabundance",
    CompatibilityCase.POTENTIAL_LACK_AND_OVERABUNDANCE: "PotentialLackAndOverabundance",
}


@dataclass(frozen=True)
class MediationGroup:
    lack_possible: bool
    overabundance_possible: bool
    compatible: bool

    def __str__(self) -> str:
        if self.compatible:
            return "compatible"
        parts = []
        if self.lack_possible:
            parts.append("lack")
        if self.overabundance_possible:
            parts.append("overabundance")
        return "+".join(parts)


def case_predicates(sender_out: Interval, receiver_in: Interval) -> dict[CompatibilityCase, bool]:
    """Evaluate all six case predicates literally; exactly one should hold."""
    i, j = sender_out.lo, sender_out.hi
    m, n = receiver_in.lo, receiver_in.hi
    return {
        CompatibilityCase.GUARANTEED_LACK: j < m,
        CompatibilityCase.POTENTIAL_LACK: i < m and m <= j <= n,
        CompatibilityCase.COMPATIBLE: i >= m and j <= n,
        CompatibilityCase.POTENTIAL_OVERABUNDANCE: m <= i <= n and j > n,
        CompatibilityCase.GUARANTEED_OVERABUNDANCE: i > n,
        CompatibilityCase.POTENTIAL_LACK_AND_OVERABUNDANCE: i < m and j > n,
    }


def classify_pair(sender_out: Interval, receiver_in: Interval) -> CompatibilityCase:
    """Sender ``[i, j]`` against receiver ``[m, n]``.

    Unbounded maxima compare above every integer, so an unbounded receiver
    never sees overabundance and an unbounded sender always may.
    """
    for k in (sender_out, receiver_in):
        if not k.well_formed:
            raise ValueError(f"malformed interval {k}")
    i, j = sender_out.lo, sender_out.hi
    m, n = receiver_in.lo, receiver_in.hi
    if j < m:
        return CompatibilityCase.GUARANTEED_LACK
    if i > n:
        return CompatibilityCase.GUARANTEED_OVERABUNDANCE
    if i < m:
        return (
            CompatibilityCase.POTENTIAL_LACK_AND_OVERABUNDANCE
            if j > n
            else CompatibilityCase.POTENTIAL_LACK
        )
    return CompatibilityCase.POTENTIAL_OVERABUNDANCE if j > n else CompatibilityCase.COMPATIBLE


_LACK = {
    CompatibilityCase.GUARANTEED_LACK,
    CompatibilityCase.POTENTIAL_LACK,
    CompatibilityCase.POTENTIAL_LACK_AND_OVERABUNDANCE,
}
_OVER = {
    CompatibilityCase.POTENTIAL_OVERABUNDANCE,
    CompatibilityCase.GUARANTEED_OVERABUNDANCE,
    CompatibilityCase.POTENTIAL_LACK_AND_OVERABUNDANCE,
}


def mediation_group(case: CompatibilityCase) -> MediationGroup:
    return MediationGroup(
        lack_possible=case in _LACK,
        overabundance_possible=case in _OVER,
        compatible=case is CompatibilityCase.COMPATIBLE,
    )
