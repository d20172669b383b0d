"""Closed-form payload-efficiency models.

Housekeeping time ``fp0`` is measured in units of full-precision arithmetic
time.  Shrinking operands by a factor ``k`` shrinks only the arithmetic part.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .timespace import DomainError, EventTiming, apparent_processing_time

#: The measured HPCG/HPL efficiency gap, as a validation range.
MEASURED_EFFICIENCY_RATIO = (100.0, 250.0)
#: Efficiency gap expected for neuromorphic-like work on conventional hardware.
NEUROMORPHIC_EFFICIENCY_RATIO = 1000.0
#: Context switch cost, in instructions.
CONTEXT_SWITCH_INSTRUCTIONS = 10_000


@dataclass(frozen=True)
class WorkloadProfile:
    label: str
    fp0: float = 0.0
    transfer_fraction: float = 0.0

    def __post_init__(self):
        for name in ("fp0", "transfer_fraction"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val >= 0):
                raise DomainError(f"{name} must be finite and >= 0, got {val!r}")

    @property
    def blocking_fraction(self) -> float:
        """Housekeeping and transfer both block the arithmetic."""
        return self.fp0 + self.transfer_fraction


@dataclass(frozen=True)
class BenchmarkObservation:
    machine: str
    speedup: float
    k: float = 4.0

    def __post_init__(self):
        if not (1.0 < self.speedup <= self.k):
            raise DomainError(
                f"{self.machine}: speedup {self.speedup} outside (1, {self.k}]")


SUMMIT = BenchmarkObservation("Summit", 3.01, 4.0)
FUGAKU = BenchmarkObservation("Fugaku", 3.42, 4.0)


def operand_speedup(fp0: float, k: float) -> float:
    """Speedup from ``k`` times shorter operands with housekeeping ``fp0``.

    >>> operand_speedup(0.0, 4.0)
    4.0
    """
    fp0 = float(fp0)
    k = float(k)
    if not (math.isfinite(fp0) and fp0 >= 0):
        raise DomainError(f"fp0 must be >= 0, got {fp0!r}")
    if not (math.isfinite(k) and k >= 1):
        raise DomainError(f"shrink factor must be >= 1, got {k!r}")
    return (fp0 + 1.0) / (fp0 + 1.0 / k)


def fit_housekeeping(obs: BenchmarkObservation) -> float:
    """Housekeeping fraction that explains an observed operand speedup."""
    s, k = float(obs.speedup), float(obs.k)
    if s <= 1.0:
        raise DomainError(f"{obs.machine}: speedup {s} <= 1 is infeasible")
    if s >= k:
        raise DomainError(f"{obs.machine}: speedup {s} >= k={k} needs negative housekeeping")
    return (1.0 - s / k) / (s - 1.0)


def efficiency(profile: WorkloadProfile, tp: float = 1.0) -> float:
    """Payload share ``Tp / T_A`` with all blocking time counted as transfer."""
    tp = float(tp)
    if not (math.isfinite(tp) and tp > 0):
        raise DomainError(f"Tp must be > 0, got {tp!r}")
    tt = profile.blocking_fraction * tp
    return tp / apparent_processing_time(tp, tt)


def blocking_for_efficiency(target: float) -> float:
    """Inverse of :func:`efficiency` in the total blocking fraction.

    Solves ``1 / sqrt(r**2 + (2 + r)**2) = target`` for ``r >= 0``.
    """
    target = float(target)
    if not (0 < target <= 0.5):
        raise DomainError(f"efficiency must lie in (0, 0.5], got {target!r}")
    c2 = 1.0 / (target * target)
    # 2 r^2 + 4 r + 4 - c^2 = 0
    return max(0.0, -1.0 + math.sqrt(c2 / 2.0 - 1.0))


def transfer_fraction_for_ratio(ratio: float, baseline: WorkloadProfile,
                                fp0: float | None = None) -> float:
    """Transfer fraction at which efficiency falls ``ratio`` times below baseline."""
    if ratio < 1:
        raise DomainError("ratio must be >= 1")
    fp0 = baseline.fp0 if fp0 is None else float(fp0)
    r = blocking_for_efficiency(efficiency(baseline) / ratio)
    tf = r - fp0
    if tf < 0:
        raise DomainError(f"housekeeping {fp0} alone already exceeds ratio {ratio}")
    return tf


@dataclass(frozen=True)
class SweepRow:
    profile: str
    transfer_fraction: float
    efficiency: float
    ratio: float


def efficiency_sweep(transfer_fractions: Iterable[float], fp0: float = 0.0,
                     baseline: WorkloadProfile | None = None, tp: float = 1.0,
                     label: str = "sweep") -> list[SweepRow]:
    """Efficiency and its gap to ``baseline`` for each transfer fraction."""
    baseline = baseline or WorkloadProfile("baseline", fp0=fp0)
    e0 = efficiency(baseline, tp)
    rows = []
    for tf in sorted(float(t) for t in transfer_fractions):
        e = efficiency(WorkloadProfile(label, fp0, tf), tp)
        rows.append(SweepRow(label, tf, e, e0 / e))
    return rows


def first_reaching(rows: Sequence[SweepRow], ratio: float) -> SweepRow | None:
    for row in rows:
        if row.ratio >= ratio:
            return row
    return None


def context_switch_penalty(instructions_per_switch: int,
                           switch_cost_instructions: int = CONTEXT_SWITCH_INSTRUCTIONS) -> float:
    """Transfer-to-processing ratio R induced by context switching."""
    if instructions_per_switch <= 0 or switch_cost_instructions <= 0:
        raise DomainError("instruction counts must be > 0")
    return switch_cost_instructions / instructions_per_switch


def context_switch_timing(tp: float, instructions_per_switch: int,
                          switch_cost_instructions: int = CONTEXT_SWITCH_INSTRUCTIONS) -> EventTiming:
    """Timing of a step of length ``tp`` whose switches count as transfer."""
    r = context_switch_penalty(instructions_per_switch, switch_cost_instructions)
    return EventTiming(tp, r * tp)
