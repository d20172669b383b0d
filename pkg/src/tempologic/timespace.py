"""Distances expressed as times: positions divided by a finite interaction speed.

All quantities here are plain floats in seconds except positions, which use the
scenario's length unit.  Functions are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from . import kernels


class DomainError(ValueError):
    """An argument lies outside the domain of a model function."""


def _finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")
    return value


def _nonneg(name: str, value: float) -> float:
    value = _finite(name, value)
    if value < 0:
        raise DomainError(f"{name} must be >= 0, got {value!r}")
    return value


@dataclass(frozen=True)
class SpatialPoint:
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "z"):
            _finite(name, getattr(self, name))

    @classmethod
    def of(cls, value) -> "SpatialPoint":
        """Coerce a point or a 2/3-sequence of coordinates."""
        if isinstance(value, SpatialPoint):
            return value
        coords = [float(c) for c in value]
        if len(coords) not in (2, 3):
            raise DomainError(f"expected 2 or 3 coordinates, got {len(coords)}")
        return cls(*coords)

    def distance(self, other: "SpatialPoint") -> float:
        return math.sqrt((self.x - other.x) ** 2 + (self.y - other.y) ** 2
                         + (self.z - other.z) ** 2)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


ORIGIN = SpatialPoint()


@dataclass(frozen=True)
class InteractionSpeed:
    """Finite propagation speed, length units per second."""

    value: float

    def __post_init__(self):
        v = _finite("interaction speed", self.value)
        if v <= 0:
            raise DomainError(f"interaction speed must be > 0, got {v!r}")

    def __float__(self) -> float:
        return float(self.value)


def _speed(v) -> float:
    return float(InteractionSpeed(float(v)))


@dataclass(frozen=True)
class TimeVector:
    """Four coordinates, all seconds."""

    tx: float
    ty: float
    tz: float
    t: float = 0.0

    def __post_init__(self):
        for name in ("tx", "ty", "tz", "t"):
            _finite(name, getattr(self, name))

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.tx, self.ty, self.tz, self.t)


@dataclass(frozen=True)
class EventTiming:
    """Processing time ``tp`` and transmission time ``tt`` of one step."""

    tp: float
    tt: float

    def __post_init__(self):
        _nonneg("Tp", self.tp)
        _nonneg("Tt", self.tt)

    @property
    def ratio(self) -> Optional[float]:
        """``tt / tp``; None when ``tp`` is zero."""
        if self.tp == 0:
            return None
        return self.tt / self.tp

    def apparent_processing_time(self) -> float:
        return apparent_processing_time(self.tp, self.tt)


_AXES = {"x": 0, "y": 1, "z": 2}


def to_time_vector(p, v, extra_hops: float = 0.0, hop_axis: str = "x") -> TimeVector:
    """Map a position to time coordinates; hop time is added on ``hop_axis``."""
    p = SpatialPoint.of(p)
    speed = _speed(v)
    hops = _nonneg("extra_hops", extra_hops)
    if hop_axis not in _AXES:
        raise DomainError(f"hop_axis must be one of x, y, z; got {hop_axis!r}")
    coords = [c / speed for c in p.as_tuple()]
    coords[_AXES[hop_axis]] += hops
    return TimeVector(*coords, t=0.0)


def propagation_delay(a, b, v, extra_hops: float = 0.0) -> float:
    """Straight-path distance between ``a`` and ``b`` over ``v``, plus hops."""
    a = SpatialPoint.of(a)
    b = SpatialPoint.of(b)
    return a.distance(b) / _speed(v) + _nonneg("extra_hops", extra_hops)


def apparent_processing_time(tp: float, tt: float) -> float:
    """Length of the vector from the first event to the second light cone.

    ``sqrt(Tt**2 + (2*Tp + Tt)**2)``; two equal processing steps separated
    by a transmission of ``tt``.
    """
    tp = _nonneg("Tp", tp)
    tt = _nonneg("Tt", tt)
    return math.hypot(tt, 2.0 * tp + tt)


def apparent_time_from_ratio(tp: float, ratio: float) -> float:
    """Same quantity written as ``Tp * sqrt(R**2 + (2 + R)**2)``."""
    tp = _nonneg("Tp", tp)
    ratio = _nonneg("R", ratio)
    return tp * math.hypot(ratio, 2.0 + ratio)


def apparent_processing_times(tp, tt) -> np.ndarray:
    """Vectorized :func:`apparent_processing_time` over arrays."""
    tp = np.asarray(tp, dtype=np.float64)
    tt = np.asarray(tt, dtype=np.float64)
    if not (np.all(np.isfinite(tp)) and np.all(np.isfinite(tt))):
        raise DomainError("Tp and Tt must be finite")
    if np.any(tp < 0) or np.any(tt < 0):
        raise DomainError("Tp and Tt must be >= 0")
    return kernels.apparent_time_grid(tp, tt)


def longest_transmission(transfers: Iterable[float]) -> float:
    """Tt of a step fed by several transfers: the latest one decides."""
    values = [_nonneg("transfer time", t) for t in transfers]
    if not values:
        raise DomainError("at least one transfer time is required")
    return max(values)


@dataclass(frozen=True)
class ConeTrace:
    tt: float
    notice_time: float
    observer_cone_start: float
    apparent_time: float
    tp_source: float
    tp_observer: float


def light_cone_trace(tp_source: float, tp_observer: float, observer, v) -> ConeTrace:
    """Timing of an observer reacting to an event at the origin.

    The source processes for ``tp_source`` before its signal leaves; the
    observer notices it ``tt`` later and finishes after ``tp_observer``.
    ``apparent_time`` is the distance from the source start (origin, t=0) to
    the observer's cone start in the (position-time, time) plane, which
    reduces to :func:`apparent_processing_time` when both processing times
    are equal.
    """
    tp_s = _nonneg("Tp_source", tp_source)
    tp_o = _nonneg("Tp_observer", tp_observer)
    tt = propagation_delay(ORIGIN, observer, v)
    notice = tp_s + tt
    start = notice + tp_o
    if tp_s == tp_o:
        apparent = apparent_processing_time(tp_s, tt)
    else:
        apparent = math.hypot(tt, start)
    return ConeTrace(tt=tt, notice_time=notice, observer_cone_start=start,
                     apparent_time=apparent, tp_source=tp_s, tp_observer=tp_o)
