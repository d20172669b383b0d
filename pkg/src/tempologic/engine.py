"""Deterministic discrete-event kernel.

Events are ordered by ``(fire_time, seq)`` where ``seq`` is the scheduling
order, so two runs with the same components, initial events and seed dispatch
identically.  Components receive events through ``handle(event, engine)`` and
may schedule further events no earlier than ``engine.now``.
"""

from __future__ import annotations

import csv
import enum
import heapq
import io
import math
from dataclasses import dataclass
from typing import Any, Iterable, Optional

import numpy as np

from .timespace import ORIGIN, SpatialPoint

TRACE_COLUMNS = ("seq", "time", "component", "kind", "x", "y", "detail")


class CausalityError(RuntimeError):
    """A component tried to schedule an event in the past."""


class EventKind(str, enum.Enum):
    SIGNAL_ARRIVAL = "signal-arrival"
    BUS_REQUEST = "bus-request"
    BUS_GRANT = "bus-grant"
    BUS_DELIVERY = "bus-delivery"
    SPIKE = "spike"
    BASE_TICK = "base-tick"
    FEEDBACK = "feedback"
    ARBITRATE = "arbitrate"
    PROCESS_START = "process-start"
    PROCESS_END = "process-end"
    IDLE_WAIT = "idle-wait"
    OUTPUT_INVALID = "output-invalid"
    DROP = "drop"
    ERROR = "error"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class SimEvent:
    fire_time: float
    seq: int
    source_id: str
    target_id: str
    kind: EventKind
    payload: Any = None


@dataclass(frozen=True)
class TraceRecord:
    seq: int
    time: float
    component_id: str
    kind: str
    position: SpatialPoint
    detail: str = ""

    def row(self) -> list[str]:
        return [str(self.seq), format_float(self.time), self.component_id,
                str(self.kind), format_float(self.position.x),
                format_float(self.position.y), self.detail]


class Trace(list):
    """List of :class:`TraceRecord` plus an error mark for aborted runs."""

    error: Optional[str] = None

    def by_kind(self, kind) -> list[TraceRecord]:
        kind = str(kind)
        return [r for r in self if r.kind == kind]

    def by_component(self, component_id: str) -> list[TraceRecord]:
        return [r for r in self if r.component_id == component_id]


def format_float(value: float) -> str:
    """Shortest round-trip text for a float; stable across runs."""
    return repr(float(value))


def format_detail(payload: Any) -> str:
    if payload is None:
        return ""
    if isinstance(payload, dict):
        parts = []
        for key in sorted(payload):
            val = payload[key]
            if isinstance(val, float):
                val = format_float(val)
            parts.append(f"{key}={val}")
        return ";".join(parts)
    return str(payload)


class EventQueue:
    """Pending events ordered by ``(fire_time, seq)``."""

    def __init__(self):
        self._heap: list[tuple[float, int, SimEvent]] = []

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, event: SimEvent) -> None:
        heapq.heappush(self._heap, (event.fire_time, event.seq, event))

    def peek_time(self) -> float:
        return self._heap[0][0] if self._heap else math.inf

    def pop(self) -> SimEvent:
        return heapq.heappop(self._heap)[2]


class Component:
    """Base class for engine participants."""

    def __init__(self, id: str, position=ORIGIN):
        self.id = str(id)
        self.position = SpatialPoint.of(position)

    def handle(self, event: SimEvent, engine: "Engine") -> None:
        pass


class Engine:
    """Single-clock event dispatcher.

    Parameters
    ----------
    seed : int
        Seed of the generator exposed as ``engine.rng``; the only source of
        randomness a component may use.
    """

    def __init__(self, seed: int = 0):
        self.now = 0.0
        self.seed = int(seed)
        self.rng = np.random.default_rng(self.seed)
        self.queue = EventQueue()
        self.components: dict[str, Component] = {}
        self.trace = Trace()
        self._next_seq = 0

    def add(self, *components: Component) -> None:
        for comp in components:
            if comp.id in self.components:
                raise ValueError(f"duplicate component id {comp.id!r}")
            self.components[comp.id] = comp

    def position_of(self, component_id: str) -> SpatialPoint:
        comp = self.components.get(component_id)
        return comp.position if comp is not None else ORIGIN

    def schedule(self, fire_time: float, source_id: str, target_id: str,
                 kind, payload: Any = None) -> SimEvent:
        fire_time = float(fire_time)
        if not math.isfinite(fire_time):
            raise CausalityError(f"non-finite fire time {fire_time!r}")
        if fire_time < self.now:
            raise CausalityError(
                f"{source_id} scheduled {kind} for {target_id} at {fire_time!r}, "
                f"before now={self.now!r}")
        event = SimEvent(fire_time, self._next_seq, str(source_id),
                         str(target_id), EventKind(kind), payload)
        self._next_seq += 1
        self.queue.push(event)
        return event

    def schedule_in(self, delay: float, source_id: str, target_id: str,
                    kind, payload: Any = None) -> SimEvent:
        if delay < 0:
            raise CausalityError(f"negative delay {delay!r}")
        return self.schedule(self.now + delay, source_id, target_id, kind, payload)

    def record(self, component_id: str, kind, detail: Any = "",
               position: Optional[SpatialPoint] = None) -> TraceRecord:
        """Append an annotation at the current time."""
        if position is None:
            position = self.position_of(component_id)
        rec = TraceRecord(len(self.trace), self.now, component_id, str(kind),
                          position, format_detail(detail))
        self.trace.append(rec)
        return rec

    def run_until(self, t_end: float) -> Trace:
        t_end = float(t_end)
        if t_end < self.now:
            raise CausalityError(f"t_end={t_end!r} is before now={self.now!r}")
        while self.queue.peek_time() <= t_end:
            event = self.queue.pop()
            self.now = event.fire_time
            detail = {"src": event.source_id}
            if isinstance(event.payload, dict):
                detail.update(event.payload)
            elif event.payload is not None:
                detail["payload"] = event.payload
            self.record(event.target_id, event.kind, detail)
            target = self.components.get(event.target_id)
            if target is None:
                continue
            try:
                target.handle(event, self)
            except Exception as exc:  # noqa: BLE001 - abort and mark
                self.trace.error = f"{type(exc).__name__}: {exc}"
                self.record(event.target_id, EventKind.ERROR, self.trace.error)
                return self.trace
        self.now = t_end
        return self.trace

    def run(self) -> Trace:
        """Dispatch until the queue drains; ``now`` ends at the last event."""
        while len(self.queue):
            self.run_until(self.queue.peek_time())
            if self.trace.error:
                break
        return self.trace


def trace_to_csv(records: Iterable[TraceRecord], header: Iterable[str] = ()) -> str:
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for rec in records:
        writer.writerow(rec.row())
    return buf.getvalue()


def write_trace_csv(records: Iterable[TraceRecord], path,
                    header: Iterable[str] = ()) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(trace_to_csv(records, header))
