"""Cores, caches, dedicated links and a shared serial bus, run on the engine.

Each scenario function builds a small engine, runs it to completion and reads
its report back from the trace, so the reported times are the simulated ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .engine import Component, Engine, EventKind, Trace
from .timespace import (DomainError, SpatialPoint, apparent_processing_time,
                        propagation_delay)


@dataclass(frozen=True)
class Core:
    id: str
    position: SpatialPoint
    tp: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", SpatialPoint.of(self.position))
        if not (math.isfinite(self.tp) and self.tp >= 0):
            raise DomainError(f"core {self.id}: Tp must be >= 0")


@dataclass(frozen=True)
class CacheMemory:
    id: str
    position: SpatialPoint
    operate_time: float

    def __post_init__(self):
        object.__setattr__(self, "position", SpatialPoint.of(self.position))
        if not (math.isfinite(self.operate_time) and self.operate_time > 0):
            raise DomainError(f"cache {self.id}: operate_time must be > 0")

    @classmethod
    def with_speed(cls, id: str, position, speed: float) -> "CacheMemory":
        """Cache whose physical access speed is ``speed`` (operate time 1/speed)."""
        return cls(id, position, 1.0 / speed)


@dataclass(frozen=True)
class ForeignLoad:
    """Extra bus time per access caused by unrelated traffic.

    ``kind`` is ``"constant"`` (always ``value``) or ``"exponential"``
    (draws with mean ``value`` from the engine generator).
    """

    kind: str = "constant"
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "exponential"):
            raise DomainError(f"unknown foreign-load kind {self.kind!r}")
        if not (math.isfinite(self.value) and self.value >= 0):
            raise DomainError("foreign load must be >= 0")

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def draw(self, rng: np.random.Generator) -> float:
        if self.kind == "constant" or self.value == 0:
            return self.value
        return float(rng.exponential(self.value))


@dataclass(frozen=True)
class BusChannel:
    id: str
    position: SpatialPoint
    t_b: float
    t_d: float
    foreign: ForeignLoad = field(default_factory=ForeignLoad)

    def __post_init__(self):
        object.__setattr__(self, "position", SpatialPoint.of(self.position))
        for name in ("t_b", "t_d"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val >= 0):
                raise DomainError(f"bus {self.id}: {name} must be >= 0")

    def completion_times(self, n: int, rng: Optional[np.random.Generator] = None):
        """Closed-form delivery end times for ``n`` simultaneous requests."""
        if n < 1:
            raise DomainError("at least one sender is required")
        if self.foreign.is_constant:
            extra = np.full(n, self.foreign.value)
        else:
            rng = rng if rng is not None else np.random.default_rng(0)
            extra = np.array([self.foreign.draw(rng) for _ in range(n)])
        _, ends = kernels.serial_bus_completions(2.0 * self.t_b, self.t_d + extra)
        return ends


@dataclass(frozen=True)
class ParallelLink:
    source_id: str
    target_id: str
    delay: float

    def __post_init__(self):
        if not (math.isfinite(self.delay) and self.delay >= 0):
            raise DomainError("link delay must be >= 0")


# ---------------------------------------------------------------------------
# cache access
# ---------------------------------------------------------------------------

@dataclass
class CacheAccessReport:
    core_id: str
    cache_id: str
    one_way: float
    operate_time: float
    apparent_access_time: float
    apparent_speed: float
    cache_idle: float
    core_idle: float
    trace: Trace = field(repr=False, default_factory=Trace)


class _CacheClient(Component):
    def __init__(self, core: Core, cache_id: str, one_way: float):
        super().__init__(core.id, core.position)
        self.cache_id = cache_id
        self.one_way = one_way
        self.requested_at = 0.0
        self.reply_at = None

    def start(self, engine: Engine):
        self.requested_at = engine.now
        engine.record(self.id, EventKind.PROCESS_END, {"action": "request"})
        engine.schedule_in(self.one_way, self.id, self.cache_id,
                           EventKind.SIGNAL_ARRIVAL, {"op": "read"})

    def handle(self, event, engine):
        if event.kind is EventKind.SIGNAL_ARRIVAL:
            self.reply_at = engine.now
            # blocked while the cache operates and the data travels back
            engine.record(self.id, EventKind.IDLE_WAIT,
                          {"from": self.requested_at + self.one_way, "to": engine.now})


class _CacheServer(Component):
    def __init__(self, cache: CacheMemory, one_way: float):
        super().__init__(cache.id, cache.position)
        self.cache = cache
        self.one_way = one_way
        self.client = None
        self.t0 = 0.0
        self.idle = 0.0

    def handle(self, event, engine):
        if event.kind is EventKind.SIGNAL_ARRIVAL:
            self.client = event.source_id
            self.idle = engine.now
            engine.record(self.id, EventKind.IDLE_WAIT, {"from": self.t0, "to": engine.now})
            engine.record(self.id, EventKind.PROCESS_START, {"operate": self.cache.operate_time})
            engine.schedule_in(self.cache.operate_time, self.id, self.id,
                               EventKind.PROCESS_END)
        elif event.kind is EventKind.PROCESS_END:
            engine.schedule_in(self.one_way, self.id, self.client,
                               EventKind.SIGNAL_ARRIVAL, {"op": "data"})


def cache_access_scenario(core: Core, cache: CacheMemory, v, seed: int = 0,
                          engine: Optional[Engine] = None) -> CacheAccessReport:
    """One read from ``core`` to ``cache`` with signals moving at ``v``."""
    one_way = propagation_delay(core.position, cache.position, v)
    eng = engine if engine is not None else Engine(seed)
    client = _CacheClient(core, cache.id, one_way)
    server = _CacheServer(cache, one_way)
    eng.add(client, server)
    t0 = server.t0 = eng.now
    client.start(eng)
    trace = eng.run()
    if trace.error:
        raise RuntimeError(trace.error)
    apparent = client.reply_at - t0
    return CacheAccessReport(
        core_id=core.id, cache_id=cache.id, one_way=one_way,
        operate_time=cache.operate_time, apparent_access_time=apparent,
        apparent_speed=1.0 / apparent, cache_idle=server.idle - t0,
        core_idle=apparent - one_way, trace=trace)


# ---------------------------------------------------------------------------
# shared serial bus
# ---------------------------------------------------------------------------

@dataclass
class BusReport:
    grant_order: list[str]
    completions: dict[str, float]
    delivery_intervals: list[tuple[str, float, float]]
    receiver_tt: float
    processing_start: float
    processing_end: float
    trace: Trace = field(repr=False, default_factory=Trace)

    @property
    def n_senders(self) -> int:
        return len(self.grant_order)


class _Sender(Component):
    def __init__(self, core: Core, bus_id: str, t_b: float):
        super().__init__(core.id, core.position)
        self.bus_id = bus_id
        self.t_b = t_b

    def handle(self, event, engine):
        if event.kind is EventKind.BUS_GRANT:
            # the operand now travels to the bus
            engine.schedule_in(self.t_b, self.id, self.bus_id,
                               EventKind.SIGNAL_ARRIVAL, {"from": self.id})


class _Arbiter(Component):
    def __init__(self, bus: BusChannel, receiver_id: str, senders: dict[str, Core]):
        super().__init__(bus.id, bus.position)
        self.bus = bus
        self.receiver_id = receiver_id
        self.senders = senders
        self.pending: list[str] = []
        self.busy = False
        self.bus_free = 0.0
        self.grants: list[str] = []
        self.intervals: list[tuple[str, float, float]] = []

    def _distance(self, sender_id: str) -> float:
        return self.senders[sender_id].position.distance(self.position)

    def handle(self, event, engine):
        kind = event.kind
        if kind is EventKind.BUS_REQUEST:
            self.pending.append(event.source_id)
            if not self.busy:
                self.busy = True
                # runs after every request already queued for this instant
                engine.schedule_in(0.0, self.id, self.id, EventKind.ARBITRATE)
        elif kind is EventKind.ARBITRATE:
            self._grant_next(engine)
        elif kind is EventKind.SIGNAL_ARRIVAL:
            sender = event.payload["from"]
            start = max(engine.now, self.bus_free)
            extra = self.bus.foreign.draw(engine.rng)
            end = start + self.bus.t_d + extra
            self.bus_free = end
            self.intervals.append((sender, start, end))
            engine.record(self.id, EventKind.BUS_DELIVERY,
                          {"from": sender, "start": start, "end": end, "X": extra})
            engine.schedule(end, self.id, self.receiver_id,
                            EventKind.SIGNAL_ARRIVAL, {"from": sender})
            if self.pending:
                self._grant_next(engine)
            else:
                self.busy = False

    def _grant_next(self, engine):
        self.pending.sort(key=lambda sid: (self._distance(sid), sid))
        chosen = self.pending.pop(0)
        self.grants.append(chosen)
        engine.schedule_in(self.bus.t_b, self.id, chosen, EventKind.BUS_GRANT,
                           {"rank": len(self.grants)})


class _Receiver(Component):
    def __init__(self, core: Core, expected: int):
        super().__init__(core.id, core.position)
        self.tp = core.tp
        self.expected = expected
        self.arrivals: dict[str, float] = {}
        self.first_arrival = None
        self.start = None
        self.end = None

    def handle(self, event, engine):
        if event.kind is EventKind.SIGNAL_ARRIVAL:
            self.arrivals[event.payload["from"]] = engine.now
            if self.first_arrival is None:
                self.first_arrival = engine.now
            if len(self.arrivals) == self.expected:
                if self.expected > 1:
                    # a level-based neuron would emit a wrong output meanwhile
                    engine.record(self.id, EventKind.OUTPUT_INVALID,
                                  {"from": self.first_arrival, "to": engine.now})
                self.start = engine.now
                engine.record(self.id, EventKind.PROCESS_START,
                              {"inputs": len(self.arrivals)})
                engine.schedule_in(self.tp, self.id, self.id, EventKind.PROCESS_END)
        elif event.kind is EventKind.PROCESS_END:
            self.end = engine.now


def grant_order(senders: Sequence[Core], bus: BusChannel) -> list[str]:
    """Nearest-to-arbiter first, ties by id."""
    return [c.id for c in sorted(senders, key=lambda c: (c.position.distance(bus.position), c.id))]


def shared_bus_transfer(senders: Sequence[Core], bus: BusChannel, receiver: Core,
                        seed: int = 0, engine: Optional[Engine] = None) -> BusReport:
    """All ``senders`` request ``bus`` at once; ``receiver`` waits for every input."""
    if not senders:
        raise DomainError("shared_bus_transfer needs at least one sender")
    ids = [c.id for c in senders]
    if len(set(ids)) != len(ids) or receiver.id in ids or bus.id in ids:
        raise DomainError("component ids must be unique")
    eng = engine if engine is not None else Engine(seed)
    by_id = {c.id: c for c in senders}
    arbiter = _Arbiter(bus, receiver.id, by_id)
    rx = _Receiver(receiver, len(senders))
    eng.add(arbiter, rx, *(_Sender(c, bus.id, bus.t_b) for c in senders))
    t0 = eng.now
    for c in sorted(senders, key=lambda c: c.id):
        eng.schedule(t0, c.id, bus.id, EventKind.BUS_REQUEST)
    trace = eng.run()
    if trace.error:
        raise RuntimeError(trace.error)
    completions = {sid: t - t0 for sid, t in rx.arrivals.items()}
    return BusReport(
        grant_order=list(arbiter.grants),
        completions=completions,
        delivery_intervals=[(s, a - t0, b - t0) for s, a, b in arbiter.intervals],
        receiver_tt=rx.start - t0,
        processing_start=rx.start - t0,
        processing_end=rx.end - t0,
        trace=trace)


@dataclass
class ParallelReport:
    link_delays: dict[str, float]
    receiver_tt: float
    trace: Trace = field(repr=False, default_factory=Trace)


class _LinkSender(Component):
    """Passive endpoint; its link delivers without arbitration."""


def parallel_transfer(senders: Sequence[Core], receiver: Core,
                      links: Optional[Sequence[ParallelLink]] = None, v=None,
                      seed: int = 0) -> ParallelReport:
    """Every sender has a dedicated link to ``receiver``; nothing is shared.

    Link delays come from ``links`` when given, else from the geometry at
    speed ``v``.
    """
    if not senders:
        raise DomainError("parallel_transfer needs at least one sender")
    if links is None:
        if v is None:
            raise DomainError("give either links or an interaction speed")
        links = [ParallelLink(c.id, receiver.id,
                              propagation_delay(c.position, receiver.position, v))
                 for c in senders]
    delays = {link.source_id: link.delay for link in links}
    eng = Engine(seed)
    rx = _Receiver(receiver, len(senders))
    eng.add(rx, *(_LinkSender(c.id, c.position) for c in senders))
    for c in sorted(senders, key=lambda c: c.id):
        eng.schedule(delays[c.id], c.id, receiver.id, EventKind.SIGNAL_ARRIVAL,
                     {"from": c.id, "link": "dedicated"})
    trace = eng.run()
    if trace.error:
        raise RuntimeError(trace.error)
    return ParallelReport(link_delays=delays, receiver_tt=rx.start, trace=trace)


# ---------------------------------------------------------------------------
# layer studies
# ---------------------------------------------------------------------------

def layer_senders(n: int, spacing: float = 0.1, y: float = 0.0,
                  prefix: str = "n") -> list[Core]:
    """``n`` cores on a line, ids sortable by index."""
    width = max(3, len(str(n - 1)))
    return [Core(f"{prefix}{i:0{width}d}", SpatialPoint((i - (n - 1) / 2) * spacing, y))
            for i in range(n)]


@dataclass
class ScalingTable:
    topology: str
    rows: list[tuple[int, float]]
    slope: float
    intercept: float


def _fit_line(xs, ys) -> tuple[float, float]:
    if len(xs) < 2:
        return 0.0, float(ys[0]) if ys else 0.0
    slope, intercept = np.polyfit(np.asarray(xs, float), np.asarray(ys, float), 1)
    return float(slope), float(intercept)


def hidden_layer_scaling(l_values: Sequence[int], bus: BusChannel,
                         topology: str = "shared", receiver: Optional[Core] = None,
                         link_delay: Optional[float] = None,
                         seed: int = 0) -> ScalingTable:
    """Receiver transmission time as the hidden layer grows.

    ``topology`` is ``"shared"`` (everything through ``bus``) or
    ``"parallel"`` (a dedicated link per neuron, delay ``link_delay``,
    default the bus's physical delivery time).
    """
    if any(int(L) < 1 for L in l_values):
        raise DomainError("layer sizes must be >= 1")
    receiver = receiver or Core("out", SpatialPoint(0.0, 1.0))
    rows = []
    for L in l_values:
        L = int(L)
        senders = layer_senders(L)
        if topology == "shared":
            tt = shared_bus_transfer(senders, bus, receiver, seed=seed).receiver_tt
        elif topology == "parallel":
            delay = bus.t_d if link_delay is None else link_delay
            links = [ParallelLink(c.id, receiver.id, delay) for c in senders]
            tt = parallel_transfer(senders, receiver, links=links, seed=seed).receiver_tt
        else:
            raise DomainError(f"unknown topology {topology!r}")
        rows.append((L, tt))
    slope, intercept = _fit_line([r[0] for r in rows], [r[1] for r in rows])
    return ScalingTable(topology, rows, slope, intercept)


@dataclass
class Arrangement:
    widths: list[int]
    layer_tt: list[float]
    layer_apparent: list[float]

    @property
    def max_layer_tt(self) -> float:
        return max(self.layer_tt)

    @property
    def total_apparent(self) -> float:
        return float(sum(self.layer_apparent))


@dataclass
class ShallowDeepComparison:
    total_neurons: int
    wide: Arrangement
    deep: Arrangement

    @property
    def deep_is_faster(self) -> bool:
        """Deep wins when its slowest layer waits less for the bus."""
        return self.deep.max_layer_tt < self.wide.max_layer_tt


def _arrangement(widths, bus, tp, seed) -> Arrangement:
    receiver = Core("next", SpatialPoint(0.0, 1.0), tp)
    tts = [shared_bus_transfer(layer_senders(w), bus, receiver, seed=seed).receiver_tt
           for w in widths]
    return Arrangement(list(widths), tts, [apparent_processing_time(tp, tt) for tt in tts])


def shallow_vs_deep(total_neurons: int, widths: Sequence[int], bus: BusChannel,
                    tp: float, seed: int = 0) -> ShallowDeepComparison:
    """Compare ``widths`` against putting all neurons into one layer.

    Layers are composed as a plain sum of per-stage apparent times; the
    verdict uses the largest per-layer transmission time.
    """
    widths = [int(w) for w in widths]
    if not widths or any(w < 1 for w in widths):
        raise DomainError("widths must be positive")
    if sum(widths) != total_neurons:
        raise DomainError(f"widths {widths} sum to {sum(widths)}, not {total_neurons}")
    return ShallowDeepComparison(
        total_neurons=int(total_neurons),
        wide=_arrangement([int(total_neurons)], bus, tp, seed),
        deep=_arrangement(widths, bus, tp, seed))


# ---------------------------------------------------------------------------
# two light sources
# ---------------------------------------------------------------------------

@dataclass
class TwoSourceReport:
    tt: float
    notice_time: float
    observer_done: float
    apparent_time: float
    trace: Trace = field(repr=False, default_factory=Trace)


class _Lamp(Component):
    def __init__(self, core: Core, peer: Optional[str], v):
        super().__init__(core.id, core.position)
        self.tp = core.tp
        self.peer = peer
        self.v = v
        self.done = None

    def handle(self, event, engine):
        if event.kind is EventKind.SIGNAL_ARRIVAL:
            engine.record(self.id, EventKind.PROCESS_START)
            engine.schedule_in(self.tp, self.id, self.id, EventKind.PROCESS_END)
        elif event.kind is EventKind.PROCESS_END:
            self.done = engine.now
            if self.peer is not None:
                delay = propagation_delay(self.position, engine.position_of(self.peer), self.v)
                engine.schedule_in(delay, self.id, self.peer, EventKind.SIGNAL_ARRIVAL,
                                   {"from": self.id})


def two_source_experiment(source: Core, observer: Core, v, seed: int = 0) -> TwoSourceReport:
    """The source gets an instruction at t=0; the observer reacts to its light.

    ``apparent_time`` is measured from the trace: the length of the vector
    from the source's first record to the observer's last one, with the
    spatial leg converted to time at speed ``v``.
    """
    eng = Engine(seed)
    src = _Lamp(source, observer.id, v)
    obs = _Lamp(observer, None, v)
    eng.add(src, obs)
    eng.schedule(0.0, "instruction", source.id, EventKind.SIGNAL_ARRIVAL)
    trace = eng.run()
    if trace.error:
        raise RuntimeError(trace.error)
    first, last = trace[0], trace[-1]
    leg = propagation_delay(first.position, last.position, v)
    notice = next(r.time for r in trace
                  if r.component_id == observer.id and r.kind == str(EventKind.SIGNAL_ARRIVAL))
    return TwoSourceReport(tt=notice - src.done, notice_time=notice,
                           observer_done=obs.done,
                           apparent_time=math.hypot(leg, last.time - first.time),
                           trace=trace)
