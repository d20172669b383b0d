"""Oscillator neurons, conduction delays, phase locking and arrival-phase learning.

Phases are handled with circular statistics throughout: a plain average of
angles is wrong near the 0/360 degree wrap.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .engine import Component, Engine, EventKind, Trace
from .timespace import DomainError, SpatialPoint

TWO_PI = 2.0 * math.pi

#: Engine integration step used when a tick is converted to a current.
DEFAULT_STEP = 1e-4
#: Current threshold that a unit-charge tick over one step always reaches.
DEFAULT_I_TH = 1.0 / DEFAULT_STEP

MIN_BASE_HZ = 0.02
MAX_BASE_HZ = 600.0
MAX_MYELINATION = 60.0


class SpikeDecision(enum.IntEnum):
    NONE = kernels.SPIKE_NONE
    VOLTAGE = kernels.SPIKE_VOLTAGE
    CURRENT = kernels.SPIKE_CURRENT


@dataclass
class OscillatorNeuron:
    """Leaky integrator with a voltage threshold and a synaptic-current threshold.

    The free-running phase advances at ``1 / (2*pi*rc)`` cycles per second.
    """

    id: str
    position: SpatialPoint = field(default_factory=SpatialPoint)
    rc: float = 0.01
    v_th: float = 1.0
    i_th: float = DEFAULT_I_TH
    potential: float = 0.0
    phase: float = 0.0
    fire_offset: float = 0.0

    def __post_init__(self):
        self.position = SpatialPoint.of(self.position)
        if not (math.isfinite(self.rc) and self.rc > 0):
            raise DomainError(f"neuron {self.id}: rc must be > 0")
        if not 0.0 <= self.phase < TWO_PI:
            self.phase = self.phase % TWO_PI

    @property
    def phase_rate(self) -> float:
        return 1.0 / (TWO_PI * self.rc)


@dataclass(frozen=True)
class Axon:
    from_id: str
    to_id: str
    length: float
    base_velocity: float = 1.0
    myelination_factor: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.length) and self.length >= 0):
            raise DomainError("axon length must be >= 0")
        if not (math.isfinite(self.base_velocity) and self.base_velocity > 0):
            raise DomainError("base velocity must be > 0")
        if not 1.0 <= self.myelination_factor <= MAX_MYELINATION:
            raise DomainError(f"myelination factor must lie in [1, {MAX_MYELINATION:g}]")

    @classmethod
    def with_delay(cls, from_id: str, to_id: str, delay: float) -> "Axon":
        """Unmyelinated axon at 1 m/s whose conduction delay is ``delay``."""
        return cls(from_id, to_id, length=delay, base_velocity=1.0)


@dataclass(frozen=True)
class BaseOscillator:
    frequency: float
    id: str = "base"
    position: SpatialPoint = field(default_factory=SpatialPoint)

    def __post_init__(self):
        if not MIN_BASE_HZ <= self.frequency <= MAX_BASE_HZ:
            raise DomainError(
                f"base frequency {self.frequency} Hz outside [{MIN_BASE_HZ}, {MAX_BASE_HZ}]")

    @property
    def period(self) -> float:
        return 1.0 / self.frequency


@dataclass(frozen=True)
class Spike:
    source_id: str
    emit_time: float
    biological_timestamp: float
    charge: float = 1.0


@dataclass
class Assembly:
    """Anatomically identical members that should hit ``target_id`` in phase.

    ``lock_delays`` holds the base-tick conduction delay to each member
    (default zero for all).
    """

    members: list[OscillatorNeuron]
    target_id: str
    base: BaseOscillator
    lock_delays: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.members:
            raise DomainError("an assembly needs members")
        rcs = {m.rc for m in self.members}
        if len(rcs) != 1:
            raise DomainError(f"assembly members must share rc, got {sorted(rcs)}")


# ---------------------------------------------------------------------------
# delays and phases
# ---------------------------------------------------------------------------

def conduction_delay(axon: Axon) -> float:
    return axon.length / (axon.base_velocity * axon.myelination_factor)


def phase_shift(delay: float, f: float) -> float:
    """Phase in degrees accumulated by ``delay`` seconds at ``f`` Hz."""
    if f <= 0:
        raise DomainError("frequency must be > 0")
    if delay < 0:
        raise DomainError("delay must be >= 0")
    return (360.0 * delay * f) % 360.0


def wrap_degrees(angle):
    """Map angles to (-180, 180]."""
    a = np.mod(np.asarray(angle, dtype=np.float64) + 180.0, 360.0) - 180.0
    a = np.where(a == -180.0, 180.0, a)
    return a if a.ndim else float(a)


def circular_mean(degrees, weights=None) -> float:
    rad = np.radians(np.asarray(degrees, dtype=np.float64))
    w = np.ones_like(rad) if weights is None else np.asarray(weights, dtype=np.float64)
    return float(np.degrees(np.arctan2(np.sum(w * np.sin(rad)), np.sum(w * np.cos(rad)))) % 360.0)


def circular_deviations(degrees, weights=None) -> np.ndarray:
    return np.atleast_1d(wrap_degrees(np.asarray(degrees, float) - circular_mean(degrees, weights)))


def circular_spread(degrees, weights=None) -> float:
    """Width of the arc occupied by the phases around their circular mean."""
    dev = circular_deviations(degrees, weights)
    return float(dev.max() - dev.min())


def superposition_proxy(degrees, charges=None) -> float:
    """Charge superposed at the target: each spike weighted by cos of its lag."""
    charges = np.ones(len(np.atleast_1d(degrees))) if charges is None else np.asarray(charges, float)
    dev = circular_deviations(degrees, charges)
    return float(np.sum(charges * np.cos(np.radians(dev))))


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

def integrate_step(n: OscillatorNeuron, dt: float, i_syn: float) -> SpikeDecision:
    """Advance ``n`` by ``dt`` under synaptic current ``i_syn``.

    A current at or above ``n.i_th`` discharges the neuron at once and sets
    its phase to zero whatever its state; otherwise the voltage threshold
    decides.
    """
    if not dt > 0:
        raise DomainError(f"dt must be > 0, got {dt!r}")
    n.potential = n.potential * math.exp(-dt / n.rc) + i_syn * dt
    n.phase = (n.phase + TWO_PI * dt * n.phase_rate) % TWO_PI
    if i_syn >= n.i_th:
        n.potential = 0.0
        n.phase = 0.0
        return SpikeDecision.CURRENT
    if n.potential >= n.v_th:
        n.potential = 0.0
        return SpikeDecision.VOLTAGE
    return SpikeDecision.NONE


def integrate(n: OscillatorNeuron, dt: float, currents) -> np.ndarray:
    """Run :func:`integrate_step` over a current series; returns spike codes."""
    if not dt > 0:
        raise DomainError(f"dt must be > 0, got {dt!r}")
    pots, phases, spikes = kernels.leaky_integrate(
        n.potential, n.phase, n.rc, n.v_th, n.i_th, dt, currents, n.phase_rate)
    if len(spikes):
        n.potential = float(pots[-1])
        n.phase = float(phases[-1])
    return spikes


def _decay(n: OscillatorNeuron, elapsed: float) -> None:
    if elapsed > 0:
        n.potential *= math.exp(-elapsed / n.rc)
        n.phase = (n.phase + TWO_PI * elapsed * n.phase_rate) % TWO_PI


# ---------------------------------------------------------------------------
# phase locking
# ---------------------------------------------------------------------------

class _Clock(Component):
    """Emits base ticks and sends them down each axon."""

    def __init__(self, base: BaseOscillator, axons: Sequence[Axon], charge: float):
        super().__init__(base.id, base.position)
        self.base = base
        self.axons = list(axons)
        self.charge = charge
        self.ticks: list[float] = []

    def handle(self, event, engine):
        if event.kind is EventKind.BASE_TICK:
            self.ticks.append(engine.now)
            for axon in self.axons:
                engine.schedule_in(conduction_delay(axon), self.id, axon.to_id,
                                   EventKind.SIGNAL_ARRIVAL,
                                   {"charge": self.charge, "tick": len(self.ticks) - 1})


class _LockedNeuron(Component):
    def __init__(self, neuron: OscillatorNeuron, step: float):
        super().__init__(neuron.id, neuron.position)
        self.neuron = neuron
        self.step = step
        self.last = 0.0
        self.fired: list[float] = []
        self.decisions: list[SpikeDecision] = []

    def handle(self, event, engine):
        if event.kind is not EventKind.SIGNAL_ARRIVAL:
            return
        _decay(self.neuron, engine.now - self.last)
        self.last = engine.now
        current = event.payload["charge"] / self.step
        decision = integrate_step(self.neuron, self.step, current)
        self.decisions.append(decision)
        if decision is not SpikeDecision.NONE:
            self.fired.append(engine.now)
            engine.record(self.id, EventKind.SPIKE, {"path": decision.name.lower()})


@dataclass
class PhaseLockReport:
    neuron_id: str
    locked: bool
    delay: float
    offset_deg: float
    tick_times: list[float]
    firing_times: list[float]
    residual: float
    trace: Trace = field(repr=False, default_factory=Trace)

    @property
    def firing_phases_s(self) -> np.ndarray:
        """Firing times reduced modulo the base period."""
        t = np.asarray(self.firing_times)
        return t - np.asarray(self.tick_times[: len(t)])


def phase_lock_many(neurons: Sequence[OscillatorNeuron], axons: Sequence[Axon],
                    base: BaseOscillator, periods: int = 100, tick_charge: float = 1.0,
                    step: float = DEFAULT_STEP, seed: int = 0) -> dict[str, PhaseLockReport]:
    """Drive every neuron with base ticks for ``periods`` periods."""
    eng = Engine(seed)
    clock = _Clock(base, axons, tick_charge)
    comps = {n.id: _LockedNeuron(n, step) for n in neurons}
    eng.add(clock, *comps.values())
    for k in range(int(periods)):
        eng.schedule(k * base.period, base.id, base.id, EventKind.BASE_TICK)
    trace = eng.run()
    if trace.error:
        raise RuntimeError(trace.error)
    delays = {a.to_id: conduction_delay(a) for a in axons}
    reports = {}
    for nid, comp in comps.items():
        locked = bool(comp.decisions) and all(d is SpikeDecision.CURRENT for d in comp.decisions)
        fired = comp.fired if locked else []
        if locked:
            period = base.period
            ticks = np.asarray(clock.ticks[: len(fired)])
            within = np.asarray(fired) - ticks
            residual = float(np.ptp(within)) if len(within) else 0.0
            # rounding of k*period cannot exceed this, so the mod is safe
            offset = phase_shift(float(np.mean(within)) % period, base.frequency)
        else:
            residual = math.nan
            offset = math.nan
        reports[nid] = PhaseLockReport(nid, locked, delays.get(nid, math.nan), offset,
                                       list(clock.ticks), list(fired), residual, trace)
    return reports


def phase_lock(n: OscillatorNeuron, base: BaseOscillator, a: Axon, periods: int = 100,
               tick_charge: float = 1.0, step: float = DEFAULT_STEP) -> PhaseLockReport:
    """Lock ``n`` to ``base`` through axon ``a``.

    The tick reaches the neuron ``conduction_delay(a)`` after emission; a
    tick whose current stays below the neuron's ``i_th`` cannot reset the
    phase and the report comes back with ``locked=False``.
    """
    return phase_lock_many([n], [a], base, periods, tick_charge, step)[n.id]


# ---------------------------------------------------------------------------
# arrival-phase learning
# ---------------------------------------------------------------------------

class _Member(Component):
    def __init__(self, neuron: OscillatorNeuron, axon: Axon, fire_at: float, charge: float):
        super().__init__(neuron.id, neuron.position)
        self.neuron = neuron
        self.axon = axon
        self.fire_at = fire_at
        self.charge = charge
        self.emitted = None

    def handle(self, event, engine):
        if event.kind is EventKind.SIGNAL_ARRIVAL:
            # reset by the base tick, then wait for the learned offset
            self.neuron.potential = 0.0
            self.neuron.phase = 0.0
            engine.schedule_in(self.fire_at, self.id, self.id, EventKind.SPIKE)
        elif event.kind is EventKind.SPIKE:
            self.emitted = engine.now
            spike = Spike(self.id, engine.now, engine.now, self.charge)
            engine.schedule_in(conduction_delay(self.axon), self.id, self.axon.to_id,
                               EventKind.SIGNAL_ARRIVAL, {"spike": spike.source_id,
                                                         "emit": spike.emit_time})


class _Target(Component):
    def __init__(self, id: str, position=SpatialPoint()):
        super().__init__(id, position)
        self.arrivals: dict[str, float] = {}

    def handle(self, event, engine):
        if event.kind is EventKind.SIGNAL_ARRIVAL:
            self.arrivals[event.source_id] = engine.now


@dataclass
class RasterRow:
    neuron: str
    emit_time: float
    arrival_time: float
    target: str
    phase_deg: float
    biological_timestamp: float


@dataclass
class LearningReport:
    converged: bool
    iterations: int
    spread_history: list[float]
    proxy_history: list[float]
    offsets: dict[str, float]
    arrival_phases: dict[str, float]
    emit_times: dict[str, float]
    raster: list[RasterRow] = field(default_factory=list)

    @property
    def final_spread(self) -> float:
        return self.spread_history[-1]

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "final_spread_deg": self.final_spread,
            "spread_history_deg": list(self.spread_history),
            "proxy_history": list(self.proxy_history),
            "offsets_s": dict(self.offsets),
            "arrival_phases_deg": dict(self.arrival_phases),
        }


def _episode(asm: Assembly, axons: dict[str, Axon], offsets: dict[str, float],
             charges: dict[str, float], seed: int):
    base = asm.base
    shift = min(0.0, min(offsets.values()))
    eng = Engine(seed)
    target = _Target(asm.target_id)
    members = {m.id: _Member(m, axons[m.id], offsets[m.id] - shift, charges[m.id])
               for m in asm.members}
    eng.add(target, *members.values())
    eng.record(base.id, EventKind.BASE_TICK, position=base.position)
    for m in asm.members:
        eng.schedule(asm.lock_delays.get(m.id, 0.0), base.id, m.id,
                     EventKind.SIGNAL_ARRIVAL, {"charge": 1.0})
    trace = eng.run()
    if trace.error:
        raise RuntimeError(trace.error)
    emits = {mid: comp.emitted for mid, comp in members.items()}
    return emits, dict(target.arrivals), trace


def learn_arrival_phase(asm: Assembly, axons: Sequence[Axon], eta: float = 1.0,
                        max_iter: int = 100, tol_deg: float = 1e-9,
                        seed: int = 0) -> LearningReport:
    """Adjust member firing offsets until spikes reach the target in phase.

    Each round runs one engine episode: the base tick resets every member,
    members fire after their offset, and the target notes arrival phases
    relative to the tick.  Every member then moves its firing time against
    its deviation from the circular mean, scaled by ``eta``.
    """
    if not 0 < eta <= 1:
        raise DomainError(f"eta must lie in (0, 1], got {eta!r}")
    by_member = {a.from_id: a for a in axons}
    ids = [m.id for m in asm.members]
    missing = [i for i in ids if i not in by_member]
    if missing:
        raise DomainError(f"no axon for members {missing}")
    if any(by_member[i].to_id != asm.target_id for i in ids):
        raise DomainError("every member axon must end at the assembly target")
    f = asm.base.frequency
    offsets = {m.id: float(m.fire_offset) for m in asm.members}
    charges = {i: 1.0 for i in ids}
    weights = np.array([charges[i] for i in ids])
    spreads: list[float] = []
    proxies: list[float] = []
    converged = False
    iterations = 0
    for it in range(int(max_iter) + 1):
        emits, arrivals, _ = _episode(asm, by_member, offsets, charges, seed)
        phases = np.array([(360.0 * f * arrivals[i]) % 360.0 for i in ids])
        dev = circular_deviations(phases, weights)
        spreads.append(float(dev.max() - dev.min()))
        proxies.append(superposition_proxy(phases, weights))
        iterations = it
        if spreads[-1] < tol_deg:
            converged = True
            break
        if it == max_iter:
            break
        for i, d in zip(ids, dev):
            offsets[i] -= eta * float(d) / (360.0 * f)
    for m in asm.members:
        m.fire_offset = offsets[m.id]
    raster = [RasterRow(i, emits[i], arrivals[i], asm.target_id,
                        float(360.0 * f * arrivals[i] % 360.0), emits[i]) for i in ids]
    return LearningReport(
        converged=converged, iterations=iterations, spread_history=spreads,
        proxy_history=proxies, offsets=offsets,
        arrival_phases={i: float(p) for i, p in zip(ids, phases)},
        emit_times=emits, raster=raster)


# ---------------------------------------------------------------------------
# feedback queue
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeedbackItem:
    seq: int
    spike: Spike
    arrival_time: float


@dataclass
class FeedbackQueue:
    """Inbound feedback for one receiver, FIFO by physical arrival."""

    receiver_id: str
    busy_cycles_drop_threshold: int
    items: list[FeedbackItem] = field(default_factory=list)

    def __post_init__(self):
        if self.busy_cycles_drop_threshold < 0:
            raise DomainError("drop threshold must be >= 0")

    def push(self, spike: Spike, arrival_time: float) -> FeedbackItem:
        if arrival_time < spike.emit_time:
            raise DomainError("a spike cannot arrive before it is emitted")
        item = FeedbackItem(len(self.items), spike, float(arrival_time))
        self.items.append(item)
        return item


@dataclass(frozen=True)
class Delivery:
    item: FeedbackItem
    delivery_time: float

    @property
    def staleness(self) -> float:
        return self.delivery_time - self.item.spike.biological_timestamp


@dataclass(frozen=True)
class Drop:
    item: FeedbackItem
    drop_time: float
    waited_cycles: int


@dataclass
class FeedbackReport:
    delivered: list[Delivery]
    dropped: list[Drop]
    trace: Trace = field(repr=False, default_factory=Trace)

    @property
    def staleness(self) -> list[float]:
        return [d.staleness for d in self.delivered]

    def stats(self) -> dict:
        s = np.asarray(self.staleness, dtype=np.float64)
        out = {"delivered": len(self.delivered), "dropped": len(self.dropped)}
        if s.size:
            out.update(mean=float(s.mean()), min=float(s.min()), max=float(s.max()))
        return out


def _cycle_of(t: float, cycle: float) -> int:
    c = math.floor(t / cycle)
    if (c + 1) * cycle <= t:
        c += 1
    elif c * cycle > t:
        c -= 1
    return int(c)


class _FeedbackReceiver(Component):
    def __init__(self, queue: FeedbackQueue, busy: set[int], cycle: float):
        super().__init__(queue.receiver_id)
        self.queue = queue
        self.busy = busy
        self.cycle = cycle
        self.waiting: list[tuple[FeedbackItem, int]] = []
        self.check_pending = False
        self.delivered: list[Delivery] = []
        self.dropped: list[Drop] = []

    def _deliver(self, engine, item):
        self.delivered.append(Delivery(item, engine.now))
        engine.record(self.id, EventKind.PROCESS_START,
                      {"item": item.seq, "staleness": engine.now - item.spike.biological_timestamp})

    def handle(self, event, engine):
        payload = event.payload or {}
        if "check" in payload:
            self.check_pending = False
            c = payload["check"]
            keep = []
            for item, c_arr in self.waiting:
                waited = c - c_arr
                if waited > self.queue.busy_cycles_drop_threshold:
                    self.dropped.append(Drop(item, engine.now, waited))
                    engine.record(self.id, EventKind.DROP, {"item": item.seq, "waited": waited})
                else:
                    keep.append((item, c_arr))
            if c in self.busy:
                self.waiting = keep
            else:
                for item, _ in keep:
                    self._deliver(engine, item)
                self.waiting = []
            self._arm(engine, c)
            return
        item = self.queue.items[payload["item"]]
        c = _cycle_of(engine.now, self.cycle)
        if c in self.busy or self.waiting:
            self.waiting.append((item, c))
            self._arm(engine, c)
        else:
            self._deliver(engine, item)

    def _arm(self, engine, c):
        if self.waiting and not self.check_pending:
            self.check_pending = True
            engine.schedule((c + 1) * self.cycle, self.id, self.id,
                            EventKind.FEEDBACK, {"check": c + 1})


def feedback_round(queue: FeedbackQueue, busy_cycles: Iterable[int], cycle: float,
                   seed: int = 0) -> FeedbackReport:
    """Deliver or drop every queued feedback item.

    Cycle ``c`` spans ``[c*cycle, (c+1)*cycle)``.  A free receiver takes an
    item the moment it arrives; otherwise the item waits for the next free
    cycle boundary, and is dropped once it has waited through more than
    ``busy_cycles_drop_threshold`` busy cycles.
    """
    if not cycle > 0:
        raise DomainError("cycle length must be > 0")
    eng = Engine(seed)
    rx = _FeedbackReceiver(queue, {int(c) for c in busy_cycles}, float(cycle))
    eng.add(rx)
    for item in queue.items:
        eng.schedule(item.arrival_time, item.spike.source_id, queue.receiver_id,
                     EventKind.FEEDBACK, {"item": item.seq,
                                          "bio": item.spike.biological_timestamp})
    trace = eng.run()
    if trace.error:
        raise RuntimeError(trace.error)
    return FeedbackReport(rx.delivered, rx.dropped, trace)
