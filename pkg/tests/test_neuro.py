import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tempologic.neuro import (Assembly, Axon, BaseOscillator, FeedbackQueue,
                              OscillatorNeuron, Spike, SpikeDecision, circular_mean,
                              circular_spread, conduction_delay, feedback_round,
                              integrate, integrate_step, learn_arrival_phase,
                              phase_lock, phase_lock_many, phase_shift, superposition_proxy)
from tempologic.timespace import DomainError

TWO_PI = 2 * math.pi


# ---------------------------------------------------------------- delays and phases

def test_conduction_delay_examples():
    assert conduction_delay(Axon("a", "b", 0.01)) == pytest.approx(0.01)
    assert conduction_delay(Axon("a", "b", 0.1, 1.0, 60.0)) == pytest.approx(1.6667e-3, abs=1e-7)
    assert conduction_delay(Axon("a", "b", 0.0)) == 0.0


@given(st.floats(0.0, 10.0), st.floats(1.0, 59.0), st.floats(0.01, 1.0))
def test_conduction_delay_decreases_with_myelin(length, m, dm):
    slow = conduction_delay(Axon("a", "b", length, 1.0, m))
    fast = conduction_delay(Axon("a", "b", length, 1.0, min(60.0, m + dm)))
    assert fast <= slow
    if length > 0:
        assert fast < slow


def test_axon_validation():
    with pytest.raises(DomainError):
        Axon("a", "b", 1.0, 1.0, 61.0)
    with pytest.raises(DomainError):
        Axon("a", "b", -1.0)
    with pytest.raises(DomainError):
        BaseOscillator(1000.0)


def test_phase_shift_examples():
    assert phase_shift(5e-3, 100.0) == pytest.approx(180.0)
    assert phase_shift(30.0 / 36000.0, 100.0) == pytest.approx(30.0)
    assert phase_shift(0.0, 100.0) == 0.0
    assert phase_shift(12.5e-3, 100.0) == pytest.approx(90.0)


@given(st.floats(0.0, 1e-3), st.floats(0.0, 1e-3))
def test_phase_shift_linear_before_wrap(a, b):
    f = 100.0  # sums stay below 72 degrees, far from the wrap
    assert phase_shift(a + b, f) == pytest.approx(phase_shift(a, f) + phase_shift(b, f), abs=1e-9)


def test_circular_helpers():
    assert circular_mean([350.0, 10.0]) % 360 == pytest.approx(0.0, abs=1e-9)
    assert circular_spread([350.0, 10.0]) == pytest.approx(20.0)
    assert superposition_proxy([5.0, 5.0, 5.0]) == pytest.approx(3.0)
    assert superposition_proxy([0.0, 180.0]) == pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------------- integrate_step

@settings(max_examples=300)
@given(pot=st.floats(-10, 10), phase=st.floats(0, TWO_PI, exclude_max=True),
       extra=st.floats(0, 1e6), dt=st.floats(1e-6, 1e-2))
def test_saltatoric_reset_dominance(pot, phase, extra, dt):
    n = OscillatorNeuron("n", potential=pot, phase=phase)
    assert integrate_step(n, dt, n.i_th + extra) is SpikeDecision.CURRENT
    assert n.phase == 0.0
    assert n.potential == 0.0


def test_leak_only():
    n = OscillatorNeuron("n", potential=0.5, phase=1.0)
    assert integrate_step(n, 1e-3, 0.0) is SpikeDecision.NONE
    assert n.potential == pytest.approx(0.5 * math.exp(-0.1))
    assert 0.0 <= n.phase < TWO_PI


def test_bad_step():
    with pytest.raises(DomainError):
        integrate_step(OscillatorNeuron("n"), 0.0, 1.0)


def _fine_crossing(rc, v_th, i, t_max, dt):
    """Explicit Euler on dV/dt = -V/rc + i; returns the first crossing time."""
    v, t = 0.0, 0.0
    while t < t_max:
        v += dt * (-v / rc + i)
        t += dt
        if v >= v_th:
            return t
    return math.inf


def test_voltage_path_matches_fine_ode():
    dt, i = 1e-4, 150.0
    n = OscillatorNeuron("n", rc=0.01, v_th=1.0)
    spikes = integrate(n, dt, np.full(400, i))
    first = int(np.flatnonzero(spikes)[0])
    assert spikes[first] == SpikeDecision.VOLTAGE
    t_model = (first + 1) * dt
    t_ref = _fine_crossing(0.01, 1.0, i, 0.04, dt / 1000)
    assert t_ref == pytest.approx(0.01 * math.log(3.0), rel=1e-3)
    assert abs(t_model - t_ref) <= 2 * dt


def test_voltage_spike_keeps_phase():
    n = OscillatorNeuron("n", potential=0.99, phase=1.0)
    assert integrate_step(n, 1e-4, 200.0) is SpikeDecision.VOLTAGE
    assert n.potential == 0.0
    assert n.phase > 1.0


def test_integrate_matches_stepwise():
    rng = np.random.default_rng(5)
    currents = rng.uniform(0, 400, 500)
    currents[::97] = 2e4
    a = OscillatorNeuron("a", phase=0.3)
    b = OscillatorNeuron("b", phase=0.3)
    got = integrate(a, 1e-4, currents)
    want = [int(integrate_step(b, 1e-4, c)) for c in currents]
    assert list(got) == want
    assert a.potential == pytest.approx(b.potential, rel=1e-12, abs=1e-15)
    assert a.phase == pytest.approx(b.phase, rel=1e-12, abs=1e-15)


# ---------------------------------------------------------------- phase lock

def test_phase_lock_zero_delay():
    rep = phase_lock(OscillatorNeuron("n"), BaseOscillator(100.0), Axon.with_delay("base", "n", 0.0))
    assert rep.locked
    assert rep.offset_deg == pytest.approx(0.0, abs=1e-9)


def test_phase_lock_quarter_period():
    rep = phase_lock(OscillatorNeuron("n"), BaseOscillator(100.0),
                     Axon.with_delay("base", "n", 2.5e-3))
    assert rep.offset_deg == pytest.approx(90.0, abs=1e-9)


def test_two_members_lock_to_different_absolute_times():
    base = BaseOscillator(40.0)
    neurons = [OscillatorNeuron("a"), OscillatorNeuron("b")]
    axons = [Axon.with_delay("base", "a", 1e-3), Axon.with_delay("base", "b", 2e-3)]
    reps = phase_lock_many(neurons, axons, base)
    assert reps["a"].offset_deg == pytest.approx(14.4, abs=1e-9)
    assert reps["b"].offset_deg == pytest.approx(28.8, abs=1e-9)
    # cross-check against the trace
    spikes_a = [r.time for r in reps["a"].trace if r.kind == "spike" and r.component_id == "a"]
    assert spikes_a[0] == pytest.approx(1e-3)
    assert spikes_a[1] - spikes_a[0] == pytest.approx(base.period)


def test_phase_lock_stationary():
    rep = phase_lock(OscillatorNeuron("n"), BaseOscillator(37.0),
                     Axon.with_delay("base", "n", 3.3e-3), periods=150)
    assert len(rep.firing_times) == 150
    assert rep.residual <= 1e-9


def test_subthreshold_tick_no_lock():
    n = OscillatorNeuron("n", i_th=1e9, v_th=1e9)
    rep = phase_lock(n, BaseOscillator(10.0), Axon.with_delay("base", "n", 1e-3))
    assert not rep.locked
    assert math.isnan(rep.offset_deg)


# ---------------------------------------------------------------- learning

def _assembly(delays, f=40.0, eps=None):
    members = [OscillatorNeuron(f"m{i}") for i in range(len(delays))]
    asm = Assembly(members, "t", BaseOscillator(f))
    axons = [Axon.with_delay(m.id, "t", d) for m, d in zip(members, delays)]
    return asm, axons


def test_equal_delays_converged_at_start():
    asm, axons = _assembly([1e-3] * 3)
    rep = learn_arrival_phase(asm, axons)
    assert rep.converged and rep.iterations == 0
    assert rep.final_spread < 1e-9


def test_full_gain_one_iteration():
    delays = [1e-3, 1.5e-3, 2e-3]
    asm, axons = _assembly(delays)
    rep = learn_arrival_phase(asm, axons, eta=1.0)
    assert rep.spread_history[0] == pytest.approx(360 * 40 * 1e-3)
    assert rep.converged and rep.iterations == 1
    assert rep.final_spread < 1e-9
    # closed form: offsets equal mean(delay) - delay up to a common shift
    ids = [m.id for m in asm.members]
    want = np.mean(delays) - np.asarray(delays)
    got = np.array([rep.offsets[i] for i in ids])
    np.testing.assert_allclose(got - got.mean(), want - want.mean(), atol=1e-15)


def test_half_gain_geometric_decay():
    asm, axons = _assembly([1e-3, 1.5e-3, 2e-3])
    rep = learn_arrival_phase(asm, axons, eta=0.5, max_iter=60)
    assert rep.converged
    s = np.asarray(rep.spread_history)
    big = s[:-1] > 1e-6
    ratios = s[1:][big] / s[:-1][big]
    assert len(ratios) >= 10
    np.testing.assert_allclose(ratios, 0.5, atol=1e-6)


def test_proxy_nondecreasing():
    asm, axons = _assembly([1e-3, 4e-3, 2.2e-3, 7e-3])
    rep = learn_arrival_phase(asm, axons, eta=0.3, max_iter=80)
    p = np.asarray(rep.proxy_history)
    assert np.all(np.diff(p) >= -1e-12)
    assert p[-1] == pytest.approx(len(asm.members), rel=1e-9)


def test_non_convergence_reported():
    asm, axons = _assembly([1e-3, 3e-3])
    rep = learn_arrival_phase(asm, axons, eta=0.1, max_iter=3)
    assert not rep.converged
    assert rep.iterations == 3


def test_fire_together():
    delays = [1e-3, 1.5e-3, 2e-3]
    asm, axons = _assembly(delays)
    rep = learn_arrival_phase(asm, axons)
    emits = np.array(list(rep.emit_times.values()))
    assert np.ptp(emits) <= max(delays) - min(delays) + 1e-12
    eps = 1e-7
    asm, axons = _assembly([2e-3, 2e-3 + eps / 2, 2e-3 + eps])
    rep = learn_arrival_phase(asm, axons)
    assert np.ptp(list(rep.emit_times.values())) <= eps + 1e-15


def test_assembly_requires_shared_rc():
    with pytest.raises(DomainError):
        Assembly([OscillatorNeuron("a", rc=0.01), OscillatorNeuron("b", rc=0.02)],
                 "t", BaseOscillator(40.0))


def test_learning_validation():
    asm, axons = _assembly([1e-3, 2e-3])
    with pytest.raises(DomainError):
        learn_arrival_phase(asm, axons, eta=0.0)
    with pytest.raises(DomainError):
        learn_arrival_phase(asm, axons[:1])


# ---------------------------------------------------------------- feedback

def _queue(n, items):
    q = FeedbackQueue("rx", n)
    for src, emit, arrive in items:
        q.push(Spike(src, emit, emit), arrive)
    return q


def test_idle_receiver_staleness_is_transport():
    q = _queue(2, [("a", 0.0, 0.3), ("b", 0.5, 1.7)])
    rep = feedback_round(q, [], 1.0)
    assert not rep.dropped
    assert rep.staleness == pytest.approx([0.3, 1.2])


def test_busy_n_plus_one_drops_head():
    q = _queue(2, [("a", 0.0, 0.5), ("b", 1.0, 1.5)])
    rep = feedback_round(q, [0, 1, 2], 1.0)
    assert [d.item.seq for d in rep.dropped] == [0]
    assert rep.dropped[0].waited_cycles == 3
    assert [d.item.seq for d in rep.delivered] == [1]
    assert rep.delivered[0].delivery_time == pytest.approx(3.0)
    assert rep.staleness == pytest.approx([2.0])
    assert [r.kind for r in rep.trace].count("drop") == 1


def test_busy_n_cycles_keeps_everything():
    q = _queue(2, [("a", 0.0, 0.5)])
    rep = feedback_round(q, [0, 1], 1.0)
    assert not rep.dropped
    assert rep.delivered[0].delivery_time == pytest.approx(2.0)


def test_same_arrival_fifo():
    q = _queue(1, [("a", 0.0, 0.5), ("b", 0.1, 0.5), ("c", 0.2, 0.5)])
    rep = feedback_round(q, [0], 1.0)
    assert [d.item.spike.source_id for d in rep.delivered] == ["a", "b", "c"]


def test_arrival_before_emit_rejected():
    with pytest.raises(DomainError):
        _queue(1, [("a", 1.0, 0.5)])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 10), st.floats(0, 5)), min_size=1, max_size=20),
       st.sets(st.integers(0, 20)), st.integers(0, 4))
def test_feedback_conservation(items, busy, n):
    q = _queue(n, [(f"s{i}", e, e + d) for i, (e, d) in enumerate(items)])
    rep = feedback_round(q, busy, 1.0)
    seen = sorted([d.item.seq for d in rep.delivered] + [d.item.seq for d in rep.dropped])
    assert seen == list(range(len(items)))
    for d in rep.delivered:
        assert d.delivery_time >= d.item.arrival_time
        assert d.staleness == d.delivery_time - d.item.spike.biological_timestamp
    for d in rep.dropped:
        assert d.waited_cycles > n
