import math

import pytest
from hypothesis import given, strategies as st

from tempologic.perfmodel import (FUGAKU, SUMMIT, BenchmarkObservation, WorkloadProfile,
                                  blocking_for_efficiency, context_switch_penalty,
                                  context_switch_timing, efficiency, efficiency_sweep,
                                  first_reaching, fit_housekeeping, operand_speedup,
                                  transfer_fraction_for_ratio)
from tempologic.timespace import DomainError


def bisect(f, lo, hi, tol=1e-15):
    """Plain bisection, independent of the closed-form inverses."""
    flo = f(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def test_no_housekeeping_full_speedup():
    assert operand_speedup(0.0, 4.0) == 4.0
    assert operand_speedup(1e9, 4.0) == pytest.approx(1.0)


@pytest.mark.parametrize("obs, want", [(SUMMIT, 0.12313), (FUGAKU, 0.05992)])
def test_fitted_housekeeping(obs, want):
    fp0 = fit_housekeeping(obs)
    assert fp0 == pytest.approx(want, abs=1e-5)
    oracle = bisect(lambda f: operand_speedup(f, obs.k) - obs.speedup, 0.0, 10.0)
    assert fp0 == pytest.approx(oracle, abs=1e-12)
    assert operand_speedup(fp0, obs.k) == pytest.approx(obs.speedup, rel=1e-10)


def test_rounded_values_reproduce_speedups():
    assert operand_speedup(0.12313, 4) == pytest.approx(3.01, abs=1e-4)
    assert operand_speedup(0.05992, 4) == pytest.approx(3.42, abs=1e-4)


def test_infeasible_observations():
    with pytest.raises(DomainError):
        BenchmarkObservation("x", 1.0, 4.0)
    with pytest.raises(DomainError):
        BenchmarkObservation("x", 4.5, 4.0)
    with pytest.raises(DomainError):
        fit_housekeeping(BenchmarkObservation("x", 4.0, 4.0))


@given(st.floats(0.0, 100.0), st.floats(1.0, 64.0))
def test_fit_round_trip(fp0, k):
    s = operand_speedup(fp0, k)
    if s <= 1.0 + 1e-12 or s >= k:
        return
    assert fit_housekeeping(BenchmarkObservation("m", s, k)) == pytest.approx(fp0, rel=1e-6, abs=1e-9)


@given(st.floats(0.0, 50.0), st.floats(0.0, 50.0), st.floats(1.0, 32.0))
def test_speedup_decreasing_in_fp0(a, b, k):
    lo, hi = sorted((a, b))
    assert operand_speedup(lo, k) >= operand_speedup(hi, k)


@given(st.floats(0.0, 1e3), st.floats(0.0, 1e3))
def test_efficiency_bounded_and_monotone(fp0, tf):
    e = efficiency(WorkloadProfile("w", fp0, tf))
    assert 0 < e <= 0.5
    assert efficiency(WorkloadProfile("w", fp0, tf + 1.0)) < e


def test_efficiency_baseline_half():
    assert efficiency(WorkloadProfile("w")) == 0.5


@given(st.floats(1e-4, 0.5))
def test_blocking_inverse(target):
    r = blocking_for_efficiency(target)
    assert efficiency(WorkloadProfile("w", 0.0, r)) == pytest.approx(target, rel=1e-10)


@pytest.mark.parametrize("ratio", [10.0, 100.0, 250.0, 1000.0])
def test_ratio_inversion(ratio):
    base = WorkloadProfile("base", fp0=0.06)
    tf = transfer_fraction_for_ratio(ratio, base)
    got = efficiency(base) / efficiency(WorkloadProfile("x", 0.06, tf))
    assert got == pytest.approx(ratio, rel=1e-10)
    oracle = bisect(lambda t: efficiency(base) / efficiency(WorkloadProfile("x", 0.06, t)) - ratio,
                    0.0, 1e6, tol=1e-10)
    assert tf == pytest.approx(oracle, rel=1e-9)


def test_sweep_and_threshold():
    rows = efficiency_sweep(range(0, 2000), fp0=0.0)
    assert rows[0].ratio == 1.0
    hit = first_reaching(rows, 1000)
    assert hit is not None and hit.transfer_fraction == 1414
    assert first_reaching(rows, 1e9) is None


def test_context_switch():
    assert context_switch_penalty(10_000) == 1.0
    assert context_switch_penalty(100) == 100.0
    t = context_switch_timing(2.0, 1000)
    assert t.tt == 20.0
    with pytest.raises(DomainError):
        context_switch_penalty(0)
    assert math.isfinite(t.apparent_processing_time())
