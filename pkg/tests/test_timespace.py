import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tempologic.timespace import (DomainError, EventTiming, InteractionSpeed,
                                  SpatialPoint, apparent_processing_time,
                                  apparent_processing_times, apparent_time_from_ratio,
                                  light_cone_trace, longest_transmission,
                                  propagation_delay, to_time_vector)

times = st.floats(min_value=0.0, max_value=1e3, allow_nan=False)
coords = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)
points = st.builds(SpatialPoint, coords, coords, coords)


# ---------------------------------------------------------------- examples

def test_time_vector_origin():
    assert to_time_vector((0, 0, 0), 1.0).as_tuple() == (0.0, 0.0, 0.0, 0.0)


def test_time_vector_core_position():
    assert to_time_vector((0.5, 0, 0), 1.0).as_tuple() == (0.5, 0.0, 0.0, 0.0)


def test_time_vector_with_hops():
    # 3/2 + 0.5 on x, 4/2 on y
    assert to_time_vector((3, 4, 0), 2.0, extra_hops=0.5).as_tuple() == (2.0, 2.0, 0.0, 0.0)


def test_time_vector_hop_axis():
    assert to_time_vector((3, 4, 0), 2.0, 0.5, hop_axis="z").as_tuple() == (1.5, 2.0, 0.5, 0.0)


@pytest.mark.parametrize("v", [0.0, -1.0, math.inf, math.nan])
def test_bad_speed(v):
    with pytest.raises(DomainError):
        to_time_vector((1, 0, 0), v)
    with pytest.raises(DomainError):
        InteractionSpeed(v)


def test_non_finite_point():
    with pytest.raises(DomainError):
        SpatialPoint(math.inf, 0, 0)


def test_propagation_zero_distance():
    assert propagation_delay((1, 2, 3), (1, 2, 3), 7.0) == 0.0


def test_propagation_fig3_geometry():
    # hand geometry: legs of 0.5 and 0.5
    assert propagation_delay((-0.5, 0, 0), (0, 0.5, 0), 1.0) == pytest.approx(0.70711, abs=1e-5)


def test_propagation_d_over_v():
    assert propagation_delay((0, 0, 0), (1, 0, 0), 2.0) == 0.5


def test_apparent_r1_more_than_three_times():
    assert apparent_processing_time(1.0, 1.0) == pytest.approx(math.sqrt(10), rel=1e-12)
    assert apparent_processing_time(1.0, 1.0) > 3.0


def test_apparent_limits():
    assert apparent_processing_time(1.0, 0.0) == 2.0
    assert apparent_processing_time(0.0, 1.0) == pytest.approx(math.sqrt(2), rel=1e-15)
    assert apparent_processing_time(0.0, 0.0) == 0.0


def test_apparent_negative_rejected():
    with pytest.raises(DomainError):
        apparent_processing_time(-1.0, 1.0)
    with pytest.raises(DomainError):
        EventTiming(1.0, -0.1)


def test_event_timing_ratio():
    assert EventTiming(2.0, 3.0).ratio == 1.5
    assert EventTiming(0.0, 3.0).ratio is None


def test_longest_transmission():
    assert longest_transmission([0.3, 1.2, 0.7]) == 1.2
    with pytest.raises(DomainError):
        longest_transmission([])


def test_light_cone_unit():
    cone = light_cone_trace(1.0, 1.0, (1, 0, 0), 1.0)
    assert cone.observer_cone_start == 3.0
    assert cone.notice_time == 2.0
    assert cone.apparent_time == pytest.approx(math.sqrt(10))


def test_light_cone_observer_at_origin():
    assert light_cone_trace(1.0, 1.0, (0, 0, 0), 1.0).observer_cone_start == 2.0


def test_light_cone_half_speed():
    cone = light_cone_trace(1.0, 1.0, (1, 0, 0), 0.5)
    assert cone.tt == 2.0
    assert cone.observer_cone_start == 4.0


def test_light_cone_unequal_tp():
    cone = light_cone_trace(1.0, 3.0, (0, 2, 0), 1.0)
    assert cone.observer_cone_start == 6.0
    assert cone.apparent_time == pytest.approx(math.hypot(2.0, 6.0))


def test_vectorized_matches_scalar():
    tp = np.linspace(0, 5, 11)
    tt = np.linspace(0, 3, 11)
    got = apparent_processing_times(tp, tt)
    want = [apparent_processing_time(a, b) for a, b in zip(tp, tt)]
    np.testing.assert_allclose(got, want, rtol=1e-15)


# ---------------------------------------------------------------- properties

@given(times, times)
def test_apparent_lower_bound(tp, tt):
    ta = apparent_processing_time(tp, tt)
    assert ta >= max(2 * tp, math.sqrt(2) * tt) * (1 - 1e-15)


@given(times, times, st.floats(min_value=0.0, max_value=1e3))
def test_apparent_scale_covariance(tp, tt, k):
    lhs = apparent_processing_time(k * tp, k * tt)
    rhs = k * apparent_processing_time(tp, tt)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)


@given(st.floats(min_value=1e-3, max_value=1e3), st.floats(min_value=1e-3, max_value=1e3))
def test_nonlinearity_asymmetry(tp, tt):
    ta = lambda t: apparent_processing_time(tp, t)  # noqa: E731
    assert ta(2 * tt) - ta(tt) > ta(tt) - ta(tt / 2)


@given(st.floats(min_value=1e-6, max_value=1e3), times)
def test_ratio_form_agrees(tp, tt):
    assert apparent_time_from_ratio(tp, tt / tp) == pytest.approx(
        apparent_processing_time(tp, tt), rel=1e-12)


@given(times, times, times)
def test_apparent_monotone(tp, tt, d):
    base = apparent_processing_time(tp, tt)
    assert apparent_processing_time(tp + d, tt) >= base
    assert apparent_processing_time(tp, tt + d) >= base


@given(points, points, points, st.floats(min_value=1e-3, max_value=1e3))
def test_propagation_is_metric(a, b, c, v):
    ab = propagation_delay(a, b, v)
    assert ab == propagation_delay(b, a, v)
    assert ab >= 0
    assert propagation_delay(a, c, v) <= ab + propagation_delay(b, c, v) + 1e-9
    assert propagation_delay(a, a, v) == 0.0
    if a != b:
        assert ab > 0 or a.distance(b) == 0
