import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zenotunnel.errors import InvalidParameterError, ScheduleError
from zenotunnel.schedule import (Role, Schedule, Segment, apply_response_filter, concatenate,
                                 effective_tunnel_time, interrupted, uninterrupted)


def test_uninterrupted_layout(p91):
    s = uninterrupted(p91, 2000.0, 15000.0, 4e-6)
    assert [seg.role for seg in s.segments] == [Role.TRANSPORT, Role.TUNNEL, Role.TRANSPORT]
    assert s.segments[0].duration * 2000.0 == pytest.approx(35 * p91.v_rec)
    assert s.end_velocity == pytest.approx(75 * p91.v_rec, rel=1e-12)
    assert s.total_tunnel_time == pytest.approx(4e-6)


def test_zero_tunnel_time_has_no_tunnel_segment(p91):
    s = uninterrupted(p91, 2000.0, 15000.0, 0.0)
    assert all(seg.role is Role.TRANSPORT for seg in s.segments)
    assert s.total_tunnel_time == 0.0


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 12), t_seg=st.floats(0.2e-6, 3e-6), t_int=st.floats(0, 60e-6))
def test_interrupted_invariants(p91, n, t_seg, t_int):
    v_final = 75 * p91.v_rec + n * 2000.0 * t_int + n * 15000.0 * t_seg
    s = interrupted(p91, 2000.0, 15000.0, 2000.0, t_seg, t_int, n, v_final=v_final)
    assert s.total_tunnel_time == pytest.approx(n * t_seg, rel=1e-12)
    assert s.end_velocity == pytest.approx(v_final, rel=1e-12)
    assert sum(seg.role is Role.TUNNEL for seg in s.segments) == n
    assert sum(seg.role is Role.INTERRUPTION for seg in s.segments) == n - 1
    assert s.end_velocity == pytest.approx(math.fsum(g.a * g.duration for g in s.segments))


def test_single_cycle_equals_uninterrupted(p91):
    a = interrupted(p91, 2000.0, 15000.0, 2000.0, 1e-6, 50e-6, 1)
    b = uninterrupted(p91, 2000.0, 15000.0, 1e-6)
    assert a.segments == b.segments


def test_overshoot_rejected(p91):
    with pytest.raises(ScheduleError):
        uninterrupted(p91, 2000.0, 15000.0, 1e-3)


@pytest.mark.parametrize("kw", [dict(a_trans=0.0), dict(a_tunnel=-1.0), dict(t_tunnel=-1e-6)])
def test_invalid_inputs(p91, kw):
    args = dict(a_trans=2000.0, a_tunnel=15000.0, t_tunnel=1e-6) | kw
    with pytest.raises(InvalidParameterError):
        uninterrupted(p91, **args)


def test_invalid_cycles(p91):
    with pytest.raises(InvalidParameterError):
        interrupted(p91, 2000.0, 15000.0, 2000.0, 1e-6, 1e-6, 0)


def test_negative_segment():
    with pytest.raises(ScheduleError):
        Segment(1.0, -1.0, Role.TUNNEL)


def test_table_round_trip(p91):
    s = interrupted(p91, 2000.0, 15000.0, 2000.0, 1e-6, 50e-6, 4, v_final=100 * p91.v_rec)
    back = Schedule.from_table(s.to_table(), s.a_tunnel, s.a_trans, s.a_interr)
    assert [g.role for g in back.segments] == [g.role for g in s.segments]
    assert np.allclose([g.duration for g in back.segments], [g.duration for g in s.segments],
                       rtol=1e-9, atol=1e-18)
    with pytest.raises(ScheduleError):
        Schedule.from_table("0.0 1.0 tunnel\n", 1.0, 1.0, 1.0)


def test_merged_and_concatenate(p91):
    a = uninterrupted(p91, 2000.0, 15000.0, 1e-6)
    both = concatenate([a, a])
    assert len(both.segments) == 6
    assert both.end_velocity == pytest.approx(2 * a.end_velocity)
    fused = Schedule((Segment(1.0, 1.0, Role.TUNNEL), Segment(1.0, 2.0, Role.TUNNEL),
                      Segment(5.0, 0.0, Role.TRANSPORT)), 1.0, 5.0, 5.0).merged()
    assert fused.segments == (Segment(1.0, 3.0, Role.TUNNEL),)


def test_tunnel_acceleration_enforced():
    with pytest.raises(ScheduleError):
        Schedule((Segment(2.0, 1.0, Role.TUNNEL),), 1.0, 1.0, 1.0)


def test_boundaries(p91):
    s = uninterrupted(p91, 2000.0, 15000.0, 2e-6)
    b = s.boundaries()
    assert b[0] == 0.0 and b[-1] == pytest.approx(s.duration)
    assert np.all(np.diff(b) >= 0)


# --- finite response -------------------------------------------------------

def _step(a0=1000.0, length=1e-3):
    return Schedule((Segment(a0, length, Role.TUNNEL),), a0, a0, a0)


def test_filter_one_time_constant():
    tau = 10e-6
    prof = apply_response_filter(_step(), tau)
    assert float(prof(np.array([tau]))[0]) == pytest.approx(1000.0 * (1 - math.exp(-1)),
                                                            rel=1e-12)


def test_filter_zero_tau_is_identity(p91):
    s = uninterrupted(p91, 2000.0, 15000.0, 3e-6)
    prof = apply_response_filter(s, 0.0)
    mids = 0.5 * (s.boundaries()[:-1] + s.boundaries()[1:])
    assert np.allclose(prof(mids), [g.a for g in s.segments])
    assert prof.integral() == pytest.approx(s.end_velocity, rel=1e-12)


def test_filter_preserves_velocity_after_settling(p91):
    s = uninterrupted(p91, 2000.0, 15000.0, 3e-6)
    tail = Schedule(s.segments + (Segment(0.0, 1e-3, Role.TRANSPORT),), s.a_tunnel, s.a_trans,
                    s.a_interr)
    prof = apply_response_filter(tail, 2e-6)
    assert prof.integral() == pytest.approx(s.end_velocity, rel=1e-3)
    # quadrature of the sampled profile agrees with the closed form
    assert np.trapezoid(prof.values, prof.times) == pytest.approx(prof.integral(), rel=1e-3)


def test_filter_cells_exact_gain(p91):
    s = uninterrupted(p91, 2000.0, 15000.0, 3e-6)
    prof = apply_response_filter(s, 1e-6)
    cells = prof.cells()
    assert math.fsum(a * d for a, d in cells) == pytest.approx(prof.integral(), rel=1e-12)
    assert math.fsum(d for _, d in cells) == pytest.approx(s.duration, rel=1e-12)


def test_filter_sample_step_limit():
    with pytest.raises(InvalidParameterError):
        apply_response_filter(_step(), 1e-6, sample_step=1e-6)
    with pytest.raises(InvalidParameterError):
        apply_response_filter(_step(), -1.0)


def test_effective_tunnel_time():
    a0, tau, T = 15000.0, 1e-6, 10e-6
    s = Schedule((Segment(2000.0, 5e-6, Role.TRANSPORT), Segment(a0, T, Role.TUNNEL),
                  Segment(2000.0, 50e-6, Role.TRANSPORT)), a0, 2000.0, 2000.0)
    assert effective_tunnel_time(apply_response_filter(s, 0.0), 0.9) == pytest.approx(T)
    # rising edge from a_f = 2000 (settled), then falling edge after T
    rise = -tau * math.log((0.9 * a0 - a0) / (2000.0 * (1 - math.exp(-5)) - a0))
    af_end = a0 + (2000.0 * (1 - math.exp(-5)) - a0) * math.exp(-T / tau)
    fall = -tau * math.log((0.9 * a0 - 2000.0) / (af_end - 2000.0))
    got = effective_tunnel_time(apply_response_filter(s, tau), 0.9)
    assert got == pytest.approx(T - rise + fall, rel=1e-9)
    with pytest.raises(InvalidParameterError):
        effective_tunnel_time(apply_response_filter(s, tau), 1.0)
