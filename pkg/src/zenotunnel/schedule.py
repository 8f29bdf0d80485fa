"""Piecewise-constant acceleration schedules and the finite-response filter.

All quantities here are SI (m/s^2, s, m/s); conversion to recoil units
happens when a schedule is handed to the dynamics.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidParameterError, ScheduleError

DEFAULT_V0_VREC = 35.0
DEFAULT_VFINAL_VREC = 75.0


class Role(str, enum.Enum):
    TRANSPORT = "transport"
    TUNNEL = "tunnel"
    INTERRUPTION = "interruption"


@dataclass(frozen=True)
class Segment:
    a: float
    duration: float
    role: Role

    def __post_init__(self):
        if not self.duration >= 0:
            raise ScheduleError(f"segment duration must be >= 0, got {self.duration!r}")
        object.__setattr__(self, "role", Role(self.role))

    @property
    def velocity_gain(self) -> float:
        return self.a * self.duration


@dataclass(frozen=True)
class Schedule:
    segments: tuple
    a_tunnel: float
    a_trans: float
    a_interr: float

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        for seg in self.segments:
            if seg.role is Role.TUNNEL and seg.a != self.a_tunnel:
                raise ScheduleError("tunnel segments must run at a_tunnel")

    @property
    def total_tunnel_time(self) -> float:
        return math.fsum(s.duration for s in self.segments if s.role is Role.TUNNEL)

    @property
    def duration(self) -> float:
        return math.fsum(s.duration for s in self.segments)

    @property
    def end_velocity(self) -> float:
        return math.fsum(s.velocity_gain for s in self.segments)

    def boundaries(self) -> np.ndarray:
        """Segment start times followed by the end time."""
        return np.concatenate([[0.0], np.cumsum([s.duration for s in self.segments])])

    def merged(self) -> "Schedule":
        """Drop empty segments and fuse neighbours with equal role and acceleration."""
        out: list[Segment] = []
        for seg in self.segments:
            if seg.duration == 0:
                continue
            if out and out[-1].role is seg.role and out[-1].a == seg.a:
                prev = out.pop()
                seg = Segment(seg.a, prev.duration + seg.duration, seg.role)
            out.append(seg)
        return Schedule(tuple(out), self.a_tunnel, self.a_trans, self.a_interr)

    def then(self, other: "Schedule") -> "Schedule":
        return Schedule(self.segments + other.segments, self.a_tunnel, self.a_trans,
                        self.a_interr)

    def to_table(self) -> str:
        """Plain-text audit table: one ``t_start a role`` row per segment."""
        lines = ["# t_start_s a_m_s2 role"]
        starts = self.boundaries()
        for t0, seg in zip(starts, self.segments):
            lines.append(f"{float(t0)!r} {float(seg.a)!r} {seg.role.value}")
        lines.append(f"{float(starts[-1])!r} 0.0 end")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_table(cls, text: str, a_tunnel: float, a_trans: float,
                   a_interr: float) -> "Schedule":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not rows or rows[-1][2] != "end":
            raise ScheduleError("schedule table must close with an 'end' row")
        segs = []
        for (t0, a, role), (t1, _, _) in zip(rows[:-1], rows[1:]):
            segs.append(Segment(float(a), float(t1) - float(t0), Role(role)))
        return cls(tuple(segs), a_tunnel, a_trans, a_interr)


def _check_positive(**kw):
    for name, val in kw.items():
        if not (val > 0 and math.isfinite(val)):
            raise InvalidParameterError(f"{name} must be positive, got {val!r}")


def _velocities(params, v0, v_final):
    if v0 is None:
        v0 = DEFAULT_V0_VREC * params.v_rec
    if v_final is None:
        v_final = DEFAULT_VFINAL_VREC * params.v_rec
    _check_positive(v0=v0, v_final=v_final)
    if not v_final > v0:
        raise InvalidParameterError("v_final must exceed v0")
    return v0, v_final


def _closing(remaining, a_trans, scale):
    if remaining < -1e-12 * scale:
        raise ScheduleError(
            f"tunnelling overshoots the final velocity by {-remaining:.3e} m/s")
    return Segment(a_trans, max(remaining, 0.0) / a_trans, Role.TRANSPORT)


def uninterrupted(params, a_trans: float, a_tunnel: float, t_tunnel: float,
                  v0: float | None = None, v_final: float | None = None) -> Schedule:
    """Transport to ``v0``, tunnel for ``t_tunnel``, transport to ``v_final``."""
    _check_positive(a_trans=a_trans, a_tunnel=a_tunnel)
    if not t_tunnel >= 0:
        raise InvalidParameterError(f"t_tunnel must be >= 0, got {t_tunnel!r}")
    v0, v_final = _velocities(params, v0, v_final)
    segs = [Segment(a_trans, v0 / a_trans, Role.TRANSPORT)]
    if t_tunnel > 0:
        segs.append(Segment(a_tunnel, t_tunnel, Role.TUNNEL))
    segs.append(_closing(v_final - v0 - a_tunnel * t_tunnel, a_trans, v_final))
    return Schedule(tuple(segs), a_tunnel, a_trans, a_trans)


def interrupted(params, a_trans: float, a_tunnel: float, a_interr: float,
                t_segment: float, t_interr: float, n_cycles: int,
                v0: float | None = None, v_final: float | None = None) -> Schedule:
    """Tunnel segments separated by interruptions at ``a_interr``.

    The interruption after the last tunnel segment is replaced by the
    closing transport.
    """
    _check_positive(a_trans=a_trans, a_tunnel=a_tunnel, a_interr=a_interr)
    if int(n_cycles) != n_cycles or n_cycles < 1:
        raise InvalidParameterError(f"n_cycles must be an integer >= 1, got {n_cycles!r}")
    if not (t_segment >= 0 and t_interr >= 0):
        raise InvalidParameterError("segment and interruption durations must be >= 0")
    v0, v_final = _velocities(params, v0, v_final)
    n_cycles = int(n_cycles)
    segs = [Segment(a_trans, v0 / a_trans, Role.TRANSPORT)]
    for k in range(n_cycles):
        segs.append(Segment(a_tunnel, t_segment, Role.TUNNEL))
        if k < n_cycles - 1:
            segs.append(Segment(a_interr, t_interr, Role.INTERRUPTION))
    gained = math.fsum(s.velocity_gain for s in segs)
    segs.append(_closing(v_final - gained, a_trans, v_final))
    return Schedule(tuple(segs), a_tunnel, a_trans, a_interr)


def concatenate(schedules: Sequence[Schedule]) -> Schedule:
    first = schedules[0]
    segs = tuple(s for sch in schedules for s in sch.segments)
    return Schedule(segs, first.a_tunnel, first.a_trans, first.a_interr)


@dataclass(frozen=True)
class ResponseProfile:
    """First-order low-pass response of the lattice to a schedule.

    The filtered acceleration obeys ``tau * da_f/dt = a_target(t) - a_f`` with
    ``a_f(0) = 0``.  It is known in closed form on every target segment, so
    sampling, cell averages and threshold crossings are all exact.
    """

    schedule: Schedule
    time_constant: float
    times: np.ndarray
    values: np.ndarray

    @property
    def a_tunnel(self) -> float:
        return self.schedule.a_tunnel

    def _starts(self):
        """(t_start, duration, target, a_f at start) per target segment."""
        out = []
        t, af = 0.0, 0.0
        tau = self.time_constant
        for seg in self.schedule.segments:
            out.append((t, seg.duration, seg.a, af))
            if tau > 0:
                af = seg.a + (af - seg.a) * math.exp(-seg.duration / tau)
            else:
                af = seg.a
            t += seg.duration
        return out

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        tau = self.time_constant
        for t0, dur, target, af0 in self._starts():
            sel = (t >= t0) & (t < t0 + dur)
            if tau > 0:
                out[sel] = target + (af0 - target) * np.exp(-(t[sel] - t0) / tau)
            else:
                out[sel] = target
        end = self.schedule.duration
        if self.schedule.segments:
            last_t0, dur, target, af0 = self._starts()[-1]
            sel = t >= end
            out[sel] = (target + (af0 - target) * math.exp(-dur / tau)) if tau > 0 else target
        return out

    def integral(self) -> float:
        """Velocity gained over the profile, the integral of a_f."""
        total = 0.0
        tau = self.time_constant
        for _, dur, target, af0 in self._starts():
            total += target * dur
            if tau > 0:
                total += (af0 - target) * tau * (1.0 - math.exp(-dur / tau))
        return total

    def cells(self, settle: float = 25.0, per_tau: int = 20):
        """Piecewise-constant (acceleration, duration) cells for evolution.

        Each cell carries the exact mean of a_f over its span, so the
        velocity gain is reproduced exactly.  Fine cells of ``tau/per_tau``
        cover the first ``settle`` time constants after each switch; the
        remaining part of the segment is one cell.
        """
        tau = self.time_constant
        out = []
        for _, dur, target, af0 in self._starts():
            if dur == 0:
                continue
            if tau == 0:
                out.append((target, dur))
                continue
            fine = min(dur, settle * tau)
            n = max(1, math.ceil(fine / (tau / per_tau)))
            edges = list(np.linspace(0.0, fine, n + 1))
            if fine < dur:
                edges.append(dur)
            for u0, u1 in zip(edges[:-1], edges[1:]):
                h = u1 - u0
                mean = target + (af0 - target) * tau * (
                    math.exp(-u0 / tau) - math.exp(-u1 / tau)) / h
                out.append((mean, h))
        return out


def apply_response_filter(schedule: Schedule, time_constant: float,
                          sample_step: float | None = None) -> ResponseProfile:
    """Filter ``schedule`` through a single-pole response and sample it.

    ``time_constant = 0`` gives the ideal steps.  Samples are taken on a
    uniform grid of spacing ``sample_step`` (default ``time_constant/10``,
    or 1/1000 of the schedule length for an ideal response).
    """
    if not time_constant >= 0:
        raise InvalidParameterError(f"time_constant must be >= 0, got {time_constant!r}")
    total = schedule.duration
    if sample_step is None:
        sample_step = time_constant / 10.0 if time_constant > 0 else total / 1000.0
    if time_constant > 0 and sample_step > time_constant / 10.0 * (1 + 1e-12):
        raise InvalidParameterError("sample_step must not exceed time_constant/10")
    if not sample_step > 0:
        raise InvalidParameterError("sample_step must be positive")
    n = max(1, math.ceil(total / sample_step - 1e-9))
    times = np.arange(n + 1) * sample_step
    profile = ResponseProfile(schedule, float(time_constant), times, np.empty(0))
    object.__setattr__(profile, "values", profile(times))
    return profile


def effective_tunnel_time(profile: ResponseProfile, threshold: float) -> float:
    """Total time during which the filtered acceleration is >= threshold * a_tunnel."""
    if not 0 < threshold < 1:
        raise InvalidParameterError(f"threshold must lie in (0, 1), got {threshold!r}")
    level = threshold * profile.a_tunnel
    tau = profile.time_constant
    total = 0.0
    for _, dur, target, af0 in profile._starts():
        if dur == 0:
            continue
        if tau == 0 or af0 == target:
            total += dur if target >= level else 0.0
            continue
        # a_f(u) = target + (af0 - target) exp(-u/tau) is monotone in u
        ratio = (level - target) / (af0 - target)
        cross = -tau * math.log(ratio) if ratio > 0 else math.inf
        if af0 < target:   # rising: above level once u >= cross
            if af0 >= level:
                total += dur
            elif target >= level:
                total += max(0.0, dur - cross)
        else:              # falling: above level while u < cross
            if target >= level:
                total += dur
            elif af0 >= level:
                total += min(dur, cross)
    return total
