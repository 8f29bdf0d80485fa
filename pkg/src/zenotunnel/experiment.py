"""Ensemble driver producing survival curves for families of schedules.

A *family* maps a total tunnelling time to a complete acceleration schedule.
All members of the families used here share their history up to the end of
their last tunnel segment (each member's body is a prefix of the next one),
and all of them close with the same transport to the same final velocity.
The driver exploits both facts: bodies are evolved once, incrementally, and
the closing transport is applied in the Heisenberg picture by propagating
the detection projector backwards from the final velocity once.  Families
that do not have this structure are evolved member by member.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import bands
from .dynamics import EvolutionConfig, LadderState, evolve_segment, survival_observable
from .errors import InvalidParameterError, ScheduleError
from .schedule import (DEFAULT_V0_VREC, DEFAULT_VFINAL_VREC, Role, Schedule,
                       apply_response_filter, effective_tunnel_time, interrupted,
                       uninterrupted)

SHALLOW_DEPTH = 0.5          # E_rec; below this the lowest band is barely bound
DEFAULT_WINDOW = 3.0         # hbar k_L; covers the 0 and ±1 diffraction orders
EFFECTIVE_THRESHOLD = 0.9
_TIME_TOL = 1e-9             # relative tolerance when matching schedule pieces


class Sampling(str, enum.Enum):
    UNIFORM = "uniform"
    GAUSSIAN = "gaussian"


class Observable(str, enum.Enum):
    BAND = "band"            # population of the lowest band
    DETECTION = "detection"  # momentum-window classification


@dataclass(frozen=True)
class Ensemble:
    q: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if q.size == 0:
            raise InvalidParameterError("ensemble is empty")
        if w.shape != q.shape or np.any(w < 0) or not w.sum() > 0:
            raise InvalidParameterError("ensemble weights must be non-negative and match q")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "weights", w / w.sum())

    @property
    def count(self) -> int:
        return self.q.size

    def average(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))


def make_ensemble(count: int = 64, sampling: Sampling | str = Sampling.UNIFORM,
                  sigma_v_vrec: float = 6.0) -> Ensemble:
    """Quasimomenta on a midpoint grid over the first zone.

    With Gaussian sampling each point is weighted by the initial velocity
    distribution of width ``sigma_v_vrec`` folded into the zone.
    """
    if int(count) != count or count < 1:
        raise InvalidParameterError(f"ensemble count must be a positive integer, got {count!r}")
    count = int(count)
    q = -1.0 + (2.0 * np.arange(count) + 1.0) / count
    sampling = Sampling(sampling)
    if sampling is Sampling.UNIFORM:
        return Ensemble(q, np.full(count, 1.0 / count))
    if not sigma_v_vrec > 0:
        raise InvalidParameterError("sigma_v_vrec must be positive")
    images = np.arange(-math.ceil(8 * sigma_v_vrec), math.ceil(8 * sigma_v_vrec) + 1)
    w = np.exp(-((q[:, None] + 2.0 * images) ** 2) / (2.0 * sigma_v_vrec**2)).sum(axis=1)
    return Ensemble(q, w)


@dataclass
class SurvivalCurve:
    t_tunnel: np.ndarray
    survival: np.ndarray
    raw_survival: np.ndarray
    normalization: float
    label: str
    n_ensemble: int
    t_effective: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t_tunnel = np.asarray(self.t_tunnel, dtype=float)
        self.survival = np.asarray(self.survival, dtype=float)
        self.raw_survival = np.asarray(self.raw_survival, dtype=float)

    def __len__(self):
        return self.t_tunnel.size

    def at(self, t: float) -> float:
        idx = np.flatnonzero(np.isclose(self.t_tunnel, t, rtol=0, atol=1e-12))
        if idx.size == 0:
            raise KeyError(f"no sample at t_tunnel = {t!r}")
        return float(self.survival[idx[0]])


@dataclass(frozen=True)
class SequencePlan:
    """The fixed parameters of an experimental sequence (SI units).

    ``a_trans`` defaults to ``a_interr``, and ``v0``/``v_final`` to 35 and
    75 recoil velocities.
    """

    params: object
    a_tunnel: float
    a_interr: float
    t_segment: float
    a_trans: float | None = None
    v0: float | None = None
    v_final: float | None = None

    def __post_init__(self):
        if self.a_trans is None:
            object.__setattr__(self, "a_trans", self.a_interr)
        if self.v0 is None:
            object.__setattr__(self, "v0", DEFAULT_V0_VREC * self.params.v_rec)
        if self.v_final is None:
            object.__setattr__(self, "v_final", DEFAULT_VFINAL_VREC * self.params.v_rec)

    def uninterrupted(self, t_tunnel: float) -> Schedule:
        return uninterrupted(self.params, self.a_trans, self.a_tunnel, t_tunnel,
                             self.v0, self.v_final)

    def interrupted(self, t_interr: float,
                    t_max: float | None = None) -> Callable[[float], Schedule]:
        """Family of interrupted schedules indexed by total tunnelling time.

        Interruptions add velocity, so the final velocity is raised by the
        gain of all interruptions of the longest member (``t_max``); every
        member then closes with at least the separation of the
        uninterrupted sequence, and all members end at the same velocity.
        """
        v_final = self.v_final
        if t_max is not None and t_max > 0:
            n_max = round(t_max / self.t_segment)
            v_final = self.v_final + max(n_max - 1, 0) * self.a_interr * t_interr

        def family(t_tunnel: float) -> Schedule:
            if t_tunnel == 0:
                return uninterrupted(self.params, self.a_trans, self.a_tunnel, 0.0,
                                     self.v0, v_final)
            n = round(t_tunnel / self.t_segment)
            if n < 1 or abs(n * self.t_segment - t_tunnel) > _TIME_TOL * self.t_segment:
                raise ScheduleError(
                    f"t_tunnel = {t_tunnel!r} is not a multiple of the {self.t_segment!r} s segment")
            return interrupted(self.params, self.a_trans, self.a_tunnel, self.a_interr,
                               self.t_segment, t_interr, n, self.v0, v_final)
        return family


def prepare_initial(q, params, N: int) -> LadderState:
    """Lowest-band Bloch state(s) at quasimomentum ``q``, drift and time zero."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    return LadderState(q, bands.lowest_band_vectors(q, params.depth_dimless, N))


def _cells(schedule: Schedule, params, tau: float = 0.0):
    """Schedule as (acceleration, duration) pairs in recoil units."""
    u = params.units
    if tau > 0:
        raw = apply_response_filter(schedule, tau).cells()
    else:
        # keep the closing transport separate so family members share bodies
        body = Schedule(schedule.segments[:-1], schedule.a_tunnel, schedule.a_trans,
                        schedule.a_interr).merged()
        last = schedule.segments[-1]
        raw = [(s.a, s.duration) for s in body.segments] + [(last.a, last.duration)]
    return [(u.to_dimless(a, "acceleration"), u.to_dimless(d, "time")) for a, d in raw]


def _warn_shallow(params):
    if params.depth_dimless < SHALLOW_DEPTH:
        warnings.warn(f"lattice depth {params.depth_dimless:.3g} E_rec binds no trapped band; "
                      "survival values are not meaningful", RuntimeWarning, stacklevel=3)


def _window_vectors(state: LadderState, halfwidth: float):
    """Plane waves inside the detection window, shape (M, P, D)."""
    n = bands.ladder(state.N)
    inside = np.abs(state.q[:, None] + 2.0 * n) <= halfwidth
    P = max(1, int(inside.sum(axis=1).max()))
    vecs = np.zeros((state.count, P, n.size))
    for m in range(state.count):
        for p, k in enumerate(np.flatnonzero(inside[m])):
            vecs[m, p, k] = 1.0
    return vecs


def detection_classify(state: LadderState, params, window_halfwidth: float = DEFAULT_WINDOW):
    """Trapped and tunnelled fractions from the momentum distribution.

    Ladder momenta within ``window_halfwidth`` (hbar k_L) of the lattice
    frame count as trapped; atoms that escaped the ladder window count as
    tunnelled unless the window is unbounded.  Returns arrays ``(trapped, tunneled)`` per row.
    """
    n = bands.ladder(state.N)
    inside = np.abs(state.q[:, None] + 2.0 * n) <= window_halfwidth
    pops = np.abs(state.amplitudes) ** 2
    total = pops.sum(axis=1) + state.escaped
    trapped = np.where(inside, pops, 0.0).sum(axis=1)
    if math.isinf(window_halfwidth):
        trapped = trapped + state.escaped   # an unbounded window holds everything
    trapped = trapped / total
    return trapped, 1.0 - trapped


def _observe(state, params, observable, halfwidth):
    if Observable(observable) is Observable.BAND:
        return survival_observable(state, params)
    return detection_classify(state, params, halfwidth)[0]


@dataclass
class ScheduleRun:
    times: np.ndarray        # s, checkpoint times
    roles: list
    survival: np.ndarray     # (checkpoints, M)
    final_state: LadderState


def run_schedule(q, schedule: Schedule, config: EvolutionConfig, params, N: int, *,
                 threads: int = 1, observable: Observable | str = Observable.BAND,
                 window_halfwidth: float = DEFAULT_WINDOW) -> ScheduleRun:
    """Evolve the lowest-band state at ``q`` through ``schedule``.

    Survival is recorded after every tunnel segment and at the end of the
    schedule.  ``q`` may be an array; rows are independent.
    """
    _warn_shallow(params)
    u = params.units
    state = prepare_initial(q, params, N)
    times, roles, values = [], [], []
    t = 0.0
    segs = [s for s in schedule.segments if s.duration > 0]
    for i, seg in enumerate(segs):
        state = evolve_segment(state, u.to_dimless(seg.a, "acceleration"),
                               u.to_dimless(seg.duration, "time"), config, params,
                               threads=threads)
        t += seg.duration
        if seg.role is Role.TUNNEL or i == len(segs) - 1:
            times.append(t)
            roles.append("end" if i == len(segs) - 1 else seg.role.value)
            values.append(_observe(state, params, observable, window_halfwidth))
    if not segs:
        times, roles = [0.0], ["end"]
        values.append(_observe(state, params, observable, window_halfwidth))
    return ScheduleRun(np.array(times), roles, np.array(values), state)


def _is_prefix(short, long):
    """True if the piecewise profile ``short`` is an initial part of ``long``."""
    if len(short) > len(long):
        return False
    for i, (a, d) in enumerate(short):
        la, ld = long[i]
        if a != la:
            return False
        tol = _TIME_TOL * max(d, ld, 1e-300)
        if i < len(short) - 1 and abs(d - ld) > tol:
            return False
        if i == len(short) - 1 and d > ld + tol:
            return False
    return True


def _pieces_between(body, start_idx, start_off):
    """Yield (a, duration) pieces of ``body`` after position (index, offset)."""
    for i in range(start_idx, len(body)):
        a, d = body[i]
        off = start_off if i == start_idx else 0.0
        rest = d - off
        if rest > _TIME_TOL * d:
            yield i, a, rest


class _FamilyRunner:
    def __init__(self, ensemble, params, config, N, threads, observable, halfwidth, tau):
        self.ensemble = ensemble
        self.params = params
        self.config = config
        self.N = N
        self.threads = threads
        self.observable = Observable(observable)
        self.halfwidth = halfwidth
        self.tau = tau

    def evolve(self, state, a, d):
        return evolve_segment(state, a, d, self.config, self.params, threads=self.threads)

    def run(self, schedules: Sequence[Schedule]) -> np.ndarray:
        """Final ensemble-averaged survival for each schedule."""
        cells = [_cells(s, self.params, self.tau) for s in schedules]
        if self.tau == 0 and all(len(c) >= 2 for c in cells):
            bodies = [c[:-1] for c in cells]
            order = sorted(range(len(cells)), key=lambda k: sum(d for _, d in bodies[k]))
            chain = all(_is_prefix(bodies[i], bodies[j]) for i, j in zip(order, order[1:]))
            if chain:
                return self._run_chain(cells, order)
        return np.array([self._run_one(c) for c in cells])

    def _run_one(self, cells):
        state = prepare_initial(self.ensemble.q, self.params, self.N)
        for a, d in cells:
            state = self.evolve(state, a, d)
        return self.ensemble.average(_observe(state, self.params, self.observable,
                                              self.halfwidth))

    def _run_chain(self, cells, order):
        state = prepare_initial(self.ensemble.q, self.params, self.N)
        branches = {}
        pos_idx, pos_off = 0, 0.0
        for k in order:
            body = cells[k][:-1]
            if pos_idx < len(body):
                for i, a, rest in _pieces_between(body, pos_idx, pos_off):
                    state = self.evolve(state, a, rest)
                pos_idx, pos_off = len(body) - 1, body[-1][1]
            branches[k] = state
        closings = [c[-1] for c in cells]
        ends = [branches[k].drift + a * d for k, (a, d) in enumerate(closings)]
        same_a = all(a == closings[0][0] for a, _ in closings)
        scale = max(abs(e) for e in ends) or 1.0
        same_end = max(ends) - min(ends) <= _TIME_TOL * scale
        if same_a and same_end and closings[0][0] != 0:
            return self._close_adjoint(branches, closings[0][0], float(np.mean(ends)))
        out = np.empty(len(cells))
        for k, (a, d) in enumerate(closings):
            final = self.evolve(branches[k], a, d)
            out[k] = self.ensemble.average(_observe(final, self.params, self.observable,
                                                    self.halfwidth))
        return out

    def _final_projectors(self, drift_end: float):
        """Detection vectors at the end of the closing transport, as a batch."""
        q_end = self.ensemble.q + drift_end
        q_win = bands.fold(q_end)
        shift = np.rint((q_end - q_win) / 2.0).astype(np.int64)
        probe = LadderState(self.ensemble.q, np.zeros((self.ensemble.count, 2 * self.N + 1)),
                            drift_end, 0.0, shift)
        if self.observable is Observable.BAND:
            vecs = bands.lowest_band_vectors(probe.q, self.params.depth_dimless, self.N)[:, None]
        else:
            vecs = _window_vectors(probe, self.halfwidth)
        M, P, D = vecs.shape
        return LadderState(np.repeat(self.ensemble.q, P), vecs.reshape(M * P, D), drift_end,
                           0.0, np.repeat(shift, P)), P

    def _close_adjoint(self, branches, a_close, drift_end):
        chi, P = self._final_projectors(drift_end)
        out = np.empty(len(branches))
        for k in sorted(branches, key=lambda k: -branches[k].drift):
            psi = branches[k]
            back = (psi.drift - chi.drift) / a_close
            if back != 0:
                chi = evolve_segment(chi, a_close, back, self.config, self.params,
                                     threads=self.threads, check_norm=False)
            rows = LadderState(np.repeat(psi.q0, P), np.repeat(psi.amplitudes, P, axis=0),
                               psi.drift, psi.t, np.repeat(psi.shift, P),
                               np.repeat(psi.escaped, P))
            amps = rows.aligned_to(chi.shift)
            overlaps = np.abs(np.einsum("ri,ri->r", chi.amplitudes.conj(), amps)) ** 2
            per_q = overlaps.reshape(-1, P).sum(axis=1)
            if self.observable is Observable.DETECTION:
                per_q = per_q / (psi.total_probability())
            out[k] = self.ensemble.average(per_q)
        return out


def survival_curve(ensemble: Ensemble, family: Callable[[float], Schedule],
                   t_tunnel: Sequence[float], params, config: EvolutionConfig, N: int, *,
                   label: str = "", threads: int = 1,
                   observable: Observable | str = Observable.BAND,
                   window_halfwidth: float = DEFAULT_WINDOW,
                   response_tau: float = 0.0) -> SurvivalCurve:
    """Ensemble survival versus total tunnelling time, normalised at t = 0."""
    if ensemble is None or ensemble.count == 0:
        raise InvalidParameterError("ensemble is empty")
    _warn_shallow(params)
    t_tunnel = np.asarray(t_tunnel, dtype=float)
    if t_tunnel.size == 0 or np.any(t_tunnel < 0):
        raise InvalidParameterError("t_tunnel must be a non-empty list of non-negative times")
    grid = list(t_tunnel) + ([] if np.any(t_tunnel == 0) else [0.0])
    schedules = [family(float(t)) for t in grid]
    runner = _FamilyRunner(ensemble, params, config, N, threads, observable,
                           window_halfwidth, response_tau)
    raw_all = runner.run(schedules)
    zero = int(np.flatnonzero(np.asarray(grid) == 0)[0])
    norm = float(raw_all[zero])
    raw = raw_all[: t_tunnel.size]
    t_eff = None
    if response_tau > 0:
        t_eff = np.array([effective_tunnel_time(apply_response_filter(s, response_tau),
                                                EFFECTIVE_THRESHOLD)
                          for s in schedules[: t_tunnel.size]])
    return SurvivalCurve(t_tunnel, raw / norm, raw, norm, label, ensemble.count, t_eff)


def interruption_sweep(ensemble: Ensemble, plan: SequencePlan, t_interr_list: Sequence[float],
                       t_tunnel: Sequence[float], config: EvolutionConfig, N: int,
                       **kwargs) -> list[SurvivalCurve]:
    """One survival curve per interruption duration, same tunnel segmentation."""
    if len(t_interr_list) == 0:
        raise InvalidParameterError("t_interr_list is empty")
    curves = []
    for t_interr in t_interr_list:
        curves.append(survival_curve(ensemble, plan.interrupted(t_interr, max(t_tunnel)), t_tunnel,
                                     plan.params, config, N,
                                     label=f"t_interr={t_interr * 1e6:g}us", **kwargs))
    return curves
