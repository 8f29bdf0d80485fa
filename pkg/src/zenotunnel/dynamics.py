"""Unitary evolution of ladder states through an acceleration profile.

The linear tilt of the washboard potential is carried entirely by a drift of
the quasimomentum (Bloch acceleration theorem): in recoil units a constant
acceleration ``a`` advances the quasimomentum at rate ``a`` per unit time.
The ladder window is re-centred whenever the window quasimomentum leaves
``[-1, 1)``; the plane wave pushed out of the window belongs to atoms that
have long since left the lowest band, and its weight is kept in
``LadderState.escaped`` so that total probability remains auditable.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import bands
from ._kernels import split_propagate
from .errors import DimensionError, InvalidParameterError, NumericalError

NORM_FAILURE = 1e-6


class Stepper(str, enum.Enum):
    SPLIT = "split"   # Strang split, exact kinetic phase, bond rotations
    EXPM = "expm"     # exponential of the midpoint Hamiltonian per step
    CF4 = "cf4"       # 4th-order commutator-free Magnus, two exponentials


@dataclass(frozen=True)
class EvolutionConfig:
    dt_max: float = 5e-3
    stepper: Stepper = Stepper.SPLIT
    substeps_per_bloch_period: int = 2000

    def __post_init__(self):
        if not self.dt_max > 0:
            raise InvalidParameterError(f"dt_max must be positive, got {self.dt_max!r}")
        if self.substeps_per_bloch_period < 100:
            raise InvalidParameterError("substeps_per_bloch_period must be >= 100")
        object.__setattr__(self, "stepper", Stepper(self.stepper))

    def step_size(self, a: float) -> float:
        if a == 0:
            return self.dt_max
        return min(self.dt_max, 2.0 / abs(a) / self.substeps_per_bloch_period)

    def refined(self, factor: int = 2) -> "EvolutionConfig":
        return replace(self, dt_max=self.dt_max / factor,
                       substeps_per_bloch_period=self.substeps_per_bloch_period * factor)


@dataclass
class LadderState:
    """A batch of ladder wavefunctions sharing one acceleration history.

    Row ``m`` of ``amplitudes`` is the state started at quasimomentum
    ``q0[m]``.  Ladder index ``n`` of row ``m`` holds the plane wave of
    lattice-frame momentum ``q[m] + 2n`` where ``q = q0 + drift - 2*shift``.
    """

    q0: np.ndarray
    amplitudes: np.ndarray
    drift: float = 0.0
    t: float = 0.0
    shift: np.ndarray = field(default=None)
    escaped: np.ndarray = field(default=None)

    def __post_init__(self):
        self.q0 = np.atleast_1d(np.asarray(self.q0, dtype=float))
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim == 1:
            amps = amps[None, :]
        if amps.shape[0] != self.q0.size or amps.shape[1] % 2 != 1:
            raise DimensionError(
                f"amplitudes of shape {amps.shape} do not match {self.q0.size} quasimomenta")
        self.amplitudes = amps
        if self.shift is None:
            self.shift = np.zeros(self.q0.size, dtype=np.int64)
        if self.escaped is None:
            self.escaped = np.zeros(self.q0.size)
        self.shift = np.asarray(self.shift, dtype=np.int64)
        self.escaped = np.asarray(self.escaped, dtype=float)

    @property
    def N(self) -> int:
        return (self.amplitudes.shape[1] - 1) // 2

    @property
    def count(self) -> int:
        return self.q0.size

    @property
    def q(self) -> np.ndarray:
        return self.q0 + self.drift - 2.0 * self.shift

    def norm(self) -> np.ndarray:
        return np.sqrt(np.sum(np.abs(self.amplitudes) ** 2, axis=1))

    def total_probability(self) -> np.ndarray:
        """Weight inside the window plus weight that left through its edge."""
        return np.sum(np.abs(self.amplitudes) ** 2, axis=1) + self.escaped

    def copy(self) -> "LadderState":
        return LadderState(self.q0.copy(), self.amplitudes.copy(), self.drift, self.t,
                           self.shift.copy(), self.escaped.copy())

    def take(self, rows) -> "LadderState":
        return LadderState(self.q0[rows], self.amplitudes[rows], self.drift, self.t,
                           self.shift[rows], self.escaped[rows])

    def aligned_to(self, shift: np.ndarray) -> np.ndarray:
        """Amplitudes relabelled onto the window given by ``shift``."""
        out = self.amplitudes.copy()
        delta = np.asarray(shift) - self.shift
        for m in np.nonzero(delta)[0]:
            out[m] = _shift_row(out[m], int(delta[m]))
        return out


def _shift_row(row, k):
    out = np.zeros_like(row)
    if k > 0:
        out[k:] = row[:-k]
    elif k < 0:
        out[:k] = row[-k:]
    else:
        out[:] = row
    return out


def instantaneous_hamiltonian(state: LadderState, params) -> np.ndarray:
    """Periodic Hamiltonian of each row at its current window quasimomentum.

    The acceleration does not appear: it acts only through the drift.
    Returns shape (M, D, D).
    """
    return np.stack([bands.build_periodic_hamiltonian(q, params.depth_dimless, state.N)
                     for q in state.q])


def _recenter_rows(psi, q, shift, escaped):
    D = psi.shape[1]
    for m in range(psi.shape[0]):
        while q[m] >= 1.0:
            escaped[m] += abs(psi[m, D - 1]) ** 2
            psi[m] = _shift_row(psi[m], 1)
            q[m] -= 2.0
            shift[m] += 1
        while q[m] < -1.0:
            escaped[m] += abs(psi[m, 0]) ** 2
            psi[m] = _shift_row(psi[m], -1)
            q[m] += 2.0
            shift[m] -= 1


def _batched_expm(H, dt):
    w, v = np.linalg.eigh(H)
    return np.einsum("mij,mj,mkj->mik", v, np.exp(-1j * dt * w), v.conj())


def _hamiltonians(q, depth, N):
    n = bands.ladder(N)
    D = n.size
    H = np.zeros((q.size, D, D))
    idx = np.arange(D)
    H[:, idx, idx] = (q[:, None] + 2.0 * n) ** 2
    H[:, idx[:-1], idx[1:]] = depth / 2.0
    H[:, idx[1:], idx[:-1]] = depth / 2.0
    return H


_CF4_NODE = math.sqrt(3.0) / 6.0
_CF4_A = (3.0 - 2.0 * math.sqrt(3.0)) / 12.0
_CF4_B = (3.0 + 2.0 * math.sqrt(3.0)) / 12.0


def _dense_propagate(psi, q, shift, escaped, a, dt, nsteps, depth, stepper):
    N = (psi.shape[1] - 1) // 2
    for _ in range(nsteps):
        _recenter_rows(psi, q, shift, escaped)
        if stepper is Stepper.EXPM:
            U = _batched_expm(_hamiltonians(q + a * dt / 2.0, depth, N), dt)
            psi[:] = np.einsum("mij,mj->mi", U, psi)
        else:
            H1 = _hamiltonians(q + a * dt * (0.5 - _CF4_NODE), depth, N)
            H2 = _hamiltonians(q + a * dt * (0.5 + _CF4_NODE), depth, N)
            U1 = _batched_expm(_CF4_A * H1 + _CF4_B * H2, dt)
            U2 = _batched_expm(_CF4_B * H1 + _CF4_A * H2, dt)
            psi[:] = np.einsum("mij,mj->mi", U2, np.einsum("mij,mj->mi", U1, psi))
        q += a * dt
    _recenter_rows(psi, q, shift, escaped)


def _run_split(psi, q, shift, escaped, a, dt, nsteps, coupling, threads):
    if threads <= 1 or psi.shape[0] < 2:
        split_propagate(psi, q, shift, escaped, a, dt, nsteps, coupling)
        return
    chunks = np.array_split(np.arange(psi.shape[0]), min(threads, psi.shape[0]))
    parts = [(psi[c].copy(), q[c].copy(), shift[c].copy(), escaped[c].copy()) for c in chunks]
    with ThreadPoolExecutor(max_workers=len(parts)) as pool:
        futures = [pool.submit(split_propagate, p, qq, s, e, a, dt, nsteps, coupling)
                   for p, qq, s, e in parts]
        for fut in futures:
            fut.result()
    for c, (p, qq, s, e) in zip(chunks, parts):
        psi[c], q[c], shift[c], escaped[c] = p, qq, s, e


def evolve_segment(state: LadderState, a: float, duration: float,
                   config: EvolutionConfig, params, *, threads: int = 1,
                   check_norm: bool = True) -> LadderState:
    """Evolve ``state`` for ``duration`` at constant acceleration ``a``.

    Both ``a`` and ``duration`` are in recoil units (v_rec per hbar/E_rec and
    hbar/E_rec).  A negative duration runs the propagator backwards, which is
    used to build adjoint (Heisenberg-picture) observables.  Returns a new
    state; ``state`` is not modified.
    """
    if not math.isfinite(duration) or not math.isfinite(a):
        raise InvalidParameterError("acceleration and duration must be finite")
    out = state.copy()
    if duration == 0:
        return out
    if state.t + duration == state.t:
        raise NumericalError(
            f"duration {duration!r} is below the time resolution at t = {state.t!r}")
    dt_nominal = config.step_size(a)
    nsteps = max(1, math.ceil(abs(duration) / dt_nominal - 1e-9))
    dt = duration / nsteps
    q = state.q.copy()
    psi = out.amplitudes
    if config.stepper is Stepper.SPLIT:
        _run_split(psi, q, out.shift, out.escaped, float(a), float(dt), int(nsteps),
                   params.depth_dimless / 2.0, threads)
    else:
        _dense_propagate(psi, q, out.shift, out.escaped, float(a), float(dt), int(nsteps),
                         params.depth_dimless, config.stepper)
    out.drift = state.drift + a * duration
    out.t = state.t + duration
    if check_norm:
        dev = np.max(np.abs(out.total_probability() - state.total_probability()))
        if not dev < NORM_FAILURE:
            raise NumericalError(f"integrator lost unitarity: probability drift {dev:.3e}")
    return out


def survival_observable(state: LadderState, params) -> np.ndarray:
    """Population of the instantaneous lowest band, one value per row."""
    vecs = bands.lowest_band_vectors(state.q, params.depth_dimless, state.N)
    return np.abs(np.einsum("mi,mi->m", vecs.conj(), state.amplitudes)) ** 2
