"""Bloch bands of the cosine lattice on a truncated plane-wave ladder.

The ladder site ``n`` in ``[-N, N]`` carries the plane wave of momentum
``q + 2n`` (units of hbar k_L).  In recoil units the periodic Hamiltonian is

    H[n, n]   = (q + 2n)**2
    H[n, n±1] = depth / 2

where ``depth = V0 / E_rec``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidParameterError, NumericalError

BASIS_FLOOR = 8
BASIS_CAP = 128


def fold(q):
    """Fold quasimomentum into the first zone ``[-1, 1)``."""
    return np.mod(np.asarray(q, dtype=float) + 1.0, 2.0) - 1.0


def ladder(N: int) -> np.ndarray:
    return np.arange(-N, N + 1)


def _check_basis(N, depth_dimless):
    if int(N) != N or N < 1:
        raise InvalidParameterError(f"basis half-width N must be an integer >= 1, got {N!r}")
    if not depth_dimless >= 0:
        raise InvalidParameterError(f"depth must be non-negative, got {depth_dimless!r}")


def build_periodic_hamiltonian(q: float, depth_dimless: float, N: int) -> np.ndarray:
    _check_basis(N, depth_dimless)
    N = int(N)
    n = ladder(N)
    H = np.diag((q + 2.0 * n) ** 2)
    off = np.full(2 * N, depth_dimless / 2.0)
    H += np.diag(off, 1) + np.diag(off, -1)
    return H


@dataclass(frozen=True)
class BandSolution:
    q: float
    energies: np.ndarray
    vectors: np.ndarray  # column b is band b
    N: int

    @property
    def size(self) -> int:
        return 2 * self.N + 1

    def gap(self, lower: int = 0) -> float:
        return float(self.energies[lower + 1] - self.energies[lower])


def _eigh(H):
    try:
        return np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"band eigensolver failed: {exc}") from exc


def solve_bands(q: float, depth_dimless: float, N: int) -> BandSolution:
    """Diagonalize the periodic Hamiltonian at the folded quasimomentum."""
    qf = float(fold(q))
    H = build_periodic_hamiltonian(qf, depth_dimless, N)
    if depth_dimless == 0:
        # free particle: break ties by ascending ladder index
        diag = np.diag(H)
        order = np.argsort(diag, kind="stable")
        energies = diag[order]
        vectors = np.eye(H.shape[0])[:, order]
    else:
        energies, vectors = _eigh(H)
    return BandSolution(qf, energies, _fix_phase(vectors), int(N))


def _fix_phase(vectors):
    # deterministic sign: largest component of each eigenvector positive
    idx = np.argmax(np.abs(vectors), axis=-2)
    pivot = np.take_along_axis(vectors, idx[..., None, :], axis=-2)
    return vectors * np.where(pivot < 0, -1.0, 1.0)


def lowest_band_vectors(q, depth_dimless: float, N: int) -> np.ndarray:
    """Band-0 eigenvectors for an array of quasimomenta, shape ``(len(q), 2N+1)``.

    ``q`` is used as given (not folded) so callers can pass window
    quasimomenta that sit marginally outside the zone.
    """
    _check_basis(N, depth_dimless)
    q = np.atleast_1d(np.asarray(q, dtype=float))
    n = ladder(int(N))
    H = np.zeros((q.size, n.size, n.size))
    idx = np.arange(n.size)
    H[:, idx, idx] = (q[:, None] + 2.0 * n) ** 2
    H[:, idx[:-1], idx[1:]] = depth_dimless / 2.0
    H[:, idx[1:], idx[:-1]] = depth_dimless / 2.0
    if depth_dimless == 0:
        out = np.zeros((q.size, n.size))
        out[np.arange(q.size), np.argmin(H[:, idx, idx], axis=1)] = 1.0
        return out
    _, vecs = _eigh(H)
    return _fix_phase(vecs)[..., 0]


def band_population(state, band: int, solution: BandSolution) -> float:
    """Probability ``|<band|state>|**2`` for a ladder state or amplitude vector."""
    amps = np.asarray(getattr(state, "amplitudes", state))
    if amps.shape[-1] != solution.size:
        raise DimensionError(
            f"state has {amps.shape[-1]} ladder sites, band solution has {solution.size}")
    if not 0 <= band < solution.size:
        raise InvalidParameterError(f"band index {band} outside 0..{solution.size - 1}")
    return float(np.abs(np.vdot(solution.vectors[:, band], amps)) ** 2)


def choose_basis_size(depth_dimless: float, max_accel_dimless: float = 0.0,
                      requested_tolerance: float = 1e-10, *,
                      floor: int = BASIS_FLOOR, cap: int = BASIS_CAP) -> int:
    """Smallest N >= floor for which the two lowest bands are converged.

    Convergence means the band-0 and band-1 energies at q in {0, ±0.5, 1}
    move by less than ``requested_tolerance`` when N grows by 2.
    ``max_accel_dimless`` is validated but does not enter the criterion;
    the dynamics re-centres its window, so tilt strength does not set the
    basis size.
    """
    if depth_dimless < 0 or max_accel_dimless < 0 or not requested_tolerance > 0:
        raise InvalidParameterError("depth, acceleration and tolerance must be non-negative")
    probes = (0.0, 0.5, -0.5, 1.0)

    def low_energies(N):
        return np.array([np.linalg.eigvalsh(build_periodic_hamiltonian(q, depth_dimless, N))[:2]
                         for q in probes])

    N = floor
    current = low_energies(N)
    while N <= cap:
        nxt = low_energies(N + 2)
        if np.max(np.abs(nxt - current)) < requested_tolerance:
            return N
        N += 2
        current = nxt
    raise NumericalError(
        f"band energies not converged to {requested_tolerance} below N = {cap}")
