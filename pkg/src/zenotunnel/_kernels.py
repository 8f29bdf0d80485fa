"""Compiled inner loop for the split-step ladder propagator.

One step of length ``dt`` is the symmetric product

    K(dt/2) . C_even(dt/2) . C_odd(dt) . C_even(dt/2) . K(dt/2)

where K is the exact phase of the diagonal kinetic term along the linear
quasimomentum drift and C_even/C_odd are the nearest-neighbour couplings of
even/odd bonds, each an exact product of 2x2 rotations.  Adjacent kinetic
halves are merged, and their phase factors are advanced by a multiplicative
recurrence (the kinetic phase is quadratic in the step index).
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

RESYNC_EVERY = 16


@njit(cache=True, nogil=True)
def _kin_phase(p, alpha, h):
    # integral of (p + alpha*s)**2 ds over s in [0, h]
    return h * p * p + alpha * h * h * p + alpha * alpha * h * h * h / 3.0


@njit(cache=True, nogil=True)
def _apply_kinetic(psi, q, alpha, h, nvals):
    for k in range(psi.shape[0]):
        ph = _kin_phase(q + 2.0 * nvals[k], alpha, h)
        psi[k] *= complex(math.cos(ph), -math.sin(ph))


@njit(cache=True, nogil=True)
def _recenter(psi, q):
    """Relabel the ladder so q lies in [-1, 1); returns (q, shift, lost)."""
    D = psi.shape[0]
    shift = 0
    lost = 0.0
    while q >= 1.0:
        lost += psi[D - 1].real ** 2 + psi[D - 1].imag ** 2
        for k in range(D - 1, 0, -1):
            psi[k] = psi[k - 1]
        psi[0] = 0.0
        q -= 2.0
        shift += 1
    while q < -1.0:
        lost += psi[0].real ** 2 + psi[0].imag ** 2
        for k in range(D - 1):
            psi[k] = psi[k + 1]
        psi[D - 1] = 0.0
        q += 2.0
        shift -= 1
    return q, shift, lost


@njit(cache=True, nogil=True)
def _apply_bonds(psi, start, c, s):
    D = psi.shape[0]
    for k in range(start, D - 1, 2):
        a = psi[k]
        b = psi[k + 1]
        psi[k] = c * a - 1j * s * b
        psi[k + 1] = c * b - 1j * s * a


@njit(cache=True, nogil=True)
def _sync(f, g, q, alpha, dt, nvals):
    for k in range(f.shape[0]):
        p = q + 2.0 * nvals[k]
        ph = _kin_phase(p, alpha, dt)
        f[k] = complex(math.cos(ph), -math.sin(ph))
        dph = 2.0 * alpha * dt * dt * (p + alpha * dt)
        g[k] = complex(math.cos(dph), -math.sin(dph))


@njit(cache=True, nogil=True)
def split_propagate(psi, q, shift, escaped, alpha, dt, nsteps, coupling):
    """Advance every row of ``psi`` by ``nsteps`` steps of length ``dt``.

    ``psi`` has shape (M, D); ``q``, ``shift`` and ``escaped`` have shape
    (M,) and are updated in place.  ``coupling`` is depth/2.
    """
    M, D = psi.shape
    N = (D - 1) // 2
    nvals = np.arange(-N, N + 1).astype(np.float64)
    ch = math.cos(coupling * dt / 2.0)
    sh = math.sin(coupling * dt / 2.0)
    cf = math.cos(coupling * dt)
    sf = math.sin(coupling * dt)
    chirp_ph = 2.0 * alpha * alpha * dt * dt * dt
    chirp = complex(math.cos(chirp_ph), -math.sin(chirp_ph))
    f = np.empty(D, dtype=np.complex128)
    g = np.empty(D, dtype=np.complex128)
    for m in range(M):
        row = psi[m]
        qm = q[m]
        _apply_kinetic(row, qm, alpha, dt / 2.0, nvals)
        qm = q[m] + alpha * dt / 2.0
        qm, sft, lost = _recenter(row, qm)
        shift[m] += sft
        escaped[m] += lost
        q_base = qm
        since = 0
        _sync(f, g, qm, alpha, dt, nvals)
        for j in range(nsteps):
            _apply_bonds(row, 0, ch, sh)
            _apply_bonds(row, 1, cf, sf)
            _apply_bonds(row, 0, ch, sh)
            if j == nsteps - 1:
                _apply_kinetic(row, qm, alpha, dt / 2.0, nvals)
                qm = qm + alpha * dt / 2.0
            else:
                for k in range(D):
                    row[k] *= f[k]
                    f[k] *= g[k]
                    g[k] *= chirp
                since += 1
                qm = q_base + alpha * dt * since
                if since == RESYNC_EVERY:
                    q_base = qm
                    since = 0
                    _sync(f, g, qm, alpha, dt, nvals)
            if qm >= 1.0 or qm < -1.0:
                qm, sft, lost = _recenter(row, qm)
                shift[m] += sft
                escaped[m] += lost
                q_base = qm
                since = 0
                if j < nsteps - 1:
                    _sync(f, g, qm, alpha, dt, nvals)
        q[m] = qm
