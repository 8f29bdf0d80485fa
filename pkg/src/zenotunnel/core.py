"""Physical parameters of the lattice and the recoil unit system.

Everything downstream works in recoil units: momentum in hbar*k_L, energy in
E_rec, time in hbar/E_rec, velocity in v_rec.  SI values only appear here and
at the configuration boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy import constants

from .errors import InvalidParameterError

SODIUM_MASS_AMU = 22.98976928
DEFAULT_WAVELENGTH = 589e-9  # Na D2 line, assumed
SODIUM_MASS = SODIUM_MASS_AMU * constants.atomic_mass


@dataclass(frozen=True)
class LatticeParams:
    mass: float = SODIUM_MASS
    wavelength: float = DEFAULT_WAVELENGTH
    depth_freq: float = 0.0
    k_L: float = field(init=False)
    v_rec: float = field(init=False)
    E_rec: float = field(init=False)
    depth_dimless: float = field(init=False)

    def __post_init__(self):
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise InvalidParameterError(f"mass must be positive, got {self.mass!r}")
        if not (self.wavelength > 0 and math.isfinite(self.wavelength)):
            raise InvalidParameterError(
                f"wavelength must be positive, got {self.wavelength!r}")
        if not (self.depth_freq >= 0 and math.isfinite(self.depth_freq)):
            raise InvalidParameterError(
                f"depth_freq must be non-negative, got {self.depth_freq!r}")
        k_L = 2.0 * math.pi / self.wavelength
        E_rec = constants.hbar**2 * k_L**2 / (2.0 * self.mass)
        object.__setattr__(self, "k_L", k_L)
        object.__setattr__(self, "v_rec", constants.hbar * k_L / self.mass)
        object.__setattr__(self, "E_rec", E_rec)
        object.__setattr__(self, "depth_dimless", self.depth_freq * constants.h / E_rec)

    @property
    def units(self) -> "UnitSystem":
        return UnitSystem.from_params(self)

    @property
    def recoil_freq(self) -> float:
        """E_rec/h in Hz."""
        return self.E_rec / constants.h

    def with_depth(self, depth_freq: float) -> "LatticeParams":
        return LatticeParams(self.mass, self.wavelength, depth_freq)


def derive_params(mass: float = SODIUM_MASS, wavelength: float = DEFAULT_WAVELENGTH,
                  depth_freq: float = 0.0) -> LatticeParams:
    """Build a :class:`LatticeParams` from mass (kg), wavelength (m) and V0/h (Hz)."""
    return LatticeParams(mass=mass, wavelength=wavelength, depth_freq=depth_freq)


@dataclass(frozen=True)
class UnitSystem:
    """Conversion factors from dimensionless recoil units to SI."""

    momentum: float      # hbar k_L
    energy: float        # E_rec
    time: float          # hbar / E_rec
    velocity: float      # v_rec
    acceleration: float  # v_rec / time

    @classmethod
    def from_params(cls, params: LatticeParams) -> "UnitSystem":
        time = constants.hbar / params.E_rec
        return cls(
            momentum=constants.hbar * params.k_L,
            energy=params.E_rec,
            time=time,
            velocity=params.v_rec,
            acceleration=params.v_rec / time,
        )

    def _unit(self, kind: str) -> float:
        try:
            return getattr(self, kind)
        except AttributeError:
            raise InvalidParameterError(f"unknown quantity kind {kind!r}") from None

    def to_dimless(self, value, kind: str):
        return value / self._unit(kind)

    def to_si(self, value, kind: str):
        return value * self._unit(kind)


def bloch_period(params: LatticeParams, a: float) -> float:
    """Time (s) for the lattice velocity to change by one zone width, 2 v_rec / a."""
    if not a > 0:
        raise InvalidParameterError(f"acceleration must be positive, got {a!r}")
    return 2.0 * params.v_rec / a


def brillouin_zone_width(params: LatticeParams) -> float:
    """Width of the first Brillouin zone in kg m/s (2 m v_rec = 2 hbar k_L)."""
    return 2.0 * params.mass * params.v_rec
