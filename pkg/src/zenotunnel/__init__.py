"""Quantum Zeno and anti-Zeno dynamics of atoms tunnelling out of an accelerated optical lattice."""

__version__ = "0.1.0"

from .core import LatticeParams, UnitSystem, bloch_period, brillouin_zone_width, derive_params
from .bands import BandSolution, band_population, choose_basis_size, solve_bands
from .dynamics import EvolutionConfig, LadderState, Stepper, evolve_segment, survival_observable
from .schedule import Role, Schedule, Segment, interrupted, uninterrupted
from .experiment import (Ensemble, SequencePlan, SurvivalCurve, make_ensemble,
                         prepare_initial, run_schedule, survival_curve)

__all__ = [
    "BandSolution", "Ensemble", "EvolutionConfig", "LadderState", "LatticeParams", "Role",
    "Schedule", "Segment", "SequencePlan", "Stepper", "SurvivalCurve", "UnitSystem",
    "band_population", "bloch_period", "brillouin_zone_width", "choose_basis_size",
    "derive_params", "evolve_segment", "interrupted", "make_ensemble", "prepare_initial",
    "run_schedule", "solve_bands", "survival_curve", "survival_observable", "uninterrupted",
]
