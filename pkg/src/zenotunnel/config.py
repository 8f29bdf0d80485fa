"""Strict sectioned ``key = value`` run configuration.

Every parameter of a run lives in exactly one key.  Unknown sections or
keys, and missing required keys, are rejected before any computation.
The canonical text form (:meth:`RunConfig.to_text`) is written into every
output file and parses back to an identical configuration.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import MISSING, dataclass, fields
from importlib import resources
from pathlib import Path

from scipy import constants

from .core import LatticeParams
from .dynamics import EvolutionConfig, Stepper
from .errors import ConfigError
from .experiment import Observable, Sampling, SequencePlan

PRESETS = ("fig3", "fig4", "fig5")
BEGIN_MARK = "--- config ---"
END_MARK = "--- end config ---"


@dataclass(frozen=True)
class AtomConfig:
    mass_amu: float
    wavelength_nm: float


@dataclass(frozen=True)
class LatticeConfig:
    depth_khz: float


@dataclass(frozen=True)
class ScheduleConfig:
    a_tunnel: float
    a_trans: float
    a_interr: float
    t_segment_us: float
    t_interr_us: float
    v0_vrec: float
    v_final_vrec: float


@dataclass(frozen=True)
class NumericsConfig:
    basis_N: int | None          # None means "auto"
    substeps_per_bloch: int
    ensemble_count: int
    response_tau_us: float
    ensemble_sampling: str = Sampling.UNIFORM.value
    stepper: str = Stepper.SPLIT.value
    observable: str = Observable.BAND.value


@dataclass(frozen=True)
class OutputConfig:
    directory: str
    t_tunnel_us: tuple


@dataclass(frozen=True)
class SweepConfig:
    t_interr_us: tuple = ()


@dataclass(frozen=True)
class RunConfig:
    atom: AtomConfig
    lattice: LatticeConfig
    schedule: ScheduleConfig
    numerics: NumericsConfig
    output: OutputConfig
    sweep: SweepConfig = SweepConfig()

    # --- derived objects -------------------------------------------------
    def lattice_params(self) -> LatticeParams:
        return LatticeParams(self.atom.mass_amu * constants.atomic_mass,
                             self.atom.wavelength_nm * 1e-9,
                             self.lattice.depth_khz * 1e3)

    def evolution_config(self) -> EvolutionConfig:
        return EvolutionConfig(stepper=Stepper(self.numerics.stepper),
                               substeps_per_bloch_period=self.numerics.substeps_per_bloch)

    def plan(self) -> SequencePlan:
        p = self.lattice_params()
        s = self.schedule
        return SequencePlan(p, a_tunnel=s.a_tunnel, a_interr=s.a_interr,
                            t_segment=s.t_segment_us * 1e-6, a_trans=s.a_trans,
                            v0=s.v0_vrec * p.v_rec, v_final=s.v_final_vrec * p.v_rec)

    @property
    def t_tunnel(self) -> list[float]:
        return [t * 1e-6 for t in self.output.t_tunnel_us]

    def to_text(self) -> str:
        lines = []
        for section in _SECTIONS:
            block = getattr(self, section)
            lines.append(f"[{section}]")
            for f in fields(block):
                lines.append(f"{f.name} = {_format(getattr(block, f.name))}")
            lines.append("")
        return "\n".join(lines)


_SECTIONS = {
    "atom": AtomConfig,
    "lattice": LatticeConfig,
    "schedule": ScheduleConfig,
    "numerics": NumericsConfig,
    "output": OutputConfig,
    "sweep": SweepConfig,
}
_OPTIONAL_SECTIONS = {"sweep"}
_POSITIVE = {"mass_amu", "wavelength_nm", "a_tunnel", "a_trans", "a_interr", "t_segment_us",
             "v0_vrec", "v_final_vrec", "substeps_per_bloch", "ensemble_count"}
_NON_NEGATIVE = {"depth_khz", "t_interr_us", "response_tau_us"}


def _format(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_float(section, key, raw):
    try:
        val = float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected a number, got {raw!r}") from None
    if not math.isfinite(val):
        raise ConfigError(f"[{section}] {key}: value must be finite")
    if key in _POSITIVE and not val > 0:
        raise ConfigError(f"[{section}] {key}: must be positive, got {raw!r}")
    if key in _NON_NEGATIVE and not val >= 0:
        raise ConfigError(f"[{section}] {key}: must be non-negative, got {raw!r}")
    return val


def _parse_int(section, key, raw):
    try:
        val = int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected an integer, got {raw!r}") from None
    if key in _POSITIVE and val <= 0:
        raise ConfigError(f"[{section}] {key}: must be positive, got {raw!r}")
    return val


def _parse_list(section, key, raw):
    items = [x.strip() for x in raw.split(",") if x.strip()]
    vals = tuple(_parse_float(section, key, x) for x in items)
    if any(v < 0 for v in vals):
        raise ConfigError(f"[{section}] {key}: times must be non-negative")
    return vals


def _parse_value(section, f, raw):
    key = f.name
    if key == "basis_N":
        if raw.strip().lower() == "auto":
            return None
        val = _parse_int(section, key, raw)
        if val < 1:
            raise ConfigError(f"[{section}] basis_N: must be 'auto' or >= 1")
        return val
    if key in ("substeps_per_bloch", "ensemble_count"):
        val = _parse_int(section, key, raw)
        if key == "substeps_per_bloch" and val < 100:
            raise ConfigError(f"[{section}] substeps_per_bloch: must be >= 100")
        return val
    if key in ("t_tunnel_us",):
        vals = _parse_list(section, key, raw)
        if not vals:
            raise ConfigError(f"[{section}] {key}: list is empty")
        return vals
    if key == "t_interr_us" and section == "sweep":
        return _parse_list(section, key, raw)
    if key == "directory":
        if not raw.strip():
            raise ConfigError(f"[{section}] directory: empty path")
        return raw.strip()
    enums = {"ensemble_sampling": Sampling, "stepper": Stepper, "observable": Observable}
    if key in enums:
        try:
            return enums[key](raw.strip()).value
        except ValueError:
            choices = ", ".join(e.value for e in enums[key])
            raise ConfigError(f"[{section}] {key}: expected one of {choices}, got {raw!r}") from None
    return _parse_float(section, key, raw)


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, strict=True,
                                       inline_comment_prefixes=(";",))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    unknown = set(parser.sections()) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"{source}: unknown section(s) {', '.join(sorted(unknown))}")
    blocks = {}
    for section, cls in _SECTIONS.items():
        if not parser.has_section(section):
            if section in _OPTIONAL_SECTIONS:
                blocks[section] = cls()
                continue
            raise ConfigError(f"{source}: missing section [{section}]")
        items = dict(parser.items(section))
        names = {f.name for f in fields(cls)}
        extra = set(items) - names
        if extra:
            raise ConfigError(f"{source}: unknown key(s) in [{section}]: "
                              f"{', '.join(sorted(extra))}")
        kwargs = {}
        for f in fields(cls):
            if f.name not in items:
                if f.default is not MISSING:
                    continue
                raise ConfigError(f"{source}: missing key [{section}] {f.name}")
            kwargs[f.name] = _parse_value(section, f, items[f.name])
        blocks[section] = cls(**kwargs)
    return RunConfig(**blocks)


def extract_config_block(text: str) -> str:
    """Pull the embedded configuration out of a result file's ``#`` header."""
    out, inside = [], False
    for line in text.splitlines():
        if not line.startswith("#"):
            continue
        body = line[1:].strip()
        if body == BEGIN_MARK:
            inside = True
            continue
        if body == END_MARK:
            break
        if inside:
            out.append(body)
    if not out:
        raise ConfigError("no embedded configuration block found")
    return "\n".join(out) + "\n"


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    if BEGIN_MARK in text:
        text = extract_config_block(text)
    return parse_config_text(text, source=str(path))


def load_preset(name: str) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    text = resources.files("zenotunnel.presets").joinpath(f"{name}.ini").read_text()
    return parse_config_text(text, source=f"preset:{name}")
