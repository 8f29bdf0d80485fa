import math

import pytest
from hypothesis import given, strategies as st
from scipy import constants

from zenotunnel.core import (LatticeParams, UnitSystem, bloch_period, brillouin_zone_width,
                             derive_params)
from zenotunnel.errors import InvalidParameterError

KINDS = ["momentum", "energy", "time", "velocity", "acceleration"]


def test_sodium_recoil_scales(p91):
    assert p91.v_rec == pytest.approx(0.029468, rel=1e-4)
    assert p91.recoil_freq == pytest.approx(25015.6, rel=1e-4)
    assert p91.units.time == pytest.approx(6.362e-6, rel=1e-3)
    # the rounded 3 cm/s is within 2%
    assert p91.v_rec == pytest.approx(0.03, rel=0.02)


def test_depth_conversion(p91, p116):
    assert p91.depth_dimless == pytest.approx(91e3 / p91.recoil_freq, rel=1e-12)
    assert p91.depth_dimless == pytest.approx(3.6377, abs=1e-3)
    assert p116.depth_dimless == pytest.approx(4.637, abs=1e-3)


def test_derived_units_consistent(p91):
    u = UnitSystem.from_params(p91)
    assert u.momentum == pytest.approx(p91.mass * p91.v_rec, rel=1e-14)
    assert u.energy == pytest.approx(0.5 * p91.mass * p91.v_rec**2, rel=1e-14)
    assert u.energy * u.time == pytest.approx(constants.hbar, rel=1e-14)


def test_derive_params_matches_constructor():
    assert derive_params(depth_freq=5e4) == LatticeParams(depth_freq=5e4)


@given(st.floats(1e-9, 1e9), st.sampled_from(KINDS))
def test_unit_round_trip(x, kind):
    u = LatticeParams().units
    assert u.to_si(u.to_dimless(x, kind), kind) == pytest.approx(x, rel=1e-12)


def test_unknown_kind():
    with pytest.raises(InvalidParameterError):
        LatticeParams().units.to_dimless(1.0, "length")


def test_bloch_period(p91):
    assert bloch_period(p91, 2000.0) == pytest.approx(29.47e-6, rel=1e-3)
    # 30 us quoted for the slow interruption, within 2%
    assert bloch_period(p91, 2000.0) == pytest.approx(30e-6, rel=0.02)
    # one Bloch period in recoil units is 2 / alpha
    a = p91.units.to_dimless(15000.0, "acceleration")
    assert p91.units.to_dimless(bloch_period(p91, 15000.0), "time") == pytest.approx(2 / a)


@pytest.mark.parametrize("a", [0.0, -1.0, math.nan])
def test_bloch_period_rejects(p91, a):
    with pytest.raises(InvalidParameterError):
        bloch_period(p91, a)


def test_zone_width(p91):
    assert brillouin_zone_width(p91) == pytest.approx(2 * constants.hbar * p91.k_L, rel=1e-14)


@pytest.mark.parametrize("kw", [dict(mass=0.0), dict(wavelength=-1.0), dict(depth_freq=-1.0),
                                dict(mass=math.inf)])
def test_invalid_params(kw):
    with pytest.raises(InvalidParameterError):
        LatticeParams(**kw)


def test_with_depth(p91):
    p = p91.with_depth(0.0)
    assert p.depth_dimless == 0.0 and p.v_rec == p91.v_rec
