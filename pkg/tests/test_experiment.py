import warnings

import numpy as np
import pytest

from zenotunnel.core import LatticeParams
from zenotunnel.dynamics import EvolutionConfig
from zenotunnel.errors import InvalidParameterError, ScheduleError
from zenotunnel.experiment import (Ensemble, Observable, Sampling, SequencePlan,
                                   detection_classify, interruption_sweep, make_ensemble,
                                   prepare_initial, run_schedule, survival_curve)

N = 8
CFG = EvolutionConfig()
T3 = [0.0, 1e-6, 2e-6, 3e-6]


@pytest.fixture(scope="module")
def plan3():
    return SequencePlan(LatticeParams(depth_freq=91e3), a_tunnel=15000.0, a_interr=2000.0,
                        t_segment=1e-6)


@pytest.fixture(scope="module")
def ens():
    return make_ensemble(8)


def test_uniform_ensemble():
    e = make_ensemble(4)
    assert np.allclose(e.q, [-0.75, -0.25, 0.25, 0.75])
    assert np.allclose(e.weights, 0.25)


def test_gaussian_ensemble_weights():
    e = make_ensemble(16, Sampling.GAUSSIAN)
    assert e.weights.sum() == pytest.approx(1.0)
    assert np.allclose(e.weights, e.weights[::-1])
    # a 6 v_rec wide cloud is nearly flat across one zone
    assert e.weights.max() / e.weights.min() < 1.01


@pytest.mark.parametrize("bad", [0, -2, 1.5])
def test_ensemble_count_validation(bad):
    with pytest.raises(InvalidParameterError):
        make_ensemble(bad)


def test_ensemble_weight_validation():
    with pytest.raises(InvalidParameterError):
        Ensemble([0.0, 0.1], [1.0, -1.0])


def test_curve_normalised(plan3, ens):
    c = survival_curve(ens, plan3.uninterrupted, T3, plan3.params, CFG, N)
    assert c.survival[0] == 1.0
    assert 0.9 < c.normalization <= 1.0
    assert np.allclose(c.survival * c.normalization, c.raw_survival)
    assert np.all(np.diff(c.survival) < 0)
    assert c.at(2e-6) == c.survival[2]
    with pytest.raises(KeyError):
        c.at(5e-6)


def test_normalisation_added_when_zero_missing(plan3, ens):
    full = survival_curve(ens, plan3.uninterrupted, T3, plan3.params, CFG, N)
    part = survival_curve(ens, plan3.uninterrupted, T3[2:], plan3.params, CFG, N)
    assert np.allclose(part.survival, full.survival[2:], atol=1e-12)


def test_adjoint_chain_matches_forward(plan3, ens):
    fam = plan3.interrupted(50e-6, 3e-6)
    curve = survival_curve(ens, fam, T3, plan3.params, CFG, N)
    direct = [ens.average(run_schedule(ens.q, fam(t), CFG, plan3.params, N).survival[-1])
              for t in T3]
    assert np.allclose(curve.raw_survival, direct, atol=1e-9)


def test_detection_adjoint_matches_forward(plan3, ens):
    curve = survival_curve(ens, plan3.uninterrupted, T3, plan3.params, CFG, N,
                           observable=Observable.DETECTION)
    direct = []
    for t in T3:
        final = run_schedule(ens.q, plan3.uninterrupted(t), CFG, plan3.params, N).final_state
        direct.append(ens.average(detection_classify(final, plan3.params)[0]))
    assert np.allclose(curve.raw_survival, direct, atol=1e-9)


def test_zero_interruption_equals_uninterrupted(plan3, ens):
    a = survival_curve(ens, plan3.uninterrupted, T3, plan3.params, CFG, N)
    b = survival_curve(ens, plan3.interrupted(0.0, 3e-6), T3, plan3.params, CFG, N)
    assert np.max(np.abs(a.survival - b.survival)) < 1e-9


def test_ensemble_linearity(plan3):
    e1, e2 = Ensemble([-0.5, 0.1], [1, 1]), Ensemble([0.4, 0.8], [1, 1])
    both = Ensemble([-0.5, 0.1, 0.4, 0.8], [1, 1, 3, 3])
    r = [survival_curve(e, plan3.uninterrupted, T3, plan3.params, CFG, N).raw_survival
         for e in (e1, e2, both)]
    assert np.allclose(r[2], 0.25 * r[0] + 0.75 * r[1], atol=1e-12)


def test_weight_scaling_invariance(plan3):
    a = Ensemble([-0.5, 0.1, 0.6], [1, 2, 3])
    b = Ensemble([-0.5, 0.1, 0.6], [10, 20, 30])
    ca = survival_curve(a, plan3.uninterrupted, T3, plan3.params, CFG, N)
    cb = survival_curve(b, plan3.uninterrupted, T3, plan3.params, CFG, N)
    assert np.array_equal(ca.survival, cb.survival)


def test_threads_identical(plan3, ens):
    fam = plan3.interrupted(50e-6, 3e-6)
    a = survival_curve(ens, fam, T3, plan3.params, CFG, N, threads=1)
    b = survival_curve(ens, fam, T3, plan3.params, CFG, N, threads=3)
    assert np.array_equal(a.raw_survival, b.raw_survival)


def test_interrupted_family_shares_final_velocity(plan3):
    fam = plan3.interrupted(50e-6, 5e-6)
    ends = [fam(t).end_velocity for t in (0.0, 1e-6, 3e-6, 5e-6)]
    assert np.allclose(ends, ends[0], rtol=1e-12)
    assert ends[0] > plan3.v_final
    with pytest.raises(ScheduleError):
        fam(1.5e-6)


def test_response_filter_curve(plan3, ens):
    c = survival_curve(ens, plan3.uninterrupted, [0.0, 2e-6], plan3.params, CFG, N,
                       response_tau=0.2e-6)
    assert c.t_effective is not None and c.t_effective.shape == (2,)
    tau, lo, hi = 0.2e-6, 2000.0, 15000.0
    rise = -tau * np.log((0.9 * hi - hi) / (lo - hi))
    fall = -tau * np.log((0.9 * hi - lo) / (hi - lo))
    assert c.t_effective[1] == pytest.approx(2e-6 - rise + fall, rel=1e-4)
    ideal = survival_curve(ens, plan3.uninterrupted, [0.0, 2e-6], plan3.params, CFG, N)
    assert abs(c.survival[1] - ideal.survival[1]) < 0.05


def test_detection_window_fresh_state(plan3):
    s = prepare_initial(make_ensemble(16).q, plan3.params, N)
    trapped, tunneled = detection_classify(s, plan3.params)
    assert np.all(trapped >= 0.98)
    assert np.allclose(trapped + tunneled, 1.0)


def test_detection_unbounded_window(plan3):
    run = run_schedule([0.1, -0.7], plan3.uninterrupted(3e-6), CFG, plan3.params, N)
    assert np.all(run.final_state.escaped > 0)
    trapped, _ = detection_classify(run.final_state, plan3.params, np.inf)
    assert np.allclose(trapped, 1.0, atol=1e-12)
    narrow, _ = detection_classify(run.final_state, plan3.params)
    assert np.all(narrow < 1.0)


def test_sweep_one_curve_per_duration(plan3, ens):
    curves = interruption_sweep(ens, plan3, [0.0, 10e-6], T3, CFG, N)
    assert len(curves) == 2
    assert all(c.survival[0] == 1.0 for c in curves)
    with pytest.raises(InvalidParameterError):
        interruption_sweep(ens, plan3, [], T3, CFG, N)


def test_run_schedule_checkpoints(plan3):
    run = run_schedule([0.0, 0.5], plan3.interrupted(50e-6, 3e-6)(3e-6), CFG, plan3.params, N)
    assert run.roles == ["tunnel", "tunnel", "tunnel", "end"]
    assert run.survival.shape == (4, 2)
    assert np.max(np.abs(run.final_state.total_probability() - 1)) < 1e-9


def test_shallow_lattice_warns():
    p = LatticeParams(depth_freq=1e3)
    plan = SequencePlan(p, a_tunnel=15000.0, a_interr=2000.0, t_segment=1e-6)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        survival_curve(make_ensemble(2), plan.uninterrupted, [0.0], p, CFG, N)
    assert any("binds no trapped band" in str(w.message) for w in rec)


def test_bad_time_grid(plan3, ens):
    with pytest.raises(InvalidParameterError):
        survival_curve(ens, plan3.uninterrupted, [], plan3.params, CFG, N)
    with pytest.raises(InvalidParameterError):
        survival_curve(ens, plan3.uninterrupted, [-1e-6], plan3.params, CFG, N)
