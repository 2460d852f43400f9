"""Fitting, plug-in estimation, and split-based null calibration."""

import dataclasses
import math

import numpy as np
import pytest
from scipy.special import expit

from stratabias.calibration import (ESTIMATORS, CalibrationError,
                                    EstimatorError, FitError,
                                    SeparationError, estimate_naive,
                                    estimate_plugin, fit_outcome_baseline,
                                    fit_sequential_logistic, split_calibrate,
                                    write_calibration_csv, write_fit_csv)
from stratabias.datagen import generate, observe
from stratabias.params import ScenarioConfig, load_bundled
from stratabias.quadrature import null_stratum_effect
from stratabias.strata import exact_mean

DEMO = load_bundled("full_null_demo").params


def trial(n, seed, keep_y=True, **over):
    cfg = ScenarioConfig(params=dataclasses.replace(DEMO, **over),
                         n=n, seed=seed)
    return observe(generate(cfg), keep_y_after_dropout=keep_y)


# ---------------------------------------------------------------- fits


def test_logistic_recovers_generating_coefficients():
    obs = trial(100_000, seed=31)
    fit = fit_sequential_logistic(obs, arm=1)
    assert fit.converged
    truth = (DEMO.gamma0, DEMO.gamma1)  # gamma2 = 0 here
    for k, vf in enumerate(fit.visits):
        assert vf.visit == k + 1
        for got, se, want in zip(vf.coef, vf.se,
                                 truth + (DEMO.gamma3[k],)):
            assert abs(got - want) <= 3.5 * se
    at_risk = [vf.n_at_risk for vf in fit.visits]
    assert at_risk == sorted(at_risk, reverse=True)


def test_logistic_nulls_are_recovered_as_zero():
    obs = trial(50_000, seed=32, gamma1=0.0, gamma3=[0.0, 0.0, 0.0])
    for vf in fit_sequential_logistic(obs, arm=1).visits:
        assert abs(vf.coef[1]) <= 3.5 * vf.se[1]
        assert abs(vf.coef[2]) <= 3.5 * vf.se[2]


def test_near_deterministic_adherence_is_separation():
    # a loading of 50 makes adherence almost an indicator of z's sign,
    # so the MLE walk crosses the quasi-separation cap on its way out
    obs = trial(2_000, seed=33, gamma0=0.0, gamma3=[50.0, 50.0, 50.0])
    with pytest.raises(SeparationError):
        fit_sequential_logistic(obs, arm=1)


def test_sparse_later_visit_is_a_fit_error():
    obs = trial(60, seed=34, gamma0=-2.5)
    with pytest.raises(FitError, match="at-risk"):
        fit_sequential_logistic(obs, arm=1)


def test_loglik_path_and_stationarity():
    """Monotone-to-slack likelihood path, and a truly stationary MLE."""
    obs = trial(20_000, seed=35)
    fit = fit_sequential_logistic(obs, arm=1)
    rows = obs.t == 1
    x, z, a = obs.x[rows], obs.z[rows], obs.a[rows]
    for k, vf in enumerate(fit.visits):
        steps = np.diff(np.asarray(vf.loglik_path))
        assert steps.min() >= -1e-8
        assert vf.loglik == vf.loglik_path[-1]
        assert vf.converged and vf.iterations == len(vf.loglik_path) - 1

        at_risk = ~np.isnan(z[:, k])
        if k + 1 < obs.K:
            r = (~np.isnan(z[at_risk, k + 1])).astype(float)
        else:
            r = (a[at_risk] == 1).astype(float)
        X = np.column_stack([np.ones(at_risk.sum()), x[at_risk],
                             z[at_risk, k]])
        grad = X.T @ (r - expit(X @ np.asarray(vf.coef)))
        assert np.abs(grad).max() <= 1e-8


def test_outcome_baseline_satisfies_normal_equations():
    obs = trial(20_000, seed=36)
    m0 = fit_outcome_baseline(obs, arm=0)
    rows = (obs.t == 0) & ~np.isnan(obs.y)
    resid = obs.y[rows] - m0.predict(obs.x[rows])
    scale = np.abs(obs.y[rows]).sum()
    assert abs(resid.sum()) <= 1e-10 * scale
    assert abs(resid @ obs.x[rows]) <= 1e-10 * scale * \
        np.abs(obs.x[rows]).max()
    assert m0.n == rows.sum()
    assert m0.predict(np.array([0.0]))[0] == m0.intercept


# ----------------------------------------------------------- estimators


def test_naive_is_null_under_exchangeable_arms():
    est = estimate_naive(trial(200_000, seed=37))
    assert abs(est.value) <= 3.5 * est.se


def test_naive_with_universal_adherence_is_arm_difference():
    obs = trial(5_000, seed=38, gamma0=50.0)
    est = estimate_naive(obs)
    assert est.n_members == len(obs)
    diff = exact_mean(obs.y[obs.t == 1]) - exact_mean(obs.y[obs.t == 0])
    assert est.value == diff


def test_plugin_tracks_closed_form():
    truth = null_stratum_effect(DEMO)
    est = estimate_plugin(trial(200_000, seed=39), compute_se=False)
    assert math.isnan(est.se)
    assert abs(est.value - truth) <= 0.02


def test_plugin_zero_regimes_report_zero():
    for over in ({"beta3": [0.0, 0.0, 0.0]}, {"gamma3": [0.0, 0.0, 0.0]}):
        est = estimate_plugin(trial(50_000, seed=40, **over),
                              seed=7, n_boot=80)
        assert est.se > 0
        assert abs(est.value) <= 3.5 * est.se


def test_plugin_with_flat_weights_is_unweighted_difference():
    """gamma1 = gamma3 = 0 makes the weighting inert up to fit noise."""
    obs = trial(40_000, seed=41, gamma1=0.0, gamma3=[0.0, 0.0, 0.0])
    est = estimate_plugin(obs, compute_se=False)
    rows1 = (obs.t == 1) & (obs.a == 1)
    m0 = fit_outcome_baseline(obs, arm=0)
    flat = exact_mean(obs.y[rows1]) - m0.predict(obs.x).mean()
    assert abs(est.value - flat) <= 0.01


def test_plugin_one_shot_adherence_mode():
    obs = trial(50_000, seed=42)
    truth = null_stratum_effect(DEMO)
    a = estimate_plugin(obs, compute_se=False).value
    b = estimate_plugin(obs, compute_se=False,
                        adherence_model="logistic").value
    assert abs(a - truth) <= 0.04
    assert abs(b - truth) <= 0.04
    with pytest.raises(ValueError, match="adherence_model"):
        estimate_plugin(obs, adherence_model="probit")


# ------------------------------------------------------ split calibration


def control_arm(n, seed, **over):
    obs = trial(n, seed, **over)
    return obs.subset(obs.t == 0)


def test_split_is_deterministic_order_free_and_thread_free():
    ctrl = control_arm(60_000, seed=43)
    base = split_calibrate(ctrl, "naive", R=10, seed=5)
    again = split_calibrate(ctrl, "naive", R=10, seed=5)
    assert base.offsets == again.offsets

    rng = np.random.default_rng(0)
    shuffled = ctrl.subset(rng.permutation(len(ctrl)))
    assert split_calibrate(shuffled, "naive", R=10, seed=5).offsets \
        == base.offsets

    threaded = split_calibrate(ctrl, "naive", R=10, seed=5, threads=4)
    assert threaded.offsets == base.offsets

    assert base.mean_offset == exact_mean(np.asarray(base.offsets))
    assert base.se_offset == pytest.approx(
        np.std(base.offsets, ddof=1) / math.sqrt(len(base.offsets)))


def test_split_plugin_offsets_are_order_free():
    ctrl = control_arm(20_000, seed=44)
    base = split_calibrate(ctrl, "plugin", R=4, seed=9)
    rng = np.random.default_rng(1)
    shuffled = ctrl.subset(rng.permutation(len(ctrl)))
    assert split_calibrate(shuffled, "plugin", R=4, seed=9).offsets \
        == base.offsets


def test_split_failure_accounting():
    ctrl = control_arm(4_000, seed=45)
    calls = {"n": 0}

    def flaky(obs, seed):
        calls["n"] += 1
        if calls["n"] == 3:
            raise EstimatorError("synthetic failure")
        return ESTIMATORS["naive"](obs, seed)

    cal = split_calibrate(ctrl, flaky, R=20, seed=1)
    assert cal.estimator == "flaky"
    assert cal.n_failed == 1
    assert len(cal.offsets) == 19

    def broken(obs, seed):
        raise FitError("always down")

    with pytest.raises(CalibrationError, match="limit 10%"):
        split_calibrate(ctrl, broken, R=10, seed=1)


def test_split_input_validation():
    obs = trial(1_000, seed=46)
    with pytest.raises(ValueError, match="control"):
        split_calibrate(obs, "naive", R=4)
    ctrl = obs.subset(obs.t == 0)
    with pytest.raises(ValueError, match="R"):
        split_calibrate(ctrl, "naive", R=1)
    with pytest.raises(ValueError, match="unknown estimator"):
        split_calibrate(ctrl, "oracle", R=4)
    with pytest.raises(ValueError, match="at least 4"):
        split_calibrate(ctrl.subset(np.arange(3)), "naive", R=4)


def test_split_offsets_match_real_trial_spread():
    """Pseudo-trials from control splits mimic genuinely re-randomized
    trials: under the full null the two offset distributions share a
    variance (checked as a ratio, which is scale-free)."""
    ctrl = control_arm(100_000, seed=47)
    cal = split_calibrate(ctrl, "naive", R=500, seed=11)
    assert cal.n_failed == 0
    var_split = np.var(cal.offsets, ddof=1)

    n_c = len(ctrl)
    reals = [estimate_naive(trial(n_c, seed=1_000 + b)).value
             for b in range(400)]
    var_real = np.var(reals, ddof=1)
    assert 0.7 <= var_split / var_real <= 1.4


# ------------------------------------------------------------- outputs


def test_csv_writers_round_trip(tmp_path):
    ctrl = control_arm(4_000, seed=48)
    cal = split_calibrate(ctrl, "naive", R=5, seed=2)
    path = tmp_path / "calibration.csv"
    write_calibration_csv([("demo", cal)], path)
    header, row = path.read_text().splitlines()
    assert header == \
        "scenario_label,estimator,R,mean_offset,se_offset,n_failed_splits"
    cells = row.split(",")
    assert cells[:3] == ["demo", "naive", "5"]
    assert float(cells[3]) == cal.mean_offset

    fit = fit_sequential_logistic(trial(20_000, seed=49), arm=1)
    fit_path = tmp_path / "fit.csv"
    write_fit_csv(fit, fit_path)
    lines = fit_path.read_text().splitlines()
    assert lines[0] == ("visit,g0,g1,g3,se_g0,se_g1,se_g3,"
                        "n_at_risk,loglik,iterations,converged")
    assert len(lines) == 1 + len(fit.visits)
