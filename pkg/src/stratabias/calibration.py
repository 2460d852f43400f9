"""Observed-data estimators and random-split null calibration.

Two estimators of the treated-adherent stratum effect work from observed
data only (one arm per subject):

* ``estimate_naive`` - adherers-vs-adherers mean difference.  It does
  not target the stratum effect; it is the baseline comparator whose
  expectation stays 0 under a full null.
* ``estimate_plugin`` - term1 - term2 with term1 the experimental-arm
  adherer mean and term2 a marginal-adherence-weighted average of a
  fitted control-arm outcome model over all subjects.  The adherence
  weight pi(x) marginalizes the fitted sequential-logistic visit model
  over simulated intermediate paths, staying consistent with the
  generative factorization; a one-shot logistic of final adherence on x
  (knowingly misspecified) is available as a fallback.

``split_calibrate`` implements the null-calibration idea: repeatedly
split the control arm at random into two pseudo-arms, run an estimator
on each pseudo-trial, and average.  Under a full null the pseudo-trial
is distributed exactly like a real trial of the same size, so the mean
offset recovers the estimator's null-scenario value.  The procedure
reads only control-arm data, so anything that changes adherence under
the experimental arm without touching the outcome pathway (gamma2 != 0)
is invisible to it - that regime is where the calibrated reference
stops matching the true stratum effect.

The control-arm outcome model in the plug-in estimator wants outcomes
recorded regardless of adherence; when outcomes are censored at dropout
the model is fit on adherers only and inherits their selection tilt.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Union

import numpy as np
from scipy.special import expit

from .datagen import ObservedData
from .strata import S_TREATED, EffectEstimate, exact_mean

_MAX_ITER = 50
_GRAD_TOL = 1e-8
_LL_SLACK = 1e-8
_COEF_CAP = 30.0
_MIN_AT_RISK = 10


class FitError(RuntimeError):
    """A working-model fit could not be completed."""


class SeparationError(FitError):
    """Quasi-separation: the likelihood has no finite maximizer."""


class EstimatorError(RuntimeError):
    """An effect estimator could not produce a value."""


class CalibrationError(RuntimeError):
    """Too many splits failed to calibrate against."""


@dataclass(frozen=True)
class VisitFit:
    """One visit's logistic fit: logit Pr(adhere) = g0 + g1*x + g3*z."""

    visit: int
    coef: tuple[float, float, float]
    se: tuple[float, float, float]
    n_at_risk: int
    loglik: float
    loglik_path: tuple[float, ...]
    iterations: int
    converged: bool


@dataclass(frozen=True)
class LogisticFit:
    """Sequential per-visit logistic fits for one arm."""

    visits: tuple[VisitFit, ...]

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([v.coef for v in self.visits])

    @property
    def converged(self) -> bool:
        return all(v.converged for v in self.visits)

    @property
    def iterations(self) -> int:
        return max(v.iterations for v in self.visits)

    @property
    def loglik(self) -> float:
        return math.fsum(v.loglik for v in self.visits)


@dataclass(frozen=True)
class OutcomeFit:
    """Least-squares line for the control-arm outcome given baseline x."""

    intercept: float
    slope_x: float
    residual_sd: float
    n: int

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.intercept + self.slope_x * x


@dataclass(frozen=True)
class SplitCalibration:
    """Null-reference offsets from repeated control-arm splits."""

    estimator: str
    R: int
    offsets: tuple[float, ...]
    mean_offset: float
    se_offset: float
    n_failed: int


def _loglik(eta: np.ndarray, r: np.ndarray) -> float:
    return float(np.sum(r * eta) - np.sum(np.logaddexp(0.0, eta)))


def _irls(X: np.ndarray, r: np.ndarray, what: str):
    """Newton/IRLS logistic fit with a monotone line search.

    Returns (beta, se, loglik_path, iterations, converged).  Updates are
    accepted only when the log-likelihood does not decrease beyond
    summation roundoff (slack 1e-8 on a sum of thousands of terms), so
    the reported path is non-decreasing at float resolution; without the
    slack the line search stalls in the endgame, where full Newton steps
    still shrink the gradient but move the log-likelihood by under an ulp.
    """
    beta = np.zeros(X.shape[1])
    ll = _loglik(X @ beta, r)
    path = [ll]
    converged = False
    for _ in range(_MAX_ITER):
        mu = expit(X @ beta)
        grad = X.T @ (r - mu)
        if float(np.max(np.abs(grad))) <= _GRAD_TOL:
            converged = True
            break
        w = mu * (1.0 - mu)
        try:
            step = np.linalg.solve(X.T @ (X * w[:, None]), grad)
        except np.linalg.LinAlgError:
            raise SeparationError(
                f"quasi-separation while fitting {what}: "
                "singular information matrix") from None
        for _ in range(40):
            cand = beta + step
            ll_new = _loglik(X @ cand, r)
            if ll_new >= ll - _LL_SLACK:
                break
            step = 0.5 * step
        else:
            break  # no ascent direction left at float resolution
        beta, ll = cand, ll_new
        path.append(ll)
        if float(np.max(np.abs(beta))) > _COEF_CAP:
            raise SeparationError(
                f"quasi-separation while fitting {what}: "
                f"|coefficient| exceeded {_COEF_CAP:g}")
    mu = expit(X @ beta)
    w = mu * (1.0 - mu)
    try:
        cov = np.linalg.inv(X.T @ (X * w[:, None]))
    except np.linalg.LinAlgError:
        raise SeparationError(
            f"quasi-separation while fitting {what}: "
            "singular information matrix at the fit") from None
    se = np.sqrt(np.diag(cov))
    return beta, se, tuple(path), len(path) - 1, converged


def fit_sequential_logistic(observed: ObservedData, arm: int) -> LogisticFit:
    """Per-visit adherence model for one arm, by maximum likelihood.

    The at-risk set for visit k is everyone still adherent after visit
    k-1, i.e. everyone whose z_k was recorded; the response is survival
    through visit k (z_{k+1} recorded, or final adherence at the last
    visit).  Within an arm any arm-level intercept shift is absorbed
    into g0.
    """
    rows = observed.t == arm
    x = observed.x[rows]
    z = observed.z[rows]
    a = observed.a[rows]
    K = observed.K
    visits = []
    for k in range(K):
        at_risk = ~np.isnan(z[:, k])
        m = int(at_risk.sum())
        if m < _MIN_AT_RISK:
            raise FitError(
                f"visit {k + 1} in arm {arm}: only {m} at-risk subjects "
                f"(need >= {_MIN_AT_RISK})")
        if k + 1 < K:
            resp = ~np.isnan(z[at_risk, k + 1])
        else:
            resp = a[at_risk] == 1
        X = np.column_stack([np.ones(m), x[at_risk], z[at_risk, k]])
        beta, se, path, iters, conv = _irls(
            X, resp.astype(float), f"visit {k + 1} in arm {arm}")
        visits.append(VisitFit(
            visit=k + 1, coef=tuple(map(float, beta)),
            se=tuple(map(float, se)), n_at_risk=m, loglik=path[-1],
            loglik_path=path, iterations=iters, converged=conv))
    return LogisticFit(visits=tuple(visits))


def fit_outcome_baseline(observed: ObservedData, arm: int = 0) -> OutcomeFit:
    """Least squares of the observed outcome on baseline x within an arm."""
    rows = (observed.t == arm) & ~np.isnan(observed.y)
    m = int(rows.sum())
    if m < 3:
        raise FitError(f"arm {arm}: only {m} subjects with observed outcome")
    X = np.column_stack([np.ones(m), observed.x[rows]])
    coef, _, _, _ = np.linalg.lstsq(X, observed.y[rows], rcond=None)
    resid = observed.y[rows] - X @ coef
    sd = math.sqrt(float(resid @ resid) / (m - 2)) if m > 2 else 0.0
    return OutcomeFit(intercept=float(coef[0]), slope_x=float(coef[1]),
                      residual_sd=sd, n=m)


def _fit_visit_linear(observed: ObservedData, arm: int):
    """Per-visit least-squares models z_k ~ x on the arm's at-risk subjects."""
    rows = observed.t == arm
    x = observed.x[rows]
    z = observed.z[rows]
    models = []
    for k in range(observed.K):
        at_risk = ~np.isnan(z[:, k])
        m = int(at_risk.sum())
        if m < 3:
            raise FitError(
                f"visit {k + 1} in arm {arm}: only {m} at-risk subjects")
        X = np.column_stack([np.ones(m), x[at_risk]])
        coef, _, _, _ = np.linalg.lstsq(X, z[at_risk, k], rcond=None)
        resid = z[at_risk, k] - X @ coef
        sd = math.sqrt(float(resid @ resid) / (m - 2))
        models.append((float(coef[0]), float(coef[1]), sd))
    return models


def _marginal_pi(x_eval: np.ndarray, fit: LogisticFit, z_models,
                 m_paths: int, rng: np.random.Generator,
                 n_grid: int) -> np.ndarray:
    """Marginal adherence probability under arm 1, as a function of x.

    The sequential model is conditional on each visit's intermediate, so
    the marginal over intermediates is not logistic; it is computed by
    simulating m_paths intermediate paths from the fitted visit-level
    linear models and averaging the product of visit probabilities.  The
    average is evaluated on an x-grid spanning the data and interpolated
    to the subjects; the function is smooth in x, so grid error is
    negligible next to the path-simulation noise.
    """
    lo, hi = float(x_eval.min()), float(x_eval.max())
    grid = np.linspace(lo, hi, n_grid) if hi > lo else np.array([lo])
    acc = np.ones((grid.size, m_paths))
    for vf, (az, bz, sz) in zip(fit.visits, z_models):
        zsim = az + bz * grid[:, None] \
            + sz * rng.standard_normal((grid.size, m_paths))
        g0, g1, g3 = vf.coef
        acc *= expit(g0 + g1 * grid[:, None] + g3 * zsim)
    return np.interp(x_eval, grid, acc.mean(axis=1))


def _one_shot_pi(observed: ObservedData) -> np.ndarray:
    """Fallback: misspecified one-shot logistic of final adherence on x."""
    rows = observed.t == 1
    m = int(rows.sum())
    if m < _MIN_AT_RISK:
        raise FitError(f"arm 1: only {m} subjects")
    X = np.column_stack([np.ones(m), observed.x[rows]])
    beta, _, _, _, _ = _irls(X, (observed.a[rows] == 1).astype(float),
                             "one-shot adherence model")
    return expit(beta[0] + beta[1] * observed.x)


def _plugin_point(observed: ObservedData, rng: np.random.Generator,
                  m_paths: int, adherence_model: str, n_grid: int) -> float:
    arm1_adherers = (observed.t == 1) & (observed.a == 1) \
        & ~np.isnan(observed.y)
    if not arm1_adherers.any():
        raise EstimatorError("no adherers with observed outcome in arm 1")
    term1 = exact_mean(observed.y[arm1_adherers])

    m0 = fit_outcome_baseline(observed, arm=0)
    if adherence_model == "simulate":
        fit = fit_sequential_logistic(observed, arm=1)
        z_models = _fit_visit_linear(observed, arm=1)
        pi = _marginal_pi(observed.x, fit, z_models, m_paths, rng, n_grid)
    elif adherence_model == "logistic":
        pi = _one_shot_pi(observed)
    else:
        raise ValueError(f"unknown adherence_model {adherence_model!r}")
    total = float(pi.sum())
    if total <= 0.0:
        raise EstimatorError("estimated adherence probabilities sum to zero")
    term2 = float(pi @ m0.predict(observed.x)) / total
    return term1 - term2


def estimate_naive(observed: ObservedData) -> EffectEstimate:
    """Adherers-vs-adherers mean difference with a two-sample SE.

    Exchangeable arms make its expectation 0 regardless of selection, so
    it does not target the treated-adherent stratum effect; it is the
    comparator the calibration procedure is meant to out-perform.
    """
    sides = []
    for arm in (0, 1):
        mask = (observed.t == arm) & (observed.a == 1) \
            & ~np.isnan(observed.y)
        m = int(mask.sum())
        if m == 0:
            raise EstimatorError(
                f"no adherers with observed outcome in arm {arm}")
        y = observed.y[mask]
        sides.append((exact_mean(y), float(np.var(y, ddof=1)) if m > 1
                      else 0.0, m))
    (mean0, var0, n0), (mean1, var1, n1) = sides
    return EffectEstimate(value=mean1 - mean0,
                          se=math.sqrt(var1 / n1 + var0 / n0),
                          n_members=n0 + n1, stratum=None)


def estimate_plugin(observed: ObservedData, *, seed: int = 0,
                    m_paths: int = 200, n_boot: int = 200,
                    compute_se: bool = True,
                    adherence_model: str = "simulate",
                    n_grid: int = 512) -> EffectEstimate:
    """Plug-in estimate of the treated-adherent stratum effect.

    term1 is the experimental-arm adherer mean.  term2 averages the
    fitted control-arm outcome line over ALL subjects, weighted by each
    subject's marginal adherence probability under arm 1 - the
    observed-data counterpart of conditioning the control response on
    adherence under the other arm.  The SE is a subject-level bootstrap
    (n_boot resamples); pass compute_se=False for the point value alone
    (se is then NaN).  Resamples that fail to fit are skipped, erroring
    when more than 10% fail.
    """
    value = _plugin_point(observed, np.random.default_rng([seed, 0]),
                          m_paths, adherence_model, n_grid)
    se = float("nan")
    if compute_se:
        n = len(observed)
        vals = []
        failures = []
        for b in range(n_boot):
            rng = np.random.default_rng([seed, 1 + b])
            sub = observed.subset(rng.integers(0, n, n))
            try:
                vals.append(_plugin_point(sub, rng, m_paths,
                                          adherence_model, n_grid))
            except (FitError, EstimatorError) as exc:
                failures.append(f"resample {b}: {exc}")
        if len(failures) * 10 > n_boot:
            raise EstimatorError(
                f"{len(failures)} of {n_boot} bootstrap resamples failed; "
                f"first: {failures[0]}")
        se = float(np.std(np.asarray(vals), ddof=1))
    return EffectEstimate(value=value, se=se, n_members=len(observed),
                          stratum=S_TREATED)


ESTIMATORS: dict[str, Callable[[ObservedData, int], float]] = {
    "naive": lambda obs, seed: estimate_naive(obs).value,
    "plugin": lambda obs, seed: estimate_plugin(
        obs, seed=seed, compute_se=False).value,
}


def split_calibrate(observed_control: ObservedData,
                    estimator: Union[str, Callable[[ObservedData, int], float]]
                    = "plugin",
                    R: int = 200, seed: int = 0,
                    threads: int = 1) -> SplitCalibration:
    """Null-calibrate an estimator by repeated control-arm splitting.

    Each of the R rounds shuffles the control subjects (id-keyed, so
    record order is irrelevant), relabels floor(n/2) of them as a
    pseudo experimental arm (the extra subject on odd counts stays
    control), and runs the estimator on the pseudo-trial.  Offsets are
    collected over rounds; failed rounds are recorded and skipped, and
    more than 10% failures is an error.  Every round derives its RNG
    stream and estimator seed from (seed, round), so results do not
    depend on scheduling; rounds may run on multiple threads.
    """
    if isinstance(estimator, str):
        try:
            fn = ESTIMATORS[estimator]
        except KeyError:
            raise ValueError(
                f"unknown estimator {estimator!r}; "
                f"choices: {sorted(ESTIMATORS)}") from None
        name = estimator
    else:
        fn, name = estimator, getattr(estimator, "__name__", "custom")
    if R < 2:
        raise ValueError("R must be >= 2")
    if np.any(observed_control.t != 0):
        raise ValueError("split_calibrate expects control-arm records only")
    n = len(observed_control)
    if n < 4:
        raise ValueError(f"need at least 4 control subjects, got {n}")

    canon = observed_control.subset(np.argsort(observed_control.ids))
    half = n // 2

    def one(r: int):
        rng = np.random.default_rng([seed, r])
        t_new = np.zeros(n, dtype=np.int8)
        t_new[rng.permutation(n)[:half]] = 1
        est_seed = int(rng.integers(np.iinfo(np.int64).max))
        try:
            return fn(canon.relabeled(t_new), est_seed), None
        except (FitError, EstimatorError) as exc:
            return None, f"split {r}: {exc}"

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(R)))
    else:
        results = [one(r) for r in range(R)]

    offsets = [v for v, _ in results if v is not None]
    failures = [msg for _, msg in results if msg is not None]
    if len(failures) * 10 > R:
        raise CalibrationError(
            f"{len(failures)} of {R} splits failed (limit 10%); "
            f"first: {failures[0]}")
    arr = np.asarray(offsets)
    return SplitCalibration(
        estimator=name, R=R, offsets=tuple(map(float, arr)),
        mean_offset=exact_mean(arr),
        se_offset=float(np.std(arr, ddof=1)) / math.sqrt(len(arr)),
        n_failed=len(failures))


def write_calibration_csv(rows: list[tuple[str, SplitCalibration]],
                          path: str | Path) -> None:
    """Calibration report; rows are (scenario_label, calibration)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario_label", "estimator", "R", "mean_offset",
                    "se_offset", "n_failed_splits"])
        for label, cal in rows:
            w.writerow([label, cal.estimator, cal.R,
                        "%.17g" % cal.mean_offset,
                        "%.17g" % cal.se_offset, cal.n_failed])


def write_fit_csv(fit: LogisticFit, path: str | Path) -> None:
    """Per-visit coefficient dump for a sequential logistic fit."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["visit", "g0", "g1", "g3", "se_g0", "se_g1", "se_g3",
                    "n_at_risk", "loglik", "iterations", "converged"])
        for v in fit.visits:
            w.writerow([v.visit] + ["%.17g" % c for c in v.coef]
                       + ["%.17g" % s for s in v.se]
                       + [v.n_at_risk, "%.17g" % v.loglik, v.iterations,
                          int(v.converged)])
