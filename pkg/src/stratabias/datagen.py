"""Potential-outcome trial data under the linear/logistic generative model.

For each subject the full counterfactual table is generated: baseline
covariate X, assigned arm T, and under *both* arms t in {0, 1} the
intermediate outcomes, final outcome, and sequential adherence:

    X ~ Normal(mu_x, sigma_x^2)
    Z_k(t) = alpha0_k + alpha1_k * X + alpha2_k * t + eta_k(t)
    Y(t)   = beta0 + beta1 * X + beta2 * t + sum_k beta3_k * Z_k(t) + eps(t)

    Pr(A_k(t) = 1 | A_{k-1}(t) = 1, X, Z_k(t))
           = logistic(gamma0 + gamma2 * t + gamma1 * X + gamma3_k * Z_k(t))

with A_0(t) = 1 by convention, eta and eps independent normals, and
overall adherence A(t) = prod_k A_k(t).  Non-adherence is absorbing:
once a subject drops at visit k it stays dropped for all later visits.

Every subject consumes a fixed layout of 4 + 4K uniform draws from the
counter-based stream (see :mod:`stratabias.rng`):

    draw 0              X
    draw 1              arm assignment T
    draws 2 .. 2+2K-1   eta, ordered (t=0, k=1..K) then (t=1, k=1..K)
    draws 2+2K, 3+2K    eps(0), eps(1)
    draws 4+2K ..       adherence uniforms, same (t, k) ordering

Normals come from the uniforms by inverse CDF, and a visit adheres when
its uniform falls below the logistic probability, so raising gamma0 with
the same seed can only turn non-adherers into adherers, never the
reverse.  The fixed layout makes each record a pure function of
(seed, id) - chunking and parallelism cannot change the data.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

import numpy as np
from scipy.special import expit, ndtri

from .params import ModelParams, ScenarioConfig
from .rng import uniform_matrix

_CHUNK = 1 << 18

FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class SubjectRecord:
    """One subject's complete potential-outcome row (both arms)."""

    id: int
    x: float
    t_assigned: int
    z: np.ndarray        # (2, K)  intermediates under arm t
    eta: np.ndarray      # (2, K)
    eps: np.ndarray      # (2,)
    y: np.ndarray        # (2,)    outcome under arm t
    a_seq: np.ndarray    # (2, K)  per-visit adherence
    a: np.ndarray        # (2,)    overall adherence


@dataclass(frozen=True)
class ObservedRecord:
    """The trial-visible projection of one subject under its assigned arm."""

    id: int
    x: float
    t_assigned: int
    z_obs: tuple[Optional[float], ...]
    a_obs: int
    y_obs: Optional[float]


class SubjectData:
    """Columnar container of generated subjects.

    Column arrays are exposed directly for vectorized work; indexing with
    an int yields a :class:`SubjectRecord` view, so the object doubles as
    a sequence of per-subject records.
    """

    def __init__(self, ids, x, t, z, eta, eps, y, a_seq, a):
        self.ids = ids
        self.x = x
        self.t = t
        self.z = z          # (n, 2, K)
        self.eta = eta      # (n, 2, K)
        self.eps = eps      # (n, 2)
        self.y = y          # (n, 2)
        self.a_seq = a_seq  # (n, 2, K)
        self.a = a          # (n, 2)

    def __len__(self) -> int:
        return self.ids.shape[0]

    def __getitem__(self, i: int) -> SubjectRecord:
        return SubjectRecord(
            id=int(self.ids[i]), x=float(self.x[i]), t_assigned=int(self.t[i]),
            z=self.z[i].copy(), eta=self.eta[i].copy(), eps=self.eps[i].copy(),
            y=self.y[i].copy(), a_seq=self.a_seq[i].copy(), a=self.a[i].copy(),
        )

    def __iter__(self) -> Iterator[SubjectRecord]:
        return (self[i] for i in range(len(self)))

    @property
    def diff(self) -> np.ndarray:
        """Per-subject treatment contrast y(1) - y(0)."""
        return self.y[:, 1] - self.y[:, 0]


class ObservedData:
    """Columnar observed view: one arm per subject, NaN marks missing."""

    def __init__(self, ids, x, t, z, a, y, K: int):
        self.ids = ids
        self.x = x
        self.t = t
        self.z = z  # (n, K), NaN where the visit never happened
        self.a = a
        self.y = y  # (n,), NaN where unobserved
        self.K = K

    def __len__(self) -> int:
        return self.ids.shape[0]

    def __getitem__(self, i: int) -> ObservedRecord:
        z_row = tuple(None if np.isnan(v) else float(v) for v in self.z[i])
        y_v = self.y[i]
        return ObservedRecord(
            id=int(self.ids[i]), x=float(self.x[i]), t_assigned=int(self.t[i]),
            z_obs=z_row, a_obs=int(self.a[i]),
            y_obs=None if np.isnan(y_v) else float(y_v),
        )

    def __iter__(self) -> Iterator[ObservedRecord]:
        return (self[i] for i in range(len(self)))

    def subset(self, mask: np.ndarray) -> "ObservedData":
        return ObservedData(self.ids[mask], self.x[mask], self.t[mask],
                            self.z[mask], self.a[mask], self.y[mask], self.K)

    def relabeled(self, t_new: np.ndarray) -> "ObservedData":
        """Copy with a replaced arm column (used by split calibration)."""
        return ObservedData(self.ids, self.x, t_new.astype(self.t.dtype),
                            self.z, self.a, self.y, self.K)


def draws_per_subject(K: int) -> int:
    return 4 + 4 * K


def generate_block(params: ModelParams, seed: int, ids: np.ndarray) -> SubjectData:
    """Generate the given subject ids; any id partition yields identical rows."""
    K = params.K
    n = ids.shape[0]
    out_x = np.empty(n)
    out_t = np.empty(n, dtype=np.int8)
    out_z = np.empty((n, 2, K))
    out_eta = np.empty((n, 2, K))
    out_eps = np.empty((n, 2))
    out_y = np.empty((n, 2))
    out_aseq = np.empty((n, 2, K), dtype=np.int8)
    out_a = np.empty((n, 2), dtype=np.int8)

    alpha0 = np.asarray(params.alpha0)
    alpha1 = np.asarray(params.alpha1)
    alpha2 = np.asarray(params.alpha2)
    beta3 = np.asarray(params.beta3)

    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        sl = slice(lo, hi)
        u = uniform_matrix(seed, ids[sl], draws_per_subject(K))

        x = params.mu_x + params.sigma_x * ndtri(u[:, 0])
        t = (u[:, 1] < params.p_treat).astype(np.int8)
        eta = params.sigma_eta * ndtri(u[:, 2:2 + 2 * K]).reshape(-1, 2, K)
        eps = params.sigma_eps * ndtri(u[:, 2 + 2 * K:4 + 2 * K])
        u_adh = u[:, 4 + 2 * K:]

        z = np.empty((hi - lo, 2, K))
        y = np.empty((hi - lo, 2))
        a_seq = np.empty((hi - lo, 2, K), dtype=np.int8)
        for arm in (0, 1):
            for k in range(K):
                z[:, arm, k] = alpha0[k] + alpha1[k] * x + alpha2[k] * arm + eta[:, arm, k]
            acc = beta3[0] * z[:, arm, 0]
            for k in range(1, K):
                acc = acc + beta3[k] * z[:, arm, k]
            y[:, arm] = params.beta0 + params.beta1 * x + params.beta2 * arm + acc + eps[:, arm]
            alive = np.ones(hi - lo, dtype=bool)
            for k in range(K):
                p = expit(params.gamma0 + params.gamma2 * arm
                          + params.gamma1 * x + params.gamma3[k] * z[:, arm, k])
                adhere = (u_adh[:, arm * K + k] < p) & alive
                a_seq[:, arm, k] = adhere
                alive = adhere

        out_x[sl] = x
        out_t[sl] = t
        out_z[sl] = z
        out_eta[sl] = eta
        out_eps[sl] = eps
        out_y[sl] = y
        out_aseq[sl] = a_seq
        out_a[sl] = a_seq[:, :, K - 1]

    return SubjectData(ids.astype(np.int64), out_x, out_t, out_z, out_eta,
                       out_eps, out_y, out_aseq, out_a)


def generate(config: ScenarioConfig) -> SubjectData:
    """Generate the scenario's n subjects with ids 0..n-1."""
    ids = np.arange(config.n, dtype=np.int64)
    return generate_block(config.params, config.seed, ids)


def observe(data: SubjectData, keep_y_after_dropout: bool = False) -> ObservedData:
    """Project to the assigned-arm view with monotone missingness.

    Visit k's intermediate is observed when the subject was still
    adherent after visit k-1 (the visit happens, then adherence right
    after it is decided), so the value at the dropout visit itself is
    seen.  The outcome is observed for adherers, or for everyone when
    ``keep_y_after_dropout`` is set.
    """
    n = len(data)
    K = data.z.shape[2]
    arm = data.t.astype(np.int64)
    rows = np.arange(n)

    z_obs = data.z[rows, arm, :].copy()
    a_seq_assigned = data.a_seq[rows, arm, :]
    for k in range(1, K):
        z_obs[a_seq_assigned[:, k - 1] == 0, k] = np.nan

    a_obs = data.a[rows, arm]
    y_obs = data.y[rows, arm].copy()
    if not keep_y_after_dropout:
        y_obs[a_obs == 0] = np.nan
    return ObservedData(data.ids.copy(), data.x.copy(), data.t.copy(),
                        z_obs, a_obs.copy(), y_obs, K)


def _fmt(v: float) -> str:
    return FLOAT_FMT % v


def write_subjects_csv(data: SubjectData, path: str | Path) -> None:
    """Full potential-outcome table, floats at 17 significant digits."""
    K = data.z.shape[2]
    header = (["id", "x", "t"]
              + [f"z0_{k+1}" for k in range(K)] + [f"z1_{k+1}" for k in range(K)]
              + ["y0", "y1"]
              + [f"a0_{k+1}" for k in range(K)] + [f"a1_{k+1}" for k in range(K)]
              + ["a0", "a1"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(len(data)):
            row = [int(data.ids[i]), _fmt(data.x[i]), int(data.t[i])]
            row += [_fmt(v) for v in data.z[i, 0]] + [_fmt(v) for v in data.z[i, 1]]
            row += [_fmt(data.y[i, 0]), _fmt(data.y[i, 1])]
            row += [int(v) for v in data.a_seq[i, 0]] + [int(v) for v in data.a_seq[i, 1]]
            row += [int(data.a[i, 0]), int(data.a[i, 1])]
            w.writerow(row)


def write_observed_csv(obs: ObservedData, path: str | Path) -> None:
    """Observed-data table; empty cell = missing."""
    header = ["id", "x", "t"] + [f"z_{k+1}" for k in range(obs.K)] + ["a", "y"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(len(obs)):
            row = [int(obs.ids[i]), _fmt(obs.x[i]), int(obs.t[i])]
            row += ["" if np.isnan(v) else _fmt(v) for v in obs.z[i]]
            row.append(int(obs.a[i]))
            row.append("" if np.isnan(obs.y[i]) else _fmt(obs.y[i]))
            w.writerow(row)
