"""Principal-stratum classification and oracle effect estimates.

A stratum is a predicate on the pair of potential adherence indicators
(A(0), A(1)); membership needs both potential outcomes and is therefore
only computable in simulation ("oracle" access).  Three strata matter
here: adherent under both arms, adherent under the experimental arm, and
adherent under control.

All stratum means are computed with exactly-rounded summation
(math.fsum), so results are independent of record order and of how
members are grouped - the grouped-mean (tower) identity and permutation
invariance hold bit-for-bit, not just to rounding error.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .datagen import SubjectData, SubjectRecord


class EmptyStratumError(ValueError):
    """No subject belongs to the requested stratum."""


@dataclass(frozen=True)
class StratumLabel:
    """Membership predicate over (A(0), A(1)); None means 'any'."""

    req0: Optional[int]
    req1: Optional[int]
    code: str

    def matches(self, a0, a1):
        ok = np.ones(np.shape(a0), dtype=bool) if np.ndim(a0) else True
        if self.req0 is not None:
            ok = ok & (a0 == self.req0)
        if self.req1 is not None:
            ok = ok & (a1 == self.req1)
        return ok


S_BOTH = StratumLabel(1, 1, "S_++")         # adherent under both arms
S_TREATED = StratumLabel(None, 1, "S_*+")   # adherent under the experimental arm
S_CONTROL = StratumLabel(1, None, "S_+*")   # adherent under control


@dataclass(frozen=True)
class EffectEstimate:
    value: float
    se: float
    n_members: int
    stratum: Optional[StratumLabel] = None


@dataclass(frozen=True)
class BiasReport:
    """Conditional vs unconditional outcome means for the treated-adherent stratum."""

    mean_y1_given_a1: float
    mean_y0_given_a1: float
    mean_y1: float
    mean_y0: float
    n_members: int

    @property
    def shift_treated(self) -> float:
        """Selection shift of the experimental-arm outcome."""
        return self.mean_y1_given_a1 - self.mean_y1

    @property
    def shift_control(self) -> float:
        """Selection shift of the control-arm outcome."""
        return self.mean_y0_given_a1 - self.mean_y0


def exact_mean(values: np.ndarray) -> float:
    """Exactly-rounded mean: independent of summation order and grouping."""
    return math.fsum(values.tolist()) / len(values)


def classify(record: SubjectRecord, label: StratumLabel) -> bool:
    """Whether one subject belongs to the stratum."""
    return bool(label.matches(int(record.a[0]), int(record.a[1])))


def members(data: SubjectData, label: StratumLabel) -> np.ndarray:
    """Boolean membership mask over a dataset."""
    return label.matches(data.a[:, 0], data.a[:, 1])


def oracle_effect(data: SubjectData, label: StratumLabel) -> EffectEstimate:
    """Mean and SE of y(1) - y(0) over the stratum's members.

    The SE is the paired-difference SE (sample SD of per-member
    differences over sqrt of member count); both potential outcomes are
    known per subject, so no two-sample variance enters.
    """
    mask = members(data, label)
    m = int(mask.sum())
    if m == 0:
        raise EmptyStratumError(f"empty stratum {label.code}")
    d = data.diff[mask]
    d = d[np.argsort(data.ids[mask])]  # canonical order: permutation-proof SE
    value = exact_mean(d)
    se = float(np.std(d, ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    return EffectEstimate(value=value, se=se, n_members=m, stratum=label)


def tower_check(data: SubjectData, label: StratumLabel = S_TREATED,
                n_bins: int = 20) -> tuple[float, float]:
    """Compare the direct stratum mean against its grouped-mean form.

    lhs is the stratum mean of y(1) - y(0).  rhs regroups the members
    into ``n_bins`` equal-frequency bins on the baseline covariate (ties
    broken by id) and takes the membership-weighted average of within-bin
    means.  The weighted average of bin means is, in exact arithmetic,
    the mean over the concatenated partition, and both sides are reduced
    with exactly-rounded summation, so lhs == rhs bit-for-bit whenever
    the bins partition the members.
    """
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    mask = members(data, label)
    m = int(mask.sum())
    if m == 0:
        raise EmptyStratumError(f"empty stratum {label.code}")
    if n_bins > m:
        raise ValueError(f"n_bins={n_bins} exceeds stratum size {m}")

    d = data.diff[mask]
    lhs = exact_mean(d[np.argsort(data.ids[mask])])

    order = np.lexsort((data.ids[mask], data.x[mask]))
    bins = np.array_split(order, n_bins)
    rhs = exact_mean(d[np.concatenate(bins)])
    return lhs, rhs


def bias_decomposition(data: SubjectData) -> BiasReport:
    """Selection shifts of each arm's outcome under treated-adherent conditioning.

    The difference of the two shifts equals the treated-adherent stratum
    effect minus the unconditional mean contrast, an arithmetic identity
    on any dataset.
    """
    mask = members(data, S_TREATED)
    m = int(mask.sum())
    if m == 0:
        raise EmptyStratumError("empty stratum S_*+")
    return BiasReport(
        mean_y1_given_a1=exact_mean(data.y[mask, 1]),
        mean_y0_given_a1=exact_mean(data.y[mask, 0]),
        mean_y1=exact_mean(data.y[:, 1]),
        mean_y0=exact_mean(data.y[:, 0]),
        n_members=m,
    )


def write_effects_csv(rows: list[tuple[str, str, EffectEstimate]],
                      path: str | Path) -> None:
    """Effects report; rows are (scenario_label, stratum_code, estimate)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario_label", "stratum", "n_members", "value", "se"])
        for label, code, est in rows:
            w.writerow([label, code, est.n_members,
                        "%.17g" % est.value, "%.17g" % est.se])
