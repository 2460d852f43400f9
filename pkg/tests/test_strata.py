"""Stratum oracle: membership, exact means, and the grouped-mean identity."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stratabias.datagen import SubjectData, generate
from stratabias.params import load_scenario
from stratabias.strata import (EmptyStratumError, S_BOTH, S_CONTROL,
                               S_TREATED, StratumLabel, bias_decomposition,
                               classify, exact_mean, members, oracle_effect,
                               tower_check, write_effects_csv)


def tiny_data(a0, a1, diff=None, x=None):
    """Hand-built SubjectData with prescribed adherence and differences."""
    n = len(a0)
    diff = np.zeros(n) if diff is None else np.asarray(diff, dtype=float)
    x = np.arange(n, dtype=float) if x is None else np.asarray(x, dtype=float)
    y = np.zeros((n, 2))
    y[:, 1] = diff
    a = np.column_stack([a0, a1]).astype(np.int8)
    a_seq = a[:, :, None].repeat(2, axis=2)
    return SubjectData(
        ids=np.arange(n, dtype=np.int64), x=x,
        t=np.zeros(n, dtype=np.int8), z=np.zeros((n, 2, 2)),
        eta=np.zeros((n, 2, 2)), eps=np.zeros((n, 2)), y=y,
        a_seq=a_seq, a=a)


def test_membership_predicates():
    data = tiny_data(a0=[1, 1, 0, 0], a1=[1, 0, 1, 0])
    assert members(data, S_BOTH).tolist() == [True, False, False, False]
    assert members(data, S_TREATED).tolist() == [True, False, True, False]
    assert members(data, S_CONTROL).tolist() == [True, True, False, False]
    assert classify(data[0], S_BOTH) and not classify(data[1], S_TREATED)
    free = StratumLabel(None, None, "S_**")
    assert members(data, free).all()


def test_stratum_nesting():
    data = generate(load_scenario(dict(
        mu_x=0, sigma_x=1, alpha0=[0], alpha1=[0.5], alpha2=[0],
        beta0=0, beta1=0, beta2=0, beta3=[0.4], sigma_eta=1, sigma_eps=1,
        gamma0=0.5, gamma1=0.3, gamma3=[0.5], K=1, n=20_000, seed=5)))
    both = members(data, S_BOTH)
    assert (both <= members(data, S_TREATED)).all()
    assert (both <= members(data, S_CONTROL)).all()


def test_oracle_effect_simple_values():
    data = tiny_data(a0=[1, 0, 1, 0], a1=[1, 1, 0, 1],
                     diff=[1.0, 2.0, 100.0, 6.0])
    est = oracle_effect(data, S_TREATED)
    assert est.value == 3.0 and est.n_members == 3
    assert est.stratum is S_TREATED
    single = oracle_effect(data, S_BOTH)
    assert single.value == 1.0 and single.se == 0.0


def test_empty_stratum_raises():
    data = tiny_data(a0=[0, 0], a1=[1, 1])
    with pytest.raises(EmptyStratumError, match="S_\\+\\+"):
        oracle_effect(data, S_BOTH)


def test_permutation_invariance_bitwise():
    cfg = load_scenario(dict(
        mu_x=0, sigma_x=1, alpha0=[0, 0], alpha1=[.5, .5], alpha2=[0, 0],
        beta0=1, beta1=.5, beta2=0, beta3=[.4, .4], sigma_eta=1, sigma_eps=1,
        gamma0=1, gamma1=.3, gamma3=[.5, .5], K=2, n=30_001, seed=9))
    data = generate(cfg)
    perm = np.random.default_rng(0).permutation(len(data))
    shuffled = SubjectData(
        ids=data.ids[perm], x=data.x[perm], t=data.t[perm], z=data.z[perm],
        eta=data.eta[perm], eps=data.eps[perm], y=data.y[perm],
        a_seq=data.a_seq[perm], a=data.a[perm])
    for label in (S_BOTH, S_TREATED, S_CONTROL):
        a = oracle_effect(data, label)
        b = oracle_effect(shuffled, label)
        assert a.value == b.value and a.se == b.se  # bit-for-bit
        lhs0, rhs0 = tower_check(data, label, n_bins=13)
        lhs1, rhs1 = tower_check(shuffled, label, n_bins=13)
        assert lhs0 == lhs1 == rhs0 == rhs1


@settings(max_examples=40, deadline=None)
@given(n=st.integers(min_value=2, max_value=300),
       n_bins=st.integers(min_value=2, max_value=25),
       seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_tower_identity_bitwise(n, n_bins, seed):
    rng = np.random.default_rng(seed)
    data = tiny_data(a0=rng.integers(0, 2, n), a1=np.ones(n, dtype=int),
                     diff=rng.normal(size=n) * 10.0 ** rng.integers(-3, 4),
                     x=rng.choice([0.0, 1.0, 2.5], size=n))  # heavy x ties
    if n_bins > n:
        with pytest.raises(ValueError, match="n_bins"):
            tower_check(data, S_TREATED, n_bins=n_bins)
        return
    lhs, rhs = tower_check(data, S_TREATED, n_bins=n_bins)
    assert lhs == rhs
    assert lhs == oracle_effect(data, S_TREATED).value


def test_tower_argument_validation():
    data = tiny_data(a0=[1, 1, 1], a1=[1, 1, 1])
    with pytest.raises(ValueError, match="n_bins"):
        tower_check(data, S_TREATED, n_bins=1)
    with pytest.raises(EmptyStratumError):
        tower_check(tiny_data(a0=[1], a1=[0]), S_TREATED, n_bins=2)


def test_bias_decomposition_identity():
    """shift difference == stratum effect - unconditional contrast."""
    cfg = load_scenario(dict(
        mu_x=0, sigma_x=1, alpha0=[0.2], alpha1=[0.5], alpha2=[0],
        beta0=1, beta1=0.5, beta2=0, beta3=[0.6], sigma_eta=1, sigma_eps=1,
        gamma0=0.8, gamma1=0.3, gamma3=[0.7], K=1, n=40_000, seed=2))
    data = generate(cfg)
    rep = bias_decomposition(data)
    est = oracle_effect(data, S_TREATED)
    lhs = rep.shift_treated - rep.shift_control
    rhs = est.value - (exact_mean(data.y[:, 1]) - exact_mean(data.y[:, 0]))
    assert abs(lhs - rhs) < 1e-12
    assert rep.n_members == est.n_members
    # under selection, the treated-arm shift should dominate
    assert rep.shift_treated > rep.shift_control > 0


def test_effects_csv(tmp_path):
    data = tiny_data(a0=[1, 0, 1], a1=[1, 1, 1], diff=[1.0, 2.0, 3.0])
    est = oracle_effect(data, S_TREATED)
    path = tmp_path / "effects.csv"
    write_effects_csv([("demo", S_TREATED.code, est)], path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "scenario_label,stratum,n_members,value,se"
    label, code, m, value, se = lines[1].split(",")
    assert (label, code, m) == ("demo", "S_*+", "3")
    assert float(value) == est.value and float(se) == est.se
