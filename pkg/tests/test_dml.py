import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kernel_cblb.core import Dataset
from kernel_cblb.dgp import ate_outcome_mean, ate_propensity, generate_ate
from kernel_cblb.dml import (
    DMLConfig,
    DMLPlugin,
    TooManyFolds,
    aipw_scores,
    dml_contributions,
    dml_fit,
    kfold_split,
)
from kernel_cblb.numerics import RngStream
from kernel_cblb.svm import SingleClassFold


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 300), k=st.integers(1, 20), seed=st.integers(0, 2**32 - 1))
def test_kfold_is_partition(n, k, seed):
    if k > n:
        with pytest.raises(TooManyFolds):
            kfold_split(np.random.default_rng(seed), n, k)
        return
    folds = kfold_split(np.random.default_rng(seed), n, k)
    assert len(folds) == k
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1
    assert np.array_equal(np.sort(np.concatenate(folds)), np.arange(n))


def test_aipw_hand_example():
    y = np.array([1.0, 2.0])
    a = np.array([1, 0])
    theta = aipw_scores(y, a, np.array([0.5, 0.25]), np.array([0.0, 1.0]), np.array([0.5, 0.5]))
    # unit 0: 0.5 + (1 - 0.5)/0.5 - 0 = 1.5 ; unit 1: 0.5 - (1 + (2 - 1)/0.75)
    np.testing.assert_allclose(theta, [1.5, 0.5 - (1.0 + 1.0 / 0.75)], rtol=1e-15)


def constant_nuisance(pi, m0=0.0, m1=0.0):
    def nuisance(X_train, A_train, Y_train, X_eval):
        k = len(X_eval)
        return np.full(k, pi), np.full(k, m0), np.full(k, m1)
    return nuisance


def oracle_nuisance(X_train, A_train, Y_train, X_eval):
    return ate_propensity(X_eval), ate_outcome_mean(X_eval, 0), ate_outcome_mean(X_eval, 1)


def test_horvitz_thompson_collapse(small_ate):
    c = dml_contributions(small_ate, DMLConfig(), RngStream(1), constant_nuisance(0.5))
    y, a = small_ate.outcomes, small_ate.treatments
    np.testing.assert_allclose(c.values, np.where(a == 1, 2 * y, -2 * y), rtol=1e-14)


def test_oracle_nuisances_recover_effect():
    d = generate_ate(RngStream(31), 5000)
    theta = dml_contributions(d, DMLConfig(), RngStream(2), oracle_nuisance).values
    assert abs(theta.mean() - 0.8) <= 3 * theta.std(ddof=1) / np.sqrt(d.n)


def test_propensity_clipped(small_ate):
    for raw, expected in ((0.0, 0.01), (1.0, 0.99), (1e-9, 0.01)):
        fit = dml_fit(small_ate, DMLConfig(), RngStream(3), constant_nuisance(raw))
        assert np.all(fit.propensity == expected)
    fit = dml_fit(small_ate, DMLConfig(propensity_clip=0.1), RngStream(3), constant_nuisance(0.05))
    assert np.all(fit.propensity == 0.1)


def test_cross_fitting_is_honest(small_ate):
    fit = dml_fit(small_ate, DMLConfig(), RngStream(4))
    held_count = np.zeros(small_ate.n, dtype=int)
    for held, train in zip(fit.folds, fit.train_index):
        assert np.intersect1d(held, train).size == 0
        assert held.size + train.size == small_ate.n
        held_count[held] += 1
    assert np.all(held_count == 1)
    assert np.all((fit.propensity >= 0.01) & (fit.propensity <= 0.99))


def test_held_out_units_do_not_influence_their_own_nuisances(small_ate):
    seen = []

    def recording(X_train, A_train, Y_train, X_eval):
        seen.append((X_train.copy(), X_eval.copy()))
        return oracle_nuisance(X_train, A_train, Y_train, X_eval)

    dml_fit(small_ate, DMLConfig(), RngStream(5), recording)
    for X_train, X_eval in seen:
        train_rows = {tuple(r) for r in X_train}
        assert not any(tuple(r) in train_rows for r in X_eval)


def test_pointwise_nuisance_permutation_equivariant(small_ate, gen):
    perm = gen.permutation(small_ate.n)
    d = small_ate
    dp = Dataset(d.outcomes[perm], d.treatments[perm], d.covariates[perm])
    c = dml_contributions(d, DMLConfig(), RngStream(6), oracle_nuisance).values
    cp = dml_contributions(dp, DMLConfig(), RngStream(7), oracle_nuisance).values
    np.testing.assert_allclose(cp, c[perm], rtol=1e-14)


def test_too_few_treated_raises():
    X = np.arange(20, dtype=float).reshape(-1, 1)
    a = np.zeros(20, dtype=int)
    a[0] = 1
    with pytest.raises(SingleClassFold):
        dml_fit(Dataset(X[:, 0], a, X), DMLConfig(), RngStream(8))


def test_bad_config():
    with pytest.raises(ValueError):
        DMLConfig(n_folds=1)
    with pytest.raises(ValueError):
        DMLConfig(propensity_clip=0.5)


def test_reproducible_given_stream(small_ate):
    a = DMLPlugin()(small_ate, RngStream(9, (1,)))
    b = DMLPlugin()(small_ate, RngStream(9, (1,)))
    assert np.array_equal(a.values, b.values)


def test_full_sample_estimate_near_truth():
    d = generate_ate(RngStream(32), 4000)
    theta = DMLPlugin()(d, RngStream(10)).values
    assert np.all(np.isfinite(theta))
    assert abs(theta.mean() - 0.8) <= 3 * theta.std(ddof=1) / np.sqrt(d.n)
