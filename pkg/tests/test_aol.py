import numpy as np
import pytest

from kernel_cblb.aol import (
    LAMBDA_GRID,
    AOLPlugin,
    aol_loss_contributions,
    aol_objective,
    aol_value_contributions,
    compute_residuals,
    estimate_propensity,
    fit_aol,
    fit_ridge_intercept,
    huberized_hinge,
    select_lambda,
)
from kernel_cblb.core import Dataset
from kernel_cblb.dgp import (
    OPTIMAL_VALUE,
    generate_policy,
    policy_outcome_mean,
    true_optimal_rule,
)
from kernel_cblb.kernels import KernelSpec, gram
from kernel_cblb.numerics import RngStream

LINEAR = KernelSpec()


def test_hinge_examples():
    assert huberized_hinge(2.0) == (0.0, 0.0)
    assert huberized_hinge(1.0) == (0.0, 0.0)
    assert huberized_hinge(0.5) == (0.125, -0.5)
    assert huberized_hinge(-1.0) == (1.5, -1.0)
    assert huberized_hinge(0.0, delta=0.5) == (0.75, -1.0)


def test_hinge_continuous_and_derivative_matches(gen):
    for delta in (0.3, 1.0, 2.5):
        knot = 1.0 - delta
        lo, _ = huberized_hinge(knot - 1e-12, delta)
        hi, _ = huberized_hinge(knot + 1e-12, delta)
        assert abs(lo - hi) < 1e-9
        u = gen.uniform(-3, 3, size=200)
        _, d = huberized_hinge(u, delta)
        h = 1e-6
        fd = (huberized_hinge(u + h, delta)[0] - huberized_hinge(u - h, delta)[0]) / (2 * h)
        assert np.abs(d - fd).max() < 1e-4


def test_hinge_rejects_bad_delta():
    with pytest.raises(ValueError):
        huberized_hinge(0.0, 0.0)


def test_residuals_sum_to_zero(small_policy):
    r = compute_residuals(small_policy, LINEAR)
    assert abs(r.sum()) < 1e-9 * small_policy.n


def test_residuals_vanish_for_linear_truth(gen):
    X = gen.normal(size=(30, 2))
    y = 1.5 + X @ np.array([2.0, -1.0])
    d = Dataset(y, np.where(gen.random(30) < 0.5, 1, -1), X)
    assert np.abs(compute_residuals(d, LINEAR, ridge=1e-10)).max() < 1e-6
    const = Dataset(np.full(30, 4.0), d.treatments, X)
    assert np.abs(compute_residuals(const, LINEAR)).max() < 1e-12


def test_ridge_intercept_matches_direct_solve(gen):
    X = gen.normal(size=(25, 3))
    y = gen.normal(size=25)
    K = X @ X.T
    ridge = 0.7
    coef, intercept, _, fitted = fit_ridge_intercept(K, y, ridge)
    # direct normal equations of  ||y - c - K a||^2 + ridge a'Ka  with a'1 = 0
    P = np.eye(25) - 1.0 / 25
    a = np.linalg.solve(P @ K @ P + ridge * np.eye(25), P @ y)
    np.testing.assert_allclose(P @ K @ P @ a + y.mean(), fitted, atol=1e-10)
    np.testing.assert_allclose(K @ coef + intercept, fitted, atol=1e-10)


def objective_instance(gen, n=30):
    X = gen.normal(size=(n, 3))
    K = gram(KernelSpec("gaussian"), X, nugget=False)
    weights = gen.uniform(0.1, 3.0, size=n)
    signs = np.where(gen.random(n) < 0.5, 1.0, -1.0)
    return K, weights, signs


def test_objective_gradient_finite_differences(gen):
    for delta in (0.5, 1.0):
        K, w, s = objective_instance(gen)
        x = gen.normal(size=K.shape[0] + 1) * 0.3
        _, g = aol_objective(x, K, w, s, 0.1, delta)
        h = 1e-6
        fd = np.array([(aol_objective(x + h * e, K, w, s, 0.1, delta)[0]
                        - aol_objective(x - h * e, K, w, s, 0.1, delta)[0]) / (2 * h)
                       for e in np.eye(x.size)])
        assert np.abs(g - fd).max() <= 1e-4


def test_objective_convex_along_segments(gen):
    K, w, s = objective_instance(gen)
    f = lambda x: aol_objective(x, K, w, s, 0.5, 1.0)[0]
    for _ in range(50):
        x, y = gen.normal(size=(2, K.shape[0] + 1))
        t = gen.random()
        assert f(t * x + (1 - t) * y) <= t * f(x) + (1 - t) * f(y) + 1e-12


def test_fit_reaches_stationary_point(small_policy):
    pi = np.full(small_policy.n, 0.5)
    fit = fit_aol(small_policy, LINEAR, 0.1, 1.0, pi)
    assert fit.converged
    K = gram(LINEAR, small_policy.covariates, nugget=False)
    w = np.abs(fit.residuals) / pi
    signs = small_policy.treatments * np.sign(fit.residuals)
    _, g = aol_objective(np.append(fit.rep_coefs, fit.bias), K, w, signs, 0.1, 1.0)
    assert np.abs(g).max() < 1e-5


def test_outcome_scale_equivariance(small_policy):
    # weights scale with the outcome, so scaling lambda alongside leaves the fit unchanged
    pi = np.full(small_policy.n, 0.5)
    d = small_policy
    scaled = Dataset(3.0 * d.outcomes, d.treatments, d.covariates)
    a = fit_aol(d, LINEAR, 0.1, 1.0, pi, compute_residuals(d, LINEAR, ridge=1.0), tol=1e-10)
    b = fit_aol(scaled, LINEAR, 0.3, 1.0, pi, compute_residuals(scaled, LINEAR, ridge=1.0),
                tol=1e-10)
    X = d.covariates
    np.testing.assert_allclose(a.decision_function(X), b.decision_function(X), atol=1e-6)
    assert abs(3.0 * a.objective - b.objective) < 1e-8


def test_zero_residuals_give_zero_rule(small_policy):
    fit = fit_aol(small_policy, LINEAR, 1.0, 1.0, 0.5, np.zeros(small_policy.n))
    assert np.all(fit.rep_coefs == 0) and fit.bias == 0.0
    assert np.all(fit.rule(small_policy.covariates) == -1)


def test_lambda_ties_go_to_largest(small_policy):
    lam = select_lambda(small_policy, LINEAR, 1.0, 0.5, np.zeros(small_policy.n),
                        np.random.default_rng(0))
    assert lam == max(LAMBDA_GRID)


def test_loss_contributions_mean_is_objective_minus_ridge(small_policy):
    fit = fit_aol(small_policy, LINEAR, 0.1, 1.0, 0.5)
    c = aol_loss_contributions(small_policy, fit)
    assert abs(c.mean() - (fit.objective - fit.ridge_term())) < 1e-10


def test_value_contributions_ipw_collapse(small_policy):
    d = small_policy
    rule = np.where(d.covariates[:, 0] > 0, 1, -1)
    zero = np.zeros(d.n)
    c = aol_value_contributions(d, rule, zero, zero, 0.5)
    np.testing.assert_allclose(c.values, np.where(d.treatments == rule, 2 * d.outcomes, 0.0))


def test_treat_all_value_is_point_seven():
    d = generate_policy(RngStream(41), 10**5)
    zero = np.zeros(d.n)
    c = aol_value_contributions(d, np.ones(d.n), zero, zero, 0.5).values
    assert abs(c.mean() - 0.7) <= 3 * c.std(ddof=1) / np.sqrt(d.n)


def test_oracle_rule_and_models_recover_optimal_value():
    d = generate_policy(RngStream(42), 10**5)
    X = d.covariates
    c = aol_value_contributions(d, true_optimal_rule(X), policy_outcome_mean(X, 1),
                                policy_outcome_mean(X, -1), 0.5).values
    assert abs(c.mean() - OPTIMAL_VALUE) <= 3 * c.std(ddof=1) / np.sqrt(d.n)


def test_learned_rule_agrees_with_optimal_rule():
    d = generate_policy(RngStream(43), 2000)
    fit, _ = AOLPlugin().fit(d, RngStream(44))
    X = RngStream(45).generator().uniform(-1, 1, (10**5, 5))
    assert np.mean(fit.rule(X) == true_optimal_rule(X)) >= 0.90


def test_estimated_propensity_near_half(small_policy):
    p = estimate_propensity(small_policy, LINEAR)
    assert np.all((p >= 0.01) & (p <= 0.99))
    assert abs(p.mean() - 0.5) < 0.1


def test_plugin_contribution_lengths(small_policy):
    for plugin in (AOLPlugin(), AOLPlugin(cross_fit=1), AOLPlugin(estimand="criterion"),
                   AOLPlugin(propensity=None, lam=1.0)):
        c = plugin(small_policy, RngStream(46))
        assert len(c) == small_policy.n and np.all(np.isfinite(c.values))


def test_plugin_rejects_binary_coding(small_ate):
    with pytest.raises(Exception):
        AOLPlugin()(small_ate, RngStream(47))


def test_plugin_bad_arguments():
    with pytest.raises(ValueError):
        AOLPlugin(estimand="regret")
    with pytest.raises(ValueError):
        AOLPlugin(cross_fit=0)
