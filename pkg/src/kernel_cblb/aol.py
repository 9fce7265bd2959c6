"""Kernelized augmented outcome-weighted learning.

A decision function ``f(x) = h(x) + b`` with ``h(x) = sum_j v_j k(x, x_j)`` is
learned by minimising

    (1/n) sum_i |r_i| / pi_i * phi(a_i sign(r_i) f(x_i)) + (lam/2) v'Kv

where ``r`` are residuals of a pooled outcome regression, ``pi_i`` is the
probability of the received treatment and ``phi`` is the Huberized hinge.
Treatments are coded -1/+1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import SIGN, Contribution, Dataset, validate_dataset
from .kernels import KernelSpec, gram, gram_cross
from .numerics import RngStream, lbfgs_minimize
from .svm import fit_svm_classifier, platt_calibrate

LAMBDA_GRID = (0.01, 0.1, 1.0, 10.0)
GCV_GRID = np.logspace(-6.0, 4.0, 41)


def huberized_hinge(u, delta: float = 1.0):
    """Value and derivative of the Huberized hinge, elementwise.

    ``phi(u) = 0`` for ``u >= 1``, ``(1-u)^2 / (2 delta)`` on ``(1-delta, 1)``
    and ``1 - u - delta/2`` below.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    u = np.asarray(u, dtype=float)
    gap = 1.0 - u
    value = np.where(gap <= 0, 0.0,
                     np.where(gap < delta, gap**2 / (2.0 * delta), gap - delta / 2.0))
    deriv = np.where(gap <= 0, 0.0, np.where(gap < delta, -gap / delta, -1.0))
    if value.ndim == 0:
        return float(value), float(deriv)
    return value, deriv


@dataclass(frozen=True, eq=False)
class RidgeFit:
    """Kernel ridge regression with an unpenalised intercept."""

    coef: np.ndarray
    intercept: float
    ridge: float
    kernel: KernelSpec
    train_covariates: np.ndarray
    fitted: np.ndarray

    def predict(self, X) -> np.ndarray:
        return gram_cross(self.kernel, X, self.train_covariates) @ self.coef + self.intercept


def fit_ridge_intercept(K, y, ridge: float | None = None) -> tuple[np.ndarray, float, float, np.ndarray]:
    """Solve ``min ||y - c - K a||^2 + ridge a'Ka`` through the centred Gram matrix.

    The optimum has ``1'a = 0`` and ``(PKP + ridge I) a = P y`` with
    ``P = I - 11'/n``; fitted values are ``mean(y) + PKP a``, so the residuals
    sum to zero.  With ``ridge=None`` the ridge minimises generalised
    cross-validation over a log grid scaled by the mean eigenvalue.

    Returns ``(coef, intercept, ridge, fitted)``.
    """
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    n = y.shape[0]
    ybar = float(np.mean(y))
    yc = y - ybar
    Kc = K - K.mean(axis=0) - K.mean(axis=1)[:, None] + K.mean()
    Kc = (Kc + Kc.T) / 2.0
    evals, U = np.linalg.eigh(Kc)
    evals = np.clip(evals, 0.0, None)
    proj = U.T @ yc
    if ridge is None:
        scale = max(float(np.mean(evals)), 1e-12)
        best = None
        for rho in GCV_GRID * scale:
            shrink = evals / (evals + rho)
            rss = float(np.sum(((1.0 - shrink) * proj) ** 2))
            dof = 1.0 + float(np.sum(shrink))
            denom = (n - dof) ** 2
            score = n * rss / denom if denom > 0 else np.inf
            if best is None or score < best[0]:
                best = (score, rho)
        ridge = float(best[1])
    elif not ridge > 0:
        raise ValueError("ridge must be positive")
    coef = U @ (proj / (evals + ridge))
    coef -= coef.mean()
    fitted = ybar + U @ (evals * proj / (evals + ridge))
    intercept = ybar - float(np.mean(K @ coef))
    return coef, intercept, float(ridge), fitted


def fit_ridge(X, y, kernel: KernelSpec, ridge: float | None = None) -> RidgeFit:
    X = np.asarray(X, dtype=float)
    coef, intercept, ridge, fitted = fit_ridge_intercept(gram(kernel, X), y, ridge)
    return RidgeFit(coef, intercept, ridge, kernel, X, fitted)


def compute_residuals(d: Dataset, kernel: KernelSpec, ridge: float | None = None) -> np.ndarray:
    """Residuals of a pooled kernel ridge regression of outcome on covariates."""
    _, _, _, fitted = fit_ridge_intercept(gram(kernel, d.covariates), d.outcomes, ridge)
    return d.outcomes - fitted


def _margin_signs(treatments, residuals) -> np.ndarray:
    return np.asarray(treatments, dtype=float) * np.sign(residuals)


def aol_objective(params, K, weights, signs, lam: float, delta: float):
    """Objective value and gradient in ``params = (v, b)``."""
    v = params[:-1]
    b = params[-1]
    Kv = K @ v
    n = signs.shape[0]
    value, deriv = huberized_hinge(signs * (Kv + b), delta)
    g_f = weights * signs * deriv / n
    obj = float(weights @ value) / n + 0.5 * lam * float(v @ Kv)
    grad = np.empty_like(params)
    grad[:-1] = K @ g_f + lam * Kv
    grad[-1] = g_f.sum()
    return obj, grad


@dataclass(frozen=True, eq=False)
class AOLFit:
    """Fitted rule ``sign(sum_j v_j k(x, x_j) + bias)`` on one bag."""

    rep_coefs: np.ndarray
    bias: float
    kernel: KernelSpec
    residuals: np.ndarray
    propensity: np.ndarray
    lam: float
    huber_delta: float
    train_covariates: np.ndarray
    objective: float
    converged: bool
    n_iter: int

    def decision_function(self, X) -> np.ndarray:
        return gram_cross(self.kernel, X, self.train_covariates) @ self.rep_coefs + self.bias

    def train_decision(self) -> np.ndarray:
        return gram(self.kernel, self.train_covariates, nugget=False) @ self.rep_coefs + self.bias

    def rule(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) > 0, 1, -1)

    def ridge_term(self) -> float:
        K = gram(self.kernel, self.train_covariates, nugget=False)
        return 0.5 * self.lam * float(self.rep_coefs @ K @ self.rep_coefs)


def fit_aol(d: Dataset, kernel: KernelSpec, lam: float, delta: float, pi_hat,
            residuals=None, tol: float = 1e-6, max_iter: int = 1000) -> AOLFit:
    """Minimise the weighted Huberized-hinge objective from ``v = 0, b = 0``.

    ``pi_hat`` is the probability of each unit's received treatment.  A run
    that hits ``max_iter`` is returned with ``converged=False``.
    """
    validate_dataset(d, SIGN)
    if not lam > 0:
        raise ValueError("lambda must be positive")
    pi = np.broadcast_to(np.asarray(pi_hat, dtype=float), (d.n,)).copy()
    if np.any(~(pi > 0)) or np.any(pi > 1):
        raise ValueError("propensities must lie in (0, 1]")
    r = compute_residuals(d, kernel) if residuals is None else np.asarray(residuals, float)
    K = gram(kernel, d.covariates, nugget=False)
    weights = np.abs(r) / pi
    signs = _margin_signs(d.treatments, r)
    res = lbfgs_minimize(lambda x: aol_objective(x, K, weights, signs, lam, delta),
                         np.zeros(d.n + 1), tol=tol, max_iter=max_iter)
    return AOLFit(res.x[:-1].copy(), float(res.x[-1]), kernel, r, pi, float(lam),
                  float(delta), d.covariates, float(res.fun), bool(res.converged), res.n_iter)


def _loss_terms(fit_signs, weights, f, delta):
    value, _ = huberized_hinge(fit_signs * f, delta)
    return weights * value


def select_lambda(d: Dataset, kernel: KernelSpec, delta: float, pi_hat, residuals,
                  rng: RngStream | np.random.Generator, grid=LAMBDA_GRID,
                  n_folds: int = 5) -> float:
    """Lambda minimising held-out weighted surrogate loss over ``n_folds`` folds.

    Ties go to the larger lambda.
    """
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    n = d.n
    folds = np.array_split(gen.permutation(n), n_folds)
    pi = np.broadcast_to(np.asarray(pi_hat, dtype=float), (n,))
    r = np.asarray(residuals, dtype=float)
    weights = np.abs(r) / pi
    signs = _margin_signs(d.treatments, r)
    K = gram(kernel, d.covariates, nugget=False)
    scores = np.zeros(len(grid))
    for held in folds:
        train = np.setdiff1d(np.arange(n), held)
        sub = d.subset(train)
        for g, lam in enumerate(grid):
            fit = fit_aol(sub, kernel, lam, delta, pi[train], r[train])
            f = K[np.ix_(held, train)] @ fit.rep_coefs + fit.bias
            scores[g] += float(np.sum(_loss_terms(signs[held], weights[held], f, delta)))
    best = np.flatnonzero(scores <= scores.min())
    return float(grid[best[-1]])


def aol_loss_contributions(d: Dataset, fit: AOLFit) -> Contribution:
    """Per-unit weighted surrogate loss of the frozen fit on its own bag."""
    weights = np.abs(fit.residuals) / fit.propensity
    signs = _margin_signs(d.treatments, fit.residuals)
    return Contribution(_loss_terms(signs, weights, fit.train_decision(), fit.huber_delta))


def aol_value_contributions(d: Dataset, rule, m_plus, m_minus, pi_plus) -> Contribution:
    """AIPW value terms for the fixed rule.

    ``rule`` holds the recommended action (+1/-1) per unit; ``m_plus`` and
    ``m_minus`` are outcome predictions under each action and ``pi_plus`` the
    probability of action +1.
    """
    rule = np.asarray(rule)
    m_rule = np.where(rule == 1, m_plus, m_minus)
    pi_rule = np.where(rule == 1, pi_plus, 1.0 - np.asarray(pi_plus, dtype=float))
    follows = np.asarray(d.treatments) == rule
    theta = m_rule + np.where(follows, (d.outcomes - m_rule) / pi_rule, 0.0)
    return Contribution(theta)


def estimate_propensity(d: Dataset, kernel: KernelSpec, cost: float = 1.0,
                        clip: float = 0.01) -> np.ndarray:
    """P(A=+1 | X) from a kernel SVM with Platt scaling, clipped to ``[clip, 1-clip]``."""
    K = gram(kernel, d.covariates)
    labels = np.asarray(d.treatments, dtype=float)
    svm = fit_svm_classifier(K, labels, cost)
    f = svm.decision(K)
    return np.clip(platt_calibrate(f, labels).predict(f), clip, 1.0 - clip)


def _arm_predictions(d: Dataset, X, kernel: KernelSpec, ridge) -> tuple[np.ndarray, np.ndarray]:
    preds = {}
    for arm in (1, -1):
        sel = d.treatments == arm
        if sel.sum() < 2:
            raise ValueError(f"arm {arm} has fewer than two units")
        preds[arm] = fit_ridge(d.covariates[sel], d.outcomes[sel], kernel, ridge).predict(X)
    return preds[1], preds[-1]


@dataclass(frozen=True)
class AOLPlugin:
    """cBLB plugin for kernel AOL.

    ``estimand="value"`` gives AIPW value terms of the learned rule,
    ``"criterion"`` the weighted surrogate-loss terms of the in-bag fit.
    ``propensity`` is a known P(A=+1) or None to estimate it per bag.
    ``lam=None`` selects the penalty by cross-validation over ``LAMBDA_GRID``.

    With ``cross_fit > 1`` each unit's value term comes from a rule and
    outcome models trained on the other folds of the bag.  Scoring a rule on
    the units it was trained on is optimistic by roughly the rule's own
    estimation error; ``cross_fit=1`` gives that in-sample version.
    """

    kernel: KernelSpec = field(default_factory=KernelSpec)
    estimand: str = "value"
    lam: float | None = None
    huber_delta: float = 1.0
    propensity: float | None = 0.5
    outcome_ridge: float | None = None
    cross_fit: int = 5
    name: str = "aol"

    def __post_init__(self):
        if self.estimand not in ("value", "criterion"):
            raise ValueError(f"unknown estimand {self.estimand!r}")
        if self.propensity is not None and not 0.0 < self.propensity < 1.0:
            raise ValueError("propensity must lie in (0, 1)")
        if int(self.cross_fit) != self.cross_fit or self.cross_fit < 1:
            raise ValueError("cross_fit must be a positive integer")

    def _propensity(self, bag: Dataset) -> np.ndarray:
        if self.propensity is None:
            return estimate_propensity(bag, self.kernel)
        return np.full(bag.n, float(self.propensity))

    def _fit(self, bag: Dataset, p_plus, gen, lam=None) -> AOLFit:
        pi = np.where(bag.treatments == 1, p_plus, 1.0 - p_plus)
        r = compute_residuals(bag, self.kernel)
        if lam is None:
            lam = select_lambda(bag, self.kernel, self.huber_delta, pi, r, gen)
        return fit_aol(bag, self.kernel, lam, self.huber_delta, pi, r)

    def fit(self, bag: Dataset, rng: RngStream) -> tuple[AOLFit, np.ndarray]:
        """Rule learned on the whole bag, with P(A=+1) per unit."""
        validate_dataset(bag, SIGN)
        p_plus = self._propensity(bag)
        return self._fit(bag, p_plus, rng.generator(), self.lam), p_plus

    def __call__(self, bag: Dataset, rng: RngStream) -> Contribution:
        validate_dataset(bag, SIGN)
        gen = rng.generator()
        p_plus = self._propensity(bag)
        if self.estimand == "criterion":
            return aol_loss_contributions(bag, self._fit(bag, p_plus, gen, self.lam))
        if self.cross_fit == 1:
            fit = self._fit(bag, p_plus, gen, self.lam)
            rule = np.where(fit.train_decision() > 0, 1, -1)
            m_plus, m_minus = _arm_predictions(bag, bag.covariates, self.kernel,
                                               self.outcome_ridge)
            return aol_value_contributions(bag, rule, m_plus, m_minus, p_plus)
        lam = self.lam
        if lam is None:
            lam = self._fit(bag, p_plus, gen).lam
        theta = np.empty(bag.n)
        for held in np.array_split(gen.permutation(bag.n), self.cross_fit):
            train = np.setdiff1d(np.arange(bag.n), held)
            sub = bag.subset(train)
            fit = self._fit(sub, p_plus[train], gen, lam)
            X = bag.covariates[held]
            m_plus, m_minus = _arm_predictions(sub, X, self.kernel, self.outcome_ridge)
            theta[held] = aol_value_contributions(bag.subset(held),
                                                  fit.rule(X), m_plus, m_minus,
                                                  p_plus[held]).values
        return Contribution(theta)
