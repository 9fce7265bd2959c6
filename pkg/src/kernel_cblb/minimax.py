"""Kernel minimax balancing weights and the augmented ATE estimator.

For arm ``a`` with Gram matrix ``K`` over all units of a bag, the worst-case
squared imbalance over the unit ball of the RKHS is

    (1/n^2) (I_a g - e)' K (I_a g - e),

and the weights minimise it plus ``lambda * sigma2 / n^2 * sum(g^2)``.  Only
arm-``a`` entries of ``g`` enter, so the problem is an unconstrained ridge
system over those units.  The two arms never interact and are solved
separately.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BINARY, Contribution, Dataset, validate_dataset
from .kernels import DimensionMismatch, KernelSpec, add_intercept_column, gram, gram_cross
from .numerics import RngStream, spd_solve


class EmptyArm(ValueError):
    pass


def imbalance_sq(K, arm_indicator, gamma_full) -> float:
    """Worst-case squared imbalance ``(1/n^2) v'Kv`` with ``v = I_a g - e``."""
    K = np.asarray(K, dtype=float)
    arm = np.asarray(arm_indicator, dtype=float).reshape(-1)
    g = np.asarray(gamma_full, dtype=float).reshape(-1)
    n = arm.shape[0]
    if K.shape != (n, n) or g.shape[0] != n:
        raise DimensionMismatch(f"K {K.shape}, arm {arm.shape}, gamma {g.shape}")
    v = arm * g - 1.0
    return float(v @ K @ v) / n**2


def weights_objective(K, arm_indicator, gamma_arm, lam: float, sigma2: float):
    """Penalised imbalance and its gradient with respect to the arm weights."""
    K = np.asarray(K, dtype=float)
    S = np.flatnonzero(np.asarray(arm_indicator) == 1)
    n = K.shape[0]
    g = np.asarray(gamma_arm, dtype=float)
    full = np.zeros(n)
    full[S] = g
    value = imbalance_sq(K, arm_indicator, full) + lam * sigma2 * float(g @ g) / n**2
    grad = 2.0 * (K[np.ix_(S, S)] @ g - K[S].sum(axis=1) + lam * sigma2 * g) / n**2
    return value, grad


def solve_weights(K, arm_indicator, lam: float, sigma2: float) -> np.ndarray:
    """Minimax weights for the units of one arm.

    Solves ``(K_SS + lam*sigma2*I) g = K_S. e`` where ``S`` indexes the arm.

    Returns
    -------
    ndarray
        One weight per arm unit, in the order the arm units appear.
    """
    K = np.asarray(K, dtype=float)
    arm = np.asarray(arm_indicator).reshape(-1)
    if K.shape != (arm.shape[0], arm.shape[0]):
        raise DimensionMismatch(f"K {K.shape} vs arm indicator of length {arm.shape[0]}")
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if sigma2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    S = np.flatnonzero(arm == 1)
    if S.size == 0:
        raise EmptyArm("no units in the arm")
    rhs = K[S].sum(axis=1)
    return spd_solve(K[np.ix_(S, S)], rhs, jitter=lam * sigma2)


def fit_outcome_krr(K_arm, y_arm, ridge: float) -> np.ndarray:
    """Kernel ridge coefficients ``alpha`` with ``(K + ridge I) alpha = y``."""
    y = np.asarray(y_arm, dtype=float).reshape(-1)
    if y.size == 0:
        raise EmptyArm("no units to fit")
    if ridge <= 0:
        raise ValueError("ridge must be positive")
    return spd_solve(np.asarray(K_arm, dtype=float), y, jitter=ridge)


@dataclass(frozen=True, eq=False)
class MinimaxWeightsFit:
    """Frozen per-arm fit on one bag.

    ``gamma_full`` has one entry per bag unit and is zero outside the arm;
    ``m_hat`` holds the outcome-model predictions at every bag unit.
    """

    arm: int
    gamma_full: np.ndarray
    lam: float
    sigma2: float
    kernel: KernelSpec
    outcome_coef: np.ndarray
    train_covariates: np.ndarray
    m_hat: np.ndarray
    arm_index: np.ndarray
    add_intercept: bool = True

    @property
    def gamma(self) -> np.ndarray:
        return self.gamma_full[self.arm_index]

    def predict(self, X) -> np.ndarray:
        X = add_intercept_column(X) if self.add_intercept else np.asarray(X, float)
        return gram_cross(self.kernel, X, self.train_covariates) @ self.outcome_coef


def fit_minimax_arm(
    d: Dataset,
    arm: int,
    kernel: KernelSpec,
    lam: float = 1.0,
    sigma2: float | None = None,
    add_intercept: bool = True,
    K: np.ndarray | None = None,
) -> MinimaxWeightsFit:
    """Weights and outcome model for arm ``arm`` of a {0, 1}-coded bag.

    ``sigma2`` is unitless: the noise variance as a fraction of the arm's
    outcome variance.  When None it is estimated from a pilot kernel ridge fit
    with ridge ``lam``, as residual variance over outcome variance.  The
    final outcome fit and the weights both use ridge ``lam * sigma2``, so the
    weights do not depend on the units of the outcome and the predictions
    scale with it.
    """
    Xk = add_intercept_column(d.covariates) if add_intercept else d.covariates
    if K is None:
        K = gram(kernel, Xk)
    indicator = (d.treatments == arm).astype(np.int64)
    S = np.flatnonzero(indicator)
    if S.size == 0:
        raise EmptyArm(f"arm {arm} has no units in this bag")
    y = d.outcomes[S]
    K_SS = K[np.ix_(S, S)]
    if sigma2 is None:
        noiseless = K_SS - kernel.sigma2 * np.eye(S.size) if kernel.sigma2 else K_SS
        resid = y - noiseless @ fit_outcome_krr(K_SS, y, lam)
        spread = float(np.var(y, ddof=1)) if S.size > 1 else 0.0
        sigma2 = float(np.var(resid, ddof=1)) / spread if spread > 0 else 1.0
        sigma2 = max(sigma2, 1e-8)
    ridge = lam * sigma2
    coef = fit_outcome_krr(K_SS, y, ridge)
    # latent m_a: the nugget models observation noise and is left out of predictions
    K_pred = K[:, S]
    if kernel.sigma2:
        K_pred = K_pred.copy()
        K_pred[S, np.arange(S.size)] -= kernel.sigma2
    m_hat = K_pred @ coef
    g = solve_weights(K, indicator, lam, sigma2)
    full = np.zeros(d.n)
    full[S] = g
    full.setflags(write=False)
    return MinimaxWeightsFit(arm, full, lam, sigma2, kernel, coef, Xk[S], m_hat, S,
                             add_intercept)


def augmented_scores(y, treatments, arm: int, m_hat, gamma_full) -> np.ndarray:
    """``m_a(X) - 1(A=a) g(X) (m_a(X) - Y)`` per unit."""
    y = np.asarray(y, dtype=float)
    in_arm = np.asarray(treatments) == arm
    return m_hat - np.where(in_arm, gamma_full * (m_hat - y), 0.0)


def ate_contributions(d: Dataset, fit1: MinimaxWeightsFit, fit0: MinimaxWeightsFit) -> Contribution:
    """Per-unit ``psi(1) - psi(0)`` from two frozen arm fits on this bag."""
    psi1 = augmented_scores(d.outcomes, d.treatments, 1, fit1.m_hat, fit1.gamma_full)
    psi0 = augmented_scores(d.outcomes, d.treatments, 0, fit0.m_hat, fit0.gamma_full)
    return Contribution(psi1 - psi0)


@dataclass(frozen=True)
class MinimaxPlugin:
    """cBLB plugin: kernel minimax weights with kernel ridge outcome models."""

    kernel: KernelSpec = KernelSpec("polynomial", scale=1.0, degree=1, sigma2=1.0)
    lam: float = 1.0
    sigma2: float | None = None
    add_intercept: bool = True
    name: str = "minimax"

    def fit(self, bag: Dataset) -> tuple[MinimaxWeightsFit, MinimaxWeightsFit]:
        validate_dataset(bag, BINARY)
        Xk = add_intercept_column(bag.covariates) if self.add_intercept else bag.covariates
        K = gram(self.kernel, Xk)
        fits = [fit_minimax_arm(bag, a, self.kernel, self.lam, self.sigma2,
                                self.add_intercept, K) for a in (1, 0)]
        return fits[0], fits[1]

    def __call__(self, bag: Dataset, rng: RngStream | None = None) -> Contribution:
        fit1, fit0 = self.fit(bag)
        return ate_contributions(bag, fit1, fit0)
