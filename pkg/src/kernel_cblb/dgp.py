"""Simulation designs with known ground truth.

``generate_ate``: two standard-normal confounders, logistic treatment
assignment and a constant treatment effect.  ``generate_policy``: five
uniform covariates, a fair-coin treatment in {-1, +1} and a linear
treatment-by-covariate interaction that defines the optimal rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset
from .numerics import RngStream

ATE_TRUTH = 0.8

# 0.5 + E|0.2 - 0.6 X1 - 0.8 X2| with X ~ U(-1, 1)^2, from 10**7 Monte Carlo
# draws (Philox, SeedSequence(20240601)); standard error 1.11e-4.
OPTIMAL_VALUE = 1.0001137448613715
OPTIMAL_VALUE_SE = 1.11e-4

POLICY_MAIN = np.array([0.5, 0.8, 0.3, -0.5, 0.7])
POLICY_INTERACTION = np.array([-0.6, -0.8])


@dataclass(frozen=True)
class DGPTruth:
    estimand_kind: str
    true_value: float


ATE_DESIGN_TRUTH = DGPTruth("ate", ATE_TRUTH)
POLICY_DESIGN_TRUTH = DGPTruth("optimal_value", OPTIMAL_VALUE)


@dataclass(frozen=True, eq=False)
class ATESample:
    """Observed data plus the potential outcomes and propensities behind it."""

    data: Dataset
    y0: np.ndarray
    y1: np.ndarray
    propensity: np.ndarray
    tau: float


def ate_propensity(X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return 1.0 / (1.0 + np.exp(-0.5 * X[:, 0] - 0.5 * X[:, 1]))


def ate_outcome_mean(X, a) -> np.ndarray:
    """True ``E[Y | A=a, X]`` for the ATE design (default effect)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return X[:, 0] + X[:, 1] + ATE_TRUTH * np.asarray(a, dtype=float)


def generate_ate_sample(rng: RngStream | np.random.Generator, n: int,
                        tau: float = ATE_TRUTH) -> ATESample:
    if n < 1:
        raise ValueError("n must be positive")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    X = gen.standard_normal((n, 2))
    pscore = ate_propensity(X)
    w = (gen.random(n) < pscore).astype(np.int64)
    eps = gen.standard_normal(n)
    y0 = X[:, 0] + X[:, 1] + eps
    y1 = y0 + tau
    y = np.where(w == 1, y1, y0)
    return ATESample(Dataset(y, w, X), y0, y1, pscore, tau)


def generate_ate(rng: RngStream | np.random.Generator, n: int,
                 tau: float = ATE_TRUTH) -> Dataset:
    """Draw ``n`` units from the constant-effect ATE design, coded {0, 1}."""
    return generate_ate_sample(rng, n, tau).data


def policy_contrast(X) -> np.ndarray:
    """Treatment contrast ``0.2 - 0.6 x1 - 0.8 x2`` (half the effect of W)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return 0.2 + X[:, :2] @ POLICY_INTERACTION


def policy_outcome_mean(X, w) -> np.ndarray:
    """True ``E[Y | W=w, X]`` for the policy design, ``w`` in {-1, +1}."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return 0.5 + X[:, :5] @ POLICY_MAIN + np.asarray(w, dtype=float) * policy_contrast(X)


def generate_policy(rng: RngStream | np.random.Generator, n: int) -> Dataset:
    """Draw ``n`` units from the policy-learning design, coded {-1, +1}."""
    if n < 1:
        raise ValueError("n must be positive")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    X = gen.uniform(-1.0, 1.0, (n, 5))
    w = np.where(gen.random(n) < 0.5, 1, -1).astype(np.int64)
    eps = gen.standard_normal(n)
    y = policy_outcome_mean(X, w) + eps
    return Dataset(y, w, X)


def true_optimal_rule(x) -> np.ndarray | int:
    """+1 where ``0.2 - 0.6 x1 - 0.8 x2 > 0``, else -1 (ties go to -1)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    rule = np.where(policy_contrast(np.atleast_2d(x)) > 0, 1, -1)
    return int(rule[0]) if single else rule


def rule_value(actions, X) -> float:
    """Monte Carlo value ``0.5 + mean(d(X) * contrast(X))`` of a rule whose
    actions on the design draws ``X`` are ``actions`` (in {-1, +1})."""
    return float(0.5 + np.mean(np.asarray(actions, dtype=float) * policy_contrast(X)))
