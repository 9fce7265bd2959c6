"""Cross-fitted double machine learning with kernel SVM nuisance models.

Within a bag the units are split into K folds.  For each fold the propensity
score (SVM classifier + Platt scaling, clipped) and the two arm-specific
outcome regressions (epsilon-SVR) are trained on the other folds and
evaluated on the held-out fold, giving the AIPW score

    psi(a) = m_a(X) + 1(A=a) (Y - m_a(X)) / pi_a(X)

for every unit from models that never saw it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import BINARY, Contribution, Dataset, validate_dataset
from .kernels import KernelSpec, gram, gram_cross
from .numerics import RngStream
from .svm import SingleClassFold, fit_svm_classifier, fit_svr, platt_calibrate

MAX_FOLD_ATTEMPTS = 10


class TooManyFolds(ValueError):
    pass


@dataclass(frozen=True)
class DMLConfig:
    n_folds: int = 5
    svm_cost: float = 1.0
    svr_epsilon: float = 0.1
    kernel: KernelSpec = field(default_factory=KernelSpec)
    propensity_clip: float = 0.01
    platt_max_iter: int = 100
    standardize_outcome: bool = True

    def __post_init__(self):
        if int(self.n_folds) != self.n_folds or self.n_folds < 2:
            raise ValueError("cross-fitting needs at least 2 folds")
        if self.svm_cost <= 0:
            raise ValueError("svm_cost must be positive")
        if self.svr_epsilon < 0:
            raise ValueError("svr_epsilon must be nonnegative")
        if not 0.0 < self.propensity_clip < 0.5:
            raise ValueError("propensity_clip must lie in (0, 0.5)")


def kfold_split(rng: RngStream | np.random.Generator, n: int, n_folds: int) -> list[np.ndarray]:
    """Random permutation of ``range(n)`` cut into near-equal folds."""
    if n_folds > n:
        raise TooManyFolds(f"{n_folds} folds requested for {n} units")
    if n_folds < 1:
        raise ValueError("need at least one fold")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    return [np.sort(f) for f in np.array_split(gen.permutation(n), n_folds)]


def aipw_scores(y, a, pi1, m0, m1) -> np.ndarray:
    """Per-unit ``psi(1) - psi(0)`` with ``pi_0 = 1 - pi_1``."""
    y = np.asarray(y, dtype=float)
    a = np.asarray(a)
    psi1 = m1 + np.where(a == 1, (y - m1) / pi1, 0.0)
    psi0 = m0 + np.where(a == 0, (y - m0) / (1.0 - pi1), 0.0)
    return psi1 - psi0


@dataclass(frozen=True, eq=False)
class DMLFit:
    contributions: Contribution
    folds: list
    train_index: list
    propensity: np.ndarray
    m0: np.ndarray
    m1: np.ndarray
    attempts: int


def _usable(folds, treatments) -> bool:
    n = treatments.shape[0]
    for held in folds:
        mask = np.ones(n, dtype=bool)
        mask[held] = False
        t = treatments[mask]
        if np.sum(t == 1) < 2 or np.sum(t == 0) < 2:
            return False
    return True


def _fit_regression(K_train, K_eval, y, cfg: DMLConfig) -> np.ndarray:
    if cfg.standardize_outcome:
        center = float(np.mean(y))
        scale = float(np.std(y))
        if not scale > 0:
            return np.full(K_eval.shape[0], center)
    else:
        center, scale = 0.0, 1.0
    fit = fit_svr(K_train, (y - center) / scale, cfg.svm_cost, cfg.svr_epsilon)
    return center + scale * fit.decision(K_eval)


def dml_fit(d: Dataset, cfg: DMLConfig, rng: RngStream | np.random.Generator,
            nuisance=None) -> DMLFit:
    """Cross-fitted AIPW contributions for a {0, 1}-coded dataset.

    ``nuisance``, if given, replaces the learners: it is called as
    ``nuisance(X_train, A_train, Y_train, X_eval)`` and returns
    ``(pi1, m0, m1)`` evaluated at ``X_eval``.
    """
    validate_dataset(d, BINARY)
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    n = d.n
    t = d.treatments
    for attempt in range(1, MAX_FOLD_ATTEMPTS + 1):
        folds = kfold_split(gen, n, cfg.n_folds)
        if _usable(folds, t):
            break
    else:
        raise SingleClassFold(
            f"no fold split with both arms in every training set after "
            f"{MAX_FOLD_ATTEMPTS} attempts"
        )
    X = d.covariates
    K = gram(cfg.kernel, X) if nuisance is None else None
    pi1 = np.empty(n)
    m0 = np.empty(n)
    m1 = np.empty(n)
    train_sets = []
    for held in folds:
        mask = np.ones(n, dtype=bool)
        mask[held] = False
        train = np.flatnonzero(mask)
        train_sets.append(train)
        if nuisance is not None:
            p, a0, a1 = nuisance(X[train], t[train], d.outcomes[train], X[held])
            pi1[held], m0[held], m1[held] = p, a0, a1
            continue
        K_tt = K[np.ix_(train, train)]
        # held-out rows never share an index with training rows: no nugget
        K_ht = gram_cross(cfg.kernel, X[held], X[train])
        labels = np.where(t[train] == 1, 1.0, -1.0)
        clf = fit_svm_classifier(K_tt, labels, cfg.svm_cost)
        platt = platt_calibrate(clf.decision(K_tt), labels, cfg.platt_max_iter)
        pi1[held] = platt.predict(clf.decision(K_ht))
        for arm, out in ((0, m0), (1, m1)):
            sel = train[t[train] == arm]
            pos = np.flatnonzero(t[train] == arm)
            out[held] = _fit_regression(K[np.ix_(sel, sel)], K_ht[:, pos],
                                        d.outcomes[sel], cfg)
    clip = cfg.propensity_clip
    pi1 = np.clip(pi1, clip, 1.0 - clip)
    theta = aipw_scores(d.outcomes, t, pi1, m0, m1)
    return DMLFit(Contribution(theta), folds, train_sets, pi1, m0, m1, attempt)


def dml_contributions(d: Dataset, cfg: DMLConfig, rng: RngStream | np.random.Generator,
                      nuisance=None) -> Contribution:
    return dml_fit(d, cfg, rng, nuisance).contributions


@dataclass(frozen=True)
class DMLPlugin:
    """cBLB plugin: cross-fitted DML with SVM nuisances, refit per bag."""

    config: DMLConfig = field(default_factory=DMLConfig)
    name: str = "dml"

    def __call__(self, bag: Dataset, rng: RngStream) -> Contribution:
        return dml_contributions(bag, self.config, rng)
