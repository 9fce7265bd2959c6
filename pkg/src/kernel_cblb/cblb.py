"""Bag of little bootstraps with fixed per-bag fits.

The units are permuted and cut into ``s`` disjoint bags of size ``b``.  Each
bag is fitted once by an estimator plugin, which returns one contribution per
bag unit.  Replicates reweight those contributions by
``Multinomial(n; 1/b, ..., 1/b)`` counts, so every replicate behaves like a
size-``n`` resample without any refitting.  Per-bag percentile quantiles are
averaged across bags.

Random streams are keyed by ``(seed, purpose, bag)``, so results do not
depend on how bags are spread over worker processes.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from scipy import stats

from .core import CBLBConfig, ConfigInfeasible, Contribution, Dataset, IntervalResult
from .numerics import RngStream, multinomial_counts

PARTITION = 0
FIT = 1
RESAMPLE = 2

# rows of multinomial counts materialised at once
_CHUNK_ENTRIES = 1 << 22


class EstimatorPlugin(Protocol):
    name: str

    def __call__(self, bag: Dataset, rng: RngStream) -> Contribution: ...


class CountSumMismatch(ValueError):
    pass


class ZeroVariance(ValueError):
    pass


class BagFailure(RuntimeError):
    def __init__(self, bag: int, cause: BaseException):
        super().__init__(f"estimator failed on bag {bag}: {type(cause).__name__}: {cause}")
        self.bag = bag
        self.cause = cause


def partition(rng: RngStream | np.random.Generator, n: int, b: int, s: int) -> list[np.ndarray]:
    """``s`` disjoint blocks of ``b`` indices from a uniform permutation of ``range(n)``."""
    if b < 1 or s < 1:
        raise ConfigInfeasible("bag size and bag count must be positive")
    if s * b > n:
        raise ConfigInfeasible(f"s*b = {s * b} exceeds n={n}")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    perm = gen.permutation(n)
    return [perm[k * b:(k + 1) * b] for k in range(s)]


def _reweight(theta: np.ndarray, counts: np.ndarray, n: int) -> np.ndarray:
    # offsetting by one contribution keeps constant inputs exact
    ref = theta[0]
    out = ref + (counts @ (theta - ref)) / n
    return np.clip(out, theta.min(), theta.max())


def _mean(x) -> float:
    # exact for constant input, unlike np.mean
    x = np.asarray(x, dtype=float)
    return float(x[0] + np.mean(x - x[0]))


def replicate(contributions: Contribution | np.ndarray, counts, n: int) -> float:
    """``(1/n) sum_a counts[a] * theta[a]`` for one count vector summing to ``n``."""
    theta = contributions.values if isinstance(contributions, Contribution) else np.asarray(
        contributions, dtype=float)
    counts = np.asarray(counts)
    if counts.shape != theta.shape:
        raise ValueError(f"{counts.shape[0]} counts for {theta.shape[0]} contributions")
    total = int(counts.sum())
    if total != n:
        raise CountSumMismatch(f"counts sum to {total}, expected {n}")
    return float(_reweight(theta, counts[None, :], n)[0])


def empirical_quantile(values, q: float) -> float:
    """Order statistic ``ceil(q * r)`` (1-based) of ``r`` values."""
    x = np.sort(np.asarray(values, dtype=float).reshape(-1))
    r = x.shape[0]
    if r == 0:
        raise ValueError("no values")
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    k = math.ceil(round(q * r, 9))
    return float(x[min(max(k, 1), r) - 1])


def bootstrap_replicates(theta, n: int, n_replicates: int,
                         rng: RngStream | np.random.Generator) -> np.ndarray:
    """``n_replicates`` multinomial reweightings of one bag's contributions."""
    theta = np.asarray(theta, dtype=float)
    b = theta.shape[0]
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    out = np.empty(n_replicates)
    step = max(1, _CHUNK_ENTRIES // b)
    for start in range(0, n_replicates, step):
        m = min(step, n_replicates - start)
        out[start:start + m] = _reweight(theta, multinomial_counts(gen, n, b, m), n)
    return out


@dataclass(frozen=True, eq=False)
class ReplicateSet:
    """Replicates (``s x r``), bag means and the contributions behind them."""

    values: np.ndarray
    bag_estimates: np.ndarray
    contributions: tuple
    bags: tuple


@dataclass(frozen=True)
class _BagResult:
    theta: np.ndarray
    replicates: np.ndarray
    fit_seconds: float
    resample_seconds: float


def _run_bag(k: int, bag: Dataset, plugin, seed: int, n: int, r: int) -> _BagResult:
    t0 = time.perf_counter()
    try:
        contrib = plugin(bag, RngStream(seed, (FIT, k)))
    except Exception as exc:
        raise BagFailure(k, exc) from exc
    if not isinstance(contrib, Contribution):
        contrib = Contribution(contrib)
    if len(contrib) != bag.n:
        raise BagFailure(k, ValueError(f"{len(contrib)} contributions for {bag.n} units"))
    t1 = time.perf_counter()
    reps = bootstrap_replicates(contrib.values, n, r, RngStream(seed, (RESAMPLE, k)))
    t2 = time.perf_counter()
    return _BagResult(contrib.values, reps, t1 - t0, t2 - t1)


def _run_bag_star(args):
    return _run_bag(*args)


def run_cblb(d: Dataset, plugin: EstimatorPlugin, cfg: CBLBConfig,
             workers: int = 1) -> tuple[IntervalResult, ReplicateSet]:
    """Fit each bag once, bootstrap its contributions and average the quantiles."""
    start = time.perf_counter()
    if cfg.n_total != d.n:
        raise ConfigInfeasible(f"config is for n={cfg.n_total}, data has {d.n} units")
    n, b, s, r = d.n, cfg.bag_size, cfg.n_bags, cfg.n_replicates
    if s == 1 and b == n:
        bags = [np.arange(n)]
    else:
        bags = partition(RngStream(cfg.seed, (PARTITION,)), n, b, s)
    tasks = [(k, d.subset(idx), plugin, cfg.seed, n, r) for k, idx in enumerate(bags)]
    if workers > 1 and s > 1:
        with ProcessPoolExecutor(max_workers=min(workers, s)) as pool:
            results = list(pool.map(_run_bag_star, tasks))
    else:
        results = [_run_bag(*t) for t in tasks]

    lo_q, hi_q = cfg.alpha / 2.0, 1.0 - cfg.alpha / 2.0
    values = np.vstack([res.replicates for res in results])
    quantiles = np.array([[empirical_quantile(row, lo_q), empirical_quantile(row, hi_q)]
                          for row in values])
    bag_estimates = np.array([_mean(res.theta) for res in results])
    bag_sd = np.array([float(np.std(row - row[0], ddof=1)) for row in values])
    fit_times = np.array([res.fit_seconds for res in results])
    result = IntervalResult(
        point_estimate=_mean(bag_estimates),
        lower=_mean(quantiles[:, 0]),
        upper=_mean(quantiles[:, 1]),
        se=_mean(bag_sd),
        per_bag_quantiles=quantiles,
        wall_time_seconds=time.perf_counter() - start,
        fit_seconds=float(fit_times.sum()),
        resample_seconds=float(sum(res.resample_seconds for res in results)),
        bag_fit_seconds=fit_times,
    )
    reps = ReplicateSet(values, bag_estimates, tuple(res.theta for res in results),
                        tuple(bags))
    return result, reps


def run_full_bootstrap(d: Dataset, plugin: EstimatorPlugin, n_replicates: int,
                       alpha: float = 0.05, seed: int = 0) -> tuple[IntervalResult, ReplicateSet]:
    """One fit on all units, then ``Multinomial(n; 1/n, ..., 1/n)`` reweighting.

    Same code path as :func:`run_cblb` with ``s = 1`` and ``b = n``.
    """
    return run_cblb(d, plugin, CBLBConfig(d.n, d.n, 1, n_replicates, alpha, seed))


@dataclass(frozen=True)
class NormalityDiagnostic:
    ks_distance: float
    threshold: float
    passed: bool
    sigma: float


def normality_check(rep: ReplicateSet, bag: int, n: int) -> NormalityDiagnostic:
    """Kolmogorov-Smirnov distance of ``sqrt(n)(theta* - theta_k)/sigma_k`` from N(0, 1).

    ``sigma_k`` is the population standard deviation of the bag's
    contributions; the check passes below ``1.63 / sqrt(r)``.
    """
    theta = rep.contributions[bag]
    sigma = float(np.std(theta - theta[0]))
    if not sigma > 0:
        raise ZeroVariance(f"bag {bag} has constant contributions")
    values = rep.values[bag]
    z = math.sqrt(n) * (values - rep.bag_estimates[bag]) / sigma
    ks = float(stats.kstest(z, "norm").statistic)
    threshold = 1.63 / math.sqrt(values.shape[0])
    return NormalityDiagnostic(ks, threshold, ks <= threshold, sigma)
