"""Wall-clock comparison of cBLB with the no-refit full bootstrap."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .cblb import run_cblb, run_full_bootstrap
from .core import CBLBConfig, Contribution, Dataset
from .numerics import RngStream

METHODS = ("cblb", "full_bootstrap")


class InsufficientGrid(ValueError):
    pass


@dataclass(frozen=True)
class TimingRecord:
    method: str
    estimator: str
    n: int
    b: int
    s: int
    r: int
    repetition: int
    fit_seconds: float
    resample_seconds: float
    total_seconds: float


@dataclass(frozen=True)
class QuadraticCostPlugin:
    """Sample-mean estimator whose fit does ``passes * m^2`` pairwise
    Gaussian-kernel evaluations, a stand-in for a kernel fit of known cost.

    Work is done in row blocks so memory stays linear in ``m``.
    """

    passes: int = 1
    block: int = 512
    name: str = "synthetic_quadratic"

    def __call__(self, bag: Dataset, rng: RngStream | None = None) -> Contribution:
        X = bag.covariates
        sq = np.einsum("ij,ij->i", X, X)
        acc = 0.0
        for _ in range(self.passes):
            for start in range(0, bag.n, self.block):
                rows = X[start:start + self.block]
                d2 = sq[start:start + self.block, None] + sq[None, :] - 2.0 * rows @ X.T
                acc += float(np.exp(-np.maximum(d2, 0.0)).sum())
        # the busy-work result must not leak into the estimate
        return Contribution(bag.outcomes + 0.0 * acc)


def _record(method, estimator, cfg_n, b, s, r, rep, result) -> TimingRecord:
    return TimingRecord(method, estimator, cfg_n, b, s, r, rep, result.fit_seconds,
                        result.resample_seconds, result.wall_time_seconds)


def benchmark(plugin, d: Dataset, cfg: CBLBConfig, repetitions: int = 3,
              workers: int = 1, warmup: bool = True) -> list[TimingRecord]:
    """Time cBLB and the full bootstrap on ``d`` with identical seeds.

    One untimed run of each method precedes the measured repetitions.
    Records come out ordered by repetition, then method.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    name = getattr(plugin, "name", type(plugin).__name__)

    def full():
        return run_full_bootstrap(d, plugin, cfg.n_replicates, cfg.alpha, cfg.seed)[0]

    def cblb():
        return run_cblb(d, plugin, cfg, workers)[0]

    if warmup:
        cblb()
        full()
    records = []
    for rep in range(repetitions):
        res = cblb()
        records.append(_record("cblb", name, d.n, cfg.bag_size, cfg.n_bags,
                               cfg.n_replicates, rep, res))
        res = full()
        records.append(_record("full_bootstrap", name, d.n, d.n, 1, cfg.n_replicates,
                               rep, res))
    return records


def time_single_fit(plugin, bag: Dataset, seed: int = 0) -> float:
    t0 = time.perf_counter()
    plugin(bag, RngStream(seed))
    return time.perf_counter() - t0


def scaling_fit(records, field: str = "total_seconds") -> dict[str, float]:
    """Least-squares slope of log(median time) on log(n), per method."""
    out = {}
    for method in sorted({r.method for r in records}):
        rows = [r for r in records if r.method == method]
        ns = sorted({r.n for r in rows})
        if len(ns) < 4:
            raise InsufficientGrid(f"{method}: need at least 4 distinct n, got {len(ns)}")
        med = [float(np.median([getattr(r, field) for r in rows if r.n == n])) for n in ns]
        if min(med) <= 0:
            raise ValueError(f"{method}: nonpositive timing")
        out[method] = float(np.polyfit(np.log(ns), np.log(med), 1)[0])
    return out
