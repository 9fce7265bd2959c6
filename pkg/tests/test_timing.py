import numpy as np
import pytest

from kernel_cblb.core import CBLBConfig, Dataset
from kernel_cblb.timing import (
    InsufficientGrid,
    QuadraticCostPlugin,
    TimingRecord,
    benchmark,
    scaling_fit,
    time_single_fit,
)


def data(n, seed=0):
    gen = np.random.default_rng(seed)
    return Dataset(gen.normal(size=n), gen.integers(0, 2, n), gen.normal(size=(n, 2)))


def test_quadratic_plugin_returns_outcomes():
    d = data(700)
    np.testing.assert_array_equal(QuadraticCostPlugin(block=100)(d).values, d.outcomes)
    assert time_single_fit(QuadraticCostPlugin(), d) > 0


def test_benchmark_records():
    d = data(1500)
    cfg = CBLBConfig.from_gamma(1500, 0.7, 200, seed=2)
    recs = benchmark(QuadraticCostPlugin(), d, cfg, repetitions=3)
    assert len(recs) == 6
    assert [r.method for r in recs] == ["cblb", "full_bootstrap"] * 3
    assert [r.repetition for r in recs] == [0, 0, 1, 1, 2, 2]
    cb, fb = recs[0], recs[1]
    assert (cb.b, cb.s, cb.r) == (cfg.bag_size, cfg.n_bags, 200)
    assert (fb.b, fb.s, fb.n) == (1500, 1, 1500)
    assert cb.estimator == "synthetic_quadratic"
    for r in recs:
        parts = r.fit_seconds + r.resample_seconds
        assert parts <= r.total_seconds
        assert parts >= 0.8 * r.total_seconds


def test_benchmark_rejects_zero_repetitions():
    with pytest.raises(ValueError):
        benchmark(QuadraticCostPlugin(), data(50), CBLBConfig(50, 10, 5, 40), repetitions=0)


def fake(method, n, seconds, rep=0):
    return TimingRecord(method, "x", n, n, 1, 10, rep, seconds, 0.0, seconds)


def test_scaling_fit_recovers_exponent():
    ns = [1000, 2000, 4000, 8000]
    recs = [fake("full_bootstrap", n, 1e-9 * n**2) for n in ns]
    recs += [fake("cblb", n, 3e-7 * n**1.5 * f, rep) for n in ns
             for rep, f in enumerate((1.0, 0.5, 50.0))]
    slopes = scaling_fit(recs)
    assert slopes["full_bootstrap"] == pytest.approx(2.0, abs=1e-9)
    assert slopes["cblb"] == pytest.approx(1.5, abs=1e-9)


def test_scaling_fit_needs_four_sizes():
    recs = [fake("cblb", n, 1.0) for n in (1, 2, 3)]
    with pytest.raises(InsufficientGrid):
        scaling_fit(recs)
