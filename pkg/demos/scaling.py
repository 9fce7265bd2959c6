"""
How the two bootstraps scale
============================

A stand-in estimator whose fit costs m^2 kernel evaluations on m units.  The
full bootstrap pays that on all n units; the little bags pay it s times on b
units, n * b in total.
"""

from kernel_cblb import CBLBConfig, QuadraticCostPlugin, RngStream, benchmark, generate_ate
from kernel_cblb import scaling_fit

plugin = QuadraticCostPlugin()
records = []
for i, n in enumerate([2000, 4000, 8000, 16000]):
    data = generate_ate(RngStream(0, (i,)), n)
    cfg = CBLBConfig.from_gamma(n, 0.7, n_replicates=100, seed=1)
    recs = benchmark(plugin, data, cfg, repetitions=2)
    records += recs
    cb = min(r.total_seconds for r in recs if r.method == "cblb")
    fb = min(r.total_seconds for r in recs if r.method == "full_bootstrap")
    print(f"n={n:6d}  cBLB {cb:7.3f}s  full {fb:7.3f}s")

print("log-log slopes:", {k: round(v, 2) for k, v in scaling_fit(records).items()})
