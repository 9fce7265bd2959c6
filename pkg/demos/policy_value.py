"""
Value of a learned treatment rule
=================================

Learn an individualized treatment rule with kernel augmented outcome-weighted
learning and attach an interval to its value.  The simulated trial has five
uniform covariates and a fair-coin treatment; the best possible rule treats
when 0.2 - 0.6 x1 - 0.8 x2 > 0.
"""

import numpy as np

from kernel_cblb import AOLPlugin, CBLBConfig, OPTIMAL_VALUE, RngStream, generate_policy
from kernel_cblb import run_cblb, true_optimal_rule
from kernel_cblb.dgp import rule_value

data = generate_policy(RngStream(3), 2000)
plugin = AOLPlugin()

fit, _ = plugin.fit(data, RngStream(4))
print(f"lambda chosen by cross-validation: {fit.lam}")

fresh = np.random.default_rng(5).uniform(-1, 1, (100_000, 5))
agree = np.mean(fit.rule(fresh) == true_optimal_rule(fresh))
print(f"agrees with the optimal rule on {agree:.1%} of fresh points")
print(f"true value of the learned rule {rule_value(fit.rule(fresh), fresh):.3f},"
      f" optimal {OPTIMAL_VALUE:.3f}, treat-everyone 0.700")

# interval for the value, each bag learning and scoring its own rule
data = generate_policy(RngStream(6), 4000)
res, _ = run_cblb(data, plugin, CBLBConfig.from_gamma(4000, 0.7, 100, seed=7))
print(f"value {res.point_estimate:.3f}  [{res.lower:.3f}, {res.upper:.3f}]")

# the fitted surrogate loss can be bootstrapped the same way
crit = AOLPlugin(estimand="criterion")
res, _ = run_cblb(data, crit, CBLBConfig.from_gamma(4000, 0.7, 100, seed=7))
print(f"weighted hinge criterion {res.point_estimate:.4f}  [{res.lower:.4f}, {res.upper:.4f}]")
