"""
How much worse are plug-in rules?
=================================

A natural alternative to the minimax regret rule is to estimate the
welfare gain and expand when the estimate is positive. This script
compares the worst-case regret of such plug-in rules with the minimax
rule, then checks the minimax value by simulation.
"""

import numpy as np

from minimax_policy import (
    Dataset,
    PolicySpec,
    RDLipschitzProvider,
    build_rule,
    max_regret,
    minimax_mse_estimator,
    monte_carlo_regret,
    plugin_rule,
    polynomial_wls_estimator,
    prepare,
    truth_from_point,
)

rng = np.random.default_rng(3)
n = 60
x = np.sort(rng.uniform(-1.0, 1.0, n))
d = (x >= 0.0).astype(int)
sigma = rng.uniform(0.3, 0.8, n)
y = 0.3 * x + 0.2 * d + sigma * rng.normal(size=n)
problem = prepare(Dataset(x, d, y, sigma), PolicySpec(0.0, -0.4, 0.0, 0.8))
provider = RDLipschitzProvider(problem)

minimax = build_rule(provider)
candidates = {"minimax regret": minimax}
for est in (minimax_mse_estimator(provider),
            minimax_mse_estimator(provider, constant_effect=True),
            polynomial_wls_estimator(problem, 0),
            polynomial_wls_estimator(problem, 1),
            polynomial_wls_estimator(problem, 2)):
    candidates[f"sign of {est.label}"] = plugin_rule(est.raw_weights, est.label)

print(f"{'rule':32s} max regret")
for name, rule in candidates.items():
    print(f"{name:32s} {max_regret(problem, rule).max_regret:.5f}")

# The worst case for the minimax rule is attained at a specific pair of
# outcome functions. Simulating the rule there should reproduce its
# worst-case regret up to Monte Carlo error.
point = provider.point(minimax.epsilon_star)
for sign in (1.0, -1.0):
    mc = monte_carlo_regret(minimax, truth_from_point(problem, point, sign), sigma, 100_000, seed=1)
    print(f"\nsimulated regret ({'+' if sign > 0 else '-'} truth): {mc.regret:.5f} +- {mc.se:.5f}")
print("analytic:", round(minimax.minimax_risk, 5))
