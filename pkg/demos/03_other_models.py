"""
Beyond the cutoff problem
=========================

Rule synthesis only needs three things from a model: the modulus, its
slope, and a score direction. Two small models show the pieces.
"""

import numpy as np

from minimax_policy import (
    StoyeProvider,
    a_star,
    bias_variance,
    bias_weight_alpha,
    build_rule,
    epsilon_mse,
    equivalent_test_level,
    make_provider,
    wls_rule,
)

# A scalar signal Y ~ N(theta1, s^2) with welfare theta2 tied to theta1 by
# |theta2 - a * theta1| <= b. With little noise the sign of Y is the best
# rule; with a lot of noise the data cannot rule out either sign and the
# rule adds noise of its own.
for s in (1.0, 0.3):
    rule = build_rule(StoyeProvider(1.0, 0.5, s))
    print(f"s = {s}: {rule.kind}, extra noise sd = {rule.noise_sd:.5f}, regret = {rule.minimax_risk:.5f}")

# The nonrandomized rule is a one-sided test at an unusual level.
print("equivalent test level:", round(equivalent_test_level(build_rule(StoyeProvider(1.0, 0.5))), 4))

# Along the bias-sd frontier of linear estimators, the minimax regret
# radius sits to the left of the minimax MSE radius: it cares more about
# bias.
prov = StoyeProvider(1.0, 0.5)
rule = build_rule(prov)
print("\nradius: regret", round(rule.epsilon_star, 4), " mse", round(epsilon_mse(prov), 4))
print("bias/sd at the regret radius:", tuple(round(v, 4) for v in bias_variance(prov, rule.epsilon_star)))
print("implied weight on squared bias:", round(bias_weight_alpha(prov), 4))

# In a correctly specified linear model the welfare gain is identified and
# the rule is the sign of the weighted least squares estimate.
X = np.column_stack([np.ones(6), np.arange(6.0)])
cov = np.diag([1.0, 1.0, 2.0, 2.0, 4.0, 4.0])
contrast = np.array([0.0, 1.0])
wls = wls_rule(X, cov, contrast)
generic = build_rule(make_provider("linear", X, cov, contrast))
print("\nWLS weights:    ", np.round(wls.raw_weights, 4))
print("generic weights:", np.round(generic.raw_weights, 4))
print("radius equals a* =", round(a_star(), 5), ":", generic.epsilon_star == a_star())
