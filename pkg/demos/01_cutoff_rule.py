"""
Choosing whether to lower an eligibility cutoff
===============================================

Villages with a score above ``c0`` get a program today. Should the program
also go to villages with scores in ``[c1, c0)``? The outcome for those
villages under treatment is never observed, so the answer depends on how
fast outcomes can change with the score. Here that speed is capped by a
Lipschitz constant ``C``.
"""

import numpy as np

from minimax_policy import (
    Dataset,
    PolicySpec,
    RDLipschitzProvider,
    build_rule,
    cost_threshold,
    decide,
    lipschitz_lower_bound,
    nn_variance,
    prepare,
)

rng = np.random.default_rng(7)

# Simulated data: 120 villages, treated above c0 = 0, smooth outcome with
# a jump at the cutoff.
n = 120
x = np.sort(rng.uniform(-1.0, 1.0, n))
d = (x >= 0.0).astype(int)
noise = rng.uniform(0.2, 0.5, n)
y = 0.4 * x + 0.25 * d + 0.1 * np.sin(3 * x) + noise * rng.normal(size=n)

# Outcome noise is not known in practice; estimate it from nearest neighbors
# within each arm.
data = nn_variance(Dataset(x, d, y, None), neighbors=3)
print("estimated noise sd, first five:", np.round(data.sigma[:5], 3))

# A data-driven floor for C: the largest local slope we can see. Treat it
# with care in small noisy samples. Each window holds a dozen points, and a
# maximum over noisy slopes is biased upward. Wider windows and unweighted
# fits help, since noisy sigma estimates make a few units dominate the
# weighted fits. The true largest slope here is about 0.7.
raw = Dataset(x, d, y, None)
for h in (None, 0.4):
    label = "default" if h is None else h
    print(f"Lipschitz lower bound, bandwidth {label}:", round(lipschitz_lower_bound(raw, 0.0, bandwidth=h), 3))

# Build the minimax regret rule for lowering the cutoff to -0.3 with C = 1.
problem = prepare(data, PolicySpec(c0=0.0, c1=-0.3, cost=0.0, lipschitz_c=1.0))
rule = build_rule(RDLipschitzProvider(problem))
print("\nrule kind:", rule.kind)
print("sigma*:", round(rule.sigma_star, 4), " eps*:", round(rule.epsilon_star, 4))
print("worst-case regret:", round(rule.minimax_risk, 5))
print("units with nonzero weight:", int(np.sum(rule.raw_weights != 0)), "of", n)
print("probability of expanding:", decide(rule, problem.y).prob_policy1)
print("largest cost at which expanding is still chosen:", round(cost_threshold(problem, y, rule), 4))

# How does the answer move with C? Small C means the untreated villages near
# the cutoff are informative about the affected ones; large C means they
# are not and the rule starts to randomize.
print("\n   C    kind            P(expand)")
for c in (0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0):
    r = build_rule(RDLipschitzProvider(problem.with_lipschitz(c)))
    print(f"{c:5.2f}   {r.kind:14s}  {decide(r, problem.y).prob_policy1:.4f}")
