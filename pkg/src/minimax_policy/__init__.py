"""Minimax regret decision rules for changing an eligibility cutoff.

The welfare effect of moving a regression-discontinuity cutoff is only
partially identified when the outcome functions are merely known to be
Lipschitz. This package computes the rule that minimizes worst-case
expected welfare regret in the Gaussian model, together with estimator
baselines and tools to evaluate the worst-case regret of any linear rule.
"""

from .core import (
    Dataset,
    NormalTriple,
    PolicySpec,
    PreparedProblem,
    a_star,
    mills_ratio,
    norm_cdf,
    norm_pdf,
    normal_triple,
    prepare,
)
from .estimators import (
    LinearEstimator,
    bias_variance,
    bias_weight_alpha,
    epsilon_mse,
    frontier_estimator,
    minimax_mse_estimator,
    polynomial_wls_estimator,
)
from .modulus import ModulusPoint, WStar, closed_form_modulus, omega_prime, rho, solve_modulus, w_star
from .preprocessing import lipschitz_lower_bound, nn_variance
from .providers import (
    AffineProvider,
    LinearProvider,
    ModulusProvider,
    RDLipschitzProvider,
    StoyeProvider,
    make_provider,
)
from .regret import (
    RegretReport,
    Truth,
    max_bias,
    max_regret,
    misspecification_sweep,
    monte_carlo_regret,
    rho_w,
    truth_from_point,
    univariate_minimax_risk,
)
from .rules import (
    DecisionRule,
    build_rule,
    cost_threshold,
    decide,
    equivalent_test_level,
    find_epsilon_star,
    plugin_rule,
    sigma_star,
    wls_rule,
)

__version__ = "0.1.0"
