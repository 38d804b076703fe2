"""Risk, Bayes risk and A-optimal design for linear-Gaussian inverse problems."""

__version__ = "0.1.0"

from .estimator import (
    EstimatorOperators,
    MseTerms,
    bias,
    build_operators,
    estimate,
    mse_analytic,
    mse_decomposition_check,
)
from .exceptions import (
    BayesRiskError,
    BudgetExceededError,
    ConfigError,
    DimensionError,
    InsufficientSamplesError,
    SingularCovarianceError,
)
from .gaussian import (
    AffineMap,
    GaussianMeasure,
    SampleBatch,
    characteristic_function,
    empirical_moments,
    make_rng,
    pushforward,
    sample,
    second_moment,
)
from .montecarlo import McEstimate, bayes_risk_mc, estimator_mean_mc, frequentist_risk_mc
from .oed import CandidatePool, DesignSelection, exhaustive_select, greedy_select, trace_after_design
from .posterior import (
    Posterior,
    bayes_risk_analytic,
    bayesian_mse_analytic,
    posterior_mean,
    prior_expected_bias_sq,
    trace_identity_report,
)
from .problem import (
    LinearForwardModel,
    ProblemInstance,
    RegularizationSpec,
    make_deconvolution,
    make_random_instance,
    make_scalar_unit,
    simulate_data,
)
