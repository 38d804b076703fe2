"""
Sampling oracles for the analytic risk quantities.

Every estimator here draws from `gaussian.make_rng(seed, stream)` and uses a
single vectorized pass, so results are bit-identical for a fixed seed.
Standard errors are the sample standard deviation of the summands over
sqrt(count); no variance reduction is applied.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .estimator import EstimatorOperators, estimate
from .exceptions import InsufficientSamplesError
from .gaussian import make_rng
from .posterior import Posterior, bias_map, posterior_mean
from .problem import ProblemInstance, simulate_batch

PRIOR_STREAM = 0
NOISE_STREAM = 1


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    count: int
    seed: int

    def zscore(self, reference: float) -> float:
        if self.std_error == 0.0:
            return 0.0 if self.value == reference else float("inf")
        return abs(self.value - reference) / self.std_error

    def within(self, reference: float, n_se: float = 4.0) -> bool:
        return abs(self.value - reference) <= n_se * self.std_error

    def to_dict(self) -> dict:
        return asdict(self)


def _check_count(count: int) -> int:
    count = int(count)
    if count < 2:
        raise InsufficientSamplesError(f"Monte Carlo needs count >= 2, got {count}")
    return count


def mean_estimate(values, seed: int) -> McEstimate:
    values = np.asarray(values, dtype=float)
    k = values.shape[0]
    return McEstimate(float(values.mean()), float(values.std(ddof=1) / np.sqrt(k)), k, int(seed))


def frequentist_risk_mc(
    ops: EstimatorOperators, instance: ProblemInstance, m, count: int, seed: int
) -> McEstimate:
    """Monte Carlo mean of ||m - m_hat(y)||^2 over y ~ N(F m, noise_cov)."""
    count = _check_count(count)
    m = np.asarray(m, dtype=float).reshape(-1)
    ys = simulate_batch(instance, m, count, seed, stream=NOISE_STREAM)
    losses = np.sum((estimate(ops, instance, ys) - m) ** 2, axis=1)
    return mean_estimate(losses, seed)


def estimator_mean_mc(
    ops: EstimatorOperators, instance: ProblemInstance, m, count: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean of m_hat(y) and its componentwise standard errors."""
    count = _check_count(count)
    ys = simulate_batch(instance, m, count, seed, stream=NOISE_STREAM)
    est = estimate(ops, instance, ys)
    return est.mean(axis=0), est.std(axis=0, ddof=1) / np.sqrt(count)


def joint_draws(post: Posterior, count: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw m_j from the prior, then one y_j | m_j each."""
    ms = post.prior.draw(make_rng(seed, PRIOR_STREAM), count)
    noise = post.model.noise_measure.draw(make_rng(seed, NOISE_STREAM), count)
    return ms, ms @ post.model.forward.T + noise


def bayes_risk_mc(post: Posterior, count: int, seed: int) -> McEstimate:
    """Prior-averaged squared error of the posterior mean, one y per prior draw."""
    count = _check_count(count)
    ms, ys = joint_draws(post, count, seed)
    losses = np.sum((ms - posterior_mean(post, ys)) ** 2, axis=1)
    return mean_estimate(losses, seed)


def prior_bias_sq_mc(post: Posterior, count: int, seed: int) -> McEstimate:
    """Mean of ||post_cov prior_cov^{-1} (m - m_pr)||^2 over prior draws."""
    count = _check_count(count)
    ms = post.prior.draw(make_rng(seed, PRIOR_STREAM), count)
    z = bias_map(post)(ms)
    return mean_estimate(np.sum(z * z, axis=1), seed)
