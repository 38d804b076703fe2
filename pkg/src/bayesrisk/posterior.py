"""
Gaussian posterior for the linear model with a Gaussian prior.

The posterior is the regularized estimator with ``beta R`` replaced by the
prior precision and ``m0`` by the prior mean, so that

    post_cov  = (prior_cov^{-1} + H_misfit)^{-1}
    post_mean = post_cov (F^T noise_cov^{-1} y + prior_cov^{-1} m_pr).

The Bayes risk of the posterior mean under squared loss is ``tr(post_cov)``;
`trace_identity_report` and `prior_expected_bias_sq` expose the two pieces
that add up to it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .estimator import MseTerms
from .exceptions import DimensionError
from .gaussian import AffineMap, GaussianMeasure, pushforward, second_moment, spd_factor
from .problem import LinearForwardModel, ProblemInstance, RegularizationSpec

logger = logging.getLogger(__name__)

IDENTITY_RTOL = 1e-10
CONDITION_LIMIT = 1e6


class TraceIdentity(NamedTuple):
    prior_term: float
    misfit_term: float
    rhs: float
    residual: float


@dataclass(frozen=True, eq=False)
class Posterior:
    prior: GaussianMeasure
    model: LinearForwardModel
    post_cov: np.ndarray
    post_factor: np.ndarray
    misfit_hessian: np.ndarray
    prior_precision: np.ndarray
    condition_number: float
    precision_residual: float

    @classmethod
    def from_prior(cls, model: LinearForwardModel, prior: GaussianMeasure) -> Posterior:
        """Condition `prior` on the linear-Gaussian likelihood of `model`."""
        n = model.param_dim
        if prior.dim != n:
            raise DimensionError(f"prior has dimension {prior.dim}, forward operator acts on {n}")
        prior_precision = prior.precision()
        misfit = model.misfit_hessian()
        precision, precision_factor = spd_factor(prior_precision + misfit, name="posterior precision")
        cov = scipy.linalg.cho_solve((precision_factor, True), np.eye(n))
        # one step of iterative refinement against the assembled precision
        cov = cov + cov @ (np.eye(n) - precision @ cov)
        cov, factor = spd_factor(0.5 * (cov + cov.T), name="posterior covariance")

        inv = scipy.linalg.cho_solve((factor, True), np.eye(n))
        residual = float(np.linalg.norm(inv - precision) / np.linalg.norm(precision))
        cond = float(np.linalg.cond(cov))
        logger.debug("posterior covariance condition number %.3e", cond)
        if residual > IDENTITY_RTOL:
            level = logging.WARNING if cond <= CONDITION_LIMIT else logging.INFO
            logger.log(level, "posterior precision residual %.3e (condition %.3e)", residual, cond)
        if np.trace(cov) > np.trace(prior.covariance) * (1 + IDENTITY_RTOL):
            logger.warning("posterior trace exceeds prior trace; check the inputs")

        for arr in (cov, factor, misfit, prior_precision):
            arr.setflags(write=False)
        return cls(prior, model, cov, factor, misfit, prior_precision, cond, residual)

    @property
    def dim(self) -> int:
        return self.post_cov.shape[0]

    def measure(self, y) -> GaussianMeasure:
        """Posterior law N(posterior_mean(y), post_cov)."""
        return GaussianMeasure(posterior_mean(self, y), self.post_cov)


from_prior = Posterior.from_prior


def posterior_mean(post: Posterior, y) -> np.ndarray:
    """Posterior mean for one data vector or for each row of a ``(K, D)`` batch."""
    model = post.model
    y = np.asarray(y, dtype=float)
    if y.ndim == 0 or y.shape[-1] != model.data_dim:
        raise DimensionError(f"data must have trailing dimension {model.data_dim}, got {y.shape}")
    rhs = (model.forward.T @ model.noise_solve(y.T)).T + post.prior.solve(post.prior.mean)
    return rhs @ post.post_cov


def bayes_risk_analytic(post: Posterior) -> float:
    return float(np.trace(post.post_cov))


def _prior_term(post: Posterior) -> float:
    # tr(G P G) = ||L_pr^{-1} G||_F^2 with P = (L_pr L_pr^T)^{-1}
    w = scipy.linalg.solve_triangular(post.prior.factor, post.post_cov, lower=True)
    return float(np.sum(w * w))


def _misfit_term(post: Posterior) -> float:
    # tr(G H_misfit G) = ||L_noise^{-1} F G||_F^2
    w = scipy.linalg.solve_triangular(
        post.model.noise_cov_factor, post.model.forward @ post.post_cov, lower=True
    )
    return float(np.sum(w * w))


def trace_identity_report(post: Posterior) -> TraceIdentity:
    t1 = _prior_term(post)
    t2 = _misfit_term(post)
    rhs = bayes_risk_analytic(post)
    return TraceIdentity(t1, t2, rhs, abs(t1 + t2 - rhs))


def bias_map(post: Posterior) -> AffineMap:
    """m -> post_cov prior_cov^{-1} (m - m_pr)."""
    a = post.post_cov @ post.prior_precision
    return AffineMap(a, -a @ post.prior.mean)


def bayesian_mse_analytic(post: Posterior, m) -> MseTerms:
    m = np.asarray(m, dtype=float).reshape(-1)
    if m.shape[0] != post.dim:
        raise DimensionError(f"parameter has dimension {m.shape[0]}, expected {post.dim}")
    b = post.post_cov @ post.prior.solve(m - post.prior.mean)
    bias_sq = float(b @ b)
    var = _misfit_term(post)
    return MseTerms(bias_sq + var, bias_sq, var)


def prior_expected_bias_sq(post: Posterior) -> float:
    """Prior average of the squared bias, via the pushforward of the prior."""
    return second_moment(pushforward(post.prior, bias_map(post)))


def as_regularized_instance(post: Posterior, truth=None) -> ProblemInstance:
    """The frequentist problem with beta = 1, R = prior precision, m0 = prior mean."""
    reg = RegularizationSpec(1.0, post.prior_precision, post.prior.mean)
    return ProblemInstance(post.model, reg, truth=truth)
