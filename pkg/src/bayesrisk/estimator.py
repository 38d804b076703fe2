"""
Regularized least-squares estimator and its exact risk.

For data ``y`` the estimator is the minimizer of

    1/2 (F m - y)^T noise_cov^{-1} (F m - y) + beta/2 (m - m0)^T R (m - m0),

i.e. ``H^{-1} (F^T noise_cov^{-1} y + beta R m0)`` with
``H = H_misfit + beta R`` and ``H_misfit = F^T noise_cov^{-1} F``.
All inverses are applied through Cholesky solves.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .exceptions import DimensionError
from .gaussian import spd_factor
from .problem import ProblemInstance


@dataclass(frozen=True, eq=False)
class EstimatorOperators:
    hessian: np.ndarray
    misfit_hessian: np.ndarray
    hessian_factor: np.ndarray

    def solve(self, rhs) -> np.ndarray:
        """H^{-1} @ rhs."""
        return scipy.linalg.cho_solve((self.hessian_factor, True), np.asarray(rhs, dtype=float))

    @property
    def dim(self) -> int:
        return self.hessian.shape[0]


class MseTerms(NamedTuple):
    total: float
    bias_sq: float
    variance_trace: float


@dataclass(frozen=True)
class DecompositionCheck:
    """Empirical MSE against the bias/variance split of the same draws."""

    left: float
    right: float
    difference: float
    bias_sq: float
    variance: float
    std_error: float
    count: int


def build_operators(instance: ProblemInstance) -> EstimatorOperators:
    model = instance.model
    reg = instance.regularization
    misfit = model.misfit_hessian()
    hessian, factor = spd_factor(misfit + reg.beta * reg.reg, name="Hessian")
    for arr in (misfit, hessian, factor):
        arr.setflags(write=False)
    return EstimatorOperators(hessian, misfit, factor)


def _vector(v, n: int, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim == 0 or v.shape[-1] != n:
        raise DimensionError(f"{what} must have trailing dimension {n}, got shape {v.shape}")
    return v


def normal_rhs(instance: ProblemInstance, y) -> np.ndarray:
    """F^T noise_cov^{-1} y + beta R m0 for one data vector or a batch (rows)."""
    model = instance.model
    reg = instance.regularization
    y = _vector(y, model.data_dim, "data")
    weighted = model.noise_solve(y.T)
    return (model.forward.T @ weighted).T + reg.beta * (reg.reg @ reg.reference)


def estimate(ops: EstimatorOperators, instance: ProblemInstance, y) -> np.ndarray:
    """Minimizer of the regularized objective.

    `y` may be a single data vector of length D or a ``(K, D)`` batch, in which
    case a ``(K, N)`` array of estimates is returned.
    """
    rhs = normal_rhs(instance, y)
    return ops.solve(rhs.T).T


def bias(ops: EstimatorOperators, instance: ProblemInstance, m) -> np.ndarray:
    """E[estimate] - m = -beta H^{-1} R (m - m0)."""
    reg = instance.regularization
    m = _vector(m, ops.dim, "parameter").reshape(-1)
    return -reg.beta * ops.solve(reg.reg @ (m - reg.reference))


def variance_trace(ops: EstimatorOperators) -> float:
    """tr(H^{-1} H_misfit H^{-1}), formed by two solves then a trace."""
    x = ops.solve(ops.misfit_hessian)
    y = ops.solve(x.T)
    return float(np.trace(y))


def mse_analytic(ops: EstimatorOperators, instance: ProblemInstance, m) -> MseTerms:
    b = bias(ops, instance, m)
    bias_sq = float(b @ b)
    var = variance_trace(ops)
    return MseTerms(bias_sq + var, bias_sq, var)


def mse_decomposition_check(
    ops: EstimatorOperators, instance: ProblemInstance, m, ys
) -> DecompositionCheck:
    """Compare mean ||m - m_hat||^2 with ||m - mean(m_hat)||^2 + mean ||m_hat - mean(m_hat)||^2.

    Both sides use the 1/K normalization so a single draw gives a zero
    variance term. The difference is reported, not asserted.
    """
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    if ys.shape[0] < 1:
        raise ValueError("need at least one data draw")
    m = _vector(m, ops.dim, "parameter").reshape(-1)
    est = estimate(ops, instance, ys)
    k = est.shape[0]
    losses = np.sum((est - m) ** 2, axis=1)
    left = float(losses.mean())
    center = est.mean(axis=0)
    spread = np.sum((est - center) ** 2, axis=1)
    bias_sq = float(np.sum((m - center) ** 2))
    variance = float(spread.mean())
    right = bias_sq + variance
    if k > 1:
        se_left = losses.std(ddof=1) / np.sqrt(k)
        se_right = spread.std(ddof=1) / np.sqrt(k)
        std_error = float(np.hypot(se_left, se_right))
    else:
        std_error = 0.0
    return DecompositionCheck(left, right, left - right, bias_sq, variance, std_error, k)
