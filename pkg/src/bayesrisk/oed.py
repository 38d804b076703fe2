"""
A-optimal sensor selection.

A design is a subset of candidate observation rows, each with its own
independent noise variance. The criterion is the posterior trace, which is
also the Bayes risk of the posterior mean. `greedy_select` applies rank-one
Woodbury downdates of the posterior covariance; `exhaustive_select`
enumerates every subset and serves as ground truth for small pools.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import BudgetExceededError, DimensionError
from .gaussian import GaussianMeasure
from .posterior import Posterior
from .problem import LinearForwardModel

EXHAUSTIVE_BUDGET = 10**6
REFACTOR_EVERY = 32
TIE_RTOL = 1e-13


@dataclass(frozen=True, eq=False)
class CandidatePool:
    rows: np.ndarray
    noise_var: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        rows = np.atleast_2d(np.array(self.rows, dtype=float))
        var = np.array(self.noise_var, dtype=float).reshape(-1)
        if var.shape[0] != rows.shape[0]:
            raise DimensionError(f"{rows.shape[0]} candidate rows but {var.shape[0]} noise variances")
        if np.any(~(var > 0)):
            raise ValueError("every candidate noise variance must be positive")
        labels = tuple(str(x) for x in self.labels) if self.labels else tuple(
            str(i) for i in range(rows.shape[0])
        )
        if len(labels) != rows.shape[0]:
            raise DimensionError(f"{rows.shape[0]} candidate rows but {len(labels)} labels")
        rows.setflags(write=False)
        var.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "noise_var", var)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def model(self, subset) -> LinearForwardModel:
        idx = list(subset)
        return LinearForwardModel(self.rows[idx], np.diag(self.noise_var[idx]))

    @classmethod
    def point_observations(cls, n: int, noise_var: float) -> CandidatePool:
        """One candidate per grid cell observing that cell directly."""
        return cls(np.eye(n), np.full(n, float(noise_var)), tuple(f"x{i}" for i in range(n)))


@dataclass(frozen=True, eq=False)
class DesignSelection:
    chosen: list[int]
    objective_trace: list[float]
    final_posterior: Posterior | None
    labels: list[str] = field(default_factory=list)
    woodbury_errors: list[float] = field(default_factory=list)

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]

    def to_dict(self) -> dict:
        return {
            "indices": list(self.chosen),
            "labels": list(self.labels),
            "objective_trace": list(self.objective_trace),
            "woodbury_errors": list(self.woodbury_errors),
        }


def _validate_subset(pool: CandidatePool, subset) -> list[int]:
    idx = [int(i) for i in subset]
    for i in idx:
        if not 0 <= i < len(pool):
            raise IndexError(f"candidate index {i} out of range for a pool of {len(pool)}")
    if len(set(idx)) != len(idx):
        raise ValueError(f"candidate indices must be distinct, got {idx}")
    return idx


def _check_prior(pool: CandidatePool, prior: GaussianMeasure):
    if prior.dim != pool.dim:
        raise DimensionError(f"prior has dimension {prior.dim}, candidates have {pool.dim}")


def trace_after_design(pool: CandidatePool, prior: GaussianMeasure, subset) -> float:
    """tr(post_cov) after observing the candidates in `subset`."""
    _check_prior(pool, prior)
    idx = _validate_subset(pool, subset)
    if not idx:
        return float(np.trace(prior.covariance))
    return float(np.trace(Posterior.from_prior(pool.model(idx), prior).post_cov))


def _subset_trace(prior_precision: np.ndarray, pool: CandidatePool, idx) -> float:
    rows = pool.rows[list(idx)]
    precision = prior_precision + rows.T @ (rows / pool.noise_var[list(idx), None])
    factor = np.linalg.cholesky(precision)
    inv_factor = scipy.linalg.solve_triangular(factor, np.eye(factor.shape[0]), lower=True)
    return float(np.sum(inv_factor * inv_factor))


def _relative_error(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def greedy_select(
    pool: CandidatePool,
    prior: GaussianMeasure,
    k: int,
    refactor_every: int = REFACTOR_EVERY,
    verify: bool = True,
) -> DesignSelection:
    """Pick `k` candidates one at a time, each minimizing the updated trace.

    Adding row f with variance s2 downdates the covariance G to
    ``G - (G f^T)(f G) / (s2 + f G f^T)``. Ties go to the lowest index. With
    `verify`, each downdated covariance is compared against a from-scratch
    posterior and the relative Frobenius errors are recorded.
    """
    _check_prior(pool, prior)
    k = int(k)
    if not 1 <= k <= len(pool):
        raise ValueError(f"k must lie in [1, {len(pool)}], got {k}")
    cov = np.array(prior.covariance, copy=True)
    available = np.ones(len(pool), dtype=bool)
    chosen: list[int] = []
    trace: list[float] = []
    errors: list[float] = []
    final = None

    for step in range(k):
        v = pool.rows @ cov
        denom = pool.noise_var + np.sum(v * pool.rows, axis=1)
        gain = np.sum(v * v, axis=1) / denom
        candidate_trace = np.where(available, np.trace(cov) - gain, np.inf)
        j = int(np.argmin(candidate_trace))
        cov = cov - np.outer(v[j], v[j]) / denom[j]
        cov = 0.5 * (cov + cov.T)
        available[j] = False
        chosen.append(j)

        need_scratch = verify or (step + 1) % refactor_every == 0 or step == k - 1
        if need_scratch:
            final = Posterior.from_prior(pool.model(chosen), prior)
            if verify:
                errors.append(_relative_error(cov, final.post_cov))
            if (step + 1) % refactor_every == 0:
                cov = np.array(final.post_cov, copy=True)
        trace.append(float(np.trace(cov)))

    return DesignSelection(chosen, trace, final, [pool.labels[i] for i in chosen], errors)


def exhaustive_select(
    pool: CandidatePool, prior: GaussianMeasure, k: int, budget: int = EXHAUSTIVE_BUDGET
) -> DesignSelection:
    """Best `k`-subset by enumeration; ties go to the lexicographically smallest."""
    _check_prior(pool, prior)
    k = int(k)
    if not 1 <= k <= len(pool):
        raise ValueError(f"k must lie in [1, {len(pool)}], got {k}")
    total = math.comb(len(pool), k)
    if total > budget:
        raise BudgetExceededError(
            f"C({len(pool)}, {k}) = {total} subsets exceeds the budget of {budget}"
        )
    precision = prior.precision()
    best, best_value = None, np.inf
    for subset in itertools.combinations(range(len(pool)), k):
        value = _subset_trace(precision, pool, subset)
        # rounding must not overturn the lexicographic tie-break
        if value < best_value - TIE_RTOL * abs(best_value if np.isfinite(best_value) else 0.0):
            best, best_value = list(subset), value
    prefix = [trace_after_design(pool, prior, best[: i + 1]) for i in range(k)]
    final = Posterior.from_prior(pool.model(best), prior)
    return DesignSelection(best, prefix, final, [pool.labels[i] for i in best])
