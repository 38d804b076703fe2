"""
Linear-Gaussian inverse problem instances and reproducible builders.

The data model is ``y = F m + eta`` with ``eta ~ N(0, noise_cov)``; the
penalty is ``beta/2 (m - m0)^T R (m - m0)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
import scipy.linalg

from .exceptions import DimensionError
from .gaussian import GaussianMeasure, make_rng, spd_factor


@dataclass(frozen=True, eq=False)
class LinearForwardModel:
    """Forward matrix F (D x N) and Gaussian noise covariance (D x D)."""

    forward: np.ndarray
    noise_cov: np.ndarray
    noise_cov_factor: np.ndarray = None

    def __post_init__(self):
        f = np.atleast_2d(np.array(self.forward, dtype=float))
        if f.ndim != 2 or min(f.shape) < 1:
            raise DimensionError(f"forward operator must be a non-empty matrix, got shape {f.shape}")
        cov, factor = spd_factor(self.noise_cov, name="noise covariance")
        if cov.shape[0] != f.shape[0]:
            raise DimensionError(
                f"noise covariance is {cov.shape[0]}x{cov.shape[0]} but F has {f.shape[0]} rows"
            )
        for arr in (f, cov, factor):
            arr.setflags(write=False)
        object.__setattr__(self, "forward", f)
        object.__setattr__(self, "noise_cov", cov)
        object.__setattr__(self, "noise_cov_factor", factor)

    @property
    def data_dim(self) -> int:
        return self.forward.shape[0]

    @property
    def param_dim(self) -> int:
        return self.forward.shape[1]

    def noise_solve(self, rhs) -> np.ndarray:
        """noise_cov^{-1} @ rhs via the cached factor."""
        return scipy.linalg.cho_solve((self.noise_cov_factor, True), np.asarray(rhs, dtype=float))

    @cached_property
    def noise_measure(self) -> GaussianMeasure:
        """N(0, noise_cov)."""
        return GaussianMeasure(np.zeros(self.data_dim), self.noise_cov)

    def misfit_hessian(self) -> np.ndarray:
        """F^T noise_cov^{-1} F, symmetrized."""
        h = self.forward.T @ self.noise_solve(self.forward)
        return 0.5 * (h + h.T)

    def to_dict(self) -> dict:
        return {"forward": self.forward.tolist(), "noise_cov": self.noise_cov.tolist()}


@dataclass(frozen=True, eq=False)
class RegularizationSpec:
    """Quadratic penalty weight `beta`, SPD matrix `reg`, reference point."""

    beta: float
    reg: np.ndarray
    reference: np.ndarray

    def __post_init__(self):
        beta = float(self.beta)
        if not beta > 0.0:
            raise ValueError(f"beta must be positive, got {beta}")
        reg, _ = spd_factor(self.reg, name="regularization operator")
        ref = np.array(self.reference, dtype=float).reshape(-1)
        if ref.shape[0] != reg.shape[0]:
            raise DimensionError(
                f"reference point has dimension {ref.shape[0]} but R is {reg.shape[0]}x{reg.shape[0]}"
            )
        reg.setflags(write=False)
        ref.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "reg", reg)
        object.__setattr__(self, "reference", ref)

    @classmethod
    def identity(cls, n: int, beta: float = 1.0) -> RegularizationSpec:
        return cls(beta, np.eye(n), np.zeros(n))

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "reg": self.reg.tolist(),
            "reference": self.reference.tolist(),
        }


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    model: LinearForwardModel
    regularization: RegularizationSpec
    truth: np.ndarray | None = None
    seed: int | None = None

    def __post_init__(self):
        n = self.model.param_dim
        if self.regularization.reg.shape[0] != n:
            raise DimensionError(
                f"regularization acts on dimension {self.regularization.reg.shape[0]}, "
                f"forward operator on {n}"
            )
        if self.truth is not None:
            t = np.array(self.truth, dtype=float).reshape(-1)
            if t.shape[0] != n:
                raise DimensionError(f"truth has dimension {t.shape[0]}, expected {n}")
            t.setflags(write=False)
            object.__setattr__(self, "truth", t)

    @property
    def param_dim(self) -> int:
        return self.model.param_dim

    @property
    def data_dim(self) -> int:
        return self.model.data_dim

    def with_beta(self, beta: float) -> ProblemInstance:
        reg = self.regularization
        return replace(self, regularization=RegularizationSpec(beta, reg.reg, reg.reference))

    def default_prior(self) -> GaussianMeasure:
        """The prior matching the penalty: N(m0, (beta R)^{-1})."""
        reg = self.regularization
        spec = GaussianMeasure(np.zeros(reg.reg.shape[0]), reg.beta * reg.reg)
        return GaussianMeasure(reg.reference, spec.precision())

    def to_dict(self) -> dict:
        out = {**self.model.to_dict(), **self.regularization.to_dict()}
        out["truth"] = None if self.truth is None else self.truth.tolist()
        return out


def _check_dim(vec, n: int, what: str) -> np.ndarray:
    v = np.asarray(vec, dtype=float)
    if v.shape[-1] != n:
        raise DimensionError(f"{what} has dimension {v.shape[-1]}, expected {n}")
    return v


def deconvolution_truth(n: int) -> np.ndarray:
    """Smooth bump at 0.3 plus a unit step on [0.6, 1) of the periodic grid."""
    x = np.arange(n) / n
    return np.exp(-((x - 0.3) ** 2) / 0.01) + (x >= 0.6).astype(float)


def blur_matrix(n: int, kernel_width: float) -> np.ndarray:
    """Circulant Gaussian blur on n periodic cells, rows normalized to sum to 1.

    `kernel_width` is the kernel standard deviation measured in grid cells.
    """
    idx = np.arange(n)
    diff = np.abs(idx[:, None] - idx[None, :])
    dist = np.minimum(diff, n - diff)
    kernel = np.exp(-0.5 * (dist / kernel_width) ** 2)
    return kernel / kernel.sum(axis=1, keepdims=True)


def make_deconvolution(
    n: int, kernel_width: float, noise_sigma: float, seed: int = 0, beta: float = 1.0
) -> ProblemInstance:
    """1-D periodic Gaussian-blur deconvolution with white noise and R = I.

    The builder itself is deterministic; `seed` is recorded on the instance
    so downstream data simulation can default to it.
    """
    if n < 4:
        raise ValueError(f"deconvolution grid needs n >= 4, got {n}")
    if not kernel_width > 0 or not noise_sigma > 0:
        raise ValueError("kernel_width and noise_sigma must be positive")
    model = LinearForwardModel(blur_matrix(n, kernel_width), noise_sigma**2 * np.eye(n))
    return ProblemInstance(
        model, RegularizationSpec.identity(n, beta), truth=deconvolution_truth(n), seed=seed
    )


def random_spd(rng: np.random.Generator, n: int) -> np.ndarray:
    g = rng.standard_normal((n, n))
    return g.T @ g / n + 0.1 * np.eye(n)


def make_random_instance(n: int, d: int, seed: int, beta: float = 1.0) -> ProblemInstance:
    """Random well-conditioned instance: F ~ N(0, 1/d) entrywise, random SPD noise and R."""
    if n < 1 or d < 1:
        raise ValueError(f"dimensions must be >= 1, got n={n}, d={d}")
    rng = make_rng(seed)
    forward = rng.standard_normal((d, n)) / np.sqrt(d)
    noise_cov = random_spd(rng, d)
    reg = random_spd(rng, n)
    truth = rng.standard_normal(n)
    return ProblemInstance(
        LinearForwardModel(forward, noise_cov),
        RegularizationSpec(beta, reg, np.zeros(n)),
        truth=truth,
        seed=seed,
    )


def make_scalar_unit() -> ProblemInstance:
    """F = 1, noise variance 1, R = 1, beta = 1, m0 = 0, truth 1."""
    return ProblemInstance(
        LinearForwardModel([[1.0]], [[1.0]]),
        RegularizationSpec(1.0, [[1.0]], [0.0]),
        truth=np.array([1.0]),
    )


def simulate_data(instance: ProblemInstance, m, seed: int) -> np.ndarray:
    """One draw of ``F m + eta``."""
    return simulate_batch(instance, m, 1, seed)[0]


def simulate_batch(instance: ProblemInstance, m, count: int, seed: int, stream: int = 0) -> np.ndarray:
    """``(count, D)`` array of independent data draws for fixed truth `m`."""
    model = instance.model
    m = _check_dim(m, model.param_dim, "parameter vector").reshape(-1)
    noise = model.noise_measure.draw(make_rng(seed, stream), count)
    return model.forward @ m + noise
