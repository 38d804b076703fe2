"""
Finite-dimensional Gaussian measures.

A `GaussianMeasure` stores a mean vector and a dense SPD covariance together
with its lower Cholesky factor. Every covariance passes the same gate on
construction (`spd_factor`): symmetrize, attempt Cholesky, retry once with
jitter ``1e-12 * tr(Q) / n`` and give up with `SingularCovarianceError`.

Random draws come from a counter-based Philox generator keyed by
``(seed, stream)``; standard normals are produced by numpy's ziggurat sampler.
Fixing both makes every batch reproducible bit-for-bit from its seed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import DimensionError, InsufficientSamplesError, SingularCovarianceError

logger = logging.getLogger(__name__)

SYMMETRY_RTOL = 1e-12
RECONSTRUCTION_RTOL = 1e-10
JITTER_SCALE = 1e-12
MAX_SEED = 2**64 - 1


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Return the Philox generator keyed by ``(seed, stream)``.

    Distinct streams under one seed are statistically independent, which is
    how the Monte Carlo oracles separate prior draws from noise draws.
    """
    seed = int(seed)
    stream = int(stream)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    if not 0 <= stream <= MAX_SEED:
        raise ValueError(f"stream must be an unsigned 64-bit integer, got {stream}")
    key = np.array([seed, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _relative_frobenius(diff: np.ndarray, ref: np.ndarray) -> float:
    scale = np.linalg.norm(ref)
    if scale == 0.0:
        return float(np.linalg.norm(diff))
    return float(np.linalg.norm(diff) / scale)


def spd_factor(matrix, name: str = "matrix") -> tuple[np.ndarray, np.ndarray]:
    """Symmetrize `matrix` and return ``(symmetric_matrix, lower_cholesky)``.

    Raises
    ------
    DimensionError
        If `matrix` is not square.
    SingularCovarianceError
        If the matrix is visibly asymmetric, or Cholesky fails even after one
        jittered retry.
    """
    q = np.array(matrix, dtype=float, copy=True)
    if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] == 0:
        raise DimensionError(f"{name} must be a non-empty square matrix, got shape {q.shape}")
    asym = _relative_frobenius(q - q.T, q)
    if asym > SYMMETRY_RTOL:
        raise SingularCovarianceError(
            f"{name} is not symmetric: relative Frobenius asymmetry {asym:.3e} > {SYMMETRY_RTOL:g}"
        )
    q = 0.5 * (q + q.T)
    try:
        factor = np.linalg.cholesky(q)
    except np.linalg.LinAlgError:
        n = q.shape[0]
        jitter = JITTER_SCALE * np.trace(q) / n
        factor = None
        if jitter > 0.0:
            q = q + jitter * np.eye(n)
            try:
                factor = np.linalg.cholesky(q)
                logger.debug("%s: added jitter %.3e before Cholesky", name, jitter)
            except np.linalg.LinAlgError:
                pass
        if factor is None:
            min_eig = float(np.linalg.eigvalsh(q).min())
            raise SingularCovarianceError(
                f"{name} is not positive definite: smallest eigenvalue {min_eig:.3e} "
                f"is at or below zero even after jitter {max(jitter, 0.0):.3e}"
            ) from None
    recon = _relative_frobenius(factor @ factor.T - q, q)
    if recon > RECONSTRUCTION_RTOL:
        raise SingularCovarianceError(
            f"{name}: Cholesky reconstruction error {recon:.3e} exceeds {RECONSTRUCTION_RTOL:g}"
        )
    return q, factor


class GaussianMeasure:
    """Gaussian measure N(mean, covariance) on R^n with a cached Cholesky factor.

    Instances are immutable: the arrays are copied on construction and marked
    read-only.
    """

    __slots__ = ("_mean", "_cov", "_factor")

    def __init__(self, mean, covariance):
        mean = np.array(mean, dtype=float, copy=True).reshape(-1)
        cov, factor = spd_factor(covariance, name="covariance")
        if cov.shape[0] != mean.shape[0]:
            raise DimensionError(
                f"mean has dimension {mean.shape[0]} but covariance is {cov.shape[0]}x{cov.shape[1]}"
            )
        for arr in (mean, cov, factor):
            arr.setflags(write=False)
        self._mean = mean
        self._cov = cov
        self._factor = factor

    @classmethod
    def standard(cls, n: int) -> GaussianMeasure:
        return cls(np.zeros(n), np.eye(n))

    @property
    def mean(self) -> np.ndarray:
        return self._mean

    @property
    def covariance(self) -> np.ndarray:
        return self._cov

    @property
    def factor(self) -> np.ndarray:
        """Lower-triangular L with L @ L.T == covariance."""
        return self._factor

    @property
    def dim(self) -> int:
        return self._mean.shape[0]

    def solve(self, rhs) -> np.ndarray:
        """Apply covariance^{-1} to `rhs` through the cached factor."""
        return scipy.linalg.cho_solve((self._factor, True), np.asarray(rhs, dtype=float))

    def precision(self) -> np.ndarray:
        """Dense inverse covariance, symmetrized."""
        p = self.solve(np.eye(self.dim))
        return 0.5 * (p + p.T)

    def draw(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Return a ``(count, dim)`` array of draws ``mean + L @ xi``."""
        xi = rng.standard_normal((count, self.dim))
        return self._mean + xi @ self._factor.T

    def to_dict(self) -> dict:
        return {"mean": self._mean.tolist(), "covariance": self._cov.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> GaussianMeasure:
        return cls(data["mean"], data["covariance"])

    def __repr__(self) -> str:
        return f"GaussianMeasure(dim={self.dim})"


@dataclass(frozen=True, eq=False)
class AffineMap:
    """The map x -> matrix @ x + shift."""

    matrix: np.ndarray
    shift: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.array(self.matrix, dtype=float))
        s = np.array(self.shift, dtype=float).reshape(-1)
        if s.shape[0] != a.shape[0]:
            raise DimensionError(
                f"shift has dimension {s.shape[0]} but matrix has {a.shape[0]} rows"
            )
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "shift", s)

    @classmethod
    def linear(cls, matrix) -> AffineMap:
        a = np.atleast_2d(np.array(matrix, dtype=float))
        return cls(a, np.zeros(a.shape[0]))

    def __call__(self, x) -> np.ndarray:
        """Apply the map to one vector or to each row of a batch."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.matrix.shape[1]:
            raise DimensionError(
                f"map expects vectors of dimension {self.matrix.shape[1]}, got {x.shape[-1]}"
            )
        return x @ self.matrix.T + self.shift

    def compose(self, inner: AffineMap) -> AffineMap:
        """Return ``self ∘ inner``."""
        return AffineMap(self.matrix @ inner.matrix, self.matrix @ inner.shift + self.shift)


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """Draws stacked row-wise, with the seed that produced them."""

    draws: np.ndarray
    seed: int | None = None
    stream: int = 0

    def __post_init__(self):
        d = np.atleast_2d(np.array(self.draws, dtype=float))
        d.setflags(write=False)
        object.__setattr__(self, "draws", d)

    @property
    def count(self) -> int:
        return self.draws.shape[0]

    @property
    def dim(self) -> int:
        return self.draws.shape[1]


def pushforward(measure: GaussianMeasure, map: AffineMap) -> GaussianMeasure:
    """Law of ``A X + s`` for ``X ~ measure``: N(A c + s, A Q A^T).

    The covariance is formed as ``(A L)(A L)^T`` from the cached factor and
    then passes the SPD gate. A map that is not of full row rank produces a
    singular law and raises `SingularCovarianceError`.
    """
    a = map.matrix
    if a.shape[1] != measure.dim:
        raise DimensionError(
            f"map has {a.shape[1]} columns but the measure has dimension {measure.dim}"
        )
    al = a @ measure.factor
    return GaussianMeasure(a @ measure.mean + map.shift, al @ al.T)


def sample(measure: GaussianMeasure, count: int, seed: int, stream: int = 0) -> SampleBatch:
    """Draw `count` samples from `measure`, reproducibly from `seed`."""
    count = int(count)
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return SampleBatch(measure.draw(make_rng(seed, stream), count), seed=int(seed), stream=stream)


def _as_draws(batch) -> np.ndarray:
    if isinstance(batch, SampleBatch):
        return batch.draws
    return np.atleast_2d(np.asarray(batch, dtype=float))


def empirical_moments(batch) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and unbiased (``count - 1``) sample covariance."""
    x = _as_draws(batch)
    if x.shape[0] < 2:
        raise InsufficientSamplesError(f"need at least 2 draws for a covariance, got {x.shape[0]}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (x.shape[0] - 1)
    return mean, cov


def moment_standard_errors(batch) -> tuple[np.ndarray, np.ndarray]:
    """Standard errors of the sample mean and of each sample-covariance entry.

    The covariance error for entry (i, j) is the standard deviation of the
    products ``(x_i - xbar_i)(x_j - xbar_j)`` divided by sqrt(count).
    """
    x = _as_draws(batch)
    k = x.shape[0]
    if k < 2:
        raise InsufficientSamplesError(f"need at least 2 draws, got {k}")
    centered = x - x.mean(axis=0)
    se_mean = centered.std(axis=0, ddof=1) / np.sqrt(k)
    products = centered[:, :, None] * centered[:, None, :]
    se_cov = products.std(axis=0, ddof=1) / np.sqrt(k)
    return se_mean, se_cov


def second_moment(measure: GaussianMeasure) -> float:
    """E||X||^2 = tr(Q) + ||c||^2."""
    return float(np.trace(measure.covariance) + measure.mean @ measure.mean)


def characteristic_function(measure: GaussianMeasure, h) -> complex:
    """exp(i<h, c> - <Q h, h>/2)."""
    h = np.asarray(h, dtype=float).reshape(-1)
    if h.shape[0] != measure.dim:
        raise DimensionError(f"frequency has dimension {h.shape[0]}, measure has {measure.dim}")
    phase = float(h @ measure.mean)
    damp = -0.5 * float(h @ measure.covariance @ h)
    return complex(np.exp(damp) * np.cos(phase), np.exp(damp) * np.sin(phase))


def empirical_characteristic_function(batch, h) -> complex:
    """Mean of exp(i<h, x_j>) over the draws."""
    x = _as_draws(batch)
    h = np.asarray(h, dtype=float).reshape(-1)
    if h.shape[0] != x.shape[1]:
        raise DimensionError(f"frequency has dimension {h.shape[0]}, draws have {x.shape[1]}")
    t = x @ h
    return complex(np.cos(t).mean(), np.sin(t).mean())
