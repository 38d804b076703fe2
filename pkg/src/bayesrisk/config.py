"""
Run configuration: a JSON document naming a problem, a study and its knobs.

Validation happens entirely up front: `RunConfig.from_text` parses the
document, checks every field and builds the problem instance, prior and
candidate pool, so that no computation starts on a malformed config.
Errors carry the JSON path of the offending field and, where it can be
located, its line in the source text.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .exceptions import BayesRiskError, ConfigError
from .gaussian import GaussianMeasure
from .oed import CandidatePool
from .problem import (
    LinearForwardModel,
    ProblemInstance,
    RegularizationSpec,
    make_deconvolution,
    make_random_instance,
    make_scalar_unit,
)

STUDIES = ("risk", "bayes-risk", "verify", "oed", "pushforward-check")
BUILDERS = ("scalar_unit", "random", "deconvolution", "explicit")
POOL_KINDS = ("point", "forward_rows", "explicit")
FORMATS = ("json", "csv")
DEFAULT_SAMPLES = 100_000
DEFAULT_EXHAUSTIVE_LIMIT = 10_000

_TOP_LEVEL = {
    "study", "problem", "samples", "seed", "beta", "truth", "prior", "pool", "k",
    "exhaustive_limit", "output_path", "format",
}


def _locate(text: str | None, key: str) -> str:
    if not text:
        return ""
    match = re.search(r'"%s"\s*:' % re.escape(key), text)
    if match is None:
        return ""
    return f" (line {text.count(chr(10), 0, match.start()) + 1})"


@dataclass
class RunConfig:
    problem: dict
    study: str = "verify"
    samples: int = DEFAULT_SAMPLES
    seed: int = 0
    beta: float | None = None
    truth: list | None = None
    prior: dict | None = None
    pool: dict | None = None
    k: int | None = None
    exhaustive_limit: int = DEFAULT_EXHAUSTIVE_LIMIT
    output_path: str | None = None
    format: str = "json"
    source_text: str | None = field(default=None, repr=False, compare=False)

    @classmethod
    def from_dict(cls, data: dict, text: str | None = None) -> RunConfig:
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object at the top level")
        unknown = sorted(k for k in data if k not in _TOP_LEVEL and not k.startswith("_"))
        if unknown:
            raise ConfigError(f"unknown config key '{unknown[0]}'{_locate(text, unknown[0])}")
        if "problem" not in data:
            raise ConfigError("config is missing the required 'problem' section")
        kwargs = {k: v for k, v in data.items() if k in _TOP_LEVEL}
        return cls(**kwargs, source_text=text)

    @classmethod
    def from_text(cls, text: str) -> RunConfig:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        return cls.from_dict(data, text)

    @classmethod
    def load(cls, path: str | Path) -> RunConfig:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        return cls.from_text(text)

    def to_dict(self) -> dict:
        """Echo of the computational settings (output location excluded)."""
        return {
            "study": self.study,
            "problem": self.problem,
            "samples": self.samples,
            "seed": self.seed,
            "beta": self.beta,
            "truth": self.truth,
            "prior": self.prior,
            "pool": self.pool,
            "k": self.k,
            "exhaustive_limit": self.exhaustive_limit,
        }

    def error(self, path: str, message: str) -> ConfigError:
        key = path.rsplit(".", 1)[-1]
        return ConfigError(f"{path}: {message}{_locate(self.source_text, key)}")

    def validate(self) -> ResolvedConfig:
        """Check every field and build the objects a study needs."""
        if self.study not in STUDIES:
            raise self.error("study", f"must be one of {', '.join(STUDIES)}, got {self.study!r}")
        if self.format not in FORMATS:
            raise self.error("format", f"must be one of {', '.join(FORMATS)}, got {self.format!r}")
        if isinstance(self.samples, bool) or not isinstance(self.samples, int) or self.samples < 2:
            raise self.error("samples", f"must be an integer >= 2, got {self.samples!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise self.error("seed", f"must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.beta is not None and not (_is_number(self.beta) and self.beta > 0):
            raise self.error("beta", f"must be a positive number, got {self.beta!r}")

        instance = self._build_problem()
        if self.beta is not None:
            instance = instance.with_beta(self.beta)
        if self.truth is not None:
            truth = _array(self, "truth", self.truth, ndim=1)
            if truth.shape[0] != instance.param_dim:
                raise self.error("truth", f"has dimension {truth.shape[0]}, expected {instance.param_dim}")
            instance = ProblemInstance(instance.model, instance.regularization, truth, instance.seed)
        if self.study in ("risk", "verify") and instance.truth is None:
            raise self.error("truth", "frequentist studies need a truth vector")

        prior = self._build_prior(instance)
        pool = None
        if self.study == "oed":
            pool = self._build_pool(instance)
            if isinstance(self.k, bool) or not isinstance(self.k, int) or not 1 <= self.k <= len(pool):
                raise self.error("k", f"must be an integer in [1, {len(pool)}], got {self.k!r}")
        return ResolvedConfig(self, instance, prior, pool)

    def _build_problem(self) -> ProblemInstance:
        p = self.problem
        if not isinstance(p, dict):
            raise self.error("problem", "must be an object")
        builder = p.get("builder")
        if builder not in BUILDERS:
            raise self.error("problem.builder", f"must be one of {', '.join(BUILDERS)}, got {builder!r}")
        try:
            if builder == "scalar_unit":
                return make_scalar_unit()
            if builder == "random":
                _require(self, p, ("n", "d", "seed"), "problem")
                return make_random_instance(
                    int(p["n"]), int(p["d"]), int(p["seed"]), beta=float(p.get("beta", 1.0))
                )
            if builder == "deconvolution":
                _require(self, p, ("n", "kernel_width", "noise_sigma"), "problem")
                return make_deconvolution(
                    int(p["n"]),
                    float(p["kernel_width"]),
                    float(p["noise_sigma"]),
                    seed=int(p.get("seed", 0)),
                    beta=float(p.get("beta", 1.0)),
                )
            return self._explicit_problem(p)
        except BayesRiskError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise self.error("problem", str(exc)) from None
        except (TypeError, ValueError) as exc:
            raise self.error("problem", str(exc)) from None

    def _explicit_problem(self, p: dict) -> ProblemInstance:
        _require(self, p, ("forward",), "problem")
        forward = _array(self, "problem.forward", p["forward"], ndim=2)
        d, n = forward.shape
        if "noise_cov" in p:
            noise_cov = _array(self, "problem.noise_cov", p["noise_cov"], ndim=2)
        elif "noise_var" in p:
            noise_cov = _diag(self, "problem.noise_var", p["noise_var"], d)
        else:
            raise self.error("problem", "explicit problems need 'noise_cov' or 'noise_var'")
        reg = _array(self, "problem.reg", p["reg"], ndim=2) if "reg" in p else np.eye(n)
        ref = _array(self, "problem.reference", p["reference"], ndim=1) if "reference" in p else np.zeros(n)
        truth = _array(self, "problem.truth", p["truth"], ndim=1) if "truth" in p else None
        beta = p.get("beta", 1.0)
        return ProblemInstance(
            LinearForwardModel(forward, noise_cov), RegularizationSpec(beta, reg, ref), truth=truth
        )

    def _build_prior(self, instance: ProblemInstance) -> GaussianMeasure:
        if self.prior is None:
            return instance.default_prior()
        if not isinstance(self.prior, dict):
            raise self.error("prior", "must be an object with 'mean' and 'covariance'")
        _require(self, self.prior, ("mean", "covariance"), "prior")
        mean = _array(self, "prior.mean", self.prior["mean"], ndim=1)
        cov = _array(self, "prior.covariance", self.prior["covariance"], ndim=2)
        if mean.shape[0] != instance.param_dim:
            raise self.error("prior.mean", f"has dimension {mean.shape[0]}, expected {instance.param_dim}")
        try:
            return GaussianMeasure(mean, cov)
        except BayesRiskError as exc:
            raise self.error("prior.covariance", str(exc)) from None

    def _build_pool(self, instance: ProblemInstance) -> CandidatePool:
        if not isinstance(self.pool, dict):
            raise self.error("pool", "the oed study needs a 'pool' object")
        kind = self.pool.get("kind")
        if kind not in POOL_KINDS:
            raise self.error("pool.kind", f"must be one of {', '.join(POOL_KINDS)}, got {kind!r}")
        n = instance.param_dim
        try:
            if kind == "point":
                _require(self, self.pool, ("noise_var",), "pool")
                return CandidatePool.point_observations(n, _positive(self, "pool.noise_var", self.pool["noise_var"]))
            if kind == "forward_rows":
                rows = instance.model.forward
                if "noise_var" in self.pool:
                    var = np.diag(_diag(self, "pool.noise_var", self.pool["noise_var"], rows.shape[0]))
                else:
                    var = np.diag(instance.model.noise_cov).copy()
                return CandidatePool(rows, var, tuple(f"row{i}" for i in range(rows.shape[0])))
            _require(self, self.pool, ("rows", "noise_var"), "pool")
            rows = _array(self, "pool.rows", self.pool["rows"], ndim=2)
            if rows.shape[1] != n:
                raise self.error("pool.rows", f"rows have dimension {rows.shape[1]}, expected {n}")
            var = np.diag(_diag(self, "pool.noise_var", self.pool["noise_var"], rows.shape[0]))
            return CandidatePool(rows, var, tuple(self.pool.get("labels", ())))
        except BayesRiskError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise self.error("pool", str(exc)) from None


@dataclass
class ResolvedConfig:
    config: RunConfig
    instance: ProblemInstance
    prior: GaussianMeasure
    pool: CandidatePool | None


def _is_number(x: Any) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and np.isfinite(x)


def _require(cfg: RunConfig, section: dict, keys, path: str):
    for key in keys:
        if key not in section:
            raise cfg.error(f"{path}.{key}", "required field is missing")


def _array(cfg: RunConfig, path: str, value, ndim: int) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise cfg.error(path, "must be a numeric (nested) array") from None
    if arr.ndim != ndim or arr.size == 0:
        raise cfg.error(path, f"must be a non-empty {ndim}-dimensional array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise cfg.error(path, "contains non-finite entries")
    return arr


def _positive(cfg: RunConfig, path: str, value) -> float:
    if not _is_number(value) or value <= 0:
        raise cfg.error(path, f"must be a positive number, got {value!r}")
    return float(value)


def _diag(cfg: RunConfig, path: str, value, size: int) -> np.ndarray:
    """Diagonal covariance from a scalar or a per-row list of variances."""
    if _is_number(value):
        var = np.full(size, float(value))
    else:
        var = _array(cfg, path, value, ndim=1)
        if var.shape[0] != size:
            raise cfg.error(path, f"has {var.shape[0]} entries, expected {size}")
    if np.any(var <= 0):
        raise cfg.error(path, "variances must be positive")
    return np.diag(var)
