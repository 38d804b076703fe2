"""
Named studies that assemble analytic values, Monte Carlo oracles and verdicts.

``verify`` is the union of ``risk``, ``bayes-risk`` and ``pushforward-check``.
Each study helper appends to a `RiskReport` and records its wall-clock time.
"""

from __future__ import annotations

import math
import platform
import time
from contextlib import contextmanager

import numpy as np
import scipy

from . import __version__
from .config import ResolvedConfig, RunConfig
from .estimator import bias, build_operators, estimate, mse_analytic, mse_decomposition_check
from .gaussian import (
    AffineMap,
    characteristic_function,
    empirical_characteristic_function,
    empirical_moments,
    make_rng,
    moment_standard_errors,
    pushforward,
    sample,
    second_moment,
)
from .montecarlo import (
    NOISE_STREAM,
    bayes_risk_mc,
    estimator_mean_mc,
    frequentist_risk_mc,
    mean_estimate,
    prior_bias_sq_mc,
)
from .oed import exhaustive_select, greedy_select, trace_after_design
from .posterior import (
    Posterior,
    as_regularized_instance,
    bayes_risk_analytic,
    bayesian_mse_analytic,
    posterior_mean,
    prior_expected_bias_sq,
    trace_identity_report,
)
from .problem import ProblemInstance, simulate_batch
from .report import Check, RiskReport, TOLERANCES

N_SE = TOLERANCES["mc_4se"]
IDENTITY_RTOL = TOLERANCES["identity_rel_1e-10"]

# Stream offsets that keep the pushforward-check draws apart from the
# prior/noise streams used by the risk oracles.
MAP_STREAM = 10
OUTER_MAP_STREAM = 11
SAMPLE_STREAM = 12
FREQUENCY_STREAM = 13
N_FREQUENCIES = 20
MAX_FREQUENCY_NORM = 2.0


def mc_check(report: RiskReport, name: str, analytic: float, estimate) -> Check:
    report.add_mc(name, estimate)
    band = N_SE * estimate.std_error
    check = Check(
        name,
        abs(estimate.value - analytic) <= band,
        band,
        "mc_4se",
        analytic=analytic,
        mc_value=estimate.value,
        std_error=estimate.std_error,
    )
    report.checks.append(check)
    return check


def worst_component_check(report, name, analytic, empirical, std_errors, detail="") -> Check:
    """4-SE check applied componentwise; the worst component is recorded."""
    analytic = np.ravel(analytic)
    empirical = np.ravel(empirical)
    std_errors = np.ravel(std_errors)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.abs(empirical - analytic) / std_errors
    z = np.where((std_errors == 0) & (empirical == analytic), 0.0, z)
    i = int(np.argmax(z))
    check = Check(
        name,
        bool(np.all(np.abs(empirical - analytic) <= N_SE * std_errors)),
        N_SE * float(std_errors[i]),
        "mc_4se",
        analytic=float(analytic[i]),
        mc_value=float(empirical[i]),
        std_error=float(std_errors[i]),
        detail=detail or f"worst component {i} of {analytic.size}, |z| = {z[i]:.3f}",
    )
    report.checks.append(check)
    return check


def relative_check(report, name, value, reference, tolerance_name=None, detail="") -> Check:
    """|value - reference| <= rtol * |reference|."""
    tolerance_name = tolerance_name or "identity_rel_1e-10"
    bound = TOLERANCES[tolerance_name] * max(abs(reference), np.finfo(float).tiny)
    check = Check(
        name, abs(value - reference) <= bound, bound, tolerance_name,
        analytic=float(reference), mc_value=float(value), detail=detail,
    )
    report.checks.append(check)
    return check


@contextmanager
def _timed(report: RiskReport, key: str):
    start = time.perf_counter()
    yield
    report.provenance.setdefault("timings_s", {})[key] = time.perf_counter() - start


def risk_study(report: RiskReport, instance: ProblemInstance, count: int, seed: int) -> None:
    """Frequentist MSE: closed form against Monte Carlo, plus the bias/variance split."""
    m = instance.truth
    ops = build_operators(instance)
    terms = mse_analytic(ops, instance, m)
    b = bias(ops, instance, m)
    report.analytic.update(
        mse_total=terms.total,
        bias_sq=terms.bias_sq,
        variance_trace=terms.variance_trace,
        bias=b,
        beta=instance.regularization.beta,
        condition_forward=float(np.linalg.cond(instance.model.forward)),
        condition_hessian=float(np.linalg.cond(ops.hessian)),
    )

    gap = abs(terms.bias_sq + terms.variance_trace - terms.total)
    report.checks.append(
        Check("mse_decomposition_identity", gap <= 1e-12, 1e-12, "decomposition_abs_1e-12",
              analytic=terms.total, mc_value=terms.bias_sq + terms.variance_trace)
    )
    mc_check(report, "frequentist_risk", terms.total, frequentist_risk_mc(ops, instance, m, count, seed))

    mean_hat, se = estimator_mean_mc(ops, instance, m, count, seed)
    worst_component_check(report, "bias_vs_mc", b, mean_hat - m, se)

    ys = simulate_batch(instance, m, count, seed, stream=NOISE_STREAM)
    dec = mse_decomposition_check(ops, instance, m, ys)
    report.analytic["empirical_decomposition"] = {
        "left": dec.left, "right": dec.right, "difference": dec.difference,
        "bias_sq": dec.bias_sq, "variance": dec.variance,
    }
    # floor absorbs rounding when the draws are (nearly) noiseless
    band = N_SE * dec.std_error + 1e-12 * max(1.0, abs(dec.left))
    report.checks.append(
        Check("empirical_decomposition", abs(dec.difference) <= band, band, "mc_4se",
              analytic=dec.right, mc_value=dec.left, std_error=dec.std_error)
    )


def bayes_study(report: RiskReport, post: Posterior, instance: ProblemInstance, count: int, seed: int) -> None:
    """Bayes risk equals the posterior trace: exact pieces and sampling oracles."""
    ident = trace_identity_report(post)
    risk = bayes_risk_analytic(post)
    expected_bias = prior_expected_bias_sq(post)
    report.analytic.update(
        bayes_risk=risk,
        trace_identity={
            "prior_term": ident.prior_term,
            "misfit_term": ident.misfit_term,
            "rhs": ident.rhs,
            "residual": ident.residual,
        },
        prior_expected_bias_sq=expected_bias,
        prior=post.prior.to_dict(),
        condition_posterior=post.condition_number,
    )
    report.checks.append(
        Check("trace_identity", ident.residual <= IDENTITY_RTOL * ident.rhs, IDENTITY_RTOL * ident.rhs,
              "identity_rel_1e-10", analytic=ident.rhs, mc_value=ident.prior_term + ident.misfit_term)
    )
    relative_check(report, "bayes_risk_assembly", expected_bias + ident.misfit_term, risk,
                   detail="pushforward second moment plus misfit term")
    mc_check(report, "bayes_risk", risk, bayes_risk_mc(post, count, seed))
    mc_check(report, "prior_expected_bias_sq", expected_bias, prior_bias_sq_mc(post, count, seed))

    # posterior mean against the relabeled regularized estimate
    relabeled = as_regularized_instance(post, truth=instance.truth)
    ops = build_operators(relabeled)
    m = instance.truth if instance.truth is not None else post.prior.mean
    ys = simulate_batch(relabeled, m, 8, seed, stream=NOISE_STREAM)
    diff = posterior_mean(post, ys) - estimate(ops, relabeled, ys)
    scale = np.linalg.norm(posterior_mean(post, ys), axis=1)
    rel = float(np.max(np.linalg.norm(diff, axis=1) / np.maximum(scale, np.finfo(float).tiny)))
    report.checks.append(
        Check("map_equivalence", rel <= IDENTITY_RTOL, IDENTITY_RTOL, "identity_rel_1e-10",
              analytic=0.0, mc_value=rel, detail="max relative difference over 8 data draws")
    )
    relative_check(report, "bayesian_mse_relabeled", bayesian_mse_analytic(post, m).total,
                   mse_analytic(ops, relabeled, m).total)


def random_map(n_in: int, n_out: int, seed: int, stream: int = MAP_STREAM) -> AffineMap:
    """Gaussian random affine map; full row rank with probability one when n_out <= n_in."""
    rng = make_rng(seed, stream)
    return AffineMap(rng.standard_normal((n_out, n_in)), rng.standard_normal(n_out))


def random_frequencies(n: int, count: int, seed: int) -> np.ndarray:
    """`count` vectors with uniform random direction and norm in [0, 2]."""
    rng = make_rng(seed, FREQUENCY_STREAM)
    h = rng.standard_normal((count, n))
    h /= np.linalg.norm(h, axis=1, keepdims=True)
    return h * rng.uniform(0.0, MAX_FREQUENCY_NORM, size=(count, 1))


def pushforward_study(report: RiskReport, measure, count: int, seed: int) -> None:
    """Affine pushforward moments, composition, characteristic function, second moment."""
    amap = random_map(measure.dim, max(1, measure.dim - 1), seed)
    pushed = pushforward(measure, amap)
    batch = sample(measure, count, seed, stream=SAMPLE_STREAM)
    mapped = amap(batch.draws)
    emp_mean, emp_cov = empirical_moments(mapped)
    se_mean, se_cov = moment_standard_errors(mapped)
    report.analytic["pushforward"] = {"mean": pushed.mean, "covariance": pushed.covariance}
    worst_component_check(report, "pushforward_mean", pushed.mean, emp_mean, se_mean)
    worst_component_check(report, "pushforward_covariance", pushed.covariance, emp_cov, se_cov)

    outer = random_map(pushed.dim, pushed.dim, seed, stream=OUTER_MAP_STREAM)
    twice = pushforward(pushed, outer)
    once = pushforward(measure, outer.compose(amap))
    mean_err = np.linalg.norm(twice.mean - once.mean) / max(np.linalg.norm(once.mean), 1e-300)
    cov_err = np.linalg.norm(twice.covariance - once.covariance) / np.linalg.norm(once.covariance)
    err = float(max(mean_err, cov_err))
    report.checks.append(
        Check("pushforward_composition", err <= IDENTITY_RTOL, IDENTITY_RTOL, "identity_rel_1e-10",
              analytic=0.0, mc_value=err)
    )

    hs = random_frequencies(measure.dim, N_FREQUENCIES, seed)
    errors = [
        abs(empirical_characteristic_function(batch, h) - characteristic_function(measure, h))
        for h in hs
    ]
    bound = TOLERANCES["cf_5_over_sqrt_k"] / math.sqrt(count)
    worst = int(np.argmax(errors))
    report.checks.append(
        Check("characteristic_function", max(errors) <= bound, bound, "cf_5_over_sqrt_k",
              analytic=abs(characteristic_function(measure, hs[worst])), mc_value=float(max(errors)),
              detail=f"max modulus error over {N_FREQUENCIES} frequencies")
    )

    sq = np.sum(batch.draws**2, axis=1)
    mc_check(report, "second_moment", second_moment(measure), mean_estimate(sq, seed))


def oed_study(report: RiskReport, resolved: ResolvedConfig) -> None:
    pool, prior, k = resolved.pool, resolved.prior, resolved.config.k
    greedy = greedy_select(pool, prior, k)
    report.selection = greedy.to_dict()
    prefix = [trace_after_design(pool, prior, greedy.chosen[: i + 1]) for i in range(k)]
    report.analytic.update(
        prior_trace=float(np.trace(prior.covariance)),
        greedy_objective=greedy.objective,
        prefix_traces=prefix,
    )
    steps = np.diff([float(np.trace(prior.covariance))] + greedy.objective_trace)
    slack = TOLERANCES["monotone_slack_1e-12"]
    report.checks.append(
        Check("objective_monotone", bool(np.all(steps <= slack)), slack, "monotone_slack_1e-12",
              analytic=0.0, mc_value=float(steps.max()))
    )
    report.checks.append(
        Check("woodbury_consistency", max(greedy.woodbury_errors) <= 1e-9, 1e-9, "woodbury_rel_1e-9",
              analytic=0.0, mc_value=max(greedy.woodbury_errors))
    )
    track = max(abs(a - b) / b for a, b in zip(greedy.objective_trace, prefix))
    report.checks.append(
        Check("greedy_tracks_criterion", track <= 1e-9, 1e-9, "woodbury_rel_1e-9",
              analytic=0.0, mc_value=float(track))
    )
    if math.comb(len(pool), k) <= resolved.config.exhaustive_limit:
        best = exhaustive_select(pool, prior, k)
        gap = greedy.objective - best.objective
        report.analytic.update(exhaustive_objective=best.objective, greedy_gap=gap)
        report.selection["exhaustive"] = best.to_dict()
        report.checks.append(
            Check("exhaustive_le_greedy", gap >= -slack * abs(best.objective), slack, "monotone_slack_1e-12",
                  analytic=best.objective, mc_value=greedy.objective, detail=f"greedy gap {gap:.3e}")
        )


def run(config: RunConfig) -> RiskReport:
    """Validate `config`, run its study and return the report."""
    started = time.perf_counter()
    resolved = config.validate()
    report = RiskReport(study=config.study, seed=config.seed, config=config.to_dict())
    report.provenance["versions"] = {
        "bayesrisk": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }
    instance, count, seed = resolved.instance, config.samples, config.seed
    study = config.study

    if study in ("risk", "verify"):
        with _timed(report, "risk"):
            risk_study(report, instance, count, seed)
    if study in ("bayes-risk", "verify"):
        with _timed(report, "bayes-risk"):
            post = Posterior.from_prior(instance.model, resolved.prior)
            bayes_study(report, post, instance, count, seed)
    if study in ("pushforward-check", "verify"):
        with _timed(report, "pushforward-check"):
            pushforward_study(report, resolved.prior, count, seed)
    if study == "oed":
        with _timed(report, "oed"):
            oed_study(report, resolved)

    report.provenance.setdefault("timings_s", {})["total"] = time.perf_counter() - started
    return report
