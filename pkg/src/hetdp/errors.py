"""Empirical, theoretical and centralized mean squared errors, plus intervals.

The empirical error (EMSE) averages squared deviations of fresh private
releases from the true statistic. The theoretical error (TMSE) evaluates the
closed-form per-release error using the exact recorded noise draws of the
paired release, so the two are comparable trial by trial. The centralized
error (CMSE) is the squared single draw a centralized release would add after
aggregation, and does not depend on which statistic is released.

The heterogeneity-fraction EMSE is normalized per client (divided by n): its
closed-form counterpart carries a 1/n factor, and the ratio check between the
two is only meaningful on a common scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from hetdp.estimators import (
    EstimatorConfig,
    NoiseDraw,
    Statistic,
    centralized_noisy,
    evaluate_q_from_draws,
    noisy_statistic,
    true_value,
)
from hetdp.gaussian import SensitivitySpec
from hetdp.measures import MeasureContext, VectorDataset, build_context, dataset_mean

#: 95% interval constant for the dispersion: 1.96 times the fourth-moment
#: spread factor 4*sqrt(6) of a squared-Gaussian deviation.
DISPERSION_CI_CONSTANT = 7.84 * math.sqrt(6.0)

#: 95% interval constant for the heterogeneity fraction, 1.96*sqrt(32/315)
#: rounded as conventionally printed.
I_SQUARED_CI_CONSTANT = 0.625

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class ErrorReport:
    """Error summary of one (statistic, mechanism, setting, budget) cell."""

    emse: float
    tmse: float
    cmse: float
    sd_emse: float
    sd_tmse: float
    trials: int
    ci_half_width: float


def derive_seed(base_seed: int, *path: int) -> int:
    """Stable 64-bit sub-seed addressed by a tuple of integers.

    Distinct paths give independent streams; the derivation is deterministic
    across runs and platforms.
    """
    # The path length is part of the entropy: numpy's SeedSequence ignores
    # trailing zero words, so (seed, 0) would otherwise alias (seed,).
    entropy = tuple(x & _MASK64 for x in (base_seed, len(path), *path))
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


def tmse_dispersion(data: VectorDataset, draws: NoiseDraw) -> float:
    """Closed-form squared error of a private dispersion from its draws.

    Per row the release shifts by mean_noise . (mean_noise - 2 (x_i - mean))
    plus the summed statistic noise; the result averages the squared row
    shifts.
    """
    if draws.mean_noise is None or draws.stat_noise is None:
        raise ValueError("dispersion error needs mean-stage and statistic-stage draws")
    deviations = data.vectors - dataset_mean(data)
    per_row = (draws.mean_noise * (draws.mean_noise - 2.0 * deviations)).sum(axis=1)
    shifted = per_row + draws.stat_noise.sum()
    return float((shifted**2).mean())


def tmse_q(data: VectorDataset, ctx: MeasureContext, draws: NoiseDraw) -> float:
    """Closed-form squared error of a private Q: weighted analogue of the
    dispersion form."""
    if draws.mean_noise is None or draws.stat_noise is None:
        raise ValueError("q error needs mean-stage and statistic-stage draws")
    deviations = data.vectors - ctx.weighted_mean
    per_row = ctx.weights * (
        draws.mean_noise * (draws.mean_noise - 2.0 * deviations)
    ).sum(axis=1)
    shifted = per_row + draws.stat_noise.sum()
    return float((shifted**2).mean())


def tmse_i_squared(n: int, q_true: float, q_noisy: float, i2_noise: float) -> float:
    """Closed-form squared error of the private heterogeneity fraction.

    (1/n) * [i2_noise - (n-1)/q_noisy + (n-1)/q_true]^2; valid while both
    q values are positive.
    """
    if not q_true > 0 or not q_noisy > 0:
        raise ValueError(f"q values must be positive, got true={q_true!r}, noisy={q_noisy!r}")
    gap = i2_noise - (n - 1) / q_noisy + (n - 1) / q_true
    return gap**2 / n


def ci_dispersion(d_noisy: float, n: int, mean_noise_var: float) -> tuple[float, float]:
    """95% interval around a private dispersion.

    Half-width = 7.84 * sqrt(6) * mean_noise_var^2 / sqrt(n).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if mean_noise_var < 0:
        raise ValueError(f"variance must be nonnegative, got {mean_noise_var!r}")
    half = DISPERSION_CI_CONSTANT * mean_noise_var**2 / math.sqrt(n)
    return d_noisy - half, d_noisy + half


def ci_q(
    q_noisy: float, n: int, weights: np.ndarray, mean_noise_var: float
) -> tuple[float, float]:
    """95% interval around a private Q: the dispersion half-width scaled by
    each weight and summed over rows."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    weights = np.asarray(weights, dtype=np.float64)
    half = float(
        (DISPERSION_CI_CONSTANT * weights * mean_noise_var**2 / math.sqrt(n)).sum()
    )
    return q_noisy - half, q_noisy + half


def ci_i_squared(
    i2_noisy: float, n: int, weights: np.ndarray, mean_noise_var: float
) -> tuple[float, float]:
    """95% interval around a private heterogeneity fraction.

    Half-width = sum_i 0.625 (n-1) / (w_i sqrt(n) mean_noise_var^2); zero
    noise degenerates to a zero-width interval. Can exceed 1 at small n;
    reported unclamped.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if mean_noise_var == 0.0:
        return i2_noisy, i2_noisy
    weights = np.asarray(weights, dtype=np.float64)
    half = float(
        (I_SQUARED_CI_CONSTANT * (n - 1) / (weights * math.sqrt(n) * mean_noise_var**2)).sum()
    )
    return i2_noisy - half, i2_noisy + half


def variance_oracle_dispersion(data: VectorDataset, mu_noisy: np.ndarray) -> float:
    """Squared gap between mean squared deviations taken around the true and
    a perturbed mean, per coordinate, coordinate-summed.

    Equals the summed fourth powers of the mean perturbation; the test suite
    asserts that identity numerically.
    """
    mu = dataset_mean(data)
    true_ms = ((data.vectors - mu) ** 2).mean(axis=0)
    noisy_ms = ((data.vectors - np.asarray(mu_noisy, dtype=np.float64)) ** 2).mean(axis=0)
    return float(((true_ms - noisy_ms) ** 2).sum())


def variance_oracle_q(
    data: VectorDataset, ctx: MeasureContext, weighted_mean_noisy: np.ndarray
) -> float:
    """Weighted analogue of variance_oracle_dispersion around the weighted mean.

    Equals the squared mean weight times the summed fourth powers of the
    perturbation (weighted deviations from the weighted mean sum to zero).
    """
    center = np.asarray(weighted_mean_noisy, dtype=np.float64)
    w = ctx.weights[:, None]
    true_ms = (w * (data.vectors - ctx.weighted_mean) ** 2).mean(axis=0)
    noisy_ms = (w * (data.vectors - center) ** 2).mean(axis=0)
    return float(((true_ms - noisy_ms) ** 2).sum())


def error_report(
    statistic: Statistic,
    data: VectorDataset,
    cfg: EstimatorConfig,
    trials: int,
    ctx: MeasureContext | None = None,
) -> ErrorReport:
    """Monte Carlo error summary over fresh private releases.

    Each trial reseeds the estimator from (cfg.seed, trial), computes one
    private release, and scores it twice: empirically against the true value
    and theoretically from its own recorded draws. The centralized error uses
    the full (not split) budget, so it is identical across statistics for a
    fixed seed.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if ctx is None:
        ctx = build_context(data)
    truth = true_value(statistic, data, ctx)
    q_true = true_value(Statistic.Q, data, ctx) if statistic is Statistic.I_SQUARED else 0.0
    shape = SensitivitySpec.from_shape(data.n, data.d)
    full_part = (cfg.budget.epsilon, cfg.budget.delta)

    emse_vals = np.empty(trials)
    tmse_vals = np.empty(trials)
    cmse_vals = np.empty(trials)
    first_draws: NoiseDraw | None = None
    for t in range(trials):
        cfg_t = replace(cfg, seed=derive_seed(cfg.seed, t))
        value, draws = noisy_statistic(statistic, data, ctx, cfg_t)
        if first_draws is None:
            first_draws = draws
        if statistic is Statistic.DISPERSION:
            emse_vals[t] = (value - truth) ** 2
            tmse_vals[t] = tmse_dispersion(data, draws)
        elif statistic is Statistic.Q:
            emse_vals[t] = (value - truth) ** 2
            tmse_vals[t] = tmse_q(data, ctx, draws)
        else:
            emse_vals[t] = (value - truth) ** 2 / data.n
            q_noisy = evaluate_q_from_draws(data, ctx, draws)
            tmse_vals[t] = tmse_i_squared(data.n, q_true, q_noisy, draws.i2_noise)
        _, central_draw = centralized_noisy(truth, full_part, shape, cfg_t)
        cmse_vals[t] = float(central_draw.stat_noise[0]) ** 2

    ci = _ci_half_width(statistic, data, ctx, first_draws)
    return ErrorReport(
        emse=float(emse_vals.mean()),
        tmse=float(tmse_vals.mean()),
        cmse=float(cmse_vals.mean()),
        sd_emse=float(emse_vals.std()),
        sd_tmse=float(tmse_vals.std()),
        trials=trials,
        ci_half_width=ci,
    )


def emse(
    statistic: Statistic,
    data: VectorDataset,
    cfg: EstimatorConfig,
    trials: int,
    ctx: MeasureContext | None = None,
) -> tuple[float, float]:
    """Mean and standard deviation of the empirical squared error."""
    report = error_report(statistic, data, cfg, trials, ctx)
    return report.emse, report.sd_emse


def _ci_half_width(
    statistic: Statistic,
    data: VectorDataset,
    ctx: MeasureContext,
    draws: NoiseDraw,
) -> float:
    var1 = draws.mean_noise_var
    if statistic is Statistic.DISPERSION:
        lo, hi = ci_dispersion(0.0, data.n, var1)
    elif statistic is Statistic.Q:
        lo, hi = ci_q(0.0, data.n, ctx.weights, var1)
    else:
        lo, hi = ci_i_squared(0.0, data.n, ctx.weights, var1)
    return hi
