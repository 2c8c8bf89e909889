"""(epsilon, delta)-private releases of the heterogeneity statistics.

Each estimator splits its privacy budget over its stages (one part per noisy
release), calibrates a Gaussian scale per stage with the configured mechanism,
and records the exact noise realizations so the closed-form error analysis can
reuse them.

Noise enters in one of two settings. In the distributed setting every client
adds an independent share of variance n * stage_variance to its contribution
before plain summation (simulated secure aggregation), so the averaged
aggregate noise has the stage variance exactly. In the centralized setting a
single draw of the stage variance is added after aggregation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from hetdp.gaussian import (
    Mechanism,
    PrivacyBudget,
    SensitivitySpec,
    agm_sigma,
    cgm_sigma,
    sample_gaussian_vector,
)
from hetdp.measures import (
    MeasureContext,
    VectorDataset,
    dataset_mean,
    dispersion,
    i_squared,
    q_statistic,
)


class Setting(enum.Enum):
    """Where noise is injected relative to (simulated) secure aggregation."""

    DISTRIBUTED = "distributed"
    CENTRALIZED = "centralized"


class Statistic(enum.Enum):
    """The heterogeneity statistics with private estimators."""

    DISPERSION = "dispersion"
    Q = "q"
    I_SQUARED = "i_squared"

    @property
    def budget_parts(self) -> int:
        return 3 if self is Statistic.I_SQUARED else 2


class DegenerateStatisticError(RuntimeError):
    """A noisy intermediate left the statistic's domain (e.g. noisy Q <= 0)."""


@dataclass(frozen=True)
class NoiseDraw:
    """Exact noise realizations of one estimator call.

    mean_noise is the aggregate vector added to the (weighted) mean,
    stat_noise the vector added to the statistic before coordinate-summing,
    i2_noise the scalar added to the clamped heterogeneity fraction. The
    *_var fields hold the calibrated per-stage variances.
    """

    mean_noise: np.ndarray | None = None
    stat_noise: np.ndarray | None = None
    i2_noise: float | None = None
    mean_noise_var: float = 0.0
    stat_noise_var: float = 0.0
    i2_noise_var: float = 0.0


@dataclass(frozen=True)
class EstimatorConfig:
    """Mechanism, noise setting, budget and seed of one estimator run."""

    mechanism: Mechanism
    setting: Setting
    budget: PrivacyBudget
    seed: int
    zero_noise: bool = False


def release_sigma(mechanism: Mechanism, sens: SensitivitySpec, epsilon: float, delta: float) -> float:
    """Noise scale of one release under the chosen mechanism."""
    if mechanism is Mechanism.CLASSICAL:
        return cgm_sigma(sens, epsilon, delta).sigma
    return agm_sigma(sens, epsilon, delta).sigma


def _stage_sigma(cfg: EstimatorConfig, data_n: int, data_d: int, part: int) -> float:
    if cfg.zero_noise:
        return 0.0
    epsilon_i, delta_i = cfg.budget.split[part]
    sens = SensitivitySpec.from_shape(data_n, data_d)
    return release_sigma(cfg.mechanism, sens, epsilon_i, delta_i)


def _aggregate_noise(
    dim: int, sigma: float, cfg: EstimatorConfig, n: int, rng: np.random.Generator
) -> np.ndarray:
    """One stage's aggregate noise vector under the configured setting."""
    if sigma == 0.0:
        return np.zeros(dim)
    if cfg.setting is Setting.DISTRIBUTED:
        # n client shares of variance n * sigma^2 average to variance sigma^2.
        shares = rng.normal(0.0, math.sqrt(n) * sigma, size=(n, dim))
        return shares.mean(axis=0)
    return sample_gaussian_vector(dim, sigma, rng)


def _require_parts(cfg: EstimatorConfig, parts: int, statistic: str) -> None:
    if len(cfg.budget.split) != parts:
        raise ValueError(
            f"{statistic} needs a {parts}-part budget split, got "
            f"{len(cfg.budget.split)} parts"
        )


def noisy_mean(
    data: VectorDataset, cfg: EstimatorConfig, *, draws: NoiseDraw | None = None
) -> tuple[np.ndarray, NoiseDraw]:
    """Private mean: true mean plus one calibrated aggregate noise vector.

    Consumes the first budget part. Pass `draws` to inject a fixed noise
    realization instead of sampling (testing hook).
    """
    if not cfg.budget.split:
        raise ValueError("budget split is empty")
    sigma = _stage_sigma(cfg, data.n, data.d, 0)
    if draws is None:
        rng = np.random.default_rng(cfg.seed)
        noise = _aggregate_noise(data.d, sigma, cfg, data.n, rng)
        draws = NoiseDraw(mean_noise=noise, mean_noise_var=sigma**2)
    elif draws.mean_noise is None:
        raise ValueError("injected draws lack a mean-stage vector")
    return dataset_mean(data) + draws.mean_noise, draws


def noisy_dispersion(
    data: VectorDataset, cfg: EstimatorConfig, *, draws: NoiseDraw | None = None
) -> tuple[float, NoiseDraw]:
    """Private dispersion at exponent 2, a two-release pipeline.

    Release one perturbs the mean, release two perturbs the statistic:
    value = (1/n) sum_i ||(x_i - mean) - mean_noise||^2 + sum_j stat_noise_j.
    Total privacy spend is the sum of the two budget parts.
    """
    _require_parts(cfg, 2, "dispersion")
    if draws is None:
        sigma1 = _stage_sigma(cfg, data.n, data.d, 0)
        sigma2 = _stage_sigma(cfg, data.n, data.d, 1)
        rng = np.random.default_rng(cfg.seed)
        draws = NoiseDraw(
            mean_noise=_aggregate_noise(data.d, sigma1, cfg, data.n, rng),
            stat_noise=_aggregate_noise(data.d, sigma2, cfg, data.n, rng),
            mean_noise_var=sigma1**2,
            stat_noise_var=sigma2**2,
        )
    if draws.mean_noise is None or draws.stat_noise is None:
        raise ValueError("dispersion needs mean-stage and statistic-stage draws")
    deviations = data.vectors - dataset_mean(data)
    value = float(((deviations - draws.mean_noise) ** 2).sum(axis=1).mean())
    value += float(draws.stat_noise.sum())
    return value, draws


def noisy_q(
    data: VectorDataset,
    ctx: MeasureContext,
    cfg: EstimatorConfig,
    *,
    draws: NoiseDraw | None = None,
) -> tuple[float, NoiseDraw]:
    """Private Q, a two-release pipeline over the weighted mean.

    Release one perturbs the weighted mean, release two perturbs the
    statistic: value = (1/n) sum_i w_i ||x_i - noisy_weighted_mean||^2
    + sum_j stat_noise_j.
    """
    _require_parts(cfg, 2, "q")
    if ctx.weights.shape != (data.n,):
        raise ValueError(f"context weights {ctx.weights.shape} do not match n={data.n}")
    if np.any(ctx.weights <= 0) or not np.all(np.isfinite(ctx.weights)):
        raise ValueError("context weights must be positive and finite")
    if draws is None:
        sigma1 = _stage_sigma(cfg, data.n, data.d, 0)
        sigma2 = _stage_sigma(cfg, data.n, data.d, 1)
        rng = np.random.default_rng(cfg.seed)
        draws = NoiseDraw(
            mean_noise=_aggregate_noise(data.d, sigma1, cfg, data.n, rng),
            stat_noise=_aggregate_noise(data.d, sigma2, cfg, data.n, rng),
            mean_noise_var=sigma1**2,
            stat_noise_var=sigma2**2,
        )
    return evaluate_q_from_draws(data, ctx, draws), draws


def evaluate_q_from_draws(data: VectorDataset, ctx: MeasureContext, draws: NoiseDraw) -> float:
    """Deterministic value of the private Q pipeline for recorded draws."""
    if draws.mean_noise is None or draws.stat_noise is None:
        raise ValueError("q needs mean-stage and statistic-stage draws")
    noisy_center = ctx.weighted_mean + draws.mean_noise
    squared = ((data.vectors - noisy_center) ** 2).sum(axis=1)
    return float((ctx.weights * squared).mean()) + float(draws.stat_noise.sum())


def noisy_q_deviation_form(data: VectorDataset, ctx: MeasureContext, draws: NoiseDraw) -> float:
    """Alternative evaluation of the private Q from recorded draws.

    Expands the pipeline as true Q plus the per-row perturbation
    w_i * mean_noise . (mean_noise - 2 (x_i - weighted_mean)) plus the
    statistic noise; agrees with noisy_q on the same draws up to rounding.
    """
    if draws.mean_noise is None or draws.stat_noise is None:
        raise ValueError("q needs mean-stage and statistic-stage draws")
    deviations = data.vectors - ctx.weighted_mean
    per_row = (draws.mean_noise * (draws.mean_noise - 2.0 * deviations)).sum(axis=1)
    shift = float((ctx.weights * per_row).mean()) + float(draws.stat_noise.sum())
    return q_statistic(data, ctx) + shift


def noisy_i_squared(
    data: VectorDataset,
    ctx: MeasureContext,
    cfg: EstimatorConfig,
    *,
    draws: NoiseDraw | None = None,
) -> tuple[float, NoiseDraw]:
    """Private heterogeneity fraction, a three-release pipeline.

    Runs the Q pipeline on the first two budget parts, clamps
    1 - (n-1)/noisy_q into [0, 1], then adds a scalar third-stage draw on
    top. The final value is deliberately not re-clamped.

    Raises:
        DegenerateStatisticError: if the noisy Q is nonpositive.
    """
    _require_parts(cfg, 3, "i_squared")
    if data.n < 2:
        raise ValueError(f"i_squared needs n >= 2, got n={data.n}")
    if draws is None:
        sigma1 = _stage_sigma(cfg, data.n, data.d, 0)
        sigma2 = _stage_sigma(cfg, data.n, data.d, 1)
        sigma3 = _stage_sigma(cfg, data.n, data.d, 2)
        rng = np.random.default_rng(cfg.seed)
        draws = NoiseDraw(
            mean_noise=_aggregate_noise(data.d, sigma1, cfg, data.n, rng),
            stat_noise=_aggregate_noise(data.d, sigma2, cfg, data.n, rng),
            i2_noise=float(_aggregate_noise(1, sigma3, cfg, data.n, rng)[0]),
            mean_noise_var=sigma1**2,
            stat_noise_var=sigma2**2,
            i2_noise_var=sigma3**2,
        )
    if draws.i2_noise is None:
        raise ValueError("i_squared needs a third-stage scalar draw")
    q_value = evaluate_q_from_draws(data, ctx, draws)
    if q_value <= 0.0:
        raise DegenerateStatisticError(
            f"noisy q is {q_value!r}; the heterogeneity fraction is undefined "
            "for a nonpositive q"
        )
    clamped = max(0.0, 1.0 - (data.n - 1) / q_value)
    return clamped + draws.i2_noise, draws


def centralized_noisy(
    statistic: float,
    part: tuple[float, float],
    shape: SensitivitySpec,
    cfg: EstimatorConfig,
) -> tuple[float, NoiseDraw]:
    """Perturb an already-aggregated scalar statistic with one draw.

    The draw's variance is d times the per-coordinate stage variance, i.e.
    the variance the coordinate-summed vector noise would carry in the
    distributed pipeline; its square is the centralized error contribution.
    """
    epsilon_i, delta_i = part
    sigma = 0.0 if cfg.zero_noise else release_sigma(cfg.mechanism, shape, epsilon_i, delta_i)
    scalar_sigma = math.sqrt(shape.d) * sigma
    if scalar_sigma == 0.0:
        noise = 0.0
    else:
        rng = np.random.default_rng(cfg.seed)
        noise = float(rng.normal(0.0, scalar_sigma))
    draw = NoiseDraw(stat_noise=np.array([noise]), stat_noise_var=scalar_sigma**2)
    return statistic + noise, draw


def true_value(statistic: Statistic, data: VectorDataset, ctx: MeasureContext) -> float:
    """Noise-free counterpart of one of the three statistics."""
    if statistic is Statistic.DISPERSION:
        return dispersion(data, 2.0)
    if statistic is Statistic.Q:
        return q_statistic(data, ctx)
    if statistic is Statistic.I_SQUARED:
        return i_squared(q_statistic(data, ctx), data.n)
    raise ValueError(f"unknown statistic {statistic!r}")


def noisy_statistic(
    statistic: Statistic,
    data: VectorDataset,
    ctx: MeasureContext,
    cfg: EstimatorConfig,
) -> tuple[float, NoiseDraw]:
    """Dispatch to the private estimator for `statistic`."""
    if statistic is Statistic.DISPERSION:
        return noisy_dispersion(data, cfg)
    if statistic is Statistic.Q:
        return noisy_q(data, ctx, cfg)
    if statistic is Statistic.I_SQUARED:
        return noisy_i_squared(data, ctx, cfg)
    raise ValueError(f"unknown statistic {statistic!r}")
