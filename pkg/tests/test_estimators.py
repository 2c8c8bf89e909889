"""Private estimators: zero-noise identity, injected draws, noise settings."""

import math

import numpy as np
import pytest

from hetdp.estimators import (
    DegenerateStatisticError,
    EstimatorConfig,
    NoiseDraw,
    Setting,
    Statistic,
    _aggregate_noise,
    centralized_noisy,
    evaluate_q_from_draws,
    noisy_dispersion,
    noisy_i_squared,
    noisy_mean,
    noisy_q,
    noisy_q_deviation_form,
    noisy_statistic,
    release_sigma,
    true_value,
)
from hetdp.gaussian import Mechanism, PrivacyBudget, SensitivitySpec
from hetdp.measures import VectorDataset, build_context, dataset_mean, dispersion, measure_all


def _cfg(budget, setting=Setting.DISTRIBUTED, mech=Mechanism.ANALYTIC, seed=7, zero=False):
    return EstimatorConfig(mechanism=mech, setting=setting, budget=budget, seed=seed, zero_noise=zero)


class TestBudgetParts:
    def test_stage_counts(self):
        assert Statistic.DISPERSION.budget_parts == 2
        assert Statistic.Q.budget_parts == 2
        assert Statistic.I_SQUARED.budget_parts == 3

    def test_wrong_part_count_rejected(self, fix, budget2, budget3):
        ctx = build_context(fix)
        with pytest.raises(ValueError, match="2-part"):
            noisy_dispersion(fix, _cfg(budget3))
        with pytest.raises(ValueError, match="2-part"):
            noisy_q(fix, ctx, _cfg(budget3))
        with pytest.raises(ValueError, match="3-part"):
            noisy_i_squared(fix, ctx, _cfg(budget2))


class TestZeroNoiseIdentity:
    def test_all_statistics_bit_identical(self, fix, zero_cfg2, zero_cfg3):
        report, ctx = measure_all(fix)
        assert noisy_dispersion(fix, zero_cfg2)[0] == report.dispersion
        assert noisy_q(fix, ctx, zero_cfg2)[0] == report.q_value
        assert noisy_i_squared(fix, ctx, zero_cfg3)[0] == report.i_squared
        assert np.array_equal(noisy_mean(fix, zero_cfg2)[0], dataset_mean(fix))

    def test_centralized_setting_too(self, fix_diag, budget2):
        cfg = _cfg(budget2, setting=Setting.CENTRALIZED, zero=True)
        assert noisy_dispersion(fix_diag, cfg)[0] == dispersion(fix_diag)

    def test_centralized_scalar_release(self, budget2):
        cfg = _cfg(budget2, zero=True)
        shape = SensitivitySpec.from_shape(10, 4)
        value, draw = centralized_noisy(3.7, (0.5, 0.05), shape, cfg)
        assert value == 3.7
        assert draw.stat_noise_var == 0.0


class TestInjectedDraws:
    def test_dispersion_hand_value(self, fix, zero_cfg2):
        draws = NoiseDraw(mean_noise=np.array([0.1, 0.1]), stat_noise=np.array([-0.01, 0.0]))
        # deviations [-0.5, 0] and [0.5, 0]; shifted by 0.1 per coordinate:
        # row sums 0.37 and 0.17, mean 0.27, plus stat sum -0.01.
        value, _ = noisy_dispersion(fix, zero_cfg2, draws=draws)
        assert value == pytest.approx(0.26, abs=1e-15)

    def test_q_hand_value(self, fix, zero_cfg2):
        ctx = build_context(fix)
        draws = NoiseDraw(mean_noise=np.array([0.05, -0.05]), stat_noise=np.array([0.02, 0.0]))
        # noisy center [0.55, 0.45]; squared distances 0.305 and 0.205,
        # weights 16: (4.88 + 3.28)/2 + 0.02.
        value, _ = noisy_q(fix, ctx, zero_cfg2, draws=draws)
        assert value == pytest.approx(0.5 * (4.88 + 3.28) + 0.02, abs=1e-12)

    def test_i_squared_hand_value(self, fix, zero_cfg2, zero_cfg3):
        ctx = build_context(fix)
        draws = NoiseDraw(
            mean_noise=np.array([0.05, -0.05]),
            stat_noise=np.array([0.02, 0.0]),
            i2_noise=0.01,
        )
        q_noisy, _ = noisy_q(fix, ctx, zero_cfg2, draws=draws)
        value, _ = noisy_i_squared(fix, ctx, zero_cfg3, draws=draws)
        assert value == pytest.approx(1.0 - 1.0 / q_noisy + 0.01, abs=1e-12)

    def test_i_squared_not_reclamped_after_final_noise(self, fix, zero_cfg3):
        # The clamp applies to the fraction before the last draw; a large
        # negative final draw leaves the release below zero by design.
        ctx = build_context(fix)
        draws = NoiseDraw(
            mean_noise=np.zeros(2), stat_noise=np.zeros(2), i2_noise=-5.0
        )
        value, _ = noisy_i_squared(fix, ctx, zero_cfg3, draws=draws)
        assert value == pytest.approx(0.75 - 5.0, abs=1e-12)

    def test_degenerate_noisy_q_raises(self, fix, zero_cfg3):
        ctx = build_context(fix)
        draws = NoiseDraw(
            mean_noise=np.zeros(2), stat_noise=np.array([-10.0, 0.0]), i2_noise=0.0
        )
        with pytest.raises(DegenerateStatisticError, match="nonpositive"):
            noisy_i_squared(fix, ctx, zero_cfg3, draws=draws)

    def test_missing_stage_draws_rejected(self, fix, zero_cfg2):
        with pytest.raises(ValueError):
            noisy_dispersion(fix, zero_cfg2, draws=NoiseDraw(mean_noise=np.zeros(2)))
        with pytest.raises(ValueError):
            noisy_mean(fix, zero_cfg2, draws=NoiseDraw())


class TestQEvaluationForms:
    def test_pipeline_and_deviation_form_agree(self, budget2):
        rng = np.random.default_rng(2)
        data = VectorDataset(rng.random((9, 5)), np.zeros(9, dtype=np.int64))
        ctx = build_context(data)
        for trial in range(20):
            draws = NoiseDraw(
                mean_noise=rng.normal(0, 0.05, 5), stat_noise=rng.normal(0, 0.05, 5)
            )
            direct = evaluate_q_from_draws(data, ctx, draws)
            expanded = noisy_q_deviation_form(data, ctx, draws)
            assert abs(direct - expanded) < 1e-10 * max(1.0, abs(direct))

    def test_unweighted_shift_reading_diverges(self, fix):
        # Reading the mean-noise shift without the per-row weights is a
        # different estimator; this documents that the two do not agree, so
        # the weighted deviation form is the one the pipeline implements.
        ctx = build_context(fix)
        draws = NoiseDraw(mean_noise=np.array([0.05, -0.05]), stat_noise=np.zeros(2))
        weighted = noisy_q_deviation_form(fix, ctx, draws)
        deviations = fix.vectors - ctx.weighted_mean
        per_row = (draws.mean_noise * (draws.mean_noise - 2.0 * deviations)).sum(axis=1)
        unweighted = float(per_row.mean()) + true_value(Statistic.Q, fix, ctx)
        assert abs(weighted - unweighted) > 1e-3


class TestNoiseGeneration:
    def test_deterministic_given_seed(self, fix_diag, budget2):
        cfg = _cfg(budget2, seed=17)
        assert noisy_dispersion(fix_diag, cfg)[0] == noisy_dispersion(fix_diag, cfg)[0]

    def test_seeds_change_draws(self, fix_diag, budget2):
        a = noisy_dispersion(fix_diag, _cfg(budget2, seed=1))[0]
        b = noisy_dispersion(fix_diag, _cfg(budget2, seed=2))[0]
        assert a != b

    def test_settings_draw_differently_with_same_variance(self, fix_diag, budget2):
        dist = noisy_dispersion(fix_diag, _cfg(budget2, setting=Setting.DISTRIBUTED))
        cent = noisy_dispersion(fix_diag, _cfg(budget2, setting=Setting.CENTRALIZED))
        assert dist[0] != cent[0]
        assert dist[1].mean_noise_var == cent[1].mean_noise_var

    def test_distributed_aggregate_variance(self, budget2):
        # n shares with standard deviation sqrt(n) sigma average to variance
        # sigma^2 exactly; checked against 20000 Monte Carlo aggregates.
        sigma, n = 0.3, 5
        cfg = _cfg(budget2)
        rng = np.random.default_rng(123)
        samples = [_aggregate_noise(1, sigma, cfg, n, rng)[0] for _ in range(20000)]
        assert abs(np.var(samples) - sigma**2) / sigma**2 < 0.05

    def test_recorded_variances_match_calibration(self, fix, budget2):
        value, draws = noisy_dispersion(fix, _cfg(budget2))
        sens = SensitivitySpec.from_shape(fix.n, fix.d)
        eps1, delta1 = budget2.split[0]
        sigma1 = release_sigma(Mechanism.ANALYTIC, sens, eps1, delta1)
        assert draws.mean_noise_var == pytest.approx(sigma1**2, rel=1e-12)

    def test_classical_mechanism_runs_below_epsilon_one(self, fix):
        budget = PrivacyBudget.equal_split(0.5, 0.01, 2)
        value, draws = noisy_dispersion(fix, _cfg(budget, mech=Mechanism.CLASSICAL))
        assert math.isfinite(value)
        assert draws.mean_noise_var > 0

    def test_centralized_scalar_noise_scales_with_dimension(self, budget2):
        # The scalar release carries d times the per-coordinate variance.
        shape = SensitivitySpec.from_shape(50, 16)
        cfg = _cfg(budget2, seed=3)
        _, draw = centralized_noisy(1.0, (0.5, 0.05), shape, cfg)
        sigma = release_sigma(Mechanism.ANALYTIC, shape, 0.5, 0.05)
        assert draw.stat_noise_var == pytest.approx(16 * sigma**2, rel=1e-12)


class TestDispatch:
    def test_true_values(self, fix):
        report, ctx = measure_all(fix)
        assert true_value(Statistic.DISPERSION, fix, ctx) == report.dispersion
        assert true_value(Statistic.Q, fix, ctx) == report.q_value
        assert true_value(Statistic.I_SQUARED, fix, ctx) == report.i_squared

    def test_noisy_statistic_routes_by_enum(self, fix, zero_cfg2, zero_cfg3):
        report, ctx = measure_all(fix)
        assert noisy_statistic(Statistic.DISPERSION, fix, ctx, zero_cfg2)[0] == report.dispersion
        assert noisy_statistic(Statistic.Q, fix, ctx, zero_cfg2)[0] == report.q_value
        assert noisy_statistic(Statistic.I_SQUARED, fix, ctx, zero_cfg3)[0] == report.i_squared

    def test_i_squared_needs_two_rows(self, budget3):
        data = VectorDataset(np.array([[0.2, 0.4]]), np.array([0]))
        ctx = build_context(data)
        with pytest.raises(ValueError, match="n >= 2"):
            noisy_i_squared(data, ctx, _cfg(budget3))
