import math

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from fairaudit import attack, sim
from fairaudit.models import LogisticModel, logit


class TestGenerate:
    def test_group_frequency(self):
        ds = sim.generate(sim.SimConfig(n_samples=4000, seed=21))
        assert abs(ds.protected["group"].mean() - 0.1) <= 0.015

    def test_group_means(self):
        ds = sim.generate(sim.SimConfig(n_samples=4000, seed=21))
        g = ds.protected["group"]
        mean0 = ds.features[g == 0].mean(axis=0)
        mean1 = ds.features[g == 1].mean(axis=0)
        assert np.all(np.abs(mean0 - np.array([-1.5, 0.0])) <= 0.02)
        assert np.all(np.abs(mean1 - np.array([1.5, 0.0])) <= 0.05)  # ~400 minority draws

    def test_both_labels_present_with_balanced_split_within_groups(self):
        ds = sim.generate(sim.SimConfig(n_samples=4000, seed=21))
        g = ds.protected["group"]
        for gv in (0, 1):
            frac = ds.labels[g == gv].mean()
            assert 0.4 <= frac <= 0.6

    def test_boundary_points_get_label_zero(self):
        cfg = sim.SimConfig(label_noise_var=0.0)
        # exactly on the centered hyperplane: margin 0 fails the strict inequality
        x_centered = np.array([[-1.5, 0.0]])
        assert sim.assign_labels(cfg, x_centered, [0]) [0] == 0
        # on the uncentered hyperplane through the origin the margin is -0.3
        x_origin = np.array([[-0.05, 1.0]])  # w0 . x = 0 for w0 = (-0.2, -0.01)
        assert np.isclose(np.dot([-0.2, -0.01], x_origin[0]), 0.0)
        assert sim.assign_labels(cfg, x_origin, [0])[0] == 0

    def test_seed_determinism_bytes(self):
        a = sim.generate(sim.SimConfig(seed=5))
        b = sim.generate(sim.SimConfig(seed=5))
        assert a.features.tobytes() == b.features.tobytes()
        assert a.labels.tobytes() == b.labels.tobytes()
        assert a.protected["group"].tobytes() == b.protected["group"].tobytes()

    def test_config_validation(self):
        with pytest.raises(ValueError):
            sim.SimConfig(n_samples=0)
        with pytest.raises(ValueError):
            sim.SimConfig(minority_prob=1.5)


class TestFitBias:
    def test_zero_coefficients_give_log_odds(self, sim_dataset):
        x, y = sim_dataset.features, sim_dataset.labels
        b = sim.fit_bias(x, y, 0.0, 0.0)
        assert b == pytest.approx(logit(float(np.mean(y))), abs=1e-6)

    def test_balanced_symmetric_labels_give_zero(self):
        x = np.array([[1.0, 0.0], [-1.0, 0.0], [2.0, 1.0], [-2.0, -1.0]])
        y = np.array([1, 0, 1, 0])
        assert sim.fit_bias(x, y, 0.0, 0.0) == pytest.approx(0.0, abs=1e-9)

    def test_local_optimality(self, sim_dataset):
        x, y = sim_dataset.features, sim_dataset.labels
        b = sim.fit_bias(x, y, 1.2, -0.8)
        s = x[:, 0] * 1.2 + x[:, 1] * -0.8

        def total_loss(bias):
            u = (1.0 - 2.0 * y) * (bias + s)
            return float(np.sum(np.logaddexp(0.0, u)))

        assert total_loss(b) <= total_loss(b + 1e-3)
        assert total_loss(b) <= total_loss(b - 1e-3)

    def test_gradient_residual_below_contract(self, sim_dataset):
        from fairaudit.models import expit

        x, y = sim_dataset.features, sim_dataset.labels
        for w1, w2 in [(-4.0, -4.0), (-1.2, 3.6), (0.0, 0.4), (2.8, -2.0), (4.0, 4.0)]:
            b = sim.fit_bias(x, y, w1, w2)
            s = x[:, 0] * w1 + x[:, 1] * w2
            residual = abs(float(np.sum(expit(b + s) - y)))
            assert residual < 1e-8

    def test_single_label_datasets_clamp(self):
        x = np.zeros((5, 2))
        assert sim.fit_bias(x, np.ones(5), 1.0, 1.0) == 50.0
        assert sim.fit_bias(x, np.zeros(5), 1.0, 1.0) == -50.0


class TestGridSpec:
    def test_default_grid_is_21_by_21(self):
        grid = sim.GridSpec.default()
        assert len(grid.w1_values) == 21 and len(grid.w2_values) == 21
        assert grid.w1_values[0] == -4.0 and grid.w1_values[-1] == 4.0
        assert grid.w1_values[1] == pytest.approx(-3.6)

    def test_range_validation(self):
        with pytest.raises(ValueError):
            sim.GridSpec.from_range(0.0, 1.0, 0.0)
        with pytest.raises(ValueError):
            sim.GridSpec(w1_values=(), w2_values=(1.0,))


class TestSweep:
    def test_cells_in_row_major_order(self, default_sweep):
        grid = sim.GridSpec.default()
        expected = [(w1, w2) for w1 in grid.w1_values for w2 in grid.w2_values]
        assert [(c.theta1, c.theta2) for c in default_sweep] == expected

    def test_insensitive_column_never_rejects(self, default_sweep):
        assert not any(c.reject for c in default_sweep if c.theta1 == 0.0)

    def test_statistic_grows_with_first_coordinate_dependence(self, default_sweep):
        by_cell = {(c.theta1, c.theta2): c.t_n for c in default_sweep}
        w = sorted({c.theta1 for c in default_sweep})
        for w2 in w:
            for branch in ([v for v in w if v >= 0], [v for v in reversed(w) if v <= 0]):
                ts = [by_cell[(w1, w2)] for w1 in branch]
                # non-decreasing in |theta1| allowing one-grid-step wiggle
                for i in range(2, len(ts)):
                    assert ts[i] >= ts[i - 2] - 1e-9

    def test_no_divergent_cells_with_preset(self, default_sweep):
        assert not any(c.divergent for c in default_sweep)

    def test_mirror_reflection_swaps_sign_exactly(self, mirror_sweep_pair):
        orig, refl = mirror_sweep_pair
        for (w1, w2), t in orig.items():
            assert refl[(-w1, w2)] == t

    def test_sign_symmetry_on_balanced_generator(self, symmetric_sweep_large):
        tn = symmetric_sweep_large
        for (w1, w2), t in tn.items():
            if w1 <= 0:
                continue
            other = tn[(-w1, w2)]
            assert abs(t - other) / max(t, other) <= 0.15

    def test_divergent_cells_flagged_not_fatal(self, sim_dataset, true_metric):
        # far beyond the stable step for lam=100, so penalized cells blow up
        cfg = attack.AttackConfig(lam=100.0, num_steps=200, schedule="constant", eta=0.05)
        grid = sim.GridSpec(w1_values=(0.0, 2.0), w2_values=(0.0, 2.0))
        cells = sim.sweep_heatmap(sim_dataset.features, sim_dataset.labels, grid, true_metric, cfg)
        assert any(c.divergent for c in cells)
        for c in cells:
            if c.divergent:
                assert math.isnan(c.t_n) and c.reject is False

    def test_csv_layout(self, sim_dataset, true_metric):
        grid = sim.GridSpec(w1_values=(0.0,), w2_values=(0.0, 1.0))
        cells = sim.sweep_heatmap(sim_dataset.features, sim_dataset.labels, grid, true_metric, attack.sim_preset())
        text = sim.heatmap_csv(cells)
        lines = text.strip().split("\n")
        assert lines[0] == "theta1,theta2,fitted_bias,t_n,reject,divergent"
        assert len(lines) == 3


class TestStoppingTimeSweep:
    def test_zero_horizon_is_the_unattacked_statistic(self, sim_dataset, true_metric, unfair_sim_model):
        rows = sim.stopping_time_sweep(
            unfair_sim_model, true_metric, sim_dataset.features, sim_dataset.labels, [0.0, 0.5]
        )
        assert rows[0][0] == 0.0
        assert rows[0][1] == 1.0

    def test_fair_model_stays_under_tolerance_for_all_horizons(self, sim_dataset, true_metric):
        b = sim.fit_bias(sim_dataset.features, sim_dataset.labels, 0.0, -2.0)
        fair = LogisticModel(weights=np.array([0.0, -2.0]), bias=b)
        rows = sim.stopping_time_sweep(
            fair, true_metric, sim_dataset.features, sim_dataset.labels, [0.0, 0.1, 0.5, 2.0, 10.0, 20.0]
        )
        assert max(t for _, t in rows) < 1.25

    def test_unfair_model_crosses_and_is_monotone(self, sim_dataset, true_metric, unfair_sim_model):
        rows = sim.stopping_time_sweep(
            unfair_sim_model, true_metric, sim_dataset.features, sim_dataset.labels, [0.0, 0.1, 0.5, 2.0, 10.0]
        )
        ts = [t for _, t in rows]
        assert any(t > 1.25 for t in ts)
        assert all(b >= a - 1e-6 for a, b in zip(ts, ts[1:]))

    def test_horizons_must_be_sorted(self, sim_dataset, true_metric, unfair_sim_model):
        with pytest.raises(ValueError, match="non-decreasing"):
            sim.stopping_time_sweep(
                unfair_sim_model, true_metric, sim_dataset.features, sim_dataset.labels, [1.0, 0.5]
            )


class TestRobustness:
    def test_ladder_vanishes_with_the_perturbation(self, sim_dataset, true_metric, unfair_sim_model):
        rows = sim.robustness_experiment(
            unfair_sim_model,
            true_metric,
            [1e-2, 1e-4, 1e-6, 0.0],
            sim_dataset.features,
            sim_dataset.labels,
            attack.sim_preset(),
        )
        gaps = [g for _, g in rows]
        assert gaps[0] > gaps[1] > gaps[2] > 0.0
        assert gaps[3] == 0.0

    def test_scales_must_decrease(self, sim_dataset, true_metric, unfair_sim_model):
        with pytest.raises(ValueError, match="decreasing"):
            sim.robustness_experiment(
                unfair_sim_model, true_metric, [1e-6, 1e-4], sim_dataset.features, sim_dataset.labels, attack.sim_preset()
            )

    def test_floor_psd_clips_negative_eigenvalues(self):
        fixed = sim.floor_psd(np.array([[1.0, 0.0], [0.0, -0.5]]))
        evals = np.linalg.eigvalsh(fixed)
        assert np.min(evals) >= -1e-15
        assert fixed[0, 0] == pytest.approx(1.0)

    def test_perturbation_direction_is_fixed_and_unit_norm(self):
        e1 = sim.perturbation_direction(3, seed=0)
        e2 = sim.perturbation_direction(3, seed=0)
        assert_array_equal(e1, e2)
        assert np.linalg.norm(e1, 2) == pytest.approx(1.0, rel=1e-12)
        assert np.max(np.abs(e1 - e1.T)) == 0.0


class TestComparisonMetrics:
    def test_perfect_predictions(self):
        assert sim.balanced_accuracy([0, 1, 0, 1], [0, 1, 0, 1]) == 1.0

    def test_constant_predictor_scores_half(self):
        assert sim.balanced_accuracy([0, 0, 1, 1], [1, 1, 1, 1]) == 0.5

    def test_hand_counted_recalls(self):
        assert sim.balanced_accuracy([0, 0, 1, 1], [0, 1, 1, 1]) == pytest.approx(0.75)

    def test_missing_class_is_an_error(self):
        with pytest.raises(ValueError, match="class"):
            sim.balanced_accuracy([1, 1, 1], [1, 0, 1])

    def test_aod_zero_for_identical_group_rates(self):
        y_true = [1, 1, 0, 0, 1, 1, 0, 0]
        y_pred = [1, 0, 1, 0, 1, 0, 1, 0]
        group = [0, 0, 0, 0, 1, 1, 1, 1]
        assert sim.average_odds_difference(y_true, y_pred, group) == 0.0

    def test_aod_zero_for_perfect_predictions(self):
        y_true = [1, 0, 1, 0]
        assert sim.average_odds_difference(y_true, y_true, [0, 0, 1, 1]) == 0.0

    def test_aod_cancellation_case(self):
        # group 1: TPR 1.0, FPR 0.0; group 0: TPR 0.5, FPR 0.5
        y_true = [1, 1, 0, 0, 1, 1, 0, 0]
        y_pred = [1, 1, 0, 0, 1, 0, 1, 0]
        group = [1, 1, 1, 1, 0, 0, 0, 0]
        assert sim.average_odds_difference(y_true, y_pred, group) == pytest.approx(0.0)

    def test_aod_empty_stratum_is_an_error(self):
        with pytest.raises(ValueError, match="stratum"):
            sim.average_odds_difference([1, 1, 0, 0], [1, 0, 1, 0], [0, 0, 0, 0])


class TestCalibrationHelpers:
    def test_population_mean_and_support(self):
        pop = sim.RatioPopulation(mean=1.25, sd=0.5, shape=4.0)
        draws = pop.sample(np.random.default_rng(0), 200_000)
        assert draws.mean() == pytest.approx(1.25, abs=0.005)
        assert draws.std() == pytest.approx(0.5, abs=0.01)
        assert draws.min() >= 1.25 - 0.5 * 2.0

    def test_negative_support_rejected(self):
        with pytest.raises(ValueError, match="negative"):
            sim.RatioPopulation(mean=0.5, sd=0.5, shape=4.0)

    def test_oracle_mean_close_to_construction(self):
        pop = sim.RatioPopulation(mean=2.0)
        assert sim.oracle_mean(pop, seed=3, draws=200_000) == pytest.approx(2.0, abs=0.01)

    def test_coverage_smoke(self):
        cov, target = sim.coverage_experiment(sim.RatioPopulation(mean=2.0), n=200, replicates=200, seed=4)
        assert 0.9 <= cov.rate <= 1.0
        assert target == pytest.approx(2.0, abs=0.01)

    def test_rejection_rates_under_null_and_alternative(self):
        null = sim.rejection_rate_experiment(sim.RatioPopulation(mean=1.25), 1.25, n=500, replicates=100, seed=5)
        assert null.rate <= 0.12
        strong = sim.rejection_rate_experiment(
            sim.RatioPopulation(mean=1.45), 1.25, n=500, replicates=100, seed=6, name="power"
        )
        assert strong.rate >= 0.99

    def test_calibration_csv_layout(self):
        rows = [sim.CalibrationResult("coverage", 500, 1000, 0.95)]
        text = sim.calibration_csv(rows)
        assert text.startswith("experiment,n,replicates,rate\n")
        assert "coverage,500,1000,0.95" in text
