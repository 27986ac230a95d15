import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import ndtri

import helpers
from fairaudit import sim
from fairaudit.attack import audit_preset, sim_preset
from fairaudit.fair_metric import rotated_coordinate_metric
from fairaudit.inference import (
    NoBaselineErrors,
    audit,
    error_rate_stats,
    error_rate_test,
    loss_ratio_stats,
    loss_ratio_test,
    normal_cdf,
    normal_quantile,
    one_sided_lower_bound,
    two_sided_ci,
)
from fairaudit.models import LogisticModel


class TestNormalQuantile:
    def test_median(self):
        assert abs(normal_quantile(0.5)) < 1e-12

    def test_ninety_five(self):
        assert normal_quantile(0.95) == pytest.approx(1.645, abs=5e-4)

    def test_ninety_seven_five_against_bisection_oracle(self):
        assert normal_quantile(0.975) == pytest.approx(helpers.bisect_normal_quantile(0.975), abs=1e-5)
        assert normal_quantile(0.975) == pytest.approx(1.959964, abs=1e-5)

    def test_inverts_the_cdf_across_the_range(self):
        for p in [1e-6, 1e-4, 0.01, 0.02425, 0.2, 0.5, 0.8, 0.975, 0.99, 0.9999, 1.0 - 1e-6]:
            z = normal_quantile(p)
            assert abs(normal_cdf(z) - p) < 1e-9

    def test_agrees_with_scipy(self):
        for p in [1e-5, 0.1, 0.5, 0.9, 0.95, 1.0 - 1e-5]:
            assert normal_quantile(p) == pytest.approx(float(ndtri(p)), abs=1e-10)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.1])
    def test_domain(self, p):
        with pytest.raises(ValueError):
            normal_quantile(p)


class TestLossRatioStats:
    def test_constant_sample(self):
        assert loss_ratio_stats([1.0, 1.0, 1.0]) == (1.0, 0.0)

    def test_hand_arithmetic(self):
        s, v = loss_ratio_stats([1.0, 2.0, 3.0])
        assert s == 2.0
        assert v == pytest.approx(1.0, abs=1e-15)

    def test_affine_shift_moves_mean_only(self):
        rng = np.random.default_rng(0)
        r = rng.uniform(1.0, 3.0, 40)
        s0, v0 = loss_ratio_stats(r)
        s1, v1 = loss_ratio_stats(r + 0.7)
        assert s1 == pytest.approx(s0 + 0.7, rel=1e-12)
        assert v1 == pytest.approx(v0, rel=1e-12)

    def test_matches_scalar_reference(self):
        rng = np.random.default_rng(1)
        r = rng.uniform(0.5, 4.0, 25)
        s, v = loss_ratio_stats(r)
        ref_s, ref_v = helpers.reference_mean_sd(list(r))
        assert s == pytest.approx(ref_s, rel=1e-13)
        assert v == pytest.approx(ref_v, rel=1e-13)

    def test_needs_two_samples(self):
        with pytest.raises(ValueError, match="two"):
            loss_ratio_stats([1.0])

    def test_rejects_negative_ratios(self):
        with pytest.raises(ValueError, match="non-negative"):
            loss_ratio_stats([1.0, -0.1])


class TestTwoSidedCi:
    def test_degenerate_when_variance_vanishes(self):
        lo, hi = two_sided_ci([2.0, 2.0, 2.0], alpha=0.05)
        assert lo == hi == 2.0

    def test_hand_arithmetic(self):
        lo, hi = two_sided_ci([1.0, 2.0, 3.0], alpha=0.05)
        assert lo == pytest.approx(0.8684, abs=1e-4)
        assert hi == pytest.approx(3.1316, abs=1e-4)

    def test_symmetric_about_the_mean(self):
        rng = np.random.default_rng(2)
        r = rng.uniform(1.0, 2.0, 30)
        lo, hi = two_sided_ci(r, alpha=0.1)
        s, _ = loss_ratio_stats(r)
        assert s - lo == pytest.approx(hi - s, rel=1e-12)

    def test_width_scales_with_inverse_root_n(self):
        rng = np.random.default_rng(3)
        r = rng.uniform(1.0, 3.0, 50)
        lo1, hi1 = two_sided_ci(r, alpha=0.05)
        r4 = np.tile(r, 4)
        lo4, hi4 = two_sided_ci(r4, alpha=0.05)
        # V_n is recomputed on the duplicated sample, so the width halves up to the n-1 factor
        assert (hi4 - lo4) / (hi1 - lo1) == pytest.approx(0.5, rel=0.02)

    def test_alpha_domain(self):
        with pytest.raises(ValueError, match="alpha"):
            two_sided_ci([1.0, 2.0], alpha=1.5)


class TestLossRatioTest:
    def test_constant_ones_never_reject(self):
        t, reject = loss_ratio_test([1.0] * 10, alpha=0.05, delta=1.25)
        assert t == 1.0 and reject is False

    def test_hand_arithmetic(self):
        t, reject = loss_ratio_test([1.0, 2.0, 3.0], alpha=0.05, delta=1.25)
        assert t == pytest.approx(1.0503, abs=1e-4)
        assert reject is False

    def test_reported_strong_statistic_rejects(self):
        # a degenerate sample whose lower bound sits well above the tolerance
        t, reject = loss_ratio_test([3.676] * 20, alpha=0.05, delta=1.25)
        assert t == pytest.approx(3.676)
        assert reject is True

    def test_lower_bound_never_exceeds_mean(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            r = rng.uniform(0.5, 5.0, rng.integers(2, 40))
            s, _ = loss_ratio_stats(r)
            assert one_sided_lower_bound(r, 0.05) <= s + 1e-12

    def test_delta_must_exceed_one(self):
        with pytest.raises(ValueError, match="delta"):
            loss_ratio_test([1.0, 2.0], alpha=0.05, delta=1.0)


class TestErrorRateStats:
    def test_identical_columns_give_unit_ratio_and_zero_variance(self):
        s = error_rate_stats([1, 0, 1, 1], [1, 0, 1, 1])
        assert s.s_tilde == 1.0
        assert s.var_hat == 0.0

    def test_hand_arithmetic(self):
        s = error_rate_stats([1, 1, 0, 1], [1, 0, 0, 1])
        assert s.a_n == 0.75
        assert s.b_n == 0.5
        assert s.s_tilde == 1.5
        assert s.var_hat == pytest.approx(0.375, abs=1e-15)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(5)
        post = (rng.random(60) < 0.5).astype(int)
        pre = np.maximum(post, (rng.random(60) < 0.2).astype(int))
        base = error_rate_stats(post, pre)
        perm = rng.permutation(60)
        shuffled = error_rate_stats(post[perm], pre[perm])
        assert base == shuffled

    def test_no_baseline_errors_is_explicit(self):
        with pytest.raises(NoBaselineErrors):
            error_rate_stats([1, 0, 1], [0, 0, 0])

    def test_non_binary_rejected(self):
        with pytest.raises(ValueError, match="0 or 1"):
            error_rate_stats([0.5, 1.0], [1, 0])

    def test_uncentered_second_moments_equal_centered_covariance_form(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            n = int(rng.integers(4, 50))
            post = (rng.random(n) < rng.uniform(0.2, 0.9)).astype(float)
            pre = (rng.random(n) < rng.uniform(0.2, 0.9)).astype(float)
            if pre.mean() == 0.0:
                pre[0] = 1.0
            a, b = post.mean(), pre.mean()
            m11, m22, m12 = (post * post).mean(), (pre * pre).mean(), (post * pre).mean()
            c11 = ((post - a) ** 2).mean()
            c22 = ((pre - b) ** 2).mean()
            c12 = ((post - a) * (pre - b)).mean()
            quad_raw = a * a * m22 + b * b * m11 - 2 * a * b * m12
            quad_centered = a * a * c22 + b * b * c11 - 2 * a * b * c12
            assert quad_raw == pytest.approx(quad_centered, abs=1e-12)
            assert error_rate_stats(post, pre).var_hat == pytest.approx(
                quad_centered / (n * b**4), rel=1e-9, abs=1e-13
            )


class TestErrorRateTest:
    def test_identical_columns_fail_to_reject(self):
        t, reject = error_rate_test([1, 0, 1, 1], [1, 0, 1, 1], alpha=0.05, delta=1.25)
        assert t == 1.0 and reject is False

    def test_hand_arithmetic(self):
        t, reject = error_rate_test([1, 1, 0, 1], [1, 0, 0, 1], alpha=0.05, delta=1.25)
        assert t == pytest.approx(0.4928, abs=1e-4)
        assert reject is False

    def test_strong_inflation_rejects(self):
        post = [1] * 400
        pre = [1, 0] * 200
        t, reject = error_rate_test(post, pre, alpha=0.05, delta=1.25)
        assert t > 1.25 and reject is True


class TestAudit:
    def constant_model_report(self, sim_dataset, **kw):
        model = LogisticModel(weights=np.zeros(2), bias=0.3)
        metric = rotated_coordinate_metric(0.0)
        return audit(model, metric, audit_preset(), sim_dataset.features, sim_dataset.labels, **kw)

    def test_constant_model_is_maximally_fair(self, sim_dataset):
        report = self.constant_model_report(sim_dataset)
        assert report.s_n == 1.0
        assert report.v_n == 0.0
        assert report.t_n == 1.0
        assert report.reject is False
        assert report.ci_lo == report.ci_hi == 1.0
        assert report.ci_one_sided_lo == report.t_n
        assert report.error_rate is not None
        assert report.error_rate.s_tilde == 1.0
        assert report.error_rate.reject is False

    def test_report_invariants(self, sim_dataset, unfair_sim_model):
        metric = rotated_coordinate_metric(0.0)
        report = audit(unfair_sim_model, metric, sim_preset(), sim_dataset.features, sim_dataset.labels)
        assert report.ci_lo <= report.s_n <= report.ci_hi
        assert report.reject == (report.t_n > report.delta)
        assert report.t_n == report.ci_one_sided_lo
        assert report.n == sim_dataset.n
        assert report.reject is True  # strongly coordinate-1-dependent model

    def test_deterministic_report(self, sim_dataset, unfair_sim_model):
        metric = rotated_coordinate_metric(0.0)
        r1 = audit(unfair_sim_model, metric, sim_preset(), sim_dataset.features, sim_dataset.labels)
        r2 = audit(unfair_sim_model, metric, sim_preset(), sim_dataset.features, sim_dataset.labels)
        assert r1.to_json() == r2.to_json()
        assert_allclose(r1.ratios, r2.ratios, rtol=0, atol=0)

    def test_threads_do_not_change_the_outcome(self, sim_dataset, unfair_sim_model):
        metric = rotated_coordinate_metric(0.0)
        r1 = audit(unfair_sim_model, metric, sim_preset(), sim_dataset.features, sim_dataset.labels, threads=1)
        r3 = audit(unfair_sim_model, metric, sim_preset(), sim_dataset.features, sim_dataset.labels, threads=3)
        assert_allclose(r1.ratios, r3.ratios, rtol=1e-12, atol=1e-12)
        assert r1.t_n == pytest.approx(r3.t_n, rel=1e-12)

    def test_no_baseline_errors_propagates(self, sim_dataset):
        model = LogisticModel(weights=np.zeros(2), bias=0.3)  # always predicts class 1
        metric = rotated_coordinate_metric(0.0)
        ones = np.ones(sim_dataset.n)
        with pytest.raises(NoBaselineErrors):
            audit(model, metric, audit_preset(), sim_dataset.features, ones)
        report = audit(
            model, metric, audit_preset(), sim_dataset.features, ones, include_error_rate=False
        )
        assert report.error_rate is None
        assert report.s_n == 1.0

    def test_samples_csv_layout(self, sim_dataset):
        report = self.constant_model_report(sim_dataset)
        lines = report.samples_csv().strip().split("\n")
        assert lines[0] == "index,ratio,pre01,post01"
        assert len(lines) == report.n + 1
        first = lines[1].split(",")
        assert first[0] == "0" and float(first[1]) == 1.0


class TestAuditCalibration:
    """Monte-Carlo rejection behavior of the end-to-end audit on fresh draws."""

    def rejection_rate(self, w1, w2, replicates=200):
        metric = rotated_coordinate_metric(0.0)
        rejections = 0
        for rep in range(replicates):
            ds = sim.generate(sim.SimConfig(seed=10_000 + rep))
            b = sim.fit_bias(ds.features, ds.labels, w1, w2)
            model = LogisticModel(weights=np.array([w1, w2]), bias=b)
            report = audit(
                model, metric, sim_preset(), ds.features, ds.labels, include_error_rate=False
            )
            rejections += int(report.reject)
        return rejections / replicates

    def test_fair_classifier_rarely_rejected(self):
        assert self.rejection_rate(0.0, -2.0) <= 0.05

    def test_unfair_classifier_reliably_rejected(self):
        assert self.rejection_rate(4.0, 0.0) >= 0.95
