import math

import numpy as np
import pytest

from lcmgof import (
    CandidateRecord,
    GenConfig,
    GofTrace,
    LcmParams,
    ResponseMatrix,
    SelectConfig,
    StopReason,
    default_k_max,
    evaluate_curve,
    expected_response,
    fit_sc_lcm,
    generate_dataset,
    ideal_residual,
    practical_residual,
    ratio_statistic,
    residual_centering,
    select_gof,
    select_rgof,
    select_spec,
    statistic_bound,
    t_statistic,
)

from oracle_utils import scalar_normalized_residual


def make_params(memberships, theta, m=5):
    memberships = np.asarray(memberships)
    theta = np.asarray(theta, dtype=float)
    return LcmParams(
        n_subjects=memberships.size,
        n_items=theta.shape[0],
        n_classes=theta.shape[1],
        max_category=m,
        memberships=memberships,
        item_params=theta,
    )


def separable_noiseless(n, j):
    memberships = np.array([1] * (n // 2) + [2] * (n - n // 2))
    theta = np.array([[1.0, 4.0], [4.0, 1.0]] * (j // 2))
    params = make_params(memberships, theta)
    responses = ResponseMatrix(
        data=expected_response(params).astype(np.int64), max_category=5
    )
    return params, responses


class TestIdealResidual:
    def test_zero_when_responses_equal_their_means(self):
        params, responses = separable_noiseless(10, 4)
        assert np.all(ideal_residual(responses, params) == 0.0)

    def test_single_entry_hand_value(self):
        params = make_params(np.ones(100, dtype=int), [[2.5]])
        data = np.zeros((100, 1), dtype=np.int64)
        data[0, 0] = 5
        responses = ResponseMatrix(data=data, max_category=5)
        residual = ideal_residual(responses, params)
        # (5 - 2.5) / sqrt(100 * 1.25)
        assert residual[0, 0] == pytest.approx(0.22360679774997896, abs=1e-15)

    def test_boundary_variance_rejected(self):
        params = make_params([1, 1], [[0.0], [5.0]])
        responses = ResponseMatrix(data=np.zeros((2, 2), dtype=np.int64), max_category=5)
        with pytest.raises(ValueError, match="boundary"):
            ideal_residual(responses, params)

    def test_pooled_variance_scales_as_one_over_n(self):
        n = 2000
        cfg = GenConfig(delta=0.2, max_category=5, seed=61)
        params, responses = generate_dataset(n, 30, 3, cfg)
        residual = ideal_residual(responses, params)
        pooled = residual.var()
        assert abs(pooled - 1.0 / n) <= 0.1 / n


class TestPracticalResidual:
    def test_matches_scalar_oracle(self):
        cfg = GenConfig(delta=0.2, max_category=5, seed=41)
        _, responses = generate_dataset(50, 10, 2, cfg)
        fit = fit_sc_lcm(responses, 2, seed=5)
        oracle = scalar_normalized_residual(
            responses.data.tolist(), fit.r_hat.tolist(), fit.v_hat.tolist(), 50
        )
        assert np.abs(practical_residual(responses, fit) - oracle).max() <= 1e-14

    def test_zero_variance_cells_zeroed(self):
        # one item answered 0 by everyone: fitted mean 0, fitted variance 0
        data = np.array([[0, 3], [0, 2], [0, 4]], dtype=np.int64)
        responses = ResponseMatrix(data=data, max_category=5)
        fit = fit_sc_lcm(responses, 1)
        assert fit.v_hat[0, 0] == 0.0
        residual = practical_residual(responses, fit)
        assert np.all(residual[:, 0] == 0.0)

    def test_dimension_mismatch_rejected(self):
        cfg = GenConfig(delta=0.2, max_category=5, seed=2)
        _, responses = generate_dataset(20, 5, 2, cfg)
        _, other = generate_dataset(21, 5, 2, cfg)
        fit = fit_sc_lcm(other, 2)
        with pytest.raises(ValueError, match="dimensions"):
            practical_residual(responses, fit)


class TestTStatistic:
    def test_zero_residual_value(self):
        responses = ResponseMatrix(
            data=np.full((100, 25), 3, dtype=np.int64), max_category=5
        )
        fit = fit_sc_lcm(responses, 1)
        assert t_statistic(responses, fit) == pytest.approx(-1.5, abs=1e-12)

    def test_table_values_at_small_sample(self):
        # 200 replications of the K=4, J=60, delta=0.2, N=200 condition
        t1, t2, t4 = [], [], []
        for rep in range(200):
            cfg = GenConfig(delta=0.2, max_category=5, seed=100_000 + rep)
            _, responses = generate_dataset(200, 60, 4, cfg)
            t1.append(t_statistic(responses, fit_sc_lcm(responses, 1, seed=rep)))
            t2.append(t_statistic(responses, fit_sc_lcm(responses, 2, seed=rep)))
            t4.append(t_statistic(responses, fit_sc_lcm(responses, 4, seed=rep)))
        assert -0.063 <= np.mean(t4) <= -0.011
        assert 1.85 <= np.mean(t1) <= 2.19
        ratios = np.abs(np.array(t1) / np.array(t2))
        assert 1.04 <= ratios.mean() <= 1.34

    def test_monotone_centering_identity(self):
        # with sigma_1 held fixed, the statistic moves by the centering change
        sigma1 = 2.0
        t_a = sigma1 - residual_centering(100, 25)
        t_b = sigma1 - residual_centering(100, 64)
        assert t_b - t_a == pytest.approx(math.sqrt(25 / 100) - math.sqrt(64 / 100))

    def test_bound_holds_on_fuzzed_fits(self):
        rng = np.random.default_rng(77)
        for _ in range(150):
            n = int(rng.integers(4, 30))
            j = int(rng.integers(2, 10))
            m = int(rng.integers(1, 7))
            data = rng.integers(0, m + 1, size=(n, j))
            responses = ResponseMatrix(data=data, max_category=m)
            k0 = int(rng.integers(1, min(n, j) + 1))
            fit = fit_sc_lcm(responses, k0, seed=int(rng.integers(2**32)))
            assert t_statistic(responses, fit) <= statistic_bound(m, j) + 1e-9


class TestRatioStatistic:
    def test_definition(self):
        assert ratio_statistic(2.0, -0.5) == pytest.approx(4.0)

    def test_zero_divisor_gives_infinity(self):
        assert ratio_statistic(1.0, 0.0) == math.inf

    def test_null_smallness_and_underfit_largeness(self):
        # strong signal: statistic collapses at the true count, stays away below
        t_true, t_under = [], []
        for rep in range(100):
            cfg = GenConfig(delta=0.1, max_category=5, seed=50_000 + rep)
            _, responses = generate_dataset(1000, 60, 3, cfg)
            t_true.append(t_statistic(responses, fit_sc_lcm(responses, 3, seed=rep)))
            t_under.append(t_statistic(responses, fit_sc_lcm(responses, 2, seed=rep)))
        assert np.quantile(t_true, 0.95) < 0.05
        assert min(t_under) > 0.5

    def test_ratio_peaks_at_true_count(self):
        curves = []
        for rep in range(60):
            cfg = GenConfig(delta=0.2, max_category=5, seed=70_000 + rep)
            _, responses = generate_dataset(1000, 60, 4, cfg)
            records = evaluate_curve(responses, SelectConfig(seed=rep), through_k=4)
            curves.append([rec.ratio for rec in records[1:]])
        means = np.mean(curves, axis=0)
        assert means[-1] > 50.0
        assert max(means[:-1]) < 2.0


class TestSelectConfig:
    def test_default_k_max_formula(self):
        assert default_k_max(1369, 50) == 13
        assert default_k_max(200, 60) == 5
        assert default_k_max(1000, 60) == 11

    def test_k_max_clamped_to_svd_range(self):
        assert default_k_max(1000, 3) == 2
        assert default_k_max(4, 4) == 1

    def test_thresholds(self):
        cfg = SelectConfig(tau_exponent=0.2, gamma_multiplier=2.0)
        assert cfg.tau(1000) == pytest.approx(1000 ** -0.2)
        assert cfg.gamma(1000) == pytest.approx(2.0 * math.log(1000))

    def test_validation(self):
        with pytest.raises(ValueError, match="tau_exponent"):
            SelectConfig(tau_exponent=0.0)
        with pytest.raises(ValueError, match="gamma_multiplier"):
            SelectConfig(gamma_multiplier=-1.0)
        with pytest.raises(ValueError, match="k_max"):
            SelectConfig(k_max=0)
        with pytest.raises(ValueError, match="method"):
            SelectConfig(method="bic")


class TestSelectGof:
    def test_noiseless_two_class_stop(self):
        _, responses = separable_noiseless(40, 8)
        trace = select_gof(responses, SelectConfig(seed=1))
        assert trace.k_hat == 2
        assert trace.stop_reason is StopReason.THRESHOLD_MET
        assert trace.candidates[-1].t_stat == pytest.approx(
            -residual_centering(40, 8), abs=1e-9
        )

    def test_single_class_data(self):
        hits = 0
        for rep in range(50):
            cfg = GenConfig(delta=0.2, max_category=5, seed=3_000 + rep)
            _, responses = generate_dataset(200, 40, 1, cfg)
            hits += select_gof(responses, SelectConfig(seed=rep)).k_hat == 1
        assert hits >= 48

    def test_exhaustion_returns_k_max(self):
        _, responses = separable_noiseless(40, 8)
        trace = select_gof(responses, SelectConfig(k_max=1, seed=1))
        assert trace.k_hat == 1
        assert trace.stop_reason is StopReason.EXHAUSTED_KMAX

    def test_requires_two_by_two(self):
        responses = ResponseMatrix(data=np.array([[1], [2]]), max_category=5)
        with pytest.raises(ValueError, match="2 x 2"):
            select_gof(responses)


class TestSelectRgof:
    def test_early_exit_without_ratios(self):
        responses = ResponseMatrix(
            data=np.full((60, 12), 2, dtype=np.int64), max_category=5
        )
        trace = select_rgof(responses, SelectConfig(seed=4))
        assert trace.k_hat == 1
        assert trace.stop_reason is StopReason.THRESHOLD_MET
        assert len(trace.candidates) == 1

    def test_ratio_stop_on_noisy_separable_data(self):
        cfg = GenConfig(delta=0.1, max_category=5, seed=26)
        _, responses = generate_dataset(300, 40, 2, cfg)
        trace = select_rgof(responses, SelectConfig(seed=4))
        assert trace.k_hat == 2
        assert trace.stop_reason is StopReason.RATIO_MET
        assert trace.candidates[-1].ratio > math.log(300)

    def test_exhaustion(self):
        cfg = GenConfig(delta=0.2, max_category=5, seed=8)
        _, responses = generate_dataset(100, 12, 3, cfg)
        trace = select_rgof(responses, SelectConfig(k_max=2, gamma_multiplier=1e9, seed=1))
        assert trace.k_hat == 2
        assert trace.stop_reason is StopReason.EXHAUSTED_KMAX


class TestSelectSpec:
    def test_zero_matrix(self):
        responses = ResponseMatrix(data=np.zeros((30, 8), dtype=np.int64), max_category=5)
        assert select_spec(responses) == 0

    def test_strong_signal_counts_classes(self):
        cfg = GenConfig(delta=0.1, max_category=5, seed=15)
        _, responses = generate_dataset(300, 60, 3, cfg)
        assert select_spec(responses) == 3


class TestTraceShape:
    def test_candidates_and_ratios_recorded(self):
        cfg = GenConfig(delta=0.2, max_category=5, seed=10)
        _, responses = generate_dataset(150, 30, 3, cfg)
        trace = select_gof(responses, SelectConfig(seed=10))
        assert [rec.k0 for rec in trace.candidates] == list(range(1, trace.k_hat + 1))
        assert trace.candidates[0].ratio is None
        for prev, rec in zip(trace.candidates, trace.candidates[1:]):
            assert rec.ratio == pytest.approx(abs(prev.t_stat / rec.t_stat))
        bound = statistic_bound(5, 30)
        assert all(rec.t_stat <= bound + 1e-9 for rec in trace.candidates)

    def test_invalid_traces_rejected(self):
        good = CandidateRecord(k0=1, sigma1=1.5, t_stat=0.5)
        with pytest.raises(ValueError, match="k0 = 1, 2"):
            GofTrace([CandidateRecord(k0=2, sigma1=1.5, t_stat=0.5)], 2, StopReason.THRESHOLD_MET)
        with pytest.raises(ValueError, match="ratio"):
            GofTrace(
                [good, CandidateRecord(k0=2, sigma1=1.0, t_stat=0.25, ratio=3.0)],
                2,
                StopReason.THRESHOLD_MET,
            )

    def test_curve_forces_all_candidates(self):
        responses = ResponseMatrix(
            data=np.full((80, 20), 3, dtype=np.int64), max_category=5
        )
        records = evaluate_curve(responses, SelectConfig(seed=3))
        assert len(records) == default_k_max(80, 20)
        expected = -residual_centering(80, 20)
        for rec in records:
            assert rec.t_stat == pytest.approx(expected, abs=1e-9)

    def test_deterministic_given_seed(self):
        cfg = GenConfig(delta=0.2, max_category=5, seed=44)
        _, responses = generate_dataset(120, 25, 2, cfg)
        first = select_rgof(responses, SelectConfig(seed=20))
        second = select_rgof(responses, SelectConfig(seed=20))
        assert first.to_dict() == second.to_dict()
