"""Tests for the random generator, the Monte Carlo harness and censoring
calibration."""

import numpy as np
import pytest

from bpcure.betaprime import BetaPrimeParams
from bpcure.cure import CureParams, cure_fraction, s_pop
from bpcure.errors import DomainError, UnachievableTargetError
from bpcure.simulate import (
    SimConfig,
    calibrate_censor_window,
    draw_sample,
    latent_time_from_uniform,
    mc_study,
    preset_config,
)

from conftest import TRUE_S1
from oracles import root_latent_time

BP = BetaPrimeParams(0.5, 1.0)


def config_for(n=200, reps=1, seed=0, window=(0.01, 7.0), params=TRUE_S1):
    return SimConfig(n=n, true_params=params, censor_window=window, reps=reps, seed=seed)


class TestSimConfig:
    def test_window_validation(self):
        with pytest.raises(DomainError):
            config_for(window=(0.0, 1.0))
        with pytest.raises(DomainError):
            config_for(window=(2.0, 1.0))
        with pytest.raises(DomainError):
            config_for(window=(1.0, np.inf))

    def test_size_validation(self):
        with pytest.raises(DomainError):
            config_for(n=1)
        with pytest.raises(DomainError):
            config_for(reps=0)

    def test_coefficient_count(self):
        bad = CureParams(alpha=2.0, bp=BP, beta=np.array([0.5]))
        with pytest.raises(DomainError):
            config_for(params=bad)


class TestLatentInversion:
    def test_worked_example(self):
        # alpha=1, p0=1/2, w=4/7 inverts the S_pop(1) = 4/7 example: F=3/4,
        # and the mu=1, phi->0 latency has quantile(3/4) = 1
        bp = BetaPrimeParams(1.0, 1e-12)
        y = latent_time_from_uniform(4.0 / 7.0, 0.5, 1.0, bp)
        assert y == pytest.approx(1.0, abs=1e-6)

    def test_plateau_boundary(self):
        assert latent_time_from_uniform(0.5, 0.5, 1.0, BP) == np.inf
        assert latent_time_from_uniform(1.0, 0.5, 1.0, BP) == 0.0

    def test_domain_checks(self):
        with pytest.raises(DomainError):
            latent_time_from_uniform(0.4, 0.5, 1.0, BP)
        with pytest.raises(DomainError):
            latent_time_from_uniform(1.1, 0.5, 1.0, BP)
        with pytest.raises(DomainError):
            latent_time_from_uniform(0.5, 0.0, 1.0, BP)
        with pytest.raises(DomainError):
            latent_time_from_uniform(0.5, 1.0, 1.0, BP)

    def test_scalar_matches_vector(self):
        w = np.array([0.6, 0.75, 0.99])
        vec = latent_time_from_uniform(w, 0.5, 2.0, BP)
        for wi, yi in zip(w, vec):
            assert latent_time_from_uniform(float(wi), 0.5, 2.0, BP) == yi

    @pytest.mark.parametrize("alpha", [-1.0, 0.0, 0.7, 2.0])
    def test_matches_root_solve_oracle(self, alpha):
        rng = np.random.default_rng(42)
        p0 = rng.uniform(0.1, 0.9, size=250)
        w = p0 + (1.0 - p0) * rng.uniform(1e-3, 1.0 - 1e-3, size=250)
        y = latent_time_from_uniform(w, p0, alpha, BP)
        for i in range(250):
            ref = root_latent_time(w[i], p0[i], alpha, BP)
            assert y[i] == pytest.approx(ref, rel=1e-8, abs=1e-10)


class TestDrawSample:
    def test_determinism_and_stream_separation(self):
        config = config_for(n=300, seed=9)
        a = draw_sample(config, 0)
        b = draw_sample(config, 0)
        c = draw_sample(config, 1)
        assert np.array_equal(a.t, b.t)
        assert np.array_equal(a.delta, b.delta)
        assert np.array_equal(a.X, b.X)
        assert not np.array_equal(a.t, c.t)

    def test_dataset_shape(self):
        data = draw_sample(config_for(n=500, seed=2), 0)
        assert data.n == 500
        assert data.names == ["intercept", "x1"]
        assert np.all(data.X[:, 0] == 1.0)
        assert set(np.unique(data.X[:, 1])) <= {0.0, 1.0}
        assert np.all(np.isfinite(data.t))

    def test_cured_share_matches_mean_cure_fraction(self):
        # with the censoring window pushed far beyond the latency scale,
        # censoring happens (almost) only for cured subjects
        config = config_for(n=100_000, seed=5, window=(1e7, 2e7))
        data = draw_sample(config, 0)
        censored_share = float(np.mean(data.delta == 0.0))
        p0 = cure_fraction(data.X, TRUE_S1.beta)
        expect = float(np.mean(p0))
        se = np.sqrt(expect * (1.0 - expect) / data.n)
        assert abs(censored_share - expect) < 3.0 * se

    def test_latent_sf_matches_population_law(self):
        # same far-window trick: t equals the latent y for susceptibles, so
        # the empirical share {t > g} tracks s_pop(g) per covariate level
        config = config_for(n=100_000, seed=5, window=(1e7, 2e7))
        data = draw_sample(config, 0)
        for level in (0.0, 1.0):
            mask = data.X[:, 1] == level
            t = data.t[mask]
            x = np.array([1.0, level])
            grid = np.quantile(t[t < 1e6], [0.05, 0.2, 0.4, 0.6, 0.8, 0.95])
            emp = np.array([np.mean(t > g) for g in grid])
            model = np.atleast_1d(s_pop(grid, x, TRUE_S1))
            assert np.max(np.abs(emp - model)) < 0.01


class TestMCStudy:
    def test_single_rep_degenerate(self):
        report = mc_study(config_for(n=200, reps=1, seed=3))
        assert report.reps_used == 1
        assert np.all(np.isnan(report.sd))
        np.testing.assert_allclose(report.mse, report.bias**2, rtol=1e-12)
        assert report.n_failures == 0

    def test_report_structure_and_identity(self):
        report = mc_study(config_for(n=150, reps=5, seed=11))
        assert report.names == ["mu", "phi", "alpha", "beta0", "beta1", "p00", "p01"]
        expect_true = [0.5, 1.0, 2.0, 0.5, -1.0,
                       cure_fraction(np.array([1.0, 0.0]), TRUE_S1.beta),
                       cure_fraction(np.array([1.0, 1.0]), TRUE_S1.beta)]
        np.testing.assert_allclose(report.true_values, expect_true, rtol=1e-12)
        assert 0.0 <= report.censoring_pct <= 100.0
        assert report.reps_used + report.n_failures == 5
        # ddof=0 keeps the decomposition exact
        np.testing.assert_allclose(
            report.mse, report.bias**2 + report.sd**2, rtol=1e-10, atol=1e-12
        )
        np.testing.assert_allclose(
            report.bias, report.mean - report.true_values, rtol=1e-14
        )


class TestCalibration:
    def test_target_hits_realized_window(self):
        config = config_for(n=10_000, seed=0)
        window = calibrate_censor_window(53.0, config)
        assert window[0] == 0.01
        realized = draw_sample(config_for(n=100_000, seed=123, window=window), 0)
        pct = 100.0 * float(np.mean(realized.delta == 0.0))
        assert 52.0 <= pct <= 54.0

    def test_unachievable_below_cure_floor(self):
        with pytest.raises(UnachievableTargetError):
            calibrate_censor_window(20.0, config_for(seed=0))

    def test_target_domain(self):
        with pytest.raises(DomainError):
            calibrate_censor_window(0.0, config_for())
        with pytest.raises(DomainError):
            calibrate_censor_window(100.0, config_for())

    def test_longer_window_censors_less(self):
        shares = []
        for b in (1.0, 5.0):
            data = draw_sample(config_for(n=20_000, seed=6, window=(0.01, b)), 0)
            shares.append(float(np.mean(data.delta == 0.0)))
        assert shares[0] > shares[1]


class TestPresets:
    def test_scenario_one(self):
        config = preset_config("table1-s1", n=200, reps=10, seed=4)
        tp = config.true_params
        assert (tp.bp.mu, tp.bp.phi, tp.alpha) == (0.5, 1.0, 2.0)
        np.testing.assert_array_equal(tp.beta, [0.5, -1.0])
        a, b = config.censor_window
        assert a == 0.01 and b > a

    def test_scenario_two(self):
        config = preset_config("table1-s2", n=200, reps=10, seed=4)
        tp = config.true_params
        assert (tp.bp.mu, tp.bp.phi, tp.alpha) == (1.0, 10.0, 2.0)

    def test_unknown_preset(self):
        with pytest.raises(DomainError):
            preset_config("table1-s9", n=200, reps=10, seed=4)
