import json

import numpy as np
import pytest

from lookahead import (
    Dataset,
    IntervalModel,
    PredictiveModel,
    effective_sample_size,
    fit_pinball,
    fit_quantile,
    fit_residual_bootstrap,
    fit_vanilla_bootstrap,
    pinball_loss,
    two_sided_z,
)
from helpers import central_diff, normal_quantile_bisect, pinball_scan_minimizer


def noisy_line(m=40, sd=0.3, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(0, 1, (m, 1))
    return Dataset(x, 1.2 * x[:, 0] - 0.4 + rng.normal(0, sd, m))


class TestEffectiveSampleSize:
    def test_equal_weights_cap(self):
        assert effective_sample_size(np.ones(17)) == 17.0

    def test_two_weights(self):
        assert effective_sample_size(np.array([1.0, 3.0])) == pytest.approx(2.0)

    def test_bounds_over_random_draws(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            w = rng.uniform(0.01, 10, size=int(rng.integers(2, 50)))
            ess = effective_sample_size(w)
            assert 0.0 < ess <= w.size

    def test_kish_formula(self):
        w = np.array([1.0, 2.0, 3.0])
        assert effective_sample_size(w, formula="kish") == pytest.approx(36.0 / 14.0)
        assert effective_sample_size(np.full(9, 4.2), formula="kish") == pytest.approx(9.0)

    def test_unknown_formula(self):
        with pytest.raises(ValueError):
            effective_sample_size(np.ones(3), formula="magic")

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            effective_sample_size(np.array([]))


class TestTwoSidedZ:
    def test_tau_095(self):
        assert two_sided_z(0.95) == pytest.approx(1.95996, abs=1e-5)
        assert two_sided_z(0.95) == pytest.approx(normal_quantile_bisect(0.975), abs=1e-9)

    def test_oracle_agreement_over_levels(self):
        for tau in (0.5, 0.8, 0.9, 0.99):
            assert two_sided_z(tau) == pytest.approx(normal_quantile_bisect((1 + tau) / 2), abs=1e-9)
            assert two_sided_z(tau) > 0


class TestBootstrapIntervals:
    def test_identical_submodels_collapse(self):
        f0 = PredictiveModel("linear", theta=[2.0], bias=1.0)
        g = IntervalModel("vanilla_bootstrap", tau=0.95, submodels=[f0, f0, f0], z=1.96)
        lo, up = g.predict_interval(np.array([0.4]))
        assert lo == pytest.approx(f0.predict(np.array([0.4])))
        assert up == pytest.approx(lo)

    def test_noiseless_realizable_collapses(self):
        x = np.linspace(-1, 1, 30).reshape(-1, 1)
        data = Dataset(x, 0.5 * x[:, 0] + 0.2)
        g = fit_vanilla_bootstrap(data, np.ones(30), k=5, tau=0.95, lr=0.1, epochs=4000, seed=3)
        lo, up = g.interval_batch(x)
        assert np.max(up - lo) < 1e-3

    def test_ordering_random_points(self):
        data = noisy_line()
        g = fit_vanilla_bootstrap(data, np.ones(data.m), k=6, tau=0.9, lr=0.1, epochs=300, seed=1)
        X = np.random.default_rng(0).normal(0, 3, (1000, 1))
        lo, up = g.interval_batch(X)
        assert np.all(lo <= up)

    def test_residual_zero_residuals_zero_width(self):
        x = np.linspace(-1, 1, 25).reshape(-1, 1)
        data = Dataset(x, -0.3 * x[:, 0] + 0.9)
        g = fit_residual_bootstrap(data, np.ones(25), k=5, tau=0.95, lr=0.1, epochs=5000, seed=2)
        lo, up = g.interval_batch(x)
        assert np.max(up - lo) < 1e-3

    def test_shared_combiner(self):
        subs = [PredictiveModel("linear", theta=[t], bias=0.1 * t) for t in (0.5, 1.0, 2.0)]
        gv = IntervalModel("vanilla_bootstrap", tau=0.9, submodels=subs, z=1.6449)
        gr = IntervalModel("residual_bootstrap", tau=0.9, submodels=subs, z=1.6449)
        X = np.random.default_rng(4).normal(size=(50, 1))
        assert np.array_equal(gv.interval_batch(X)[0], gr.interval_batch(X)[0])
        assert np.array_equal(gv.interval_batch(X)[1], gr.interval_batch(X)[1])

    def test_residual_coverage_of_regression_truth(self):
        # Monte-Carlo: fitted-curve coverage at held-out points stays near tau
        covs = []
        for seed in range(5):
            rng = np.random.default_rng(2000 + seed)
            X = rng.normal(0, 1, (300, 1))
            truth = -0.7 * X[:, 0] + 0.2
            data = Dataset(X, truth + rng.normal(0, 0.3, 300))
            g = fit_residual_bootstrap(data, np.ones(300), k=10, tau=0.9, lr=0.1,
                                       epochs=400, seed=seed)
            Xt = rng.normal(0, 1, (200, 1))
            lo, up = g.interval_batch(Xt)
            tt = -0.7 * Xt[:, 0] + 0.2
            covs.append(np.mean((tt >= lo) & (tt <= up)))
        assert np.mean(covs) >= 0.9 - 0.1

    def test_deterministic_given_seed(self):
        data = noisy_line(seed=5)
        w = np.linspace(0.5, 2.0, data.m)
        a = fit_vanilla_bootstrap(data, w, k=4, tau=0.9, lr=0.1, epochs=200, seed=9)
        b = fit_vanilla_bootstrap(data, w, k=4, tau=0.9, lr=0.1, epochs=200, seed=9)
        assert json.dumps(a.to_json_dict()) == json.dumps(b.to_json_dict())

    def test_weight_validation(self):
        data = noisy_line()
        with pytest.raises(ValueError):
            fit_vanilla_bootstrap(data, np.ones(3), k=3, tau=0.9, lr=0.1, epochs=10, seed=0)
        with pytest.raises(ValueError):
            fit_vanilla_bootstrap(data, -np.ones(data.m), k=3, tau=0.9, lr=0.1, epochs=10, seed=0)
        with pytest.raises(ValueError):
            fit_vanilla_bootstrap(data, np.ones(data.m), k=1, tau=0.9, lr=0.1, epochs=10, seed=0)


class TestQuantile:
    def test_constant_model_median(self):
        rng = np.random.default_rng(8)
        y = rng.normal(1.0, 2.0, 31)
        data = Dataset(np.zeros((31, 1)), y)
        f = fit_pinball(data, None, level=0.5, lr=0.02, epochs=6000)
        oracle = pinball_scan_minimizer(y, 0.5)
        gap = np.max(np.diff(np.sort(y)))
        assert abs(f.bias - oracle) <= gap

    def test_pinball_identity_at_half(self):
        rng = np.random.default_rng(9)
        y, yh = rng.normal(size=50), rng.normal(size=50)
        assert pinball_loss(y, yh, 0.5) == pytest.approx(0.5 * np.mean(np.abs(y - yh)), abs=1e-12)

    def test_constant_model_level_09(self):
        y = np.arange(1.0, 101.0)
        data = Dataset(np.zeros((100, 1)), y)
        f = fit_pinball(data, None, level=0.9, lr=0.5, epochs=5000)
        assert abs(f.bias - np.percentile(y, 90)) <= 1.0

    def test_two_sided_levels(self):
        rng = np.random.default_rng(10)
        y = rng.normal(0, 1, 400)
        data = Dataset(np.zeros((400, 1)), y)
        g = fit_quantile(data, np.ones(400), tau=0.8, lr=0.02, epochs=8000)
        lo, up = g.predict_interval(np.zeros(1))
        assert lo == pytest.approx(pinball_scan_minimizer(y, 0.1), abs=0.15)
        assert up == pytest.approx(pinball_scan_minimizer(y, 0.9), abs=0.15)

    def test_crossed_models_swapped(self):
        g = IntervalModel("quantile", tau=0.8,
                          lower_model=PredictiveModel("linear", theta=[1.0], bias=0.0),
                          upper_model=PredictiveModel("linear", theta=[-1.0], bias=0.0))
        lo, up = g.predict_interval(np.array([2.0]))
        assert (lo, up) == (-2.0, 2.0)
        lo, up = g.predict_interval(np.array([-2.0]))
        assert (lo, up) == (-2.0, 2.0)

    def test_constant_gradient_lower_model(self):
        g = IntervalModel("quantile", tau=0.9,
                          lower_model=PredictiveModel("linear", theta=[3.0], bias=-1.0),
                          upper_model=PredictiveModel("linear", theta=[3.0], bias=1.0))
        for x in (-2.0, 0.0, 5.0):
            assert g.dlower_dx(np.array([x])) == pytest.approx([3.0])


class TestDlowerDx:
    def test_matches_finite_differences_bootstrap(self):
        data = noisy_line(seed=6)
        g = fit_vanilla_bootstrap(data, np.ones(data.m), k=6, tau=0.9, lr=0.1,
                                  epochs=300, seed=4, kind="quadratic")
        rng = np.random.default_rng(12)
        for _ in range(100):
            x = rng.normal(0, 2, size=1)
            num = central_diff(lambda v: g.interval_batch(v[None, :])[0][0], x, h=1e-6)
            assert np.max(np.abs(g.dlower_dx(x) - num)) < 1e-5

    def test_matches_finite_differences_quantile(self):
        data = noisy_line(seed=7)
        g = fit_quantile(data, np.ones(data.m), tau=0.8, lr=0.05, epochs=2000, kind="quadratic")
        rng = np.random.default_rng(13)
        for _ in range(100):
            x = rng.normal(0, 2, size=1)
            num = central_diff(lambda v: g.interval_batch(v[None, :])[0][0], x, h=1e-6)
            assert np.max(np.abs(g.dlower_dx(x) - num)) < 1e-5

    def test_zero_spread_gradient_defined(self):
        f0 = PredictiveModel("quadratic", theta=[1.0], bias=0.0, theta_sq=[0.5])
        g = IntervalModel("vanilla_bootstrap", tau=0.9, submodels=[f0, f0], z=1.6449)
        grad = g.dlower_dx(np.array([0.7]))
        assert np.all(np.isfinite(grad))
        assert grad == pytest.approx(f0.grad_x(np.array([0.7])))

    def test_masked_coordinates_vanish_in_chain(self):
        # composing with the decision Jacobian kills immutable coordinates
        from lookahead import FeatureMask, ddecided_dparams

        f = PredictiveModel("linear", theta=[1.0, 2.0], bias=0.0)
        mask = FeatureMask([True, False])
        J = ddecided_dparams(f, np.array([0.5, 0.5]), eta=1.0, mask=mask)
        gl = np.array([3.0, 7.0])
        assert (gl @ J) == pytest.approx(np.array([3.0, 0.0, 0.0]))


class TestSerialization:
    def test_bootstrap_round_trip(self):
        data = noisy_line(seed=14)
        g = fit_vanilla_bootstrap(data, np.ones(data.m), k=3, tau=0.9, lr=0.1, epochs=100, seed=0)
        back = IntervalModel.from_json_dict(g.to_json_dict())
        X = np.random.default_rng(1).normal(size=(20, 1))
        assert np.array_equal(back.interval_batch(X)[0], g.interval_batch(X)[0])

    def test_quantile_round_trip(self):
        data = noisy_line(seed=15)
        g = fit_quantile(data, np.ones(data.m), tau=0.8, lr=0.05, epochs=500)
        back = IntervalModel.from_json_dict(g.to_json_dict())
        x = np.array([0.3])
        assert back.predict_interval(x) == g.predict_interval(x)
