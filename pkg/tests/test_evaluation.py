import numpy as np
import pytest

from lookahead import (
    Dataset,
    FeatureMask,
    FrontierError,
    Oracle,
    PredictiveModel,
    SplitSpec,
    TrainConfig,
    evaluate,
    fit_oracle,
    fit_predictive,
    frontier_sweep,
    generate_synthetic,
    split,
    synthetic_oracle,
)
from lookahead.evaluation import FRONTIER_HEADER, frontier_to_csv, frontier_to_json
from helpers import lstsq_fit

MASK1 = FeatureMask.all_mutable(1)


class TestEvaluate:
    def test_zero_step_noiseless_magnitude(self):
        data = generate_synthetic(24, seed=0, noise_sd=0.0)
        f = PredictiveModel("linear", theta=[1.0], bias=0.0)
        rep = evaluate(f, synthetic_oracle(), data, eta=0.0, mask=MASK1)
        assert rep.improvement_magnitude == pytest.approx(0.0, abs=1e-12)

    def test_oracle_model_zero_rmse(self):
        data = generate_synthetic(24, seed=1, noise_sd=0.0)
        f = synthetic_oracle().model
        rep = evaluate(f, synthetic_oracle(), data, eta=0.0, mask=MASK1)
        assert rep.rmse == pytest.approx(0.0, abs=1e-12)

    def test_rate_exact_count(self):
        data = Dataset(np.array([[0.0], [1.0], [2.0], [3.0]]), np.array([0.0, 0.0, 9.9, 9.9]))
        oracle = Oracle(PredictiveModel("linear", theta=[0.0], bias=1.0))
        f = PredictiveModel("linear", theta=[0.0], bias=0.0)
        rep = evaluate(f, oracle, data, eta=0.0, mask=MASK1)
        assert rep.improvement_rate == 0.5
        assert rep.n_test == 4

    def test_ties_do_not_improve(self):
        data = Dataset(np.array([[0.0], [1.0]]), np.array([1.0, 1.0]))
        oracle = Oracle(PredictiveModel("linear", theta=[0.0], bias=1.0))
        f = PredictiveModel("linear", theta=[0.0], bias=0.0)
        rep = evaluate(f, oracle, data, eta=0.0, mask=MASK1)
        assert rep.improvement_rate == 0.0

    def test_oracle_baseline_flag(self):
        data = generate_synthetic(24, seed=2)
        f = fit_predictive(data, 0.1, 300, kind="quadratic")
        noisy = evaluate(f, synthetic_oracle(), data, eta=0.0, mask=MASK1)
        clean = evaluate(f, synthetic_oracle(), data, eta=0.0, mask=MASK1,
                         improvement_vs_oracle=True)
        assert clean.improvement_magnitude == pytest.approx(0.0, abs=1e-12)
        assert noisy.rmse == clean.rmse

    def test_pure_function(self):
        data = generate_synthetic(24, seed=3)
        f = fit_predictive(data, 0.1, 300, kind="quadratic")
        a = evaluate(f, synthetic_oracle(), data, eta=1.25, mask=MASK1)
        b = evaluate(f, synthetic_oracle(), data, eta=1.25, mask=MASK1)
        assert a == b


class TestOracle:
    def test_synthetic_vertex_value(self):
        assert synthetic_oracle().predict(np.array([0.3125])) == pytest.approx(0.178125)

    def test_recovers_known_quadratic(self):
        rng = np.random.default_rng(4)
        x = rng.normal(0, 1, (200, 1))
        y = -0.8 * x[:, 0] ** 2 + 0.5 * x[:, 0] + 0.1
        data = Dataset(x, y)
        orc = fit_oracle(data)
        beta = lstsq_fit(x, y, quadratic=True)
        assert orc.model.theta[0] == pytest.approx(beta[0], abs=1e-2)
        assert orc.model.theta_sq[0] == pytest.approx(beta[1], abs=1e-2)
        assert orc.model.bias == pytest.approx(beta[2], abs=1e-2)

    def test_bit_identical_refits(self):
        data = generate_synthetic(40, seed=5)
        a = fit_oracle(data)
        b = fit_oracle(data)
        assert a.model.params().tobytes() == b.model.params().tobytes()

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            fit_oracle(generate_synthetic(10, seed=0), kind="spline")

    def test_geometric_improvement_property(self):
        rng = np.random.default_rng(6)
        orc = synthetic_oracle()
        for _ in range(200):
            x = rng.uniform(-3, 3)
            closer = 0.3125 + (x - 0.3125) * rng.uniform(0.0, 0.999)
            assert orc.predict(np.array([closer])) > orc.predict(np.array([x]))


class TestFrontier:
    def _config(self, seed=0):
        return TrainConfig(eta=1.25, rounds=2, n_bootstrap=4, epochs_init=200,
                           epochs_per_round=30, seed=seed)

    def test_single_zero_grid_matches_baseline(self):
        data = generate_synthetic(30, seed=7)
        cfg = self._config(seed=7)
        pts = frontier_sweep(data, cfg, [0.0], synthetic_oracle())
        assert len(pts) == 1 and pts[0].lam == 0.0
        train, test = split(data, SplitSpec(0.75, 7))
        plain = fit_predictive(train, cfg.learning_rate,
                               cfg.epochs_init + cfg.rounds * cfg.epochs_per_round,
                               kind="quadratic")
        rep = evaluate(plain, synthetic_oracle(), test, cfg.eta, cfg.mask)
        assert pts[0].report.rmse == pytest.approx(rep.rmse, abs=1e-12)

    def test_grid_sorted_ascending(self):
        data = generate_synthetic(30, seed=8)
        pts = frontier_sweep(data, self._config(seed=8), [4.0, 0.0, 2.0, 8.0, 1.0],
                             synthetic_oracle())
        assert [p.lam for p in pts] == [0.0, 1.0, 2.0, 4.0, 8.0]

    def test_error_tags_lambda(self):
        data = generate_synthetic(30, seed=9)
        bad = TrainConfig(eta=1.25, learning_rate=1e7, epochs_init=50, rounds=1, seed=9)
        with pytest.raises(FrontierError) as err:
            frontier_sweep(data, bad, [0.5], synthetic_oracle())
        assert err.value.lam == 0.5

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            frontier_sweep(generate_synthetic(30, seed=0), self._config(), [],
                           synthetic_oracle())

    def test_csv_and_json_export(self):
        data = generate_synthetic(30, seed=10)
        pts = frontier_sweep(data, self._config(seed=10), [0.0, 2.0], synthetic_oracle())
        csv_text = frontier_to_csv(pts)
        assert csv_text.splitlines()[0] == FRONTIER_HEADER
        assert len(csv_text.splitlines()) == 3
        doc = frontier_to_json(pts, failures=[{"lambda": 9.0, "error": "boom"}])
        assert '"failures"' in doc and '"points"' in doc
