import math

import numpy as np
import pytest

from src.models.config import Algorithm, SigmoidKind, TrainConfig
from src.models.dataset import Dataset, TargetScaler
from src.models.errors import ConfigurationError, DimensionError
from src.models.model import TrainedModel
from src.models.regression import SfhBound
from src.services import regression_core as core
from src.services.trainer_service import TrainerService

from .conftest import random_dataset


def weights_excluding_bias(model: TrainedModel) -> float:
    return float(np.linalg.norm(model.weights[1:]))


class TestTrainLinear:
    def test_recovers_exact_line(self, linear_1d):
        model = TrainerService.train_linear(linear_1d, TrainConfig(iterations=200))
        np.testing.assert_allclose(model.weights, [0.0, 2.0], atol=1e-4)

    def test_row_sum_bound_recovers_line(self, linear_1d):
        model = TrainerService.train_linear(linear_1d, TrainConfig(iterations=300, bound=SfhBound.ROW_SUM))
        np.testing.assert_allclose(model.weights, [0.0, 2.0], atol=1e-4)

    def test_zero_targets_keep_zero_weights(self, rng):
        ds = random_dataset(rng, 15, 3).with_targets(np.zeros(15))
        model = TrainerService.train_linear(ds, TrainConfig(iterations=25))
        assert np.all(model.weights == 0.0)

    @pytest.mark.parametrize("seed", range(20))
    def test_trace_non_increasing(self, seed):
        rng = np.random.default_rng(seed)
        ds = random_dataset(rng, 50, 4, y_lo=-3.0, y_hi=3.0)
        trace = TrainerService.train_linear(ds, TrainConfig(iterations=40)).trace
        assert len(trace) == 40
        assert np.all(np.isfinite(trace))
        assert np.all(np.diff(trace) <= 1e-9 * trace[0])

    def test_normalized_targets_predict_training_rows(self):
        raw = np.linspace(0.0, 10.0, 30)[:, None]
        y = 3.0 * raw[:, 0] + 7.0
        ds = core.build_dataset(raw, y)
        model = TrainerService.train_linear(ds, TrainConfig(iterations=300), normalize_targets=True)
        assert model.scaler is not None
        np.testing.assert_allclose(TrainerService.predict(model, raw), y, atol=1e-3)

    def test_deterministic(self, rng):
        ds = random_dataset(rng, 30, 3)
        cfg = TrainConfig(iterations=10)
        first = TrainerService.train_linear(ds, cfg)
        second = TrainerService.train_linear(ds, cfg)
        assert np.array_equal(first.weights, second.weights)
        assert first.trace == second.trace

    def test_rejects_other_algorithm(self, linear_1d):
        with pytest.raises(ConfigurationError):
            TrainerService.train_linear(linear_1d, TrainConfig(algorithm=Algorithm.LFFR))


class TestTrainRidge:
    @pytest.fixture
    def unit_data(self, rng):
        # non-negative features keep the signed ridge diagonal a valid bound
        return random_dataset(rng, 40, 3, lo=0.0, hi=1.0)

    def test_zero_lambda_matches_least_squares(self, unit_data):
        exact, *_ = np.linalg.lstsq(unit_data.x, unit_data.y, rcond=None)
        ridge = TrainerService.train_ridge(unit_data, TrainConfig(algorithm=Algorithm.RIDGE, iterations=20000))
        linear = TrainerService.train_linear(unit_data, TrainConfig(iterations=20000))
        np.testing.assert_allclose(ridge.weights, exact, atol=1e-3)
        np.testing.assert_allclose(ridge.weights, linear.weights, atol=1e-3)

    def test_huge_lambda_shrinks_features(self, unit_data):
        model = TrainerService.train_ridge(unit_data, TrainConfig(algorithm=Algorithm.RIDGE, lam=1e6, iterations=200))
        assert np.all(np.abs(model.weights[1:]) < 0.01)
        # the bias is not penalised and still tracks the target mean
        assert model.weights[0] == pytest.approx(unit_data.y.mean(), abs=0.05)

    def test_weight_norm_shrinks_with_lambda(self, unit_data):
        norms = [
            weights_excluding_bias(
                TrainerService.train_ridge(unit_data, TrainConfig(algorithm=Algorithm.RIDGE, lam=lam, iterations=20000))
            )
            for lam in (0.0, 1.0, 10.0, 100.0)
        ]
        assert all(a >= b - 1e-9 for a, b in zip(norms, norms[1:]))

    def test_trace_is_ridge_cost(self, unit_data):
        cfg = TrainConfig(algorithm=Algorithm.RIDGE, lam=2.0, iterations=5)
        model = TrainerService.train_ridge(unit_data, cfg)
        assert model.trace[-1] == pytest.approx(core.l1_cost(unit_data, model.weights, 2.0, penalize_bias=False))


class TestTrainLffr:
    def test_constant_targets(self, rng):
        ds = random_dataset(rng, 20, 2).with_targets(np.full(20, 4.0))
        model = TrainerService.train_lffr(ds, TrainConfig(algorithm=Algorithm.LFFR, iterations=30))
        assert model.scaler.y_min == model.scaler.y_max == 4.0
        assert model.trace[-1] < model.trace[0]
        assert np.all(np.diff(model.trace) <= 1e-12)

    @pytest.mark.parametrize("kind", list(SigmoidKind))
    def test_trace_decreases_for_both_sigmoids(self, rng, kind):
        ds = random_dataset(rng, 60, 3, y_lo=0.0, y_hi=5.0)
        model = TrainerService.train_lffr(ds, TrainConfig(algorithm=Algorithm.LFFR, iterations=30, sigmoid_kind=kind))
        assert model.trace[-1] < model.trace[0]

    def test_sigmoid_kinds_give_different_traces(self, rng):
        ds = random_dataset(rng, 60, 3, y_lo=0.0, y_hi=5.0)
        exact = TrainerService.train_lffr(ds, TrainConfig(algorithm=Algorithm.LFFR, iterations=20))
        poly = TrainerService.train_lffr(
            ds, TrainConfig(algorithm=Algorithm.LFFR, iterations=20, sigmoid_kind=SigmoidKind.POLY3)
        )
        assert exact.trace != poly.trace
        assert np.max(np.abs(exact.weights - poly.weights)) < 1.0

    def test_rows_sum_bound_descends(self, rng):
        ds = random_dataset(rng, 60, 3, y_lo=0.0, y_hi=5.0)
        model = TrainerService.train_lffr(ds, TrainConfig(algorithm=Algorithm.LFFR, iterations=20, bound=SfhBound.ROW_SUM))
        assert np.all(np.diff(model.trace) <= 1e-12)


class TestTrainImprovedLffr:
    @pytest.mark.parametrize("seed", range(5))
    def test_is_linear_regression_on_transformed_targets(self, seed):
        rng = np.random.default_rng(seed)
        ds = random_dataset(rng, 30, 4, y_lo=-2.0, y_hi=9.0)
        cfg = TrainConfig(algorithm=Algorithm.IMPROVED_LFFR, iterations=25, gamma=0.5)
        improved = TrainerService.train_improved_lffr(ds, cfg)
        scaler = core.fit_target_scaler(ds.y, gamma=0.5)
        linear = TrainerService.train_linear(
            ds.with_targets(core.logit_scale_target(scaler, ds.y)), TrainConfig(iterations=25)
        )
        np.testing.assert_allclose(improved.weights, linear.weights, rtol=0, atol=1e-12)

    def test_sigmoid_targets_reduce_to_linear_regression(self, rng):
        ds = random_dataset(rng, 40, 3, y_lo=-4.0, y_hi=4.0)
        squashed = ds.with_targets(core.logit(core.sigmoid(ds.y)))
        np.testing.assert_allclose(squashed.y, ds.y, rtol=0, atol=1e-9)
        cfg = TrainConfig(iterations=20)
        np.testing.assert_allclose(
            TrainerService.train_linear(squashed, cfg).weights,
            TrainerService.train_linear(ds, cfg).weights,
            rtol=0,
            atol=1e-8,
        )

    def test_transformed_targets_stay_in_window(self, rng):
        ds = random_dataset(rng, 25, 2, y_lo=0.0, y_hi=1.0)
        work, _ = TrainerService.improved_lffr_targets(ds, TrainConfig(algorithm=Algorithm.IMPROVED_LFFR))
        assert work.y.min() >= math.log(1 / 3) - 1e-12
        assert work.y.max() <= math.log(3) + 1e-12

    def test_every_sample_gets_a_target(self):
        ds = Dataset(x=[[1.0, -1.0], [1.0, 0.0], [1.0, 1.0]], y=[1.0, 2.0, 3.0])
        work, _ = TrainerService.improved_lffr_targets(ds, TrainConfig(algorithm=Algorithm.IMPROVED_LFFR))
        assert work.y.shape == (3,)
        assert len(set(work.y.tolist())) == 3


class TestPredict:
    def test_zero_weight_lffr_predicts_midpoint(self):
        model = TrainedModel(
            weights=np.zeros(2),
            algorithm=Algorithm.LFFR,
            config=TrainConfig(algorithm=Algorithm.LFFR),
            scaler=TargetScaler(0.0, 10.0),
        )
        assert TrainerService.predict(model, [0.3]) == pytest.approx(5.0, abs=1e-8)

    def test_improved_lffr_extrapolates(self):
        model = TrainedModel(
            weights=np.array([3.0, 0.0]),
            algorithm=Algorithm.IMPROVED_LFFR,
            config=TrainConfig(algorithm=Algorithm.IMPROVED_LFFR),
            scaler=TargetScaler(0.0, 1.0, gamma=0.5),
        )
        prediction = TrainerService.predict(model, [0.0])
        assert prediction == pytest.approx((core.sigmoid(3.0) - 0.25) / 0.5, abs=1e-7)
        assert prediction > 1.0

    def test_matrix_input_returns_array(self, linear_1d):
        model = TrainerService.train_linear(linear_1d, TrainConfig(iterations=50))
        out = TrainerService.predict(model, np.array([[0.5], [-0.5]]))
        assert out.shape == (2,)

    def test_feature_count_checked(self, linear_1d):
        model = TrainerService.train_linear(linear_1d, TrainConfig(iterations=5))
        with pytest.raises(DimensionError):
            TrainerService.predict(model, [1.0, 2.0])

    def test_dispatch(self, linear_1d):
        for algorithm in Algorithm:
            model = TrainerService.train(linear_1d, TrainConfig(algorithm=algorithm, iterations=3, lam=1.0))
            assert model.algorithm == algorithm


class TestModelPersistence:
    @pytest.mark.parametrize("algorithm", list(Algorithm))
    def test_round_trip_preserves_predictions(self, tmp_path, rng, algorithm):
        raw = rng.uniform(-4.0, 4.0, size=(40, 3))
        y = rng.uniform(1.0, 6.0, size=40)
        ds = core.build_dataset(raw, y)
        model = TrainerService.train(ds, TrainConfig(algorithm=algorithm, iterations=10, lam=0.5))
        model.save(tmp_path / "model.json")
        loaded = TrainedModel.load(tmp_path / "model.json")
        assert loaded.algorithm == algorithm
        assert loaded.trace == model.trace
        np.testing.assert_allclose(TrainerService.predict(loaded, raw), TrainerService.predict(model, raw),
                                   rtol=0, atol=1e-12)

    def test_document_fields(self, linear_1d):
        doc = TrainerService.train_linear(linear_1d, TrainConfig(iterations=3)).to_document()
        assert {"algorithm", "weights", "y_min", "y_max", "epsilon", "feature_scaler", "iterations"} <= set(doc)
