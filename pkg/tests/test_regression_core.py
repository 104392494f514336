import logging
import math

import numpy as np
import pytest

from src.models.dataset import Dataset, TargetScaler
from src.models.errors import ConfigurationError, DimensionError, DomainError
from src.models.regression import SfhDiagonal, SfhFlavor
from src.services import regression_core as core

from .conftest import random_dataset

EPS = 1e-8


def central_difference(fn, w, h=1e-5):
    grad = np.zeros_like(w)
    for k in range(w.size):
        step = np.zeros_like(w)
        step[k] = h
        grad[k] = (fn(w + step) - fn(w - step)) / (2 * h)
    return grad


class TestFeatures:
    def test_augment_bias_single_cell(self):
        assert core.augment_bias([[2.0]]).tolist() == [[1.0, 2.0]]

    def test_augment_bias_keeps_ones_on_zero_matrix(self):
        assert core.augment_bias(np.zeros((2, 2))).tolist() == [[1, 0, 0], [1, 0, 0]]

    def test_augment_bias_random(self, rng):
        out = core.augment_bias(rng.normal(size=(3, 2)))
        assert out.shape == (3, 3)
        assert out[:, 0].sum() == 3

    def test_augment_bias_rejects_empty(self):
        with pytest.raises(DimensionError):
            core.augment_bias(np.empty((0, 2)))

    @pytest.mark.parametrize(
        "column, lo, hi, expected",
        [
            ([0.0, 5.0, 10.0], 0.0, 1.0, [0.0, 0.5, 1.0]),
            ([3.0, 3.0, 3.0], -1.0, 1.0, [0.0, 0.0, 0.0]),
            ([-2.0, 0.0, 6.0], -1.0, 1.0, [-1.0, -0.5, 1.0]),
        ],
    )
    def test_minmax_scale(self, column, lo, hi, expected):
        scaled, _ = core.minmax_scale_features(np.array(column)[:, None], lo, hi)
        np.testing.assert_allclose(scaled[:, 0], expected, atol=1e-15)

    def test_constant_column_warns(self, caplog):
        with caplog.at_level(logging.WARNING):
            core.fit_feature_scaler(np.array([[1.0, 3.0], [2.0, 3.0]]))
        assert "Constant feature columns [1]" in caplog.text

    def test_scaler_reused_on_unseen_rows(self):
        _, scaler = core.minmax_scale_features(np.array([[0.0], [10.0]]), -1.0, 1.0)
        np.testing.assert_allclose(scaler.transform(np.array([[20.0]])), [[3.0]])

    def test_build_dataset_has_bias_and_range(self, rng):
        ds = core.build_dataset(rng.normal(size=(10, 3)), rng.normal(size=10))
        assert ds.d == 3
        assert np.all(ds.x[:, 0] == 1.0)
        assert ds.x[:, 1:].min() == -1.0 and ds.x[:, 1:].max() == 1.0


class TestTargetTransforms:
    def test_fit_target_scaler(self):
        s = core.fit_target_scaler([1.0, 2.0, 3.0])
        assert (s.y_min, s.y_max, s.gamma) == (1.0, 3.0, None)

    def test_fit_target_scaler_single_element(self):
        s = core.fit_target_scaler([7.0], gamma=0.5)
        assert (s.y_min, s.y_max, s.gamma) == (7.0, 7.0, 0.5)

    def test_fit_target_scaler_matches_extrema(self, rng):
        y = rng.uniform(-10, 10, size=100)
        s = core.fit_target_scaler(y)
        assert s.y_min == y.min() and s.y_max == y.max()

    def test_fit_target_scaler_rejects_empty(self):
        with pytest.raises(DimensionError):
            core.fit_target_scaler([])

    def test_scale_unit(self):
        assert core.scale_target_unit(TargetScaler(0.0, 1.0), 1.0) == pytest.approx(1 / (1 + EPS), abs=1e-15)
        assert core.scale_target_unit(TargetScaler(0.0, 1.0), 0.0) == 0.0
        assert core.scale_target_unit(TargetScaler(5.0, 15.0), 10.0) == pytest.approx(5 / (10 + EPS), abs=1e-15)

    def test_unscale_unit(self):
        assert core.unscale_target_unit(TargetScaler(0.0, 1.0), 0.0) == 0.0
        assert core.unscale_target_unit(TargetScaler(5.0, 15.0), 1.0) == pytest.approx(15 + EPS, abs=1e-12)

    def test_unit_round_trip(self, rng):
        y = rng.uniform(-5, 5, size=50)
        s = core.fit_target_scaler(y)
        np.testing.assert_allclose(core.unscale_target_unit(s, core.scale_target_unit(s, y)), y, atol=1e-9)

    def test_logit_scale(self):
        s = TargetScaler(0.0, 1.0, gamma=0.5)
        assert core.logit_scale_target(s, 0.5) == pytest.approx(0.0, abs=1e-7)
        assert core.logit_scale_target(s, 0.0) == pytest.approx(math.log(1 / 3), abs=1e-12)
        assert core.logit_scale_target(s, 1.0) == pytest.approx(math.log(3), abs=1e-6)

    def test_logit_unscale(self):
        s = TargetScaler(0.0, 1.0, gamma=0.5)
        assert core.logit_unscale_target(s, 0.5) == pytest.approx(0.5, abs=1e-7)
        # probabilities beyond the window extrapolate past y_max
        assert core.logit_unscale_target(s, 0.9) == pytest.approx(1.3, abs=1e-7)

    def test_logit_round_trip(self, rng):
        y = rng.uniform(2.0, 9.0, size=50)
        s = core.fit_target_scaler(y, gamma=0.5)
        back = core.logit_unscale_target(s, core.sigmoid(core.logit_scale_target(s, y)))
        np.testing.assert_allclose(back, y, atol=1e-9)

    def test_logit_transforms_need_gamma(self):
        with pytest.raises(ConfigurationError):
            core.logit_scale_target(TargetScaler(0.0, 1.0), 0.5)
        with pytest.raises(ConfigurationError):
            core.logit_unscale_target(TargetScaler(0.0, 1.0), 0.5)


class TestLinkFunctions:
    def test_sigmoid(self):
        assert core.sigmoid(0.0) == 0.5
        assert core.sigmoid(40.0) == pytest.approx(1.0, abs=1e-15)
        assert core.sigmoid(math.log(3)) == pytest.approx(0.75, abs=1e-15)

    def test_logit(self):
        assert core.logit(0.5) == 0.0
        assert core.logit(0.75) == pytest.approx(math.log(3), abs=1e-15)

    def test_sigmoid_inverts_logit(self, rng):
        p = rng.uniform(1e-6, 1.0 - 1e-6, size=1000)
        np.testing.assert_allclose(core.sigmoid(core.logit(p)), p, rtol=0, atol=1e-12)

    def test_sigmoid_stable_at_extremes(self):
        z = np.linspace(-700.0, 700.0, 14001)
        s = core.sigmoid(z)
        assert np.all(np.isfinite(s))
        assert np.all(s > 0.0) and np.all(s <= 1.0)
        inner = np.abs(z) <= 30.0
        assert np.all(s[inner] < 1.0)
        assert np.all(np.diff(s) >= 0.0)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
    def test_logit_domain(self, p):
        with pytest.raises(DomainError):
            core.logit(p)

    def test_poly_sigmoid3(self):
        assert core.poly_sigmoid3(0.0) == 0.5
        assert core.poly_sigmoid3(5.0) == pytest.approx(0.933075, abs=1e-12)

    def test_poly_sigmoid3_sup_error(self):
        z = np.linspace(-5.0, 5.0, 10001)
        error = np.abs(core.poly_sigmoid3(z) - core.sigmoid(z))
        # the worst case sits at the interval ends, about 0.0602
        assert error.max() < 0.061
        assert error[np.abs(z) <= 4.5].max() < 0.05


class TestHessianWeight:
    def test_stationary_value(self):
        assert core.lffr_hessian_weight(0.5, 0.5) == pytest.approx(0.125, abs=1e-9)

    def test_grid_bound(self):
        value, sigma, y = core.lffr_hessian_weight_bound(1e-3)
        assert 0.154 <= value <= 0.155
        # the weight is symmetric under (sigma, y) -> (1 - sigma, 1 - y)
        assert (abs(sigma - 0.386) < 2e-3 and y == 0.0) or (abs(sigma - 0.614) < 2e-3 and y == 1.0)
        assert core.lffr_hessian_weight(0.386, 0.0) == pytest.approx(value, abs=1e-5)

    def test_fine_grid_stays_below_bound(self):
        sigma = np.linspace(0.0, 1.0, 10001)
        assert core.lffr_hessian_weight(sigma, 0.0).max() <= 0.155


class TestCostsAndGradients:
    def test_l0_examples(self):
        ds = Dataset(x=[[1.0, 0.0]], y=[2.0])
        assert core.l0_cost(ds, np.zeros(2)) == 4.0
        assert core.l0_gradient(ds, np.zeros(2)).tolist() == [-4.0, 0.0]

    def test_l0_perfect_fit(self, rng):
        ds = random_dataset(rng, 10, 3)
        w = rng.normal(size=4)
        exact = ds.with_targets(ds.x @ w)
        assert core.l0_cost(exact, w) == pytest.approx(0.0, abs=1e-24)
        np.testing.assert_allclose(core.l0_gradient(exact, w), 0.0, atol=1e-12)

    def test_l0_duplicated_row_doubles_contribution(self):
        ds = Dataset(x=[[1.0, 0.5]], y=[2.0])
        twice = Dataset(x=[[1.0, 0.5], [1.0, 0.5]], y=[2.0, 2.0])
        w = np.array([0.3, -0.2])
        assert core.l0_cost(twice, w) == pytest.approx(2 * core.l0_cost(ds, w))

    def test_weight_length_checked(self):
        with pytest.raises(DimensionError):
            core.l0_cost(Dataset(x=[[1.0, 0.0]], y=[2.0]), np.zeros(3))

    def test_l1_examples(self, rng):
        ds = Dataset(x=[[1.0, 0.0]], y=[0.0])
        assert core.l1_gradient(ds, np.array([1.0, 1.0]), 2.0).tolist() == [3.0, 2.0]
        ds = random_dataset(rng, 8, 2)
        w = rng.normal(size=3)
        np.testing.assert_allclose(core.l1_gradient(ds, w, 0.0), core.l0_gradient(ds, w) / 2, rtol=1e-12)

    def test_l1_bias_exclusion(self):
        ds = Dataset(x=[[1.0, 0.0]], y=[0.0])
        assert core.l1_gradient(ds, np.array([1.0, 1.0]), 2.0, penalize_bias=False).tolist() == [1.0, 2.0]

    def test_l1_negative_lambda(self):
        with pytest.raises(DomainError):
            core.l1_gradient(Dataset(x=[[1.0]], y=[0.0]), np.zeros(1), -1.0)

    def test_l2_examples(self):
        assert core.l2_cost(Dataset(x=[[1.0], [1.0]], y=[0.5, 0.5]), np.zeros(1)) == 0.0
        assert core.l2_cost(Dataset(x=[[1.0]], y=[1.0]), np.zeros(1)) == 0.25
        ds = Dataset(x=[[1.0, 0.0]], y=[0.0])
        assert core.l2_gradient(ds, np.zeros(2)).tolist() == [0.25, 0.0]

    def test_l2_zero_at_fit(self, rng):
        ds = random_dataset(rng, 6, 2)
        w = rng.normal(size=3)
        fitted = ds.with_targets(core.sigmoid(ds.x @ w))
        np.testing.assert_allclose(core.l2_gradient(fitted, w), 0.0, atol=1e-15)

    @pytest.mark.parametrize("seed", range(5))
    def test_gradients_match_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        ds = random_dataset(rng, 12, 3, y_lo=0.0, y_hi=1.0)
        w = rng.uniform(-1, 1, size=4)
        cases = [
            (lambda b: core.l0_cost(ds, b), core.l0_gradient(ds, w)),
            (lambda b: core.l1_cost(ds, b, 0.7), core.l1_gradient(ds, w, 0.7)),
            (lambda b: core.l2_cost(ds, b), core.l2_gradient(ds, w)),
        ]
        for cost, analytic in cases:
            np.testing.assert_allclose(central_difference(cost, w), analytic, rtol=1e-6, atol=1e-8)


class TestSfh:
    def test_linear_examples(self):
        assert core.sfh_linear(Dataset(x=[[1.0]], y=[0.0])).diag.tolist() == [2 + EPS]
        diag = core.sfh_linear(Dataset(x=[[1.0, 1.0], [1.0, 1.0]], y=[0.0, 0.0])).diag
        np.testing.assert_allclose(diag, [8 + EPS, 8 + EPS], rtol=0, atol=1e-15)

    def test_linear_zero_column_still_positive(self):
        b = core.sfh_linear(Dataset(x=[[1.0, 0.0], [1.0, 0.0]], y=[0.0, 0.0]))
        assert b.diag[1] == EPS
        assert np.all(b.diag > 0)

    def test_ridge_examples(self):
        one = Dataset(x=[[1.0]], y=[0.0])
        assert core.sfh_ridge(one, 0.0).diag.tolist() == [1 + EPS]
        assert core.sfh_ridge(one, 3.0).diag.tolist() == [1 + EPS]
        cancelling = Dataset(x=[[1.0, -1.0], [1.0, -1.0]], y=[0.0, 0.0])
        assert core.sfh_ridge(cancelling, 0.0).diag.tolist() == [EPS, EPS]

    def test_ridge_penalty_on_features(self):
        b = core.sfh_ridge(Dataset(x=[[1.0, 0.0]], y=[0.0]), 3.0)
        np.testing.assert_allclose(b.diag, [1 + EPS, 3 + EPS])

    def test_lffr_examples(self, rng):
        assert core.sfh_lffr(Dataset(x=[[1.0]], y=[0.0])).diag[0] == pytest.approx(0.155 + EPS, abs=1e-16)
        ds = random_dataset(rng, 20, 4)
        linear = core.sfh_linear(ds).diag
        np.testing.assert_allclose(core.sfh_lffr(ds).diag, 0.155 / 2 * (linear - EPS) + EPS, rtol=1e-12)

    def test_row_sum_bound_dominates(self, rng):
        for _ in range(20):
            ds = random_dataset(rng, int(rng.integers(1, 30)), int(rng.integers(1, 6)))
            h = 2.0 * ds.x.T @ ds.x
            b = core.sfh_from_hessian(h, SfhFlavor.LINEAR)
            assert np.linalg.eigvalsh(np.diag(b.diag) - h).min() >= -1e-9

    def test_from_hessian_requires_square(self):
        with pytest.raises(DimensionError):
            core.sfh_from_hessian(np.ones((2, 3)), SfhFlavor.LINEAR)

    def test_update_examples(self):
        b = SfhDiagonal.from_diag(np.array([2.0]), SfhFlavor.LINEAR)
        assert core.sfh_update(np.array([0.5]), np.array([0.0]), b).tolist() == [0.5]
        assert core.sfh_update(np.array([0.0]), np.array([4.0]), b).tolist() == [-2.0]

    def test_diagonal_is_constant_across_updates(self, rng):
        ds = random_dataset(rng, 30, 3)
        b = core.sfh_linear(ds)
        before = b.diag.copy()
        w = np.zeros(4)
        for _ in range(10):
            w = core.sfh_update(w, core.l0_gradient(ds, w), b)
        assert np.array_equal(b.diag, before)
        assert np.array_equal(core.sfh_linear(ds).diag, before)
        assert np.array_equal(core.sfh_lffr(ds).diag, core.sfh_lffr(ds).diag)

    def test_update_does_not_mutate(self):
        w = np.array([1.0])
        core.sfh_update(w, np.array([4.0]), SfhDiagonal.from_diag(np.array([2.0]), SfhFlavor.LINEAR))
        assert w.tolist() == [1.0]

    def test_update_ascent_warns(self, caplog):
        b = SfhDiagonal.from_diag(np.array([2.0]), SfhFlavor.LINEAR)
        with caplog.at_level(logging.WARNING):
            assert core.sfh_update(np.array([0.0]), np.array([4.0]), b, sign=1).tolist() == [2.0]
        assert "ascent" in caplog.text

    def test_update_rejects_bad_sign_and_shape(self):
        b = SfhDiagonal.from_diag(np.array([2.0]), SfhFlavor.LINEAR)
        with pytest.raises(DomainError):
            core.sfh_update(np.zeros(1), np.zeros(1), b, sign=0)
        with pytest.raises(DimensionError):
            core.sfh_update(np.zeros(2), np.zeros(2), b)

    def test_single_update_never_increases_cost(self, rng):
        for _ in range(100):
            ds = random_dataset(rng, int(rng.integers(1, 20)), 1, y_lo=-3.0, y_hi=3.0)
            w = rng.normal(size=2)
            after = core.sfh_update(w, core.l0_gradient(ds, w), core.sfh_linear(ds))
            assert core.l0_cost(ds, after) <= core.l0_cost(ds, w) + 1e-12
