import logging
from dataclasses import replace
from typing import Callable, List, Optional, Tuple

import numpy as np

from ..models.config import Algorithm, SigmoidKind, TrainConfig
from ..models.dataset import Dataset, TargetScaler
from ..models.errors import ConfigurationError, DimensionError
from ..models.model import TrainedModel
from ..models.regression import LFFR_BOUND, LINEAR_BOUND, SfhBound, SfhDiagonal, SfhFlavor, WeightVector
from . import regression_core as core

logger = logging.getLogger(__name__)

GradientFn = Callable[[WeightVector], np.ndarray]
CostFn = Callable[[WeightVector], float]


def sigmoid_for(kind: SigmoidKind) -> core.SigmoidFn:
    return core.poly_sigmoid3 if kind == SigmoidKind.POLY3 else core.sigmoid


def linear_sfh(ds: Dataset, cfg: TrainConfig) -> SfhDiagonal:
    if cfg.bound == SfhBound.ROW_SUM:
        return core.sfh_from_hessian(LINEAR_BOUND * ds.x.T @ ds.x, SfhFlavor.LINEAR, cfg.epsilon)
    return core.sfh_linear(ds, cfg.epsilon)


def lffr_sfh(ds: Dataset, cfg: TrainConfig) -> SfhDiagonal:
    if cfg.bound == SfhBound.ROW_SUM:
        return core.sfh_from_hessian(LFFR_BOUND * ds.x.T @ ds.x, SfhFlavor.LFFR, cfg.epsilon)
    return core.sfh_lffr(ds, cfg.epsilon)


class TrainerService:
    """Cleartext fixed-Hessian training loops and prediction."""

    @staticmethod
    def _require(cfg: TrainConfig, algorithm: Algorithm) -> None:
        if cfg.algorithm != algorithm:
            raise ConfigurationError(f"Expected a {algorithm.value} configuration, got {cfg.algorithm.value}")

    @staticmethod
    def _descend(
        b: SfhDiagonal,
        gradient: GradientFn,
        cost: CostFn,
        iterations: int,
    ) -> Tuple[np.ndarray, List[float]]:
        """Run the SFH update from beta = 0; records the cost after each step."""
        beta = np.zeros(len(b))
        trace: List[float] = []
        for k in range(iterations):
            beta = core.sfh_update(beta, gradient(beta), b, sign=-1)
            trace.append(cost(beta))
            logger.debug(f"iteration {k + 1}/{iterations}: cost={trace[-1]:.6g}")
        return beta, trace

    @staticmethod
    def _fit_linear(ds: Dataset, cfg: TrainConfig) -> Tuple[np.ndarray, List[float]]:
        b = linear_sfh(ds, cfg)
        return TrainerService._descend(
            b,
            lambda beta: core.l0_gradient(ds, beta),
            lambda beta: core.l0_cost(ds, beta),
            cfg.iterations,
        )

    @staticmethod
    def train_linear(ds: Dataset, cfg: TrainConfig, normalize_targets: Optional[bool] = None) -> TrainedModel:
        """Linear regression, optionally on targets scaled into [0, 1)."""
        TrainerService._require(cfg, Algorithm.LINEAR)
        if normalize_targets is not None:
            cfg = replace(cfg, normalize_targets=normalize_targets)
        scaler = None
        work = ds
        if cfg.normalize_targets:
            scaler = core.fit_target_scaler(ds.y, epsilon=cfg.epsilon)
            work = ds.with_targets(core.scale_target_unit(scaler, ds.y))
        logger.info(f"Training linear (normalized={cfg.normalize_targets}) on n={ds.n}, d={ds.d}, iterations={cfg.iterations}")
        beta, trace = TrainerService._fit_linear(work, cfg)
        logger.info(f"linear finished: L0={trace[-1]:.6g}")
        return TrainedModel(beta, Algorithm.LINEAR, cfg, scaler, ds.feature_scaler, trace)

    @staticmethod
    def train_ridge(ds: Dataset, cfg: TrainConfig) -> TrainedModel:
        TrainerService._require(cfg, Algorithm.RIDGE)
        scaler = None
        work = ds
        if cfg.normalize_targets:
            scaler = core.fit_target_scaler(ds.y, epsilon=cfg.epsilon)
            work = ds.with_targets(core.scale_target_unit(scaler, ds.y))
        logger.info(f"Training ridge (lambda={cfg.lam}) on n={ds.n}, d={ds.d}, iterations={cfg.iterations}")
        # the ridge SFH leaves the bias unpenalised, so the gradient does too
        beta, trace = TrainerService._descend(
            core.sfh_ridge(work, cfg.lam, cfg.epsilon),
            lambda beta: core.l1_gradient(work, beta, cfg.lam, penalize_bias=False),
            lambda beta: core.l1_cost(work, beta, cfg.lam, penalize_bias=False),
            cfg.iterations,
        )
        logger.info(f"ridge finished: L1={trace[-1]:.6g}")
        return TrainedModel(beta, Algorithm.RIDGE, cfg, scaler, ds.feature_scaler, trace)

    @staticmethod
    def train_lffr(ds: Dataset, cfg: TrainConfig) -> TrainedModel:
        """Sigmoid regression on unit-scaled targets."""
        TrainerService._require(cfg, Algorithm.LFFR)
        scaler = core.fit_target_scaler(ds.y, epsilon=cfg.epsilon)
        work = ds.with_targets(core.scale_target_unit(scaler, ds.y))
        fn = sigmoid_for(cfg.sigmoid_kind)
        logger.info(
            f"Training lffr ({cfg.sigmoid_kind.value} sigmoid) on n={ds.n}, d={ds.d}, iterations={cfg.iterations}"
        )
        beta, trace = TrainerService._descend(
            lffr_sfh(work, cfg),
            lambda beta: core.l2_gradient(work, beta, fn),
            lambda beta: core.l2_cost(work, beta, fn),
            cfg.iterations,
        )
        logger.info(f"lffr finished: L2={trace[-1]:.6g}")
        return TrainedModel(beta, Algorithm.LFFR, cfg, scaler, ds.feature_scaler, trace)

    @staticmethod
    def improved_lffr_targets(ds: Dataset, cfg: TrainConfig) -> Tuple[Dataset, TargetScaler]:
        """Logit-transformed targets for every sample, and the scaler that made them."""
        scaler = core.fit_target_scaler(ds.y, gamma=cfg.gamma, epsilon=cfg.epsilon)
        return ds.with_targets(core.logit_scale_target(scaler, ds.y)), scaler

    @staticmethod
    def train_improved_lffr(ds: Dataset, cfg: TrainConfig) -> TrainedModel:
        """Linear regression on gamma-windowed logit targets."""
        TrainerService._require(cfg, Algorithm.IMPROVED_LFFR)
        work, scaler = TrainerService.improved_lffr_targets(ds, cfg)
        logger.info(f"Training improved-lffr (gamma={cfg.gamma}) on n={ds.n}, d={ds.d}, iterations={cfg.iterations}")
        beta, trace = TrainerService._fit_linear(work, cfg)
        logger.info(f"improved-lffr finished: L0={trace[-1]:.6g}")
        return TrainedModel(beta, Algorithm.IMPROVED_LFFR, cfg, scaler, ds.feature_scaler, trace)

    @staticmethod
    def train(ds: Dataset, cfg: TrainConfig) -> TrainedModel:
        """Dispatch on cfg.algorithm."""
        trainers = {
            Algorithm.LINEAR: TrainerService.train_linear,
            Algorithm.RIDGE: TrainerService.train_ridge,
            Algorithm.LFFR: TrainerService.train_lffr,
            Algorithm.IMPROVED_LFFR: TrainerService.train_improved_lffr,
        }
        return trainers[cfg.algorithm](ds, cfg)

    @staticmethod
    def predict(model: TrainedModel, x_raw):
        """Predict in raw target units for one raw feature row or a matrix of rows."""
        x_raw = np.asarray(x_raw, dtype=np.float64)
        single = x_raw.ndim == 1
        rows = np.atleast_2d(x_raw)
        if rows.shape[1] != model.n_features:
            raise DimensionError(f"Model expects {model.n_features} features, got {rows.shape[1]}")
        if model.feature_scaler is not None:
            rows = model.feature_scaler.transform(rows)
        z = np.hstack([np.ones((rows.shape[0], 1)), rows]) @ model.weights

        if model.algorithm in (Algorithm.LINEAR, Algorithm.RIDGE):
            out = core.unscale_target_unit(model.scaler, z) if model.scaler is not None else z
        elif model.algorithm == Algorithm.LFFR:
            out = core.unscale_target_unit(model.scaler, core.sigmoid(z))
        else:
            out = core.logit_unscale_target(model.scaler, core.sigmoid(z))
        return float(out[0]) if single else np.asarray(out)
