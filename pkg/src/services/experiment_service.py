import logging
import time
from dataclasses import asdict, dataclass, replace
from typing import List, Optional, Tuple

import numpy as np

from ..models.cipher import HeParams
from ..models.config import Algorithm, TrainConfig
from ..models.dataset import Dataset, SplitSpec
from ..models.model import TrainedModel
from ..models.report import BenchRow, RunReport
from . import regression_core as core
from .data_service import DataService
from .encrypted_trainer_service import EncryptedTrainerService
from .trainer_service import TrainerService

logger = logging.getLogger(__name__)

# ridge uses signed cross sums; non-negative features keep its diagonal dominant
RIDGE_FEATURE_RANGE = (0.0, 1.0)
FEATURE_RANGE = (-1.0, 1.0)

# (row name, algorithm, normalize targets)
BENCH_ENTRIES = [
    ("LR", Algorithm.LINEAR, False),
    ("YnormdLR", Algorithm.LINEAR, True),
    ("LFFR", Algorithm.LFFR, False),
    ("ImprovedLFFR", Algorithm.IMPROVED_LFFR, False),
]


@dataclass
class PreparedData:
    """A split whose training half is scaled and bias-augmented."""
    train: Dataset
    train_raw: np.ndarray
    test_raw: np.ndarray
    test_y: np.ndarray
    source: dict


class ExperimentService:
    """Wires data, trainers and reports together for the CLI."""

    @staticmethod
    def feature_range_for(algorithm: Optional[Algorithm]) -> Tuple[float, float]:
        return RIDGE_FEATURE_RANGE if algorithm == Algorithm.RIDGE else FEATURE_RANGE

    @staticmethod
    def prepare(raw: np.ndarray, y: np.ndarray, split: SplitSpec, source: dict,
                algorithm: Optional[Algorithm] = None) -> PreparedData:
        """Split, then scale the training features into the range the algorithm needs."""
        lo, hi = ExperimentService.feature_range_for(algorithm)
        train_idx, test_idx = DataService.split_indices(raw.shape[0], split)
        train = core.build_dataset(raw[train_idx], y[train_idx], lo, hi)
        logger.info(f"Split {raw.shape[0]} rows into {train_idx.size} train / {test_idx.size} test (seed {split.seed})")
        return PreparedData(
            train=train,
            train_raw=raw[train_idx],
            test_raw=raw[test_idx],
            test_y=y[test_idx],
            source={**source, "test_fraction": split.test_fraction, "seed": split.seed, "n_train": int(train_idx.size)},
        )

    @staticmethod
    def fit(data: PreparedData, cfg: TrainConfig, he_params: Optional[HeParams] = None,
            noise: bool = False, seed: Optional[int] = None) -> Tuple[TrainedModel, RunReport]:
        """Train cleartext, or encrypted when he_params is given, and score both halves."""
        if cfg.algorithm == Algorithm.RIDGE and data.train.feature_range is not None and data.train.feature_range[0] < 0:
            logger.warning("Ridge features span negative values; the ridge diagonal may not bound the Hessian")
        start = time.perf_counter()
        refresh = None
        if he_params is not None:
            model, report = EncryptedTrainerService(he_params, noise=noise, seed=seed).train_encrypted(data.train, cfg)
            refresh = report.to_document()
        else:
            model = TrainerService.train(data.train, cfg)
        elapsed = time.perf_counter() - start

        run = RunReport(
            config=model.config.to_document(),
            data=data.source,
            train_mse=DataService.mse(TrainerService.predict(model, data.train_raw), data.train.y),
            test_mse=DataService.mse(TrainerService.predict(model, data.test_raw), data.test_y),
            trace=list(model.trace),
            wall_seconds=elapsed,
            model=model.to_document(),
            refresh=refresh,
            he_params=asdict(he_params) if he_params is not None else None,
        )
        logger.info(f"{cfg.algorithm.value}: train MSE {run.train_mse:.6g}, test MSE {run.test_mse:.6g}")
        return model, run

    @staticmethod
    def bench(data: PreparedData, base: TrainConfig, he_params: Optional[HeParams] = None) -> List[BenchRow]:
        """The four cleartext trainers on one split, plus encrypted twins when he_params is given."""
        rows: List[BenchRow] = []
        for name, algorithm, normalize in BENCH_ENTRIES:
            cfg = replace(base, algorithm=algorithm, normalize_targets=normalize)
            variants = [(name, None)]
            if he_params is not None:
                variants.append((f"{name}-enc", he_params))
            for label, params in variants:
                _, run = ExperimentService.fit(data, cfg, params)
                rows.append(BenchRow(
                    name=label,
                    algorithm=algorithm.value,
                    encrypted=params is not None,
                    train_mse=run.train_mse,
                    test_mse=run.test_mse,
                    wall_seconds=run.wall_seconds,
                    refreshes=run.refresh["total_refreshes"] if run.refresh else None,
                    trace=run.trace,
                ))
        return rows
