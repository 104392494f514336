import logging
import math
from pathlib import Path
from typing import Tuple

import numpy as np
import pandas as pd

from ..models.dataset import Dataset, Link, SplitSpec, SyntheticSpec
from ..models.errors import DimensionError, ParseError, SchemaError, SizeError
from . import regression_core as core

logger = logging.getLogger(__name__)

# steepness of the sigmoid link; keeps the response visibly non-linear on [-1, 1]^d
SIGMOID_LINK_STEEPNESS = 4.0


class DataService:
    """Dataset ingestion, splitting, metrics and synthetic data."""

    @staticmethod
    def read_numeric_csv(path: str | Path, has_header: bool = False) -> np.ndarray:
        """Read a comma-separated file of decimal numbers into a float matrix."""
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"File not found: {path}")
        try:
            frame = pd.read_csv(
                path,
                header=0 if has_header else None,
                dtype=str,
                keep_default_na=False,
                skipinitialspace=True,
            )
        except pd.errors.EmptyDataError:
            logger.warning(f"{path} holds no rows")
            return np.empty((0, 0))

        values = frame.apply(lambda column: pd.to_numeric(column, errors="coerce"))
        bad = values.isna().to_numpy()
        if bad.any():
            row, col = map(int, np.argwhere(bad)[0])
            # report the 1-based line number in the file
            raise ParseError(row + 1 + int(has_header), col, frame.iat[row, col])
        return values.to_numpy(dtype=np.float64)

    @staticmethod
    def load_csv(path: str | Path, has_header: bool = False, target_column: int = -1) -> Tuple[np.ndarray, np.ndarray]:
        """Split a numeric CSV into its feature matrix and target column."""
        table = DataService.read_numeric_csv(path, has_header)
        if table.size == 0:
            raise SizeError(f"{path} holds no data rows")
        n_cols = table.shape[1]
        if not -n_cols <= target_column < n_cols:
            raise SchemaError(f"Target column {target_column} does not exist; file has {n_cols} columns")
        target_column %= n_cols
        if n_cols < 2:
            raise SchemaError("Need at least one feature column besides the target")
        logger.info(f"Loaded {path}: {table.shape[0]} rows, {n_cols - 1} features, target column {target_column}")
        return np.delete(table, target_column, axis=1), table[:, target_column].copy()

    @staticmethod
    def split_indices(n: int, spec: SplitSpec) -> Tuple[np.ndarray, np.ndarray]:
        """Seeded permutation; its last ceil(fraction * n) entries are the test rows."""
        if n < 2:
            raise SizeError(f"Need at least 2 rows to split, got {n}")
        n_test = math.ceil(spec.test_fraction * n)
        if n_test >= n:
            raise SizeError(f"test_fraction {spec.test_fraction} leaves no training rows out of {n}")
        permutation = np.random.default_rng(spec.seed).permutation(n)
        return permutation[: n - n_test], permutation[n - n_test:]

    @staticmethod
    def split(ds: Dataset, spec: SplitSpec) -> Tuple[Dataset, Dataset]:
        train_idx, test_idx = DataService.split_indices(ds.n, spec)
        return ds.rows(train_idx), ds.rows(test_idx)

    @staticmethod
    def mse(predictions, targets) -> float:
        predictions = np.asarray(predictions, dtype=np.float64)
        targets = np.asarray(targets, dtype=np.float64)
        if predictions.shape != targets.shape or predictions.ndim != 1:
            raise DimensionError(f"Length mismatch: {predictions.shape} vs {targets.shape}")
        if predictions.size == 0:
            raise DimensionError("MSE of an empty vector is undefined")
        return float(np.mean((predictions - targets) ** 2))

    @staticmethod
    def draw_synthetic(spec: SyntheticSpec) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Raw features, targets and the true coefficients r."""
        rng = np.random.default_rng(spec.seed)
        raw = rng.uniform(-1.0, 1.0, size=(spec.n, spec.d))
        r = rng.uniform(-1.0, 1.0, size=spec.d)
        signal = raw @ r
        if spec.link == Link.SIGMOID:
            signal = core.sigmoid(SIGMOID_LINK_STEEPNESS * signal)
        noise = rng.normal(0.0, spec.noise_sigma, size=spec.n) if spec.noise_sigma > 0 else np.zeros(spec.n)
        return raw, signal + noise, r

    @staticmethod
    def generate_synthetic(spec: SyntheticSpec) -> Dataset:
        raw, y, _ = DataService.draw_synthetic(spec)
        return Dataset(x=core.augment_bias(raw), y=y, feature_range=(-1.0, 1.0))
