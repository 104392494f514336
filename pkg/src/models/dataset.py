from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigurationError, DimensionError

DEFAULT_EPSILON = 1e-8
DEFAULT_SEED = 113
DEFAULT_TEST_FRACTION = 0.2


class Link(str, Enum):
    """Response link used by the synthetic data generator."""
    LINEAR = "linear"
    SIGMOID = "sigmoid"


@dataclass(frozen=True, eq=False)
class FeatureScaler:
    """Per-column affine map of raw features into [lo, hi]."""
    mins: np.ndarray
    maxs: np.ndarray
    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self):
        if self.hi <= self.lo:
            raise ConfigurationError(f"Feature range must satisfy hi > lo, got [{self.lo}, {self.hi}]")
        if self.mins.shape != self.maxs.shape or self.mins.ndim != 1:
            raise DimensionError("Scaler mins and maxs must be vectors of equal length")

    @property
    def n_features(self) -> int:
        return int(self.mins.shape[0])

    def transform(self, raw: np.ndarray) -> np.ndarray:
        """Apply the fitted map to rows of raw features."""
        raw = np.asarray(raw, dtype=np.float64)
        if raw.shape[-1] != self.n_features:
            raise DimensionError(f"Expected {self.n_features} features, got {raw.shape[-1]}")
        span = self.maxs - self.mins
        constant = span == 0
        safe_span = np.where(constant, 1.0, span)
        scaled = (raw - self.mins) / safe_span * (self.hi - self.lo) + self.lo
        # constant columns carry no information; park them at the midpoint
        return np.where(constant, 0.5 * (self.lo + self.hi), scaled)

    def to_document(self) -> dict:
        return {
            "mins": self.mins.tolist(),
            "maxs": self.maxs.tolist(),
            "lo": self.lo,
            "hi": self.hi,
        }

    @classmethod
    def from_document(cls, doc: dict) -> "FeatureScaler":
        return cls(
            mins=np.asarray(doc["mins"], dtype=np.float64),
            maxs=np.asarray(doc["maxs"], dtype=np.float64),
            lo=float(doc["lo"]),
            hi=float(doc["hi"]),
        )


@dataclass(frozen=True)
class TargetScaler:
    """Target range and transform parameters; owns every target transform."""
    y_min: float
    y_max: float
    epsilon: float = DEFAULT_EPSILON
    gamma: Optional[float] = None

    def __post_init__(self):
        if not self.y_min <= self.y_max:
            raise ConfigurationError(f"y_min ({self.y_min}) must not exceed y_max ({self.y_max})")
        if self.epsilon <= 0:
            raise ConfigurationError("epsilon must be positive")
        if self.gamma is not None and not 0.0 < self.gamma < 1.0:
            raise ConfigurationError(f"gamma must lie in (0, 1), got {self.gamma}")

    @property
    def span(self) -> float:
        """Denominator of the unit map, y_max - y_min + epsilon."""
        return self.y_max - self.y_min + self.epsilon

    def to_document(self) -> dict:
        return {
            "y_min": self.y_min,
            "y_max": self.y_max,
            "epsilon": self.epsilon,
            "gamma": self.gamma,
        }


@dataclass(frozen=True, eq=False)
class Dataset:
    """Bias-augmented design matrix with its raw targets."""
    x: np.ndarray
    y: np.ndarray
    feature_range: Optional[Tuple[float, float]] = None
    feature_scaler: Optional[FeatureScaler] = None

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=np.float64))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=np.float64))
        if self.x.ndim != 2 or self.x.shape[0] < 1 or self.x.shape[1] < 1:
            raise DimensionError(f"Design matrix must be n x (1+d) with n >= 1, got {self.x.shape}")
        if self.y.ndim != 1 or self.y.shape[0] != self.x.shape[0]:
            raise DimensionError(f"Expected {self.x.shape[0]} targets, got shape {self.y.shape}")
        if not np.all(self.x[:, 0] == 1.0):
            raise DimensionError("First column of the design matrix must be the bias column of ones")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise DimensionError("Dataset entries must be finite")
        if self.feature_range is not None:
            lo, hi = self.feature_range
            features = self.x[:, 1:]
            if features.size and (features.min() < lo or features.max() > hi):
                raise DimensionError(f"Features fall outside the declared range [{lo}, {hi}]")

    @property
    def n(self) -> int:
        return int(self.x.shape[0])

    @property
    def d(self) -> int:
        return int(self.x.shape[1] - 1)

    def with_targets(self, y: np.ndarray) -> "Dataset":
        """Same design matrix, different target vector."""
        return Dataset(self.x, np.asarray(y, dtype=np.float64), self.feature_range, self.feature_scaler)

    def rows(self, index: np.ndarray) -> "Dataset":
        return Dataset(self.x[index], self.y[index], self.feature_range, self.feature_scaler)


@dataclass
class SplitSpec:
    """Deterministic train/test split parameters."""
    test_fraction: float = DEFAULT_TEST_FRACTION
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigurationError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")


@dataclass
class SyntheticSpec:
    """Parameters of a synthetic regression problem on [-1, 1]^d."""
    n: int
    d: int
    noise_sigma: float = 0.0
    link: Link = Link.LINEAR
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ConfigurationError("Synthetic data needs n >= 1 and d >= 1")
        if self.noise_sigma < 0:
            raise ConfigurationError("noise_sigma must be non-negative")
        if not isinstance(self.link, Link):
            try:
                self.link = Link(self.link)
            except ValueError:
                raise ConfigurationError(f"Invalid link: {self.link}. Must be one of: {', '.join(l.value for l in Link)}")
