import numpy as np
import pytest

from src.models.cipher import HeParams
from src.models.dataset import Dataset
from src.services import regression_core as core


def random_dataset(rng: np.random.Generator, n: int, d: int, lo: float = -1.0, hi: float = 1.0,
                   y_lo: float = -1.0, y_hi: float = 1.0) -> Dataset:
    """Bias-augmented dataset with features uniform on [lo, hi]."""
    raw = rng.uniform(lo, hi, size=(n, d))
    return Dataset(x=core.augment_bias(raw), y=rng.uniform(y_lo, y_hi, size=n), feature_range=(lo, hi))


@pytest.fixture
def rng():
    return np.random.default_rng(113)


@pytest.fixture
def linear_1d():
    """y = 2x on 21 evenly spaced points of [-1, 1]."""
    x = np.linspace(-1.0, 1.0, 21)
    return Dataset(x=core.augment_bias(x[:, None]), y=2.0 * x, feature_range=(-1.0, 1.0))


@pytest.fixture
def small_params():
    """Ten levels per budget and enough slots for every unit-test grid."""
    return HeParams(log_n=16, log_q=300, log_p=30, slots=4096)


@pytest.fixture
def default_params():
    return HeParams(log_n=16, log_q=1200, log_p=30)
