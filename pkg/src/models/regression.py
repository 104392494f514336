from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import NDArray

from .errors import DimensionError

# beta[0] is the bias coefficient; gradients share the layout
WeightVector = NDArray[np.float64]
GradientVector = NDArray[np.float64]

# global bound on the LFFR Hessian weight over sigma, y in [0, 1]
LFFR_BOUND = 0.155
LINEAR_BOUND = 2.0


class SfhFlavor(str, Enum):
    """Which cost a simplified fixed Hessian was built for."""
    LINEAR = "linear"
    RIDGE = "ridge"
    LFFR = "lffr"


class SfhBound(str, Enum):
    """How the diagonal is built from the Hessian bound."""
    ENTRYWISE = "entrywise"
    ROW_SUM = "row-sum"


@dataclass(frozen=True, eq=False)
class SfhDiagonal:
    """Diagonal Hessian substitute and its reciprocal."""
    diag: np.ndarray
    inv_diag: np.ndarray
    flavor: SfhFlavor

    def __post_init__(self):
        if self.diag.shape != self.inv_diag.shape or self.diag.ndim != 1:
            raise DimensionError("diag and inv_diag must be vectors of equal length")
        if np.any(self.diag <= 0):
            raise DimensionError("Every diagonal entry must be positive")

    @classmethod
    def from_diag(cls, diag: np.ndarray, flavor: SfhFlavor) -> "SfhDiagonal":
        diag = np.asarray(diag, dtype=np.float64)
        return cls(diag=diag, inv_diag=1.0 / diag, flavor=flavor)

    def __len__(self) -> int:
        return int(self.diag.shape[0])
