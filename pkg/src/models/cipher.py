from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import ConfigurationError

DEFAULT_LOG_N = 16
DEFAULT_LOG_Q = 1200
DEFAULT_LOG_P = 30


def next_pow2(value: int) -> int:
    return 1 << max(0, int(value) - 1).bit_length()


@dataclass(frozen=True)
class HeParams:
    """Leveled CKKS parameters; only their capacity and depth are modelled."""
    log_n: int = DEFAULT_LOG_N
    log_q: int = DEFAULT_LOG_Q
    log_p: int = DEFAULT_LOG_P
    slots: Optional[int] = None

    def __post_init__(self):
        if self.log_n < 1 or self.log_q < 1 or self.log_p < 1:
            raise ConfigurationError("log_n, log_q and log_p must be positive")
        if self.slots is not None and self.slots < 1:
            raise ConfigurationError(f"Slot override must be positive, got {self.slots}")
        if self.initial_levels < 2:
            raise ConfigurationError(
                f"log_q / log_p = {self.log_q}/{self.log_p} leaves {self.initial_levels} levels; need at least 2"
            )

    @property
    def slot_count(self) -> int:
        return self.slots if self.slots is not None else 2 ** (self.log_n - 1)

    @property
    def initial_levels(self) -> int:
        return self.log_q // self.log_p

    @property
    def noise_magnitude(self) -> float:
        return 2.0 ** (-self.log_p / 2)


@dataclass(frozen=True, eq=False)
class CipherMatrix:
    """Simulated ciphertext: a padded slot grid with its remaining level.

    ``grid`` is the full padded layout; ``shape`` is the logical region that
    decryption returns.
    """
    grid: np.ndarray
    level: int
    params: HeParams
    shape: Tuple[int, int]
    fresh: bool = False

    @property
    def padded_shape(self) -> Tuple[int, int]:
        return self.grid.shape

    def values(self) -> np.ndarray:
        rows, cols = self.shape
        return self.grid[:rows, :cols].copy()


@dataclass
class RefreshReport:
    """Level consumption and refresh events of one training run."""
    levels_per_iteration: int = 0
    refresh_events: List[Tuple[int, str]] = field(default_factory=list)
    total_mults: int = 0
    total_rotations: int = 0
    level_trace: List[int] = field(default_factory=list)
    shards: int = 1

    @property
    def total_refreshes(self) -> int:
        return len(self.refresh_events)

    def to_document(self) -> dict:
        return {
            "levels_per_iteration": self.levels_per_iteration,
            "refresh_iterations": [iteration for iteration, _ in self.refresh_events],
            "refresh_events": [{"iteration": i, "label": label} for i, label in self.refresh_events],
            "total_refreshes": self.total_refreshes,
            "total_mults": self.total_mults,
            "total_rotations": self.total_rotations,
            "level_trace": list(self.level_trace),
            "shards": self.shards,
        }


@dataclass(frozen=True)
class EncryptedTrainingState:
    """Ciphertexts of one encrypted training run.

    ``ct_x`` and ``ct_y`` hold one ciphertext per row shard; every shard has
    the same padded shape, so a single ``ct_beta`` and ``ct_bbar`` serve all.
    """
    ct_x: Tuple[CipherMatrix, ...]
    ct_y: Tuple[CipherMatrix, ...]
    ct_beta: CipherMatrix
    ct_bbar: CipherMatrix
    report: RefreshReport

    @property
    def shards(self) -> int:
        return len(self.ct_x)
