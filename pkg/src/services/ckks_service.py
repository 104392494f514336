"""Leveled CKKS semantics without the cryptography.

Ciphertexts are slot grids tagged with a remaining level. Additions,
rotations and public-constant operations are free; every ciphertext or
plaintext multiplication consumes one level (multiply then rescale). A
refresh restores the full budget and is recorded in the run's report.
"""
import logging
from typing import Optional

import numpy as np

from ..models.cipher import CipherMatrix, HeParams, RefreshReport, next_pow2
from ..models.errors import CapacityError, DepthError, DimensionError

logger = logging.getLogger(__name__)


class CkksSimulator:
    """Noise-free (optionally noisy) leveled ciphertext arithmetic for one run."""

    def __init__(
        self,
        params: HeParams,
        report: Optional[RefreshReport] = None,
        noise: bool = False,
        seed: Optional[int] = None,
    ) -> None:
        self.params = params
        self.report = report if report is not None else RefreshReport()
        self.noise = noise
        self.iteration = 0
        self._rng = np.random.default_rng(seed)

    # -- construction ------------------------------------------------------

    def padded_shape(self, rows: int, cols: int) -> tuple[int, int]:
        return next_pow2(rows), next_pow2(cols)

    def fits(self, rows: int, cols: int) -> bool:
        prow, pcol = self.padded_shape(rows, cols)
        return prow * pcol <= self.params.slot_count

    def encode(self, matrix) -> CipherMatrix:
        """Pack a matrix row-major into one ciphertext at full level."""
        matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        if matrix.ndim != 2:
            raise DimensionError(f"Can only encode matrices, got shape {matrix.shape}")
        rows, cols = matrix.shape
        if not self.fits(rows, cols):
            prow, pcol = self.padded_shape(rows, cols)
            raise CapacityError(
                f"{rows}x{cols} grid (padded {prow}x{pcol}) exceeds {self.params.slot_count} slots"
            )
        grid = np.zeros(self.padded_shape(rows, cols))
        grid[:rows, :cols] = matrix
        return self._wrap(grid, self.params.initial_levels, self.params, (rows, cols), fresh=True)

    def decrypt(self, a: CipherMatrix) -> np.ndarray:
        return a.values()

    @staticmethod
    def _wrap(grid: np.ndarray, level: int, params: HeParams, shape, fresh: bool = False) -> CipherMatrix:
        grid.setflags(write=False)
        return CipherMatrix(grid=grid, level=level, params=params, shape=tuple(shape), fresh=fresh)

    @staticmethod
    def _check_pair(a: CipherMatrix, b: CipherMatrix) -> None:
        if a.shape != b.shape or a.padded_shape != b.padded_shape:
            raise DimensionError(f"Ciphertext shapes differ: {a.shape} vs {b.shape}")
        if a.params != b.params:
            raise DimensionError("Ciphertexts were encoded under different parameters")

    def _consume(self, level: int, label: str) -> int:
        if level < 1:
            raise DepthError(label, level)
        self.report.total_mults += 1
        logger.debug(f"{label}: level {level} -> {level - 1}")
        return level - 1

    def _perturb(self, grid: np.ndarray) -> np.ndarray:
        if not self.noise:
            return grid
        magnitude = self.params.noise_magnitude
        return grid + self._rng.uniform(-magnitude, magnitude, grid.shape)

    # -- level-free operations ---------------------------------------------

    def he_add(self, a: CipherMatrix, b: CipherMatrix) -> CipherMatrix:
        self._check_pair(a, b)
        return self._wrap(a.grid + b.grid, min(a.level, b.level), a.params, a.shape)

    def he_sub(self, a: CipherMatrix, b: CipherMatrix) -> CipherMatrix:
        self._check_pair(a, b)
        return self._wrap(a.grid - b.grid, min(a.level, b.level), a.params, a.shape)

    def he_add_const(self, a: CipherMatrix, c: float) -> CipherMatrix:
        return self._wrap(a.grid + c, a.level, a.params, a.shape)

    def he_scale(self, a: CipherMatrix, c: float) -> CipherMatrix:
        return self._wrap(a.grid * c, a.level, a.params, a.shape)

    def he_rotate(self, a: CipherMatrix, k: int) -> CipherMatrix:
        """Cyclic left shift of the row-major slot vector by k."""
        self.report.total_rotations += 1
        flat = np.roll(a.grid.ravel(), -k)
        return self._wrap(flat.reshape(a.padded_shape), a.level, a.params, a.shape)

    def _rotate_and_add(self, a: CipherMatrix, axis: int) -> CipherMatrix:
        grid = a.grid.copy()
        step = 1
        while step < grid.shape[axis]:
            grid = grid + np.roll(grid, -step, axis=axis)
            self.report.total_rotations += 1
            step *= 2
        return self._wrap(grid, a.level, a.params, a.shape)

    def sum_cols(self, a: CipherMatrix) -> CipherMatrix:
        """Every slot of a row ends up holding that row's sum."""
        return self._rotate_and_add(a, axis=1)

    def sum_rows(self, a: CipherMatrix) -> CipherMatrix:
        """Every slot of a column ends up holding that column's sum."""
        return self._rotate_and_add(a, axis=0)

    # -- level-consuming operations ----------------------------------------

    def he_mult(self, a: CipherMatrix, b: CipherMatrix, label: str = "mult") -> CipherMatrix:
        self._check_pair(a, b)
        level = self._consume(min(a.level, b.level), label)
        return self._wrap(self._perturb(a.grid * b.grid), level, a.params, a.shape)

    def he_mult_plain(self, a: CipherMatrix, m, label: str = "mult_plain") -> CipherMatrix:
        m = np.atleast_2d(np.asarray(m, dtype=np.float64))
        if m.shape not in (a.shape, a.padded_shape):
            raise DimensionError(f"Plaintext shape {m.shape} does not match ciphertext {a.shape}")
        plain = np.zeros(a.padded_shape)
        plain[: m.shape[0], : m.shape[1]] = m
        level = self._consume(a.level, label)
        return self._wrap(self._perturb(a.grid * plain), level, a.params, a.shape)

    def refresh(self, a: CipherMatrix, label: str = "refresh") -> CipherMatrix:
        """Restore the full level budget; values are untouched."""
        self.report.refresh_events.append((self.iteration, label))
        logger.info(f"Refreshing '{label}' at iteration {self.iteration} (level {a.level} -> {self.params.initial_levels})")
        return self._wrap(a.grid.copy(), self.params.initial_levels, a.params, a.shape)
