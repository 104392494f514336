"""Fixed-Hessian training through the ciphertext simulator.

Layout: the design matrix is packed row-major, the targets are repeated
across each row, and the weights and reciprocal Hessian diagonal are copied
down every row, so one slotwise product multiplies each sample by beta.
"""
import logging
from dataclasses import replace
from typing import List, Optional, Tuple

import numpy as np

from ..models.cipher import CipherMatrix, EncryptedTrainingState, HeParams, RefreshReport, next_pow2
from ..models.config import ENCRYPTED_ALGORITHMS, Algorithm, SigmoidKind, TrainConfig
from ..models.dataset import Dataset
from ..models.errors import CapacityError, ConfigurationError
from ..models.model import TrainedModel
from ..models.regression import SfhDiagonal
from . import regression_core as core
from .ckks_service import CkksSimulator
from .trainer_service import TrainerService, lffr_sfh, linear_sfh

logger = logging.getLogger(__name__)

# levels consumed by one update of ct_beta
LINEAR_STEP_LEVELS = 3
LFFR_STEP_LEVELS = 7

STEP_LEVELS = {
    Algorithm.LINEAR: LINEAR_STEP_LEVELS,
    Algorithm.IMPROVED_LFFR: LINEAR_STEP_LEVELS,
    Algorithm.LFFR: LFFR_STEP_LEVELS,
}


class EncryptedTrainerService:
    """One encrypted training run: owns the simulator and its refresh report."""

    def __init__(
        self,
        params: HeParams,
        noise: bool = False,
        seed: Optional[int] = None,
        auto_refresh: bool = True,
        force_refresh: bool = False,
    ) -> None:
        self.params = params
        self.report = RefreshReport()
        self.sim = CkksSimulator(params, self.report, noise=noise, seed=seed)
        self.auto_refresh = auto_refresh
        self.force_refresh = force_refresh

    # -- capacity ----------------------------------------------------------

    @staticmethod
    def shard_rows(params: HeParams, n_cols: int) -> int:
        """Largest power-of-two row count whose padded grid fits one ciphertext."""
        cols = next_pow2(n_cols)
        if cols > params.slot_count:
            raise CapacityError(f"{n_cols} columns (padded {cols}) exceed {params.slot_count} slots")
        return 1 << ((params.slot_count // cols).bit_length() - 1)

    @staticmethod
    def shard_dataset(ds: Dataset, params: HeParams) -> List[Dataset]:
        """Row-wise blocks that each fit one ciphertext."""
        cap = EncryptedTrainerService.shard_rows(params, ds.x.shape[1])
        if next_pow2(ds.n) <= cap:
            return [ds]
        blocks = [ds.rows(np.arange(start, min(start + cap, ds.n))) for start in range(0, ds.n, cap)]
        logger.info(f"Sharding {ds.n} rows into {len(blocks)} ciphertexts of {cap} rows")
        return blocks

    @staticmethod
    def expected_refreshes(params: HeParams, levels_per_iteration: int, iterations: int) -> int:
        """Refreshes implied by refreshing only when the budget cannot cover an iteration."""
        per_budget = params.initial_levels // levels_per_iteration
        if per_budget < 1:
            raise ConfigurationError(
                f"{params.initial_levels} levels cannot cover one iteration costing {levels_per_iteration}"
            )
        return -(-iterations // per_budget) - 1

    @staticmethod
    def mults_per_iteration(levels_per_iteration: int, shards: int) -> int:
        # every product except the final B^-1 * g happens once per shard
        return shards * (levels_per_iteration - 1) + 1

    # -- packing -----------------------------------------------------------

    def pack_inputs(self, ds: Dataset, b: SfhDiagonal, shard: bool = False) -> EncryptedTrainingState:
        """Encrypt X, replicated y, zero weights and the reciprocal diagonal."""
        blocks = self.shard_dataset(ds, self.params)
        if len(blocks) > 1 and not shard:
            raise CapacityError(f"{ds.n} x {ds.x.shape[1]} dataset needs {len(blocks)} ciphertexts; sharding is disabled")
        cols = ds.x.shape[1]
        rows = ds.n if len(blocks) == 1 else self.shard_rows(self.params, cols)

        ct_x, ct_y = [], []
        for block in blocks:
            x = np.zeros((rows, cols))
            x[: block.n] = block.x
            y = np.zeros((rows, cols))
            y[: block.n] = np.repeat(block.y[:, None], cols, axis=1)
            ct_x.append(self.sim.encode(x))
            ct_y.append(self.sim.encode(y))

        self.report.shards = len(blocks)
        return EncryptedTrainingState(
            ct_x=tuple(ct_x),
            ct_y=tuple(ct_y),
            ct_beta=self.sim.encode(np.zeros((rows, cols))),
            ct_bbar=self.sim.encode(np.tile(b.inv_diag, (rows, 1))),
            report=self.report,
        )

    # -- one iteration -----------------------------------------------------

    def _ensure_budget(self, state: EncryptedTrainingState, levels: int) -> EncryptedTrainingState:
        ct_beta = state.ct_beta
        if self.force_refresh or (self.auto_refresh and ct_beta.level < levels):
            ct_beta = self.sim.refresh(ct_beta, "ct_beta")
        return replace(state, ct_beta=ct_beta)

    def _update(self, state: EncryptedTrainingState, gradient: CipherMatrix, start_level: int) -> EncryptedTrainingState:
        step = self.sim.he_mult(state.ct_bbar, gradient, "bbar*g")
        ct_beta = self.sim.he_sub(state.ct_beta, step)
        self.report.level_trace.append(start_level - ct_beta.level)
        return replace(state, ct_beta=ct_beta)

    def encrypted_gradient_step_linear(self, state: EncryptedTrainingState) -> EncryptedTrainingState:
        """beta <- beta - B^-1 * sum_i 2 (x_i . beta - y_i) x_i, homomorphically."""
        state = self._ensure_budget(state, LINEAR_STEP_LEVELS)
        start = state.ct_beta.level
        total = None
        for ct_x, ct_y in zip(state.ct_x, state.ct_y):
            z = self.sim.sum_cols(self.sim.he_mult(ct_x, state.ct_beta, "x*beta"))
            residual = self.sim.he_scale(self.sim.he_sub(z, ct_y), 2.0)
            g = self.sim.sum_rows(self.sim.he_mult(residual, ct_x, "residual*x"))
            total = g if total is None else self.sim.he_add(total, g)
        return self._update(state, total, start)

    def encrypted_gradient_step_lffr(self, state: EncryptedTrainingState) -> EncryptedTrainingState:
        """Same circuit with the cubic sigmoid and the 2(g - y) g (1 - g) weighting."""
        state = self._ensure_budget(state, LFFR_STEP_LEVELS)
        start = state.ct_beta.level
        sim = self.sim
        total = None
        for ct_x, ct_y in zip(state.ct_x, state.ct_y):
            z = sim.sum_cols(sim.he_mult(ct_x, state.ct_beta, "x*beta"))
            z3 = sim.he_mult(sim.he_mult(z, z, "z^2"), z, "z^3")
            s = sim.he_add_const(
                sim.he_add(sim.he_scale(z, core.POLY3_C1), sim.he_scale(z3, core.POLY3_C3)),
                core.POLY3_C0,
            )
            weight = sim.he_mult(sim.he_sub(s, ct_y), s, "(g-y)*g")
            weight = sim.he_mult(weight, sim.he_add_const(sim.he_scale(s, -1.0), 1.0), "*(1-g)")
            weight = sim.he_scale(weight, 2.0)
            g = sim.sum_rows(sim.he_mult(weight, ct_x, "weight*x"))
            total = g if total is None else sim.he_add(total, g)
        return self._update(state, total, start)

    # -- full run ----------------------------------------------------------

    def decrypt_weights(self, state: EncryptedTrainingState) -> np.ndarray:
        return self.sim.decrypt(state.ct_beta)[0].copy()

    def train_encrypted(self, ds: Dataset, cfg: TrainConfig, shard: bool = True) -> Tuple[TrainedModel, RefreshReport]:
        """Client-side target transform, cloud-side iterations, client-side decryption."""
        if cfg.algorithm not in ENCRYPTED_ALGORITHMS:
            raise ConfigurationError(f"{cfg.algorithm.value} has no encrypted trainer")
        if cfg.algorithm == Algorithm.LFFR and cfg.sigmoid_kind != SigmoidKind.POLY3:
            logger.warning("Encrypted LFFR evaluates the degree-3 polynomial sigmoid; overriding sigmoid_kind")
            cfg = replace(cfg, sigmoid_kind=SigmoidKind.POLY3)

        scaler = None
        if cfg.algorithm == Algorithm.IMPROVED_LFFR:
            work, scaler = TrainerService.improved_lffr_targets(ds, cfg)
        elif cfg.algorithm == Algorithm.LFFR or cfg.normalize_targets:
            scaler = core.fit_target_scaler(ds.y, epsilon=cfg.epsilon)
            work = ds.with_targets(core.scale_target_unit(scaler, ds.y))
        else:
            work = ds

        levels = STEP_LEVELS[cfg.algorithm]
        if levels > self.params.initial_levels:
            raise ConfigurationError(
                f"{self.params.initial_levels} levels cannot cover one iteration costing {levels}"
            )
        self.report.levels_per_iteration = levels

        lffr = cfg.algorithm == Algorithm.LFFR
        b = lffr_sfh(work, cfg) if lffr else linear_sfh(work, cfg)
        step = self.encrypted_gradient_step_lffr if lffr else self.encrypted_gradient_step_linear
        state = self.pack_inputs(work, b, shard=shard)
        logger.info(
            f"Encrypted {cfg.algorithm.value}: {state.shards} ciphertext(s), "
            f"{levels} levels/iteration, {self.params.initial_levels} levels/budget"
        )

        trace: List[float] = []
        for k in range(cfg.iterations):
            self.sim.iteration = k
            state = step(state)
            # the trace is an observer's view: decrypt and evaluate in the clear
            beta = self.decrypt_weights(state)
            trace.append(
                core.l2_cost(work, beta, core.poly_sigmoid3) if lffr else core.l0_cost(work, beta)
            )

        weights = self.decrypt_weights(state)
        logger.info(
            f"Encrypted {cfg.algorithm.value} finished: {self.report.total_refreshes} refreshes, "
            f"{self.report.total_mults} multiplications"
        )
        model = TrainedModel(weights, cfg.algorithm, cfg, scaler, ds.feature_scaler, trace)
        return model, self.report
