"""Costs, gradients, Hessian substitutes and target transforms.

Every function here is pure: inputs are never mutated and no module state
is kept, so they can be called from any thread.
"""
import logging
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import special

from ..models.dataset import DEFAULT_EPSILON, Dataset, FeatureScaler, TargetScaler
from ..models.errors import ConfigurationError, DimensionError, DomainError
from ..models.regression import (
    LFFR_BOUND, LINEAR_BOUND, GradientVector, SfhDiagonal, SfhFlavor, WeightVector,
)

logger = logging.getLogger(__name__)

# least-squares fit of the sigmoid on [-5, 5]
POLY3_C0 = 0.5
POLY3_C1 = 0.19824
POLY3_C3 = -0.0044650

SigmoidFn = Callable[[np.ndarray], np.ndarray]


def _as_matrix(raw) -> np.ndarray:
    matrix = np.asarray(raw, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
        raise DimensionError(f"Expected a non-empty n x d matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise DimensionError("Matrix entries must be finite")
    return matrix


def _check_weights(ds: Dataset, w: WeightVector) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (ds.x.shape[1],):
        raise DimensionError(f"Weight vector of length {w.shape} does not match {ds.x.shape[1]} columns")
    return w


def _check_lambda(lam: float) -> None:
    if lam < 0:
        raise DomainError(f"Regularisation parameter must be non-negative, got {lam}")


# -- features -----------------------------------------------------------------

def augment_bias(raw) -> np.ndarray:
    """Prepend the bias column of ones."""
    matrix = _as_matrix(raw)
    return np.hstack([np.ones((matrix.shape[0], 1)), matrix])


def fit_feature_scaler(raw, lo: float = -1.0, hi: float = 1.0) -> FeatureScaler:
    matrix = _as_matrix(raw)
    scaler = FeatureScaler(mins=matrix.min(axis=0), maxs=matrix.max(axis=0), lo=lo, hi=hi)
    constant = np.flatnonzero(scaler.maxs == scaler.mins)
    if constant.size:
        logger.warning(f"Constant feature columns {constant.tolist()} mapped to the range midpoint")
    return scaler


def minmax_scale_features(raw, lo: float = -1.0, hi: float = 1.0) -> Tuple[np.ndarray, FeatureScaler]:
    """Scale each column onto [lo, hi]; returns the scaled matrix and its scaler."""
    scaler = fit_feature_scaler(raw, lo, hi)
    return scaler.transform(_as_matrix(raw)), scaler


def build_dataset(raw, y, lo: float = -1.0, hi: float = 1.0) -> Dataset:
    """Scale raw features, add the bias column and attach the targets."""
    scaled, scaler = minmax_scale_features(raw, lo, hi)
    return Dataset(
        x=augment_bias(scaled),
        y=np.asarray(y, dtype=np.float64),
        feature_range=(lo, hi),
        feature_scaler=scaler,
    )


# -- targets ------------------------------------------------------------------

def fit_target_scaler(y, gamma: Optional[float] = None, epsilon: float = DEFAULT_EPSILON) -> TargetScaler:
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        raise DimensionError("Cannot fit a target scaler on an empty vector")
    if not np.all(np.isfinite(y)):
        raise DimensionError("Targets must be finite")
    return TargetScaler(y_min=float(y.min()), y_max=float(y.max()), epsilon=epsilon, gamma=gamma)


def scale_target_unit(s: TargetScaler, y_i):
    """(y - y_min) / (y_max - y_min + eps); [y_min, y_max] lands in [0, 1)."""
    return (np.asarray(y_i, dtype=np.float64) - s.y_min) / s.span


def unscale_target_unit(s: TargetScaler, prob):
    return s.span * np.asarray(prob, dtype=np.float64) + s.y_min


def _require_gamma(s: TargetScaler) -> float:
    if s.gamma is None:
        raise ConfigurationError("This transform needs a target scaler fitted with gamma")
    return s.gamma


def logit_scale_target(s: TargetScaler, y_i):
    """Logit of the unit-scaled target squeezed into [0.5 - gamma/2, 0.5 + gamma/2]."""
    gamma = _require_gamma(s)
    return logit(scale_target_unit(s, y_i) * gamma + 0.5 - gamma / 2)


def logit_unscale_target(s: TargetScaler, prob):
    """Inverse of the windowed map; probabilities outside the window extrapolate."""
    gamma = _require_gamma(s)
    return s.span * (np.asarray(prob, dtype=np.float64) - 0.5 + gamma / 2) / gamma + s.y_min


# -- link functions -----------------------------------------------------------

def sigmoid(z):
    return special.expit(np.asarray(z, dtype=np.float64))


def logit(p):
    p = np.asarray(p, dtype=np.float64)
    if np.any(~((p > 0.0) & (p < 1.0))):
        raise DomainError("logit is only defined on the open interval (0, 1)")
    return special.logit(p)


def poly_sigmoid3(z):
    """Degree-3 polynomial stand-in for the sigmoid, accurate on [-5, 5]."""
    z = np.asarray(z, dtype=np.float64)
    return POLY3_C1 * z + POLY3_C3 * (z * z * z) + POLY3_C0


def lffr_hessian_weight(sigma, y):
    """Per-sample weight of the LFFR Hessian X^T S X."""
    sigma = np.asarray(sigma, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return (4 * sigma - 6 * sigma ** 2 - 2 * y + 4 * y * sigma) * sigma * (1 - sigma)


def lffr_hessian_weight_bound(step: float = 1e-3) -> Tuple[float, float, float]:
    """Grid maximum of the Hessian weight over [0, 1]^2 as (max, sigma, y)."""
    grid = np.linspace(0.0, 1.0, int(round(1.0 / step)) + 1)
    sigma, y = np.meshgrid(grid, grid, indexing="ij")
    values = lffr_hessian_weight(sigma, y)
    i, j = np.unravel_index(np.argmax(values), values.shape)
    return float(values[i, j]), float(grid[i]), float(grid[j])


# -- costs and gradients ------------------------------------------------------

def l0_cost(ds: Dataset, w: WeightVector) -> float:
    residual = ds.x @ _check_weights(ds, w) - ds.y
    return float(residual @ residual)


def l0_gradient(ds: Dataset, w: WeightVector) -> GradientVector:
    residual = ds.x @ _check_weights(ds, w) - ds.y
    return ds.x.T @ (2.0 * residual)


def _penalty_mask(size: int, penalize_bias: bool) -> np.ndarray:
    mask = np.ones(size)
    if not penalize_bias:
        mask[0] = 0.0
    return mask


def l1_cost(ds: Dataset, w: WeightVector, lam: float, penalize_bias: bool = True) -> float:
    _check_lambda(lam)
    w = _check_weights(ds, w)
    residual = ds.x @ w - ds.y
    penalty = _penalty_mask(w.size, penalize_bias) * w * w
    return float(0.5 * (residual @ residual) + 0.5 * lam * penalty.sum())


def l1_gradient(ds: Dataset, w: WeightVector, lam: float, penalize_bias: bool = True) -> GradientVector:
    """Ridge gradient lam*beta + sum_i (beta.x_i - y_i) x_i."""
    _check_lambda(lam)
    w = _check_weights(ds, w)
    residual = ds.x @ w - ds.y
    return lam * _penalty_mask(w.size, penalize_bias) * w + ds.x.T @ residual


def l2_cost(ds: Dataset, w: WeightVector, sigmoid_fn: SigmoidFn = sigmoid) -> float:
    residual = sigmoid_fn(ds.x @ _check_weights(ds, w)) - ds.y
    return float(residual @ residual)


def l2_gradient(ds: Dataset, w: WeightVector, sigmoid_fn: SigmoidFn = sigmoid) -> GradientVector:
    s = sigmoid_fn(ds.x @ _check_weights(ds, w))
    weight = 2.0 * (s - ds.y) * s * (1.0 - s)
    return ds.x.T @ weight


# -- simplified fixed Hessians ------------------------------------------------

def _abs_cross_sums(x: np.ndarray) -> np.ndarray:
    # sum_j sum_i |x_ij x_ik| for every k
    a = np.abs(x)
    return a.T @ a.sum(axis=1)


def sfh_linear(ds: Dataset, epsilon: float = DEFAULT_EPSILON) -> SfhDiagonal:
    return SfhDiagonal.from_diag(epsilon + LINEAR_BOUND * _abs_cross_sums(ds.x), SfhFlavor.LINEAR)


def sfh_ridge(ds: Dataset, lam: float, epsilon: float = DEFAULT_EPSILON) -> SfhDiagonal:
    """|lam * 1[k != 0] + sum_j sum_i x_ij x_ik| + eps; the bias is not penalised."""
    _check_lambda(lam)
    signed = ds.x.T @ ds.x.sum(axis=1)
    penalty = _penalty_mask(signed.size, penalize_bias=False) * lam
    return SfhDiagonal.from_diag(np.abs(penalty + signed) + epsilon, SfhFlavor.RIDGE)


def sfh_lffr(ds: Dataset, epsilon: float = DEFAULT_EPSILON) -> SfhDiagonal:
    return SfhDiagonal.from_diag(epsilon + LFFR_BOUND * _abs_cross_sums(ds.x), SfhFlavor.LFFR)


def sfh_from_hessian(h_bar: np.ndarray, flavor: SfhFlavor, epsilon: float = DEFAULT_EPSILON) -> SfhDiagonal:
    """Absolute row sums of a Hessian bound, e.g. 2 X^T X or 0.155 X^T X."""
    h_bar = np.asarray(h_bar, dtype=np.float64)
    if h_bar.ndim != 2 or h_bar.shape[0] != h_bar.shape[1]:
        raise DimensionError(f"Hessian bound must be square, got {h_bar.shape}")
    return SfhDiagonal.from_diag(epsilon + np.abs(h_bar).sum(axis=1), flavor)


def sfh_update(w: WeightVector, g: GradientVector, b: SfhDiagonal, sign: int = -1) -> WeightVector:
    """w + sign * B^-1 g; sign -1 is descent and is what every trainer uses."""
    if sign not in (-1, 1):
        raise DomainError(f"sign must be +1 or -1, got {sign}")
    w = np.asarray(w, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if not w.shape == g.shape == b.inv_diag.shape:
        raise DimensionError(f"Shapes differ: weights {w.shape}, gradient {g.shape}, diagonal {b.inv_diag.shape}")
    if sign == 1:
        logger.warning("Applying the ascent form of the SFH update; the cost will not decrease")
    return w + sign * (b.inv_diag * g)
