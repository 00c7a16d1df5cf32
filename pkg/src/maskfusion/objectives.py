"""Multi-target training losses: summed MSE over the IRM head, summed BCE
over the TBM head, and their alpha-weighted combination, with analytic
gradients with respect to the predictions.

Reductions are sums, not means; the trainer normalizes by batch size.
"""
from dataclasses import dataclass

import numpy as np

# Probabilities are clamped into [BCE_EPS, 1 - BCE_EPS] so the loss stays
# finite at saturated sigmoid outputs.
BCE_EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 0.1        # TBM head weight
    perceptual: float = 0.0   # must stay 0; perceptual loss is unsupported

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")
        if self.perceptual != 0:
            raise NotImplementedError(
                "perceptual loss requires an external quality-estimation "
                "network and is not supported; the weight must be 0"
            )


@dataclass(frozen=True)
class LossReport:
    irm_loss: float
    tbm_loss: float
    total: float
    grad_irm: np.ndarray
    grad_tbm: np.ndarray


def _check_same_shape(a, b, what):
    if a.shape != b.shape:
        raise ValueError(f"{what}: shape mismatch {a.shape} vs {b.shape}")


def mse_irm_loss(pred: np.ndarray, target: np.ndarray):
    """Summed squared error and its gradient 2 (pred - target)."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    _check_same_shape(pred, target, "mse_irm_loss")
    diff = pred - target
    return float(np.sum(diff**2)), 2.0 * diff


def bce_tbm_loss(pred: np.ndarray, target: np.ndarray):
    """Summed binary cross entropy and its gradient.

    Predictions are clamped into [eps, 1-eps]; bins that were clamped get
    zero gradient (the clamp is flat there).
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    _check_same_shape(pred, target, "bce_tbm_loss")
    p = np.clip(pred, BCE_EPS, 1.0 - BCE_EPS)
    loss = -np.sum(target * np.log(p) + (1.0 - target) * np.log1p(-p))
    grad = -target / p + (1.0 - target) / (1.0 - p)
    grad = np.where((pred > BCE_EPS) & (pred < 1.0 - BCE_EPS), grad, 0.0)
    return float(loss), grad


def combined_loss(pred_irm, pred_tbm, target_irm, target_tbm, w: LossWeights) -> LossReport:
    """Total loss mse + alpha * bce with gradients scaled to match."""
    mse, grad_irm = mse_irm_loss(pred_irm, target_irm)
    bce, grad_tbm = bce_tbm_loss(pred_tbm, target_tbm)
    return LossReport(
        irm_loss=mse,
        tbm_loss=bce,
        total=mse + w.alpha * bce,
        grad_irm=grad_irm,
        grad_tbm=w.alpha * grad_tbm,
    )
