"""Mask-side training objectives.

All functions take predicted *probabilities* (already passed through a
sigmoid) and binary targets.  ``preds`` for multi-target losses are stacked
as ``(K, H, W)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ContractError, DimensionError
from .numeric import Tensor, as_tensor, clip, log, mean, mul, sum_
from .numeric import tensor as T

PROB_EPS = 1e-7
DICE_SMOOTH = 1.0


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 2.0
    lambda_ref: float = 2.0
    lambda_dice: float = 0.5

    def __post_init__(self):
        if self.alpha < 1:
            raise ContractError(f"alpha must be >= 1, got {self.alpha}")
        if self.lambda_ref < 0 or self.lambda_dice < 0:
            raise ContractError("loss weights must be non-negative")


def _same_shape(name, pred, target):
    if pred.shape != target.shape:
        raise DimensionError(f"{name}: prediction shape {pred.shape} != target shape {target.shape}")


def bce_per_pixel(pred, target) -> Tensor:
    """Elementwise binary cross-entropy, probabilities clamped to [eps, 1-eps]."""
    pred = as_tensor(pred)
    target = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=np.float64)
    _same_shape("bce_per_pixel", pred, target)
    p = clip(pred, PROB_EPS, 1.0 - PROB_EPS)
    return -(target * log(p) + (1.0 - target) * log(1.0 - p))


def dice_loss(pred, target) -> Tensor:
    """Soft DICE ``1 - (2 sum(p y) + s) / (sum p + sum y + s)`` with s = 1.

    Leading axes before the last two are treated as separate masks and the
    per-mask losses are averaged.
    """
    pred = as_tensor(pred)
    target = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=np.float64)
    _same_shape("dice_loss", pred, target)
    if pred.ndim < 2:
        raise DimensionError(f"dice_loss expects (..., H, W) masks, got {pred.shape}")
    axes = (-2, -1)
    inter = sum_(mul(pred, target), axis=axes)
    denom = sum_(pred, axis=axes) + target.sum(axis=axes) + DICE_SMOOTH
    per_mask = 1.0 - (2.0 * inter + DICE_SMOOTH) / denom
    return mean(per_mask) if per_mask.ndim else per_mask


def refinement_weight_map(preds, alpha: float) -> np.ndarray:
    """Pixel weights: ``alpha`` where two or more predictions exceed 0.5, else 1."""
    arr = np.asarray(preds.data if isinstance(preds, Tensor) else preds, dtype=np.float64)
    if arr.ndim != 3:
        raise DimensionError(f"refinement_weight_map expects (K, H, W), got {arr.shape}")
    if arr.shape[0] == 0:
        raise ContractError("refinement_weight_map needs at least one prediction")
    votes = (arr > 0.5).sum(axis=0)
    return np.where(votes >= 2, float(alpha), 1.0)


def target_refinement_loss(preds, targets, alpha: float = 2.0) -> Tensor:
    """Overlap-weighted BCE averaged over K*H*W; the weight map is not differentiated."""
    preds = as_tensor(preds)
    targets = np.asarray(targets, dtype=np.float64)
    if preds.ndim != 3 or targets.ndim != 3:
        raise DimensionError(f"target_refinement_loss expects (K, H, W), got {preds.shape} and {targets.shape}")
    if preds.shape[0] != targets.shape[0]:
        raise DimensionError(f"target_refinement_loss: {preds.shape[0]} predictions vs {targets.shape[0]} targets")
    weights = refinement_weight_map(preds.data, alpha)
    return mean(mul(bce_per_pixel(preds, targets), weights))


def total_mask_loss(preds, targets, weights: LossWeights = LossWeights()) -> Tensor:
    """``lambda_ref * L_ref + lambda_dice * L_dice`` over one set of K targets."""
    preds = as_tensor(preds)
    ref = target_refinement_loss(preds, targets, weights.alpha)
    dice = dice_loss(preds, targets)
    return T.add(T.scale(ref, weights.lambda_ref), T.scale(dice, weights.lambda_dice))


def batched_mask_loss(preds, targets, groups, weights: LossWeights = LossWeights()):
    """Mean over groups of :func:`total_mask_loss`, computed in one vectorised pass.

    ``groups[i]`` names the scene that target ``i`` belongs to.  The overlap
    map is formed per scene.  Returns ``(loss, parts)`` where ``parts`` holds
    the group-averaged ``ref`` and ``dice`` values as floats.
    """
    preds = as_tensor(preds)
    targets = np.asarray(targets, dtype=np.float64)
    groups = np.asarray(groups)
    _same_shape("batched_mask_loss", preds, targets)
    _, inverse, counts = np.unique(groups, return_inverse=True, return_counts=True)
    n_groups = counts.size
    hw = preds.shape[-1] * preds.shape[-2]

    binar = (preds.data > 0.5).astype(np.float64)
    votes = np.zeros((n_groups,) + preds.shape[1:])
    np.add.at(votes, inverse, binar)
    amap = np.where(votes[inverse] >= 2, weights.alpha, 1.0)
    # each target carries 1 / (K_g * H * W * n_groups)
    per_target = 1.0 / (counts[inverse] * n_groups)

    bce = bce_per_pixel(preds, targets)
    ref = sum_(mul(bce, amap * (per_target / hw)[:, None, None]))

    axes = (-2, -1)
    inter = sum_(mul(preds, targets), axis=axes)
    denom = sum_(preds, axis=axes) + targets.sum(axis=axes) + DICE_SMOOTH
    dice_each = 1.0 - (2.0 * inter + DICE_SMOOTH) / denom
    dice = sum_(mul(dice_each, per_target))

    loss = T.add(T.scale(ref, weights.lambda_ref), T.scale(dice, weights.lambda_dice))
    return loss, {"ref": ref.item(), "dice": dice.item()}
