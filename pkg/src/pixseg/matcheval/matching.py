"""Bipartite matching of predicted and ground-truth masks with empty-set padding."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..exceptions import ContractError, DimensionError
from ..losses import DICE_SMOOTH, PROB_EPS
from ..validation import check_binary_mask, check_mask_stack


# clamped BCE of a binary prediction: agreeing pixel, false positive, false negative
_BCE_OK = -math.log(1.0 - PROB_EPS)
_BCE_FP = -math.log(1.0 - (1.0 - PROB_EPS))
_BCE_FN = -math.log(PROB_EPS)


def pair_cost(gt, pred) -> float:
    """Mean clamped BCE of binary ``pred`` against binary ``gt``, plus soft DICE.

    Binary inputs make both terms functions of the confusion counts, so the
    cost is evaluated from those counts.  BCE is asymmetric in its
    arguments (false positives and negatives clamp differently); DICE is not.
    """
    g = check_binary_mask(gt, "gt")
    p = check_binary_mask(pred, "pred")
    if g.shape != p.shape:
        raise DimensionError(f"pair_cost: mask shapes {g.shape} and {p.shape} differ")
    n = g.size
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    tn = n - tp - fp - fn
    bce = (_BCE_OK * (tp + tn) + _BCE_FP * fp + _BCE_FN * fn) / n
    dice = 1.0 - (2.0 * tp + DICE_SMOOTH) / ((tp + fp) + (tp + fn) + DICE_SMOOTH)
    return bce + dice


def cost_matrix(gts: np.ndarray, preds: np.ndarray) -> np.ndarray:
    """``pair_cost`` for every (ground-truth row, prediction column) pair."""
    return np.array([[pair_cost(g, p) for p in preds] for g in gts]).reshape(len(gts), len(preds))


@dataclass
class MatchResult:
    size: int
    assignment: np.ndarray  # assignment[i] = prediction slot matched to ground-truth slot i
    costs: np.ndarray  # (P, P), rows ground truth, columns predictions
    gt_padded: np.ndarray  # bool (P,)
    pred_padded: np.ndarray  # bool (P,)

    @property
    def total_cost(self) -> float:
        return math.fsum(self.costs[i, self.assignment[i]] for i in range(self.size))

    def pairs(self):
        """Yield ``(gt_slot, pred_slot)`` for every ground-truth slot in order."""
        for i in range(self.size):
            yield i, int(self.assignment[i])

    def gt_for_prediction(self) -> np.ndarray:
        inv = np.empty(self.size, dtype=np.intp)
        inv[self.assignment] = np.arange(self.size)
        return inv


def pad_masks(masks: np.ndarray, size: int) -> np.ndarray:
    if masks.shape[0] >= size:
        return masks
    pad = np.zeros((size - masks.shape[0],) + masks.shape[1:], dtype=masks.dtype)
    return np.concatenate([masks, pad])


def match_masks(preds, gts, shape=None) -> MatchResult:
    """Minimum-cost assignment after padding the smaller set with empty masks."""
    preds_l = preds if isinstance(preds, np.ndarray) else list(preds)
    gts_l = gts if isinstance(gts, np.ndarray) else list(gts)
    if len(preds_l) == 0 and len(gts_l) == 0:
        raise ContractError("match_masks needs at least one prediction or ground truth")
    if shape is None:
        ref = preds_l[0] if len(preds_l) else gts_l[0]
        shape = np.asarray(ref).shape
    p = check_mask_stack(preds_l, "preds", shape)
    g = check_mask_stack(gts_l, "gts", shape)
    size = max(p.shape[0], g.shape[0])
    costs = cost_matrix(pad_masks(g, size), pad_masks(p, size))
    rows, cols = linear_sum_assignment(costs)
    assignment = np.empty(size, dtype=np.intp)
    assignment[rows] = cols
    return MatchResult(
        size=size,
        assignment=assignment,
        costs=costs,
        gt_padded=np.arange(size) >= g.shape[0],
        pred_padded=np.arange(size) >= p.shape[0],
    )
