"""Score-gated IoU, per-image aggregation and split-level gIoU / cIoU."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..validation import check_mask_stack

GATE = 0.5
SPLITS = ("few", "many", "overall")


def gated_counts(pred, gt, s: float, soft: bool = False) -> tuple[float, float]:
    """``(intersection, union)`` after gating; soft mode scales the intersection by ``s``."""
    p = np.asarray(pred, dtype=bool)
    g = np.asarray(gt, dtype=bool)
    inter = float(np.logical_and(p, g).sum())
    union = float(np.logical_or(p, g).sum())
    if soft:
        inter *= float(s)
    elif s <= GATE:
        inter = 0.0
    return inter, union


def gated_iou(pred, gt, s: float, soft: bool = False) -> float:
    inter, union = gated_counts(pred, gt, s, soft)
    if union == 0:
        # both empty
        if soft:
            return float(s)
        return 1.0 if s > GATE else 0.0
    return inter / union


@dataclass
class ImageResult:
    image_id: str
    split: str
    ious: list
    scores: list
    intersections: list
    unions: list

    @property
    def size(self) -> int:
        return len(self.ious)

    @property
    def iou_img(self) -> float:
        return float(sum(self.ious) / len(self.ious))

    def to_json(self) -> dict:
        return {
            "id": self.image_id,
            "split": self.split,
            "P": self.size,
            "iou_img": self.iou_img,
            "ious": [float(v) for v in self.ious],
            "scores": [float(v) for v in self.scores],
            "intersections": [float(v) for v in self.intersections],
            "unions": [float(v) for v in self.unions],
        }


def image_result(image_id, split, preds, gts, match, scores, soft=False) -> ImageResult:
    """Gated IoU for each matched slot; padded masks are all-zero."""
    shape = np.asarray(preds[0] if len(preds) else gts[0]).shape
    p = check_mask_stack(preds, "preds", shape)
    g = check_mask_stack(gts, "gts", shape)
    empty = np.zeros(shape, dtype=bool)
    ious, inters, unions = [], [], []
    for i, k in match.pairs():
        gm = empty if match.gt_padded[i] else g[i]
        pm = empty if match.pred_padded[k] else p[k]
        inter, union = gated_counts(pm, gm, scores[i], soft)
        ious.append(gated_iou(pm, gm, scores[i], soft))
        inters.append(inter)
        unions.append(union)
    return ImageResult(str(image_id), split, ious, [float(s) for s in scores], inters, unions)


@dataclass
class EvalReport:
    images: list
    splits: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "metadata": dict(self.metadata),
            "splits": {k: self.splits[k] for k in SPLITS if k in self.splits},
            "images": [r.to_json() for r in self.images],
        }


def _split_summary(results) -> dict:
    inter = sum(sum(r.intersections) for r in results)
    union = sum(sum(r.unions) for r in results)
    return {
        "images": len(results),
        "gIoU": float(np.mean([r.iou_img for r in results])),
        "cIoU": float(inter / union) if union > 0 else 1.0,
    }


def aggregate(results, metadata=None) -> EvalReport:
    """gIoU (mean per-image IoU) and cIoU (cumulative ratio) per split; empty splits are omitted."""
    results = list(results)
    splits = {}
    for name in SPLITS:
        chosen = results if name == "overall" else [r for r in results if r.split == name]
        if chosen:
            splits[name] = _split_summary(chosen)
    return EvalReport(results, splits, dict(metadata or {}))
