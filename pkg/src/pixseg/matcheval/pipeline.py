"""End-to-end evaluation of one answer or of a whole dataset."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..data.records import split_of
from .matching import match_masks
from .metrics import aggregate, image_result
from .scoring import score_predictions, splice_descriptions


@dataclass
class Prediction:
    """A model answer: text with one placeholder per predicted mask."""

    answer: str
    masks: np.ndarray  # (K, H, W) binary


def evaluate_record(record, prediction: Prediction, scorer, soft: bool = False):
    gts = np.stack([t.binary() for t in record.targets]).astype(bool)
    preds = np.asarray(prediction.masks, dtype=bool).reshape((-1,) + gts.shape[1:])
    match = match_masks(preds, gts, shape=gts.shape[1:])
    text = splice_descriptions(prediction.answer, match, [t.description for t in record.targets])
    scores = score_predictions(text, match, scorer)
    result = image_result(record.record_id, split_of(record), preds, gts, match, scores, soft)
    return result, text


def evaluate_dataset(records, predictions, scorer, workers: int = 1, soft: bool = False, metadata=None):
    """Evaluate paired records and predictions, fanning out over ``workers`` threads."""
    pairs = list(zip(records, predictions))
    run = lambda pair: evaluate_record(pair[0], pair[1], scorer, soft)[0]  # noqa: E731
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, pairs))
    else:
        results = [run(p) for p in pairs]
    meta = {"step4": "soft_product" if soft else "hard_gate"}
    meta.update(metadata or {})
    return aggregate(results, meta)
