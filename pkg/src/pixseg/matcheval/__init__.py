"""Multi-target evaluation: matching, description splicing, scoring, gIoU/cIoU."""

from .matching import MatchResult, match_masks, pair_cost
from .metrics import EvalReport, ImageResult, aggregate, gated_iou
from .pipeline import Prediction, evaluate_dataset, evaluate_record
from .scoring import NO_MATCH, RemoteScorer, StubScorer, score_predictions, splice_descriptions

__all__ = [
    "NO_MATCH",
    "EvalReport",
    "ImageResult",
    "MatchResult",
    "Prediction",
    "RemoteScorer",
    "StubScorer",
    "aggregate",
    "evaluate_dataset",
    "evaluate_record",
    "gated_iou",
    "match_masks",
    "pair_cost",
    "score_predictions",
    "splice_descriptions",
]
