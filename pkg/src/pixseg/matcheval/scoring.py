"""Description splicing and pluggable relevance scorers.

A scorer receives the spliced answer text and the number of predictions and
returns one raw integer score in 1..10 per prediction.  Two implementations
exist: an offline :class:`StubScorer` and :class:`RemoteScorer`, which speaks
the JSON-over-HTTP contract::

    POST {"text": str, "num_predictions": int}  ->  {"scores": [int, ...]}
"""

from __future__ import annotations

import math
import re
from concurrent.futures import ThreadPoolExecutor
from typing import Protocol, Sequence

import numpy as np

from ..data.records import PLACEHOLDER
from ..exceptions import ContractError, ScorerProtocolError, ScorerTransportError
from .matching import MatchResult

NO_MATCH = "(no match)"
_SLOT = re.compile(r"\(([^()]*)\)")


def splice_descriptions(template: str, match: MatchResult, gt_descriptions: Sequence[str], placeholder=PLACEHOLDER) -> str:
    """Replace the k-th placeholder with ``(description of the matched ground truth)``.

    Placeholders matched to a padded ground-truth slot become ``(no match)``.
    """
    n_slots = template.count(placeholder)
    n_preds = int((~match.pred_padded).sum())
    if n_slots != n_preds:
        raise ContractError(f"{n_slots} placeholders for {n_preds} predictions")
    if len(gt_descriptions) != int((~match.gt_padded).sum()):
        raise ContractError(f"{len(gt_descriptions)} descriptions for {int((~match.gt_padded).sum())} ground truths")
    gt_of = match.gt_for_prediction()
    pieces = template.split(placeholder)
    out = [pieces[0]]
    for k in range(n_slots):
        g = gt_of[k]
        out.append(NO_MATCH if match.gt_padded[g] else f"({gt_descriptions[g]})")
        out.append(pieces[k + 1])
    return "".join(out)


def spliced_slots(text: str) -> list[tuple[str, str]]:
    """``(claimed object, inserted description)`` per parenthesised slot, in order."""
    out = []
    last = 0
    for m in _SLOT.finditer(text):
        before = re.split(r"[,.;:]", text[last : m.start()])[-1].strip()
        if before.endswith(" is"):
            before = before[: -len(" is")]
        out.append((before.strip(), m.group(1).strip()))
        last = m.end()
    return out


class Scorer(Protocol):
    def score(self, text: str, num_predictions: int) -> list[int]: ...


def _words(s: str) -> set:
    return set(re.findall(r"[a-z0-9]+", s.lower()))


class StubScorer:
    """Deterministic offline scorer.

    ``const`` returns ``constant`` for every slot; ``exact`` returns 10 when
    the claimed object text equals the spliced description and 1 otherwise;
    ``jaccard`` maps word-set Jaccard overlap onto 1..10.
    """

    MODES = ("const", "exact", "jaccard")

    def __init__(self, mode: str = "exact", constant: int = 10):
        if mode not in self.MODES:
            raise ContractError(f"unknown stub mode {mode!r}, expected one of {self.MODES}")
        if not 1 <= constant <= 10:
            raise ContractError("constant score must lie in 1..10")
        self.mode = mode
        self.constant = constant

    def score(self, text: str, num_predictions: int) -> list[int]:
        if self.mode == "const":
            return [self.constant] * num_predictions
        slots = spliced_slots(text)
        if len(slots) != num_predictions:
            raise ScorerProtocolError(f"found {len(slots)} spliced slots, expected {num_predictions}")
        out = []
        for claim, inserted in slots:
            if self.mode == "exact":
                out.append(10 if claim == inserted else 1)
            else:
                a, b = _words(claim), _words(inserted)
                jac = len(a & b) / len(a | b) if a | b else 0.0
                out.append(max(1, min(10, math.ceil(10 * jac))))
        return out


class RemoteScorer:
    def __init__(self, endpoint: str, timeout: float = 30.0, client=None):
        import httpx

        self.endpoint = endpoint
        self.timeout = timeout
        self._client = client or httpx.Client(timeout=timeout)
        self._httpx = httpx

    def score(self, text: str, num_predictions: int) -> list[int]:
        try:
            resp = self._client.post(self.endpoint, json={"text": text, "num_predictions": int(num_predictions)})
        except self._httpx.TransportError as exc:
            raise ScorerTransportError(f"scorer at {self.endpoint} unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise ScorerProtocolError(f"scorer replied HTTP {resp.status_code}")
        try:
            scores = resp.json()["scores"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ScorerProtocolError(f"scorer reply is not {{'scores': [...]}}: {exc}") from None
        if not isinstance(scores, list) or len(scores) != num_predictions:
            raise ScorerProtocolError(f"expected {num_predictions} scores, got {scores!r}")
        for s in scores:
            if isinstance(s, bool) or not isinstance(s, int) or not 1 <= s <= 10:
                raise ScorerProtocolError(f"score {s!r} is not an integer in 1..10")
        return list(scores)

    def score_many(self, items, max_workers: int = 4) -> list[list[int]]:
        """Score ``(text, n)`` pairs with at most ``max_workers`` requests in flight."""
        with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
            return list(pool.map(lambda item: self.score(*item), items))


def score_predictions(modified_text: str, match: MatchResult, scorer: Scorer) -> np.ndarray:
    """Per ground-truth slot score in [0, 1]; any pair touching a padded slot scores 0."""
    n_preds = int((~match.pred_padded).sum())
    raw = scorer.score(modified_text, n_preds) if n_preds else []
    if len(raw) != n_preds:
        raise ScorerProtocolError(f"scorer returned {len(raw)} scores for {n_preds} predictions")
    scores = np.zeros(match.size)
    for i, k in match.pairs():
        if match.gt_padded[i] or match.pred_padded[k]:
            continue
        scores[i] = raw[k] / 10.0
    return scores
