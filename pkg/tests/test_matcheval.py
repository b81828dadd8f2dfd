
import httpx
import numpy as np
import pytest

import oracles
from pixseg.data.records import MuseRecord, make_target
from pixseg.exceptions import ContractError, ScorerProtocolError, ScorerTransportError
from pixseg.matcheval import (
    NO_MATCH,
    ImageResult,
    Prediction,
    RemoteScorer,
    StubScorer,
    aggregate,
    evaluate_dataset,
    evaluate_record,
    gated_iou,
    match_masks,
    pair_cost,
    score_predictions,
    splice_descriptions,
)


def _blob(shape, r0, r1, c0, c1):
    m = np.zeros(shape, dtype=np.uint8)
    m[r0:r1, c0:c1] = 1
    return m


A = _blob((6, 6), 0, 3, 0, 3)
B = _blob((6, 6), 3, 6, 3, 6)
C = _blob((6, 6), 0, 2, 4, 6)


def test_identical_pair_cost_near_zero():
    assert 0.0 <= pair_cost(A, A) <= 2e-7


def test_pair_cost_matches_scalar_reference():
    assert pair_cost(A, B) == pytest.approx(oracles.scalar_pair_cost(A.tolist(), B.tolist()), abs=1e-12)


def test_single_pair_is_identity():
    m = match_masks([A], [B])
    assert m.assignment.tolist() == [0]


def test_swapped_predictions_are_unswapped():
    m = match_masks([B, A], [A, B])
    assert m.assignment.tolist() == [1, 0]
    assert list(m.pairs()) == [(0, 1), (1, 0)]


def test_padding_both_directions():
    m = match_masks([A], [C, A])
    assert m.size == 2 and m.pred_padded.tolist() == [False, True]
    assert m.assignment[1] == 0
    m = match_masks([C, A], [A])
    assert m.gt_padded.tolist() == [False, True]
    assert m.assignment[0] == 1


def test_match_needs_something():
    with pytest.raises(ContractError):
        match_masks([], [])


def test_total_cost_equals_brute_force_small():
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = (rng.random((int(rng.integers(0, 4)), 4, 4)) < 0.5).astype(np.uint8)
        g = (rng.random((int(rng.integers(1, 4)), 4, 4)) < 0.5).astype(np.uint8)
        m = match_masks(list(p), list(g), shape=(4, 4))
        assert m.total_cost == oracles.brute_force_min_cost(p.tolist(), g.tolist())


def test_splice_single_and_no_placeholder():
    m = match_masks([A], [A])
    text = splice_descriptions("I found the kayak [SEG] near the shore.", m, ["a red kayak parked on the beach"])
    assert text == "I found the kayak (a red kayak parked on the beach) near the shore."
    m0 = match_masks([], [A])
    assert splice_descriptions("Nothing here.", m0, ["x"]) == "Nothing here."


def test_splice_swapped_and_unmatched():
    m = match_masks([B, A], [A, B])
    assert splice_descriptions("[SEG] and [SEG]", m, ["first", "second"]) == "(second) and (first)"
    m = match_masks([A, C], [A])
    assert splice_descriptions("[SEG] [SEG]", m, ["only"]) == f"(only) {NO_MATCH}"


def test_splice_count_mismatch():
    with pytest.raises(ContractError):
        splice_descriptions("[SEG]", match_masks([A, B], [A, B]), ["a", "b"])


def test_scores_normalised_and_padded_zero():
    m = match_masks([A], [A, B])
    text = splice_descriptions("a is [SEG].", m, ["a", "b"])
    scores = score_predictions(text, m, StubScorer("const", 7))
    assert scores.tolist() == [0.7, 0.0]


def test_stub_modes():
    text = "red box (red box), blue box (green ellipse)"
    assert StubScorer("exact").score(text, 2) == [10, 1]
    assert StubScorer("jaccard").score(text, 2) == [10, 1]
    with pytest.raises(ContractError):
        StubScorer("oracle")


def test_gated_iou_values():
    full = np.ones((2, 2), dtype=bool)
    assert gated_iou(full, full, 1.0) == 1.0
    assert gated_iou(full, full, 0.4) == 0.0
    assert gated_iou(full, full, 0.4, soft=True) == pytest.approx(0.4)


@pytest.mark.parametrize("fixture", oracles.IMAGE_FIXTURES)
def test_image_fixture(fixture):
    ious = []
    for inter, union, s in fixture["slots"]:
        pred, gt = oracles.masks_for_counts(inter, union)
        ious.append(gated_iou(np.array(pred), np.array(gt), s))
    assert ImageResult("x", "few", ious, [], [], []).iou_img == fixture["iou_img"]


def _fixture_results():
    results = []
    for name, (split, slots) in oracles.SPLIT_FIXTURE["images"].items():
        ious, inters, unions = [], [], []
        for inter, union, s in slots:
            pred, gt = (np.array(a) for a in oracles.masks_for_counts(inter, union))
            ious.append(gated_iou(pred, gt, s))
            inters.append(inter if s > 0.5 else 0)
            unions.append(union)
        results.append(ImageResult(name, split, ious, [s for *_, s in slots], inters, unions))
    return results


def test_split_fixture():
    report = aggregate(_fixture_results())
    for split, want in oracles.SPLIT_FIXTURE["expected"].items():
        assert report.splits[split]["gIoU"] == want["gIoU"]
        assert report.splits[split]["cIoU"] == want["cIoU"]


def _record(rid, masks, descs):
    targets = [make_target(d, m, "shape") for d, m in zip(descs, masks)]
    answer = ", ".join(f"{d} is [SEG]" for d in descs) + "."
    return MuseRecord(rid, "img.png", 6, 6, "q", answer, targets)


def test_perfect_dataset_scores_one():
    recs = [_record("r1", [A, B], ["left box", "right box"]), _record("r2", [A, B, C, A * 0 + C], list("wxyz"))]
    preds = [Prediction(r.answer, np.stack([t.binary() for t in r.targets])) for r in recs]
    report = evaluate_dataset(recs, preds, StubScorer("exact"))
    assert report.splits["overall"] == {"images": 2, "gIoU": 1.0, "cIoU": 1.0}
    assert report.splits["few"]["images"] == 1 and report.splits["many"]["images"] == 1
    assert report.metadata["step4"] == "hard_gate"
    soft = evaluate_dataset(recs, preds, StubScorer("exact"), soft=True, workers=2)
    assert soft.metadata["step4"] == "soft_product"


def test_three_targets_are_few():
    rec = _record("r", [A, B, C], ["a", "b", "c"])
    result, _ = evaluate_record(rec, Prediction(rec.answer, np.stack([A, B, C])), StubScorer("const"))
    assert result.split == "few"


def test_missing_prediction_scores_zero():
    rec = _record("r", [A, B], ["a", "b"])
    result, text = evaluate_record(rec, Prediction("a is [SEG].", A[None]), StubScorer("exact"))
    assert text == "a is (a)."
    assert result.ious == [1.0, 0.0]


def _client(handler):
    return httpx.Client(transport=httpx.MockTransport(handler))


def test_remote_scorer_roundtrip():
    seen = []

    def handler(request):
        seen.append(request.read())
        return httpx.Response(200, json={"scores": [8, 3]})

    scorer = RemoteScorer("http://scorer.test/score", client=_client(handler))
    assert scorer.score("t", 2) == [8, 3]
    assert b'"num_predictions":2' in seen[0].replace(b" ", b"")
    assert scorer.score_many([("t", 2), ("u", 2)], max_workers=2) == [[8, 3], [8, 3]]


@pytest.mark.parametrize("reply", [{"scores": [11]}, {"nope": 1}, {"scores": [1, 2]}, {"scores": [True]}])
def test_remote_scorer_bad_reply(reply):
    scorer = RemoteScorer("http://scorer.test", client=_client(lambda r: httpx.Response(200, json=reply)))
    with pytest.raises(ScorerProtocolError):
        scorer.score("t", 1)


def test_remote_scorer_unreachable():
    def handler(request):
        raise httpx.ConnectError("refused")

    with pytest.raises(ScorerTransportError):
        RemoteScorer("http://scorer.test", client=_client(handler)).score("t", 1)
