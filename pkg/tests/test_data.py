import json

import numpy as np
import pytest

import oracles
from pixseg.data import (
    FilterRules,
    MuseRecord,
    RleMask,
    SceneConfig,
    compute_statistics,
    convert_multi_referring,
    decode,
    encode,
    filter_records,
    gen_synthetic,
    load_records,
    parse_answer,
    parse_question,
    save_records,
    split_records,
)
from pixseg.data.convert import load_annotations
from pixseg.data.records import dumps, make_target, scene_to_record, split_of
from pixseg.data.stats import histogram_text, token_count
from pixseg.data.synthetic import Shape, attributes_from_description, describe, make_scene
from pixseg.exceptions import ContractError, FormatError, GenerationError


def test_rle_small_cases():
    assert encode(np.zeros((2, 2))).counts == (4,)
    assert encode(np.ones((2, 2))).counts == (0, 4)


def test_rle_column_major_against_reference():
    rng = np.random.default_rng(0)
    for _ in range(20):
        m = rng.random((5, 7)) < 0.4
        assert list(encode(m).counts) == oracles.rle_counts(m.tolist())
        np.testing.assert_array_equal(decode(encode(m)), m)


def test_rle_bad_counts():
    with pytest.raises(FormatError):
        decode(RleMask(2, 2, (1, 2)))
    with pytest.raises(FormatError):
        RleMask.from_json({"size": [2, 2], "counts": "abc"})


def _annotation(rng, image_id, n_inst, size=6):
    instances = []
    for j in range(n_inst):
        mask = (rng.random((size, size)) < 0.5).astype(np.uint8)
        mask[j % size, 0] = 1
        instances.append({"description": f"object {image_id}-{j}", "mask": encode(mask).to_json(), "category": "thing"})
    return {"id": image_id, "image": f"{image_id}.png", "height": size, "width": size, "instances": instances}


def test_convert_templates():
    rng = np.random.default_rng(0)
    recs, _ = convert_multi_referring([_annotation(rng, "a", 1)], (1, 3), seed=0)
    assert recs[0].question == "Please segment the object a-0 in the image"
    assert recs[0].answer == "object a-0 is [SEG]."


def test_convert_distinct_and_skips_empty():
    rng = np.random.default_rng(1)
    anns = [_annotation(rng, "a", 5), {"id": "e", "image": "e.png", "height": 6, "width": 6, "instances": []}]
    recs, report = convert_multi_referring(anns, (3, 3), seed=4)
    assert len(recs) == 1 and recs[0].n_targets == 3
    assert len({t.description for t in recs[0].targets}) == 3
    assert report.skipped_empty == 1 and report.skipped_ids == ["e"]


def test_convert_order_contract_and_determinism(tmp_path):
    rng = np.random.default_rng(2)
    anns = [_annotation(rng, str(i), int(rng.integers(1, 6))) for i in range(20)]
    by_desc = {inst["description"]: inst for a in anns for inst in a["instances"]}
    recs, _ = convert_multi_referring(anns, seed=9)
    for r in recs:
        descs = [t.description for t in r.targets]
        assert parse_question(r.question) == descs == parse_answer(r.answer)
        for t in r.targets:
            assert t.mask.to_json() == by_desc[t.description]["mask"]
    save_records(recs, tmp_path / "a.jsonl")
    save_records(convert_multi_referring(anns, seed=9)[0], tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_convert_bad_k_range():
    with pytest.raises(ContractError):
        convert_multi_referring([], (0, 2))


def test_annotations_bad_json(tmp_path):
    p = tmp_path / "a.jsonl"
    p.write_text('{"id": 1}\n{oops\n')
    with pytest.raises(FormatError):
        load_annotations(p)


def test_record_roundtrip_bytes(tmp_path):
    scenes = gen_synthetic(5, seed=3)
    recs = [scene_to_record(s, f"r{i}", f"images/{i}.png") for i, s in enumerate(scenes)]
    save_records(recs, tmp_path / "r.jsonl")
    loaded = load_records(tmp_path / "r.jsonl")
    save_records(loaded, tmp_path / "r2.jsonl")
    assert (tmp_path / "r.jsonl").read_bytes() == (tmp_path / "r2.jsonl").read_bytes()
    for rec, scene in zip(loaded, scenes):
        np.testing.assert_array_equal(np.stack([t.binary() for t in rec.targets]), scene.masks)


def test_load_records_rejects_garbage(tmp_path):
    p = tmp_path / "r.jsonl"
    p.write_text('{"id": "x"}\n')
    with pytest.raises(FormatError):
        load_records(p)


def test_full_canvas_rectangle():
    cfg = SceneConfig(height=8, width=8)
    scene = make_scene([Shape("rectangle", "red", (0.0, 0.0, 8.0, 8.0), 0)], cfg)
    assert scene.masks.all()


def test_disjoint_shapes():
    cfg = SceneConfig(height=16, width=16)
    shapes = [Shape("rectangle", "red", (0.0, 0.0, 4.0, 4.0), 0), Shape("ellipse", "blue", (12.0, 12.0, 3.0, 3.0), 1)]
    scene = make_scene(shapes, cfg)
    assert not (scene.masks[0] & scene.masks[1]).any()
    assert np.logical_or(*scene.masks).sum() == scene.masks.sum()


def test_generated_masks_match_point_rasterizer():
    cfg = SceneConfig(height=32, width=32, min_targets=1, max_targets=6, min_size=6, max_size=18, min_visible=5)
    scenes = gen_synthetic(1000, cfg, seed=11)
    ks = [s.n_targets for s in scenes]
    assert 1 < np.mean(ks) < 6 and min(ks) == 1 and max(ks) == 6
    for s in scenes[:150]:
        owned = oracles.visible_pixels([(sh.kind, sh.geometry, sh.depth) for sh in s.shapes], 32, 32)
        for mask, pixels in zip(s.masks, owned):
            assert set(zip(*np.nonzero(mask))) == pixels
        assert s.masks.sum(axis=0).max() <= 1


def test_generation_is_seeded():
    a, b = gen_synthetic(3, seed=5), gen_synthetic(3, seed=5)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.image, y.image)
        assert x.descriptions == y.descriptions


def test_generation_failure_names_seed():
    cfg = SceneConfig(height=8, width=8, min_targets=4, max_targets=4, min_size=8, max_size=8, min_visible=40,
                      max_retries=3)
    with pytest.raises(GenerationError, match="seed=17"):
        gen_synthetic(1, cfg, seed=17)


def test_description_and_attributes():
    s = Shape("ellipse", "red", (8.0, 8.0, 4.0, 4.0), 0)
    assert describe(s, 64, 64) == "red ellipse in the top left"
    v = attributes_from_description("red ellipse in the top left")
    assert v[0] == 1.0 and v[7] == 1.0 and v[-2] == pytest.approx(1 / 6) and v[-1] == pytest.approx(1 / 6)


def _stat_record(rid, descs, category="cat"):
    masks = [np.eye(4, dtype=np.uint8) for _ in descs]
    targets = [make_target(d, m, category) for d, m in zip(descs, masks)]
    answer = ", ".join(f"{d} is [SEG]" for d in descs) + "."
    return MuseRecord(rid, f"{rid}.png", 4, 4, "q " + rid, answer, targets)


def test_statistics_hand_counts():
    assert token_count("a red kayak parked on the beach") == 7
    single = compute_statistics([_stat_record("x", ["one two", "three"])])
    assert single["target_count_histogram"] == {2: 1} and single["mean_targets"] == 2
    recs = [_stat_record(str(i), ["w"] * (1 + i % 4), "c%d" % (i % 2)) for i in range(10)]
    stats = compute_statistics(recs)
    # targets per record: 1,2,3,4,1,2,3,4,1,2
    assert stats["target_count_histogram"] == {1: 3, 2: 3, 3: 2, 4: 2}
    assert stats["instances"] == 23 and stats["max_targets"] == 4
    assert stats["instances_per_category"] == {"c0": 9, "c1": 14}
    assert stats["description_token_histogram"] == {1: 23}
    text = histogram_text(stats)
    assert "# target_count_histogram\n1 3\n2 3\n3 2\n4 2" in text


def test_filters():
    clean = [_stat_record(str(i), ["a", "b"][: 1 + i % 2]) for i in range(10)]
    kept, rejected = filter_records(clean, FilterRules(drop_duplicate_instances=False))
    assert len(kept) == 10 and not rejected
    empty = _stat_record("e", ["a"])
    empty.targets[0] = make_target("a", np.zeros((4, 4), dtype=np.uint8), "cat")
    mismatch = _stat_record("m", ["a"])
    mismatch.answer = "a is [SEG], b is [SEG]."
    blank = _stat_record("b", [" "])
    _, rejected = filter_records([empty, mismatch, blank])
    assert [reason for _, reason in rejected] == ["empty_mask", "placeholder_mismatch", "empty_description"]


def test_duplicate_filters():
    same_masks = _stat_record("d", ["a", "b"])
    first, repeat = _stat_record("r", ["c"]), _stat_record("r", ["c"])
    kept, rejected = filter_records([same_masks, first, repeat])
    assert kept == [first]
    assert [reason for _, reason in rejected] == ["duplicate_instance", "duplicate_record"]


def test_split_rules():
    assert split_of(_stat_record("a", list("abc"))) == "few"
    assert split_of(_stat_record("a", list("abcd"))) == "many"
    recs = [_stat_record(str(i), ["a"]) for i in range(100)]
    parts = split_records(recs, seed=0)
    assert sum(len(v) for v in parts.values()) == 100
    assert split_records(recs, seed=0) == parts


def test_record_serialisation_is_compact():
    line = dumps(_stat_record("x", ["a"]))
    assert ", " not in line.split('"question"')[0] and json.loads(line)["id"] == "x"
