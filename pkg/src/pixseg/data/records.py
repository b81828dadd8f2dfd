"""MUSE-style question/answer records stored as JSON Lines.

One record per line.  Keys are written in a fixed order with compact
separators, so loading and re-saving a file reproduces it byte for byte.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..exceptions import ContractError, FormatError
from .rle import RleMask, decode, encode

PLACEHOLDER = "[SEG]"


@dataclass
class Target:
    description: str
    mask: RleMask
    bbox: tuple  # x, y, w, h
    category: str

    def to_json(self) -> dict:
        return {
            "description": self.description,
            "category": self.category,
            "bbox": [float(v) for v in self.bbox],
            "mask": self.mask.to_json(),
        }

    @classmethod
    def from_json(cls, obj) -> "Target":
        try:
            return cls(
                description=str(obj["description"]),
                mask=RleMask.from_json(obj["mask"]),
                bbox=tuple(float(v) for v in obj["bbox"]),
                category=str(obj["category"]),
            )
        except KeyError as exc:
            raise FormatError(f"target is missing field {exc}") from None

    def binary(self) -> np.ndarray:
        return decode(self.mask)


@dataclass
class MuseRecord:
    record_id: str
    image: str
    height: int
    width: int
    question: str
    answer: str
    targets: list = field(default_factory=list)

    @property
    def n_targets(self) -> int:
        return len(self.targets)

    def placeholder_count(self) -> int:
        return self.answer.count(PLACEHOLDER)

    def validate(self) -> None:
        if not self.targets:
            raise ContractError(f"record {self.record_id}: no targets")
        if self.placeholder_count() != len(self.targets):
            raise ContractError(
                f"record {self.record_id}: {self.placeholder_count()} placeholders for {len(self.targets)} targets"
            )
        for t in self.targets:
            if (t.mask.height, t.mask.width) != (self.height, self.width):
                raise ContractError(f"record {self.record_id}: mask size differs from image size")
            t.mask.validate()

    def to_json(self) -> dict:
        return {
            "id": self.record_id,
            "image": self.image,
            "height": self.height,
            "width": self.width,
            "question": self.question,
            "answer": self.answer,
            "targets": [t.to_json() for t in self.targets],
        }

    @classmethod
    def from_json(cls, obj) -> "MuseRecord":
        try:
            return cls(
                record_id=str(obj["id"]),
                image=str(obj["image"]),
                height=int(obj["height"]),
                width=int(obj["width"]),
                question=str(obj["question"]),
                answer=str(obj["answer"]),
                targets=[Target.from_json(t) for t in obj["targets"]],
            )
        except (KeyError, TypeError) as exc:
            raise FormatError(f"malformed record: {exc}") from None


def mask_bbox(mask) -> tuple:
    """Tight (x, y, w, h) box around the set pixels; zeros for an empty mask."""
    m = np.asarray(mask, dtype=bool)
    ys, xs = np.nonzero(m)
    if ys.size == 0:
        return (0.0, 0.0, 0.0, 0.0)
    return (float(xs.min()), float(ys.min()), float(xs.max() - xs.min() + 1), float(ys.max() - ys.min() + 1))


def make_target(description, mask, category) -> Target:
    m = np.asarray(mask, dtype=np.uint8)
    return Target(description, encode(m), mask_bbox(m), category)


def dumps(record: MuseRecord) -> str:
    return json.dumps(record.to_json(), ensure_ascii=False, separators=(",", ":"))


def save_records(records, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(dumps(r))
            fh.write("\n")
    os.replace(tmp, path)


def load_records(path) -> list[MuseRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            out.append(MuseRecord.from_json(obj))
    return out


def split_of(record: MuseRecord) -> str:
    """Test sub-split by target count: three or fewer is 'few', more is 'many'."""
    return "few" if record.n_targets <= 3 else "many"


def split_records(records, fractions=(0.9, 0.05, 0.05), seed=0) -> dict:
    """Seeded random partition into train/val/test."""
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) < 0:
        raise ContractError(f"split fractions must be three non-negative numbers summing to 1, got {fractions}")
    records = list(records)
    order = np.random.default_rng(seed).permutation(len(records))
    n_train = int(round(fractions[0] * len(records)))
    n_val = int(round(fractions[1] * len(records)))
    pick = lambda idx: [records[i] for i in sorted(idx)]  # noqa: E731
    return {
        "train": pick(order[:n_train]),
        "val": pick(order[n_train : n_train + n_val]),
        "test": pick(order[n_train + n_val :]),
    }


def scene_to_record(scene, record_id: str, image_ref: str) -> MuseRecord:
    """Multi-referring record for a synthetic scene, targets in scene order."""
    from .convert import answer_text, question_text

    descs = list(scene.descriptions)
    h, w = scene.masks.shape[1:]
    targets = [make_target(d, m, f"{s.color} {s.kind}") for d, m, s in zip(descs, scene.masks, scene.shapes)]
    return MuseRecord(record_id, image_ref, int(h), int(w), question_text(descs), answer_text(descs), targets)
