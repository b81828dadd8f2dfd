"""Turn single-referring instance annotations into multi-referring records."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import ContractError, FormatError
from .records import PLACEHOLDER, MuseRecord, Target, mask_bbox
from .rle import RleMask, decode, encode


def question_text(descriptions) -> str:
    return f"Please segment the {', '.join(descriptions)} in the image"


def answer_text(descriptions) -> str:
    return ", ".join(f"{d} is {PLACEHOLDER}" for d in descriptions) + "."


def parse_question(question: str) -> list[str]:
    prefix, suffix = "Please segment the ", " in the image"
    if not (question.startswith(prefix) and question.endswith(suffix)):
        raise FormatError(f"not a multi-referring question: {question!r}")
    return question[len(prefix) : -len(suffix)].split(", ")


def parse_answer(answer: str) -> list[str]:
    body = answer[:-1] if answer.endswith(".") else answer
    tail = f" is {PLACEHOLDER}"
    parts = body.split(", ")
    if not all(p.endswith(tail) for p in parts):
        raise FormatError(f"not a multi-referring answer: {answer!r}")
    return [p[: -len(tail)] for p in parts]


@dataclass
class ConversionReport:
    images: int = 0
    converted: int = 0
    skipped_empty: int = 0
    skipped_ids: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "images": self.images,
            "converted": self.converted,
            "skipped_empty": self.skipped_empty,
            "skipped_ids": list(self.skipped_ids),
        }


def _instance_target(inst, height, width) -> Target:
    mask = inst["mask"]
    if isinstance(mask, dict):
        rle = RleMask.from_json(mask)
    else:
        rle = encode(np.asarray(mask, dtype=np.uint8))
    if (rle.height, rle.width) != (height, width):
        raise FormatError(f"instance mask {rle.height}x{rle.width} does not match image {height}x{width}")
    bbox = inst.get("bbox")
    if bbox is None:
        bbox = mask_bbox(decode(rle))
    return Target(str(inst["description"]), rle, tuple(float(v) for v in bbox), str(inst.get("category", "")))


def convert_multi_referring(annotations, k_range=(1, 3), seed=0):
    """One record per annotated image with k distinct, shuffled instances.

    ``annotations`` is a sequence of dicts with ``image``, ``height``,
    ``width`` and ``instances`` (each with ``description``, ``mask`` as RLE
    dict or binary array, optional ``bbox`` and ``category``).  Returns
    ``(records, report)``; images without instances are skipped and counted.
    """
    k_min, k_max = int(k_range[0]), int(k_range[1])
    if not 1 <= k_min <= k_max:
        raise ContractError(f"bad k_range {k_range}")
    rng = np.random.default_rng(seed)
    records, report = [], ConversionReport()
    for n, ann in enumerate(annotations):
        report.images += 1
        image_id = str(ann.get("id", n))
        instances = list(ann.get("instances", []))
        if not instances:
            report.skipped_empty += 1
            report.skipped_ids.append(image_id)
            continue
        h, w = int(ann["height"]), int(ann["width"])
        k = int(rng.integers(k_min, min(k_max, len(instances)) + 1))
        chosen = rng.choice(len(instances), size=k, replace=False)
        targets = [_instance_target(instances[i], h, w) for i in chosen]
        descs = [t.description for t in targets]
        records.append(
            MuseRecord(
                record_id=f"{image_id}",
                image=str(ann["image"]),
                height=h,
                width=w,
                question=question_text(descs),
                answer=answer_text(descs),
                targets=targets,
            )
        )
        report.converted += 1
    return records, report


def load_annotations(path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    out.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise FormatError(f"{path}:{lineno}: {exc}") from None
    return out
