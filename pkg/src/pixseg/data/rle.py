"""Uncompressed COCO-style run-length encoding.

Pixels are read in column-major order and ``counts`` alternates runs of 0s
and 1s, always starting with a (possibly empty) run of 0s.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import FormatError
from ..validation import check_binary_mask


@dataclass(frozen=True)
class RleMask:
    height: int
    width: int
    counts: tuple

    def to_json(self) -> dict:
        return {"size": [self.height, self.width], "counts": list(self.counts)}

    @classmethod
    def from_json(cls, obj) -> "RleMask":
        try:
            h, w = obj["size"]
            counts = tuple(int(c) for c in obj["counts"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed RLE object: {exc}") from None
        rle = cls(int(h), int(w), counts)
        rle.validate()
        return rle

    def validate(self) -> None:
        if self.height < 0 or self.width < 0:
            raise FormatError(f"negative RLE size {self.height}x{self.width}")
        if any(c < 0 for c in self.counts):
            raise FormatError("RLE counts must be non-negative")
        total = sum(self.counts)
        if total != self.height * self.width:
            raise FormatError(f"RLE counts sum to {total}, expected {self.height * self.width}")

    def area(self) -> int:
        return int(sum(self.counts[1::2]))


def encode(mask) -> RleMask:
    m = check_binary_mask(mask)
    h, w = m.shape
    flat = m.reshape(-1, order="F").astype(np.int8)
    if flat.size == 0:
        return RleMask(h, w, (0,))
    change = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0] == 1:
        runs.insert(0, 0)
    return RleMask(h, w, tuple(int(r) for r in runs))


def decode(rle: RleMask) -> np.ndarray:
    rle.validate()
    values = np.zeros(len(rle.counts), dtype=np.uint8)
    values[1::2] = 1
    flat = np.repeat(values, rle.counts)
    return flat.reshape((rle.height, rle.width), order="F")


def rle_roundtrip(mask) -> tuple[RleMask, np.ndarray]:
    rle = encode(mask)
    return rle, decode(rle)
