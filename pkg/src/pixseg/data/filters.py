"""Deterministic record filters with machine-readable rejection reasons."""

from __future__ import annotations

from dataclasses import dataclass

from ..exceptions import FormatError


@dataclass(frozen=True)
class FilterRules:
    min_mask_area: int = 1
    drop_duplicate_instances: bool = True
    drop_duplicate_records: bool = True


def _record_reason(record, rules: FilterRules, seen: set):
    if not record.targets:
        return "no_targets"
    if record.placeholder_count() != record.n_targets:
        return "placeholder_mismatch"
    for t in record.targets:
        if not t.description.strip():
            return "empty_description"
        try:
            t.mask.validate()
        except FormatError:
            return "bad_rle"
        if (t.mask.height, t.mask.width) != (record.height, record.width):
            return "mask_size_mismatch"
        if t.mask.area() == 0:
            return "empty_mask"
        if t.mask.area() < rules.min_mask_area:
            return "small_mask"
    if rules.drop_duplicate_instances:
        keys = [t.mask.counts for t in record.targets]
        if len(set(keys)) != len(keys):
            return "duplicate_instance"
    if rules.drop_duplicate_records:
        key = (record.image, record.question)
        if key in seen:
            return "duplicate_record"
        seen.add(key)
    return None


def filter_records(records, rules: FilterRules = FilterRules()):
    """Split records into ``(kept, rejected)``; rejected items are ``(record, reason)``."""
    kept, rejected, seen = [], [], set()
    for r in records:
        reason = _record_reason(r, rules, seen)
        if reason is None:
            kept.append(r)
        else:
            rejected.append((r, reason))
    return kept, rejected
