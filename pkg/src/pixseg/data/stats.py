"""Dataset statistics: category counts, description lengths, targets per record."""

from __future__ import annotations

from collections import Counter

from ..exceptions import ContractError


def token_count(text: str) -> int:
    return len(text.split())


def compute_statistics(records) -> dict:
    records = list(records)
    if not records:
        raise ContractError("compute_statistics needs at least one record")
    categories = Counter()
    tokens = Counter()
    targets = Counter()
    for r in records:
        targets[r.n_targets] += 1
        for t in r.targets:
            categories[t.category] += 1
            tokens[token_count(t.description)] += 1
    counts = [r.n_targets for r in records]
    return {
        "records": len(records),
        "instances": sum(counts),
        "instances_per_category": dict(sorted(categories.items())),
        "description_token_histogram": {int(k): v for k, v in sorted(tokens.items())},
        "target_count_histogram": {int(k): v for k, v in sorted(targets.items())},
        "mean_targets": sum(counts) / len(counts),
        "max_targets": max(counts),
    }


def histogram_text(stats: dict) -> str:
    """Blank-line separated ``value count`` blocks, one per histogram (gnuplot ``index``)."""
    blocks = []
    for key in ("target_count_histogram", "description_token_histogram"):
        lines = [f"# {key}"] + [f"{k} {v}" for k, v in stats[key].items()]
        blocks.append("\n".join(lines))
    lines = ["# instances_per_category"] + [f'"{k}" {v}' for k, v in stats["instances_per_category"].items()]
    blocks.append("\n".join(lines))
    return "\n\n\n".join(blocks) + "\n"
