"""Corpus-level BLEU and bucketed scoring.

Single reference per candidate, tokenized case-sensitive text, clipped
n-gram precisions up to 4-grams with a brevity penalty. A zero precision
is floored at 1/(2 * candidate n-gram count) so toy corpora never
collapse to exactly 0.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .corpus import UNK_ID, UNK_TOKEN


@dataclass(frozen=True)
class BleuReport:
    bleu: float
    precisions: tuple[float, ...]
    brevity_penalty: float
    candidate_tokens: int
    reference_tokens: int

    @property
    def percent(self) -> float:
        return 100.0 * self.bleu


def _ngrams(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[k:k + n]) for k in range(len(tokens) - n + 1))


def bleu(candidates: list[list], references: list[list], max_n: int = 4) -> BleuReport:
    """Corpus BLEU over aligned candidate/reference token lists."""
    if not candidates:
        raise ValueError("empty corpus")
    if len(candidates) != len(references):
        raise ValueError("candidate/reference counts differ")

    matched = [0] * max_n
    total = [0] * max_n
    cand_len = 0
    ref_len = 0
    for cand, ref in zip(candidates, references):
        cand_len += len(cand)
        ref_len += len(ref)
        for n in range(1, max_n + 1):
            cand_counts = _ngrams(cand, n)
            ref_counts = _ngrams(ref, n)
            total[n - 1] += max(len(cand) - n + 1, 0)
            for gram, count in cand_counts.items():
                matched[n - 1] += min(count, ref_counts.get(gram, 0))

    precisions = []
    for n in range(max_n):
        denom = max(total[n], 1)
        if matched[n] > 0:
            precisions.append(matched[n] / denom)
        else:
            precisions.append(1.0 / (2.0 * denom))

    if cand_len == 0:
        return BleuReport(0.0, tuple(precisions), 0.0, 0, ref_len)
    bp = 1.0 if cand_len >= ref_len else math.exp(1.0 - ref_len / cand_len)
    score = bp * math.exp(sum(math.log(p) for p in precisions) / max_n)
    return BleuReport(score, tuple(precisions), bp, cand_len, ref_len)


def count_unknowns(tokens: list) -> int:
    """Unknown-token count; works on id sequences and raw token strings."""
    return sum(1 for t in tokens if t == UNK_ID or t == UNK_TOKEN)


def _bucket_label(lo: int, hi: int | None) -> str:
    return f"[{lo},{hi})" if hi is not None else f"[{lo},inf)"


def bucket_edges_to_ranges(edges: list[int]) -> list[tuple[int, int | None]]:
    """[0,10,20] -> [0,10), [10,20), [20,inf)."""
    ranges = [(edges[k], edges[k + 1]) for k in range(len(edges) - 1)]
    ranges.append((edges[-1], None))
    return ranges


DEFAULT_LENGTH_EDGES = [0, 10, 20, 30, 40]
DEFAULT_UNK_EDGES = [0, 1, 2, 3]


def evaluate_bucketed(
    systems: dict[str, list[list]],
    references: list[list],
    sources: list[list],
    bucketing: str = "length",
    edges: list[int] | None = None,
) -> dict[str, dict[str, BleuReport]]:
    """Per-bucket BLEU for several systems translating the same sources.

    `length` buckets key on source word count; `unk` buckets key on the
    max unknown-token count over source and reference. Empty buckets are
    absent from the result, not zero.
    """
    if bucketing == "length":
        edges = edges or DEFAULT_LENGTH_EDGES
        keys = [len(src) for src in sources]
    elif bucketing == "unk":
        edges = edges or DEFAULT_UNK_EDGES
        keys = [
            max(count_unknowns(src), count_unknowns(ref))
            for src, ref in zip(sources, references)
        ]
    else:
        raise ValueError(f"unknown bucketing: {bucketing!r}")

    ranges = bucket_edges_to_ranges(edges)
    out: dict[str, dict[str, BleuReport]] = {}
    for name, cands in systems.items():
        if len(cands) != len(sources):
            raise ValueError(f"system {name!r} does not cover the source set")
        table = {}
        for lo, hi in ranges:
            idx = [
                k for k, key in enumerate(keys)
                if key >= lo and (hi is None or key < hi)
            ]
            if not idx:
                continue
            table[_bucket_label(lo, hi)] = bleu(
                [cands[k] for k in idx], [references[k] for k in idx]
            )
        out[name] = table
    return out
