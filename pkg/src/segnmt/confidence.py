"""Bidirectional confidence scoring of source phrases.

Each span gets one forward beam search; every candidate is then force-scored
under the reverse model, and the span's confidence is the best combined
score. Span scoring is embarrassingly parallel — worker count changes
throughput only, never the result.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .decoding import DEFAULT_BEAM_WIDTH, beam_search
from .model import GruEncDecParams, encode_batch, forced_logprob_batch

NEG_INF = float("-inf")


class ScoreMode(Enum):
    DIRECT = "direct"
    BIDIRECTIONAL = "bidir"
    BIDIRECTIONAL_PENALIZED = "bidir-pen"


@dataclass(frozen=True)
class PairScore:
    """Scores of one (source span, candidate translation) pair."""

    fwd_logp: float
    rev_logp: float
    length: int
    score: float


@dataclass
class CandidateScore:
    tokens: list[int]
    fwd_logp: float
    rev_logp: float
    finished: bool


@dataclass
class ConfidenceMatrix:
    """Upper-triangular span scores plus the best candidate per span.

    Spans longer than the length cap are absent (score -inf, no candidate).
    Indices are 1-based inclusive, matching Span conventions.
    """

    n: int
    scores: dict[tuple[int, int], float]
    candidates: dict[tuple[int, int], list[int]]
    details: dict[tuple[int, int], CandidateScore] = field(default_factory=dict)
    unfinished_spans: list[tuple[int, int]] = field(default_factory=list)

    def score(self, i: int, j: int) -> float:
        return self.scores.get((i, j), NEG_INF)

    def candidate(self, i: int, j: int) -> list[int] | None:
        return self.candidates.get((i, j))


def pair_confidence(fwd_logp: float, rev_logp: float, length: int, mode: ScoreMode) -> float:
    """Combine forward/reverse log-probabilities into one span score.

    The penalized mode divides the average by |ln(length)|, clamped below
    at ln 2 so single-word spans stay finite (and strongly penalized).
    """
    if not math.isfinite(fwd_logp):
        raise ValueError("forward log-probability must be finite")
    if length < 1:
        raise ValueError("span length must be >= 1")
    if mode is ScoreMode.DIRECT:
        return fwd_logp
    if not math.isfinite(rev_logp):
        raise ValueError("reverse log-probability must be finite")
    if mode is ScoreMode.BIDIRECTIONAL:
        return (fwd_logp + rev_logp) / 2.0
    denom = 2.0 * max(abs(math.log(length)), math.log(2.0))
    return (fwd_logp + rev_logp) / denom


def score_span_candidates(
    fwd_model: GruEncDecParams,
    rev_model: GruEncDecParams | None,
    span_tokens: list[int],
    width: int = DEFAULT_BEAM_WIDTH,
) -> list[CandidateScore]:
    """Beam-decode a span forward, then force-score it under the reverse model."""
    if not span_tokens:
        raise ValueError("span must be non-empty")
    hyps = beam_search(fwd_model, span_tokens, width=width)
    if rev_model is not None:
        # Batched reverse pass: encode every candidate, force-score the span.
        contexts = encode_batch(rev_model, [h.tokens for h in hyps])
        rev_logps = forced_logprob_batch(rev_model, contexts, span_tokens)
    else:
        rev_logps = np.zeros(len(hyps))
    return [
        CandidateScore(
            tokens=hyp.tokens, fwd_logp=hyp.logprob,
            rev_logp=float(rev), finished=hyp.finished,
        )
        for hyp, rev in zip(hyps, rev_logps)
    ]


def best_candidate(
    candidates: list[CandidateScore], length: int, mode: ScoreMode
) -> tuple[float, CandidateScore]:
    """Max combined score over candidates; first candidate wins ties."""
    best: CandidateScore | None = None
    best_score = NEG_INF
    for cand in candidates:
        rev = cand.rev_logp if mode is not ScoreMode.DIRECT else 0.0
        score = pair_confidence(cand.fwd_logp, rev, length, mode)
        if best is None or score > best_score:
            best, best_score = cand, score
    assert best is not None
    return best_score, best


def phrase_confidence(
    fwd_model: GruEncDecParams,
    rev_model: GruEncDecParams | None,
    span_tokens: list[int],
    width: int = DEFAULT_BEAM_WIDTH,
    mode: ScoreMode = ScoreMode.BIDIRECTIONAL_PENALIZED,
) -> tuple[float, list[int]]:
    """Confidence score of one source span and its best candidate translation."""
    candidates = score_span_candidates(fwd_model, rev_model, span_tokens, width)
    score, best = best_candidate(candidates, len(span_tokens), mode)
    return score, best.tokens


def build_span_cache(
    fwd_model: GruEncDecParams,
    rev_model: GruEncDecParams | None,
    sentence: list[int],
    width: int = DEFAULT_BEAM_WIDTH,
    max_seg_len: int = 8,
    workers: int = 1,
) -> dict[tuple[int, int], list[CandidateScore]]:
    """Candidate scores for every span within the length cap.

    This is the expensive part; the per-mode confidence matrix is a cheap
    reduction over it, so ablations over score modes reuse one cache.
    """
    n = len(sentence)
    if n < 1:
        raise ValueError("sentence must be non-empty")
    spans = [
        (i, j)
        for i in range(1, n + 1)
        for j in range(i, min(i + max_seg_len - 1, n) + 1)
    ]

    def work(span):
        i, j = span
        return span, score_span_candidates(
            fwd_model, rev_model, sentence[i - 1:j], width
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, spans))
    else:
        results = [work(s) for s in spans]
    return dict(results)


def matrix_from_cache(
    cache: dict[tuple[int, int], list[CandidateScore]],
    n: int,
    mode: ScoreMode,
) -> ConfidenceMatrix:
    matrix = ConfidenceMatrix(n=n, scores={}, candidates={})
    for (i, j), candidates in cache.items():
        score, best = best_candidate(candidates, j - i + 1, mode)
        matrix.scores[(i, j)] = score
        matrix.candidates[(i, j)] = best.tokens
        matrix.details[(i, j)] = best
        if not best.finished:
            matrix.unfinished_spans.append((i, j))
    matrix.unfinished_spans.sort()
    return matrix


def build_confidence_matrix(
    fwd_model: GruEncDecParams,
    rev_model: GruEncDecParams | None,
    sentence: list[int],
    mode: ScoreMode = ScoreMode.BIDIRECTIONAL_PENALIZED,
    max_seg_len: int = 8,
    workers: int = 1,
    width: int = DEFAULT_BEAM_WIDTH,
) -> ConfidenceMatrix:
    """Score every span of the sentence up to max_seg_len words."""
    cache = build_span_cache(fwd_model, rev_model, sentence, width, max_seg_len, workers)
    return matrix_from_cache(cache, len(sentence), mode)


def random_confidence_matrix(n: int, seed: int, max_seg_len: int | None = None) -> ConfidenceMatrix:
    """Uniform(0,1) span scores for the random-confidence control baseline."""
    if n < 1:
        raise ValueError("sentence must be non-empty")
    rng = np.random.default_rng(seed)
    matrix = ConfidenceMatrix(n=n, scores={}, candidates={})
    for i in range(1, n + 1):
        cap = n if max_seg_len is None else min(i + max_seg_len - 1, n)
        for j in range(i, cap + 1):
            matrix.scores[(i, j)] = float(rng.uniform())
            matrix.candidates[(i, j)] = []
    return matrix


def dump_matrix_csv(
    matrix: ConfidenceMatrix, path: str | Path, id_to_token=None
) -> None:
    """Diagnostic dump: one row per defined span."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["i", "j", "score", "fwd_logp", "rev_logp", "candidate"])
        for (i, j) in sorted(matrix.scores):
            det = matrix.details.get((i, j))
            cand = matrix.candidates.get((i, j), [])
            text = " ".join(
                id_to_token(t) if id_to_token else str(t) for t in cand
            )
            writer.writerow([
                i, j, repr(matrix.scores[(i, j)]),
                repr(det.fwd_logp) if det else "",
                repr(det.rev_logp) if det else "",
                text,
            ])
