"""Optimal sentence segmentation and its control baselines.

The dynamic program maximizes the summed span confidence over all
contiguous covers in O(n^2) score lookups. A brute-force enumerator of
all 2^(n-1) covers serves as the exact oracle for the underlying integer
program; both use the same accumulation order and tie-break so totals
agree to float equality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .confidence import NEG_INF, ConfidenceMatrix, random_confidence_matrix

BRUTE_FORCE_MAX_N = 20


@dataclass(frozen=True)
class Segmentation:
    """Ordered contiguous spans covering words 1..n, with the total score."""

    spans: tuple[tuple[int, int], ...]
    total_score: float

    @property
    def n(self) -> int:
        return self.spans[-1][1] if self.spans else 0

    def check_cover(self) -> None:
        if not self.spans:
            raise ValueError("empty segmentation")
        if self.spans[0][0] != 1:
            raise ValueError("segmentation must start at word 1")
        for (i1, j1), (i2, _) in zip(self.spans, self.spans[1:]):
            if i1 > j1 or i2 != j1 + 1:
                raise ValueError(f"spans not contiguous at ({i1},{j1})->({i2},...)")
        last_i, last_j = self.spans[-1]
        if last_i > last_j:
            raise ValueError("invalid final span")

    def segment_lengths(self) -> list[int]:
        return [j - i + 1 for i, j in self.spans]


class UncoverableWordError(ValueError):
    def __init__(self, index: int):
        super().__init__(f"word {index} is not covered by any scored span")
        self.index = index


@dataclass
class DpTable:
    """Prefix scores s_j (s_0 = 0) and argmax start indices for traceback."""

    best: list[float]
    start: list[int]


def _fill_table(matrix: ConfidenceMatrix) -> DpTable:
    n = matrix.n
    best = [0.0] + [NEG_INF] * n
    start = [0] * (n + 1)
    for j in range(1, n + 1):
        best_score = NEG_INF
        best_i = 0
        for i in range(1, j + 1):
            c = matrix.score(i, j)
            if c == NEG_INF or best[i - 1] == NEG_INF:
                continue
            s = c + best[i - 1]
            # ties go to the smallest i (longest final segment)
            if s > best_score:
                best_score = s
                best_i = i
        # best_i == 0 leaves s_j = -inf: no cover of the prefix 1..j, which
        # is fine as long as some longer span later bridges over j.
        best[j] = best_score
        start[j] = best_i
    if best[n] == NEG_INF:
        raise _uncoverable(matrix)
    return DpTable(best=best, start=start)


def _uncoverable(matrix: ConfidenceMatrix) -> UncoverableWordError:
    n = matrix.n
    for k in range(1, n + 1):
        if all(matrix.score(i, j) == NEG_INF
               for i in range(1, k + 1) for j in range(k, n + 1)):
            return UncoverableWordError(k)
    return UncoverableWordError(n)


def optimal_segmentation(matrix: ConfidenceMatrix) -> Segmentation:
    """Maximum-score contiguous cover via the incremental prefix recurrence."""
    if matrix.n < 1:
        raise ValueError("cannot segment an empty sentence")
    table = _fill_table(matrix)
    spans = []
    j = matrix.n
    while j >= 1:
        i = table.start[j]
        spans.append((i, j))
        j = i - 1
    spans.reverse()
    seg = Segmentation(spans=tuple(spans), total_score=table.best[matrix.n])
    seg.check_cover()
    return seg


def enumerate_segmentations(n: int):
    """All 2^(n-1) contiguous covers of 1..n as span tuples."""
    for mask in range(1 << (n - 1)):
        spans = []
        start = 1
        for k in range(1, n):
            if mask & (1 << (k - 1)):
                spans.append((start, k))
                start = k + 1
        spans.append((start, n))
        yield tuple(spans)


def brute_force_segmentation(matrix: ConfidenceMatrix) -> Segmentation:
    """Exhaustive oracle for the segment-cover integer program.

    Tie-break matches the DP: among equal totals, prefer the earlier start
    of the last span, then of the next-to-last span, and so on.
    """
    n = matrix.n
    if n < 1:
        raise ValueError("cannot segment an empty sentence")
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"n={n} too large for enumeration (max {BRUTE_FORCE_MAX_N})")

    best_spans = None
    best_total = NEG_INF
    best_key = None
    for spans in enumerate_segmentations(n):
        total = 0.0
        ok = True
        for i, j in spans:
            c = matrix.score(i, j)
            if c == NEG_INF:
                ok = False
                break
            total = c + total  # same accumulation order as the DP recurrence
        if not ok:
            continue
        key = tuple(i for i, _ in reversed(spans))
        if total > best_total or (total == best_total and key < best_key):
            best_spans, best_total, best_key = spans, total, key
    if best_spans is None:
        raise _uncoverable(matrix)
    return Segmentation(spans=best_spans, total_score=best_total)


def random_segmentation(
    n: int, target_mean: float, target_var: float, seed: int
) -> Segmentation:
    """Left-to-right random cover with segment lengths of given mean/variance.

    Lengths are drawn from a rounded Gaussian (the moments are all that is
    specified) and clamped to [1, words remaining].
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if target_mean < 1:
        raise ValueError("target mean must be >= 1")
    rng = np.random.default_rng(seed)
    sd = float(np.sqrt(max(target_var, 0.0)))
    spans = []
    pos = 1
    while pos <= n:
        raw = int(round(rng.normal(target_mean, sd)))
        length = max(1, min(raw, n - pos + 1))
        spans.append((pos, pos + length - 1))
        pos += length
    return Segmentation(spans=tuple(spans), total_score=0.0)


def random_confidence_segmentation(
    n: int, seed: int, max_seg_len: int | None = None
) -> Segmentation:
    """Optimal segmentation of a Uniform(0,1) random confidence matrix."""
    return optimal_segmentation(random_confidence_matrix(n, seed, max_seg_len))


def format_trace(tokens: list[str], seg: Segmentation) -> str:
    """Bracketed segmentation display, e.g. `[[ a b ] [ c ]]`."""
    parts = [" ".join(tokens[i - 1:j]) for i, j in seg.spans]
    return "[[ " + " ] [ ".join(parts) + " ]]"
