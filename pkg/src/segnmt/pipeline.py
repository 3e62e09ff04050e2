"""End-to-end translation, with and without segmentation."""

from __future__ import annotations

from dataclasses import dataclass

from .confidence import (
    ConfidenceMatrix,
    ScoreMode,
    build_span_cache,
    matrix_from_cache,
)
from .decoding import DEFAULT_BEAM_WIDTH, beam_search
from .model import GruEncDecParams
from .segmentation import Segmentation, format_trace, optimal_segmentation


@dataclass
class SegmentedTranslation:
    tokens: list[int]
    segmentation: Segmentation
    matrix: ConfidenceMatrix


def translate_plain(
    fwd_model: GruEncDecParams,
    source: list[int],
    width: int = DEFAULT_BEAM_WIDTH,
) -> list[int]:
    """Top beam candidate for the whole sentence."""
    return beam_search(fwd_model, source, width=width)[0].tokens


def translate_segments(
    fwd_model: GruEncDecParams,
    source: list[int],
    seg: Segmentation,
    width: int = DEFAULT_BEAM_WIDTH,
    matrix: ConfidenceMatrix | None = None,
) -> list[int]:
    """Translate each span independently and concatenate left to right.

    When the span's best candidate is already cached in the confidence
    matrix (it is the arg-max of the span's confidence) it is reused;
    otherwise the span is beam-decoded.
    """
    out: list[int] = []
    for i, j in seg.spans:
        cached = matrix.candidate(i, j) if matrix is not None else None
        if cached is not None:
            out.extend(cached)
        else:
            out.extend(translate_plain(fwd_model, source[i - 1:j], width))
    return out


def translate_with_segmentation(
    fwd_model: GruEncDecParams,
    rev_model: GruEncDecParams | None,
    source: list[int],
    mode: ScoreMode = ScoreMode.BIDIRECTIONAL_PENALIZED,
    width: int = DEFAULT_BEAM_WIDTH,
    max_seg_len: int = 8,
    workers: int = 1,
    reuse_candidates: bool = True,
) -> SegmentedTranslation:
    """Score spans, segment optimally, translate segments, concatenate.

    `reuse_candidates=False` re-decodes each chosen span instead of using
    the candidates that won the confidence max (kept for comparison; the
    two agree when width and model are unchanged).
    """
    cache = build_span_cache(fwd_model, rev_model, source, width, max_seg_len, workers)
    matrix = matrix_from_cache(cache, len(source), mode)
    seg = optimal_segmentation(matrix)
    tokens = translate_segments(
        fwd_model, source, seg, width, matrix if reuse_candidates else None
    )
    return SegmentedTranslation(tokens=tokens, segmentation=seg, matrix=matrix)


def segmentation_trace(source_tokens: list[str], seg: Segmentation) -> str:
    return format_trace(source_tokens, seg)
