import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from segnmt.confidence import (
    CandidateScore,
    NEG_INF,
    ScoreMode,
    best_candidate,
    build_confidence_matrix,
    build_span_cache,
    dump_matrix_csv,
    matrix_from_cache,
    pair_confidence,
    phrase_confidence,
    random_confidence_matrix,
)
from segnmt.model import init_params, sequence_logprob


def test_penalized_hand_example():
    got = pair_confidence(-2.0, -3.0, 3, ScoreMode.BIDIRECTIONAL_PENALIZED)
    assert math.isclose(got, -5.0 / (2 * math.log(3)))
    assert math.isclose(got, -2.2756, abs_tol=1e-4)


def test_bidirectional_hand_example():
    assert pair_confidence(-2.0, -3.0, 3, ScoreMode.BIDIRECTIONAL) == -2.5


def test_zero_logprobs_give_zero():
    for mode in ScoreMode:
        for length in (1, 2, 5):
            assert pair_confidence(0.0, 0.0, length, mode) == 0.0


def test_direct_is_forward_only():
    assert pair_confidence(-2.0, -99.0, 4, ScoreMode.DIRECT) == -2.0


def test_single_word_denominator_clamped():
    got = pair_confidence(-2.0, -3.0, 1, ScoreMode.BIDIRECTIONAL_PENALIZED)
    assert math.isclose(got, -5.0 / (2 * math.log(2)))
    # same clamp applies at L=2, where ln 2 is the exact denominator
    at2 = pair_confidence(-2.0, -3.0, 2, ScoreMode.BIDIRECTIONAL_PENALIZED)
    assert got == at2


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        pair_confidence(float("nan"), -1.0, 2, ScoreMode.DIRECT)
    with pytest.raises(ValueError):
        pair_confidence(NEG_INF, -1.0, 2, ScoreMode.BIDIRECTIONAL)
    with pytest.raises(ValueError):
        pair_confidence(-1.0, float("inf"), 2, ScoreMode.BIDIRECTIONAL)
    with pytest.raises(ValueError):
        pair_confidence(-1.0, -1.0, 0, ScoreMode.DIRECT)


@settings(max_examples=50, deadline=None)
@given(
    st.floats(-20, 0), st.floats(-20, 0),
    st.floats(-5, 5), st.integers(1, 30),
)
def test_penalized_linear_in_forward_logp(fwd, rev, delta, length):
    mode = ScoreMode.BIDIRECTIONAL_PENALIZED
    base = pair_confidence(fwd, rev, length, mode)
    shifted = pair_confidence(fwd + delta, rev, length, mode)
    denom = 2.0 * max(math.log(length), math.log(2.0))
    assert math.isclose(shifted - base, delta / denom, abs_tol=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.floats(-20, -0.01), st.floats(-20, -0.01), st.integers(2, 29))
def test_penalty_weakens_with_length(fwd, rev, length):
    mode = ScoreMode.BIDIRECTIONAL_PENALIZED
    shorter = pair_confidence(fwd, rev, length, mode)
    longer = pair_confidence(fwd, rev, length + 1, mode)
    assert longer > shorter


def test_best_candidate_enumeration():
    cands = [
        CandidateScore(tokens=[3], fwd_logp=-3.0, rev_logp=0.0, finished=True),
        CandidateScore(tokens=[4], fwd_logp=-2.0, rev_logp=0.0, finished=True),
        CandidateScore(tokens=[5], fwd_logp=-4.0, rev_logp=0.0, finished=True),
    ]
    score, best = best_candidate(cands, 2, ScoreMode.DIRECT)
    assert score == -2.0
    assert best.tokens == [4]


def test_phrase_confidence_deterministic_and_matches_forced_score():
    fwd = init_params(4, 6, 8, 8, seed=0)
    rev = init_params(4, 6, 8, 8, seed=1)
    span = [3, 4, 5]
    s1, c1 = phrase_confidence(fwd, rev, span, width=5)
    s2, c2 = phrase_confidence(fwd, rev, span, width=5)
    assert s1 == s2 and c1 == c2
    with pytest.raises(ValueError):
        phrase_confidence(fwd, rev, [], width=5)


def test_direct_mode_ignores_reverse_model():
    fwd = init_params(4, 6, 8, 8, seed=0)
    rev_a = init_params(4, 6, 8, 8, seed=1)
    rev_b = init_params(4, 6, 8, 8, seed=2)
    sent = [3, 4, 5, 6]
    ma = build_confidence_matrix(fwd, rev_a, sent, mode=ScoreMode.DIRECT)
    mb = build_confidence_matrix(fwd, rev_b, sent, mode=ScoreMode.DIRECT)
    assert ma.scores == mb.scores
    assert ma.candidates == mb.candidates


def test_matrix_span_enumeration_with_cap():
    fwd = init_params(4, 6, 8, 8, seed=0)
    rev = init_params(4, 6, 8, 8, seed=1)
    m = build_confidence_matrix(fwd, rev, [3, 4, 5], max_seg_len=2)
    assert set(m.scores) == {(1, 1), (2, 2), (3, 3), (1, 2), (2, 3)}
    assert m.score(1, 3) == NEG_INF
    assert m.candidate(1, 3) is None
    for span in m.scores:
        assert m.candidates[span] is not None


def test_single_word_sentence_matrix():
    fwd = init_params(4, 6, 8, 8, seed=0)
    rev = init_params(4, 6, 8, 8, seed=1)
    m = build_confidence_matrix(fwd, rev, [5])
    assert set(m.scores) == {(1, 1)}
    with pytest.raises(ValueError):
        build_confidence_matrix(fwd, rev, [])


def test_worker_count_does_not_change_result():
    fwd = init_params(4, 6, 8, 8, seed=3)
    rev = init_params(4, 6, 8, 8, seed=4)
    sent = [3, 4, 5, 6, 7]
    a = build_confidence_matrix(fwd, rev, sent, workers=1)
    b = build_confidence_matrix(fwd, rev, sent, workers=8)
    assert a.scores == b.scores
    assert a.candidates == b.candidates
    assert a.unfinished_spans == b.unfinished_spans


def test_cache_reduction_matches_direct_build():
    fwd = init_params(4, 6, 8, 8, seed=5)
    rev = init_params(4, 6, 8, 8, seed=6)
    sent = [3, 4, 5, 6]
    cache = build_span_cache(fwd, rev, sent)
    for mode in ScoreMode:
        from_cache = matrix_from_cache(cache, len(sent), mode)
        direct = build_confidence_matrix(fwd, rev, sent, mode=mode)
        assert from_cache.scores == direct.scores
        assert from_cache.candidates == direct.candidates


def test_reverse_logp_is_forced_source_score():
    fwd = init_params(4, 6, 8, 8, seed=7)
    rev = init_params(4, 6, 8, 8, seed=8)
    span = [3, 4]
    cache = build_span_cache(fwd, rev, span, width=4)
    for cand in cache[(1, 2)]:
        expected = sequence_logprob(rev, cand.tokens, span)
        assert math.isclose(cand.rev_logp, expected, abs_tol=1e-9)


def test_random_matrix_shape_and_range():
    m = random_confidence_matrix(5, seed=0, max_seg_len=3)
    assert m.n == 5
    for (i, j), score in m.scores.items():
        assert j - i + 1 <= 3
        assert 0.0 <= score <= 1.0
    again = random_confidence_matrix(5, seed=0, max_seg_len=3)
    assert m.scores == again.scores


def test_dump_matrix_csv(tmp_path):
    fwd = init_params(4, 6, 8, 8, seed=0)
    rev = init_params(4, 6, 8, 8, seed=1)
    m = build_confidence_matrix(fwd, rev, [3, 4])
    path = tmp_path / "matrix.csv"
    dump_matrix_csv(m, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0].startswith("i,j,score")
    assert len(lines) == 1 + len(m.scores)
