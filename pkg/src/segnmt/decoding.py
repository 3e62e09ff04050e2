"""Approximate beam search over the decoder.

Scores are raw cumulative log-probabilities in nats (no length
normalization; the confidence score applies its own length penalty
downstream). Ties are broken by lexicographic token order so runs are
bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import BOS_ID, EOS_ID
from .model import GruEncDecParams, decoder_step_batch, encode, initial_decoder_state

DEFAULT_BEAM_WIDTH = 10


@dataclass
class BeamHypothesis:
    tokens: list[int]      # EOS not included
    logprob: float         # cumulative, nats
    finished: bool
    state: np.ndarray | None = None

    def sort_key(self):
        return (-self.logprob, tuple(self.tokens))


def default_max_len(source_len: int) -> int:
    return 2 * source_len + 5


def beam_search(
    params: GruEncDecParams,
    source: list[int],
    width: int = DEFAULT_BEAM_WIDTH,
    max_len: int | None = None,
) -> list[BeamHypothesis]:
    """Top-`width` candidate translations, sorted by descending log-probability.

    Expansion is over the full target vocabulary at every step; hypotheses
    emitting EOS move to a finished pool and are never extended. If nothing
    finishes within max_len the best unfinished hypotheses are returned,
    flagged via `finished=False` — the result is never empty.
    """
    if width < 1:
        raise ValueError("beam width must be >= 1")
    if max_len is None:
        max_len = default_max_len(len(source))
    if max_len < 1:
        raise ValueError("max_len must be >= 1")

    context = encode(params, source)
    h0 = initial_decoder_state(params, context)
    active = [BeamHypothesis(tokens=[], logprob=0.0, finished=False, state=h0)]
    finished: list[BeamHypothesis] = []

    for _ in range(max_len):
        prev_ids = np.array([h.tokens[-1] if h.tokens else BOS_ID for h in active])
        states = np.stack([h.state for h in active])
        new_states, logps = decoder_step_batch(params, prev_ids, states, context)

        # (score, tokens, parent index, token) for every expansion
        expansions = []
        for idx, hyp in enumerate(active):
            for tok in range(params.K_target):
                expansions.append((
                    hyp.logprob + float(logps[idx, tok]),
                    hyp.tokens + [tok],
                    idx,
                    tok,
                ))
        expansions.sort(key=lambda e: (-e[0], tuple(e[1])))

        # Keep the top `width` expansions overall; EOS ones finish, the
        # rest form the next beam (which may shrink as hypotheses finish).
        next_active = []
        for score, tokens, idx, tok in expansions[:width]:
            if tok == EOS_ID:
                finished.append(BeamHypothesis(
                    tokens=tokens[:-1], logprob=score, finished=True,
                ))
            else:
                next_active.append(BeamHypothesis(
                    tokens=tokens, logprob=score, finished=False,
                    state=new_states[idx],
                ))
        active = next_active
        if len(finished) >= width or not active:
            break

    results = sorted(finished, key=BeamHypothesis.sort_key)
    if not results:
        results = sorted(active, key=BeamHypothesis.sort_key)
    for hyp in results:
        hyp.state = None
    return results[:width]
