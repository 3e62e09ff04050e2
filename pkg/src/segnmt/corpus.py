"""Vocabulary construction, corpus I/O, and the synthetic toy language.

Corpus files are UTF-8 text, one whitespace-tokenized sentence per line.
Parallel corpora are two aligned files with equal line counts.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

UNK_TOKEN = "<unk>"
BOS_TOKEN = "<s>"
EOS_TOKEN = "</s>"
RESERVED = (UNK_TOKEN, BOS_TOKEN, EOS_TOKEN)

UNK_ID = 0
BOS_ID = 1
EOS_ID = 2

DEFAULT_VOCAB_CAP = 30000


@dataclass(frozen=True)
class Vocabulary:
    """Bijective token<->id map with reserved UNK/BOS/EOS ids.

    Reserved ids occupy 0..2 in the fixed order UNK, BOS, EOS; regular
    tokens follow. Immutable after construction, safe to share.
    """

    token_to_id: dict[str, int]
    id_to_token: list[str]

    @property
    def size(self) -> int:
        """Total vocabulary size K, reserved tokens included."""
        return len(self.id_to_token)

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def token_of(self, idx: int) -> str:
        return self.id_to_token[idx]

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id


def build_vocabulary(sentences, cap: int = DEFAULT_VOCAB_CAP) -> Vocabulary:
    """Build a vocabulary of the `cap` most frequent tokens plus reserved ids.

    Frequency ties are broken by first occurrence in the stream, so the
    result is deterministic for a given corpus.
    """
    counts: Counter[str] = Counter()
    first_seen: dict[str, int] = {}
    for line in sentences:
        for tok in line.split():
            counts[tok] += 1
            if tok not in first_seen:
                first_seen[tok] = len(first_seen)
    ranked = sorted(counts, key=lambda t: (-counts[t], first_seen[t]))
    kept = ranked[:cap]

    id_to_token = list(RESERVED) + kept
    token_to_id = {tok: i for i, tok in enumerate(id_to_token)}
    return Vocabulary(token_to_id=token_to_id, id_to_token=id_to_token)


def encode_sentence(vocab: Vocabulary, text: str) -> list[int]:
    """Map a tokenized sentence to ids; out-of-vocabulary tokens become UNK."""
    return [vocab.id_of(tok) for tok in text.split()]


def decode_sentence(vocab: Vocabulary, ids: list[int]) -> str:
    return " ".join(vocab.token_of(i) for i in ids)


def save_vocabulary(vocab: Vocabulary, path: str | Path) -> None:
    """One non-reserved token per line; line number = id - len(RESERVED)."""
    with open(path, "w", encoding="utf-8") as f:
        for tok in vocab.id_to_token[len(RESERVED):]:
            f.write(tok + "\n")


def load_vocabulary(path: str | Path) -> Vocabulary:
    with open(path, encoding="utf-8") as f:
        tokens = [line.rstrip("\n") for line in f if line.strip()]
    id_to_token = list(RESERVED) + tokens
    return Vocabulary(
        token_to_id={tok: i for i, tok in enumerate(id_to_token)},
        id_to_token=id_to_token,
    )


def read_corpus(path: str | Path) -> list[str]:
    with open(path, encoding="utf-8") as f:
        return [line.rstrip("\n") for line in f]


def write_corpus(lines, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for line in lines:
            f.write(line + "\n")


def read_parallel(src_path: str | Path, tgt_path: str | Path) -> list[tuple[str, str]]:
    src = read_corpus(src_path)
    tgt = read_corpus(tgt_path)
    if len(src) != len(tgt):
        raise ValueError(
            f"parallel corpus line counts differ: {len(src)} vs {len(tgt)}"
        )
    return list(zip(src, tgt))


# ---------------------------------------------------------------------------
# Synthetic toy language
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ToyGrammarSpec:
    """A tiny deterministic clause grammar for parallel toy data.

    A sentence is a concatenation of clauses drawn from a fixed inventory.
    Each clause has one canonical translation; reordering happens only
    inside a clause, never across clauses, so clause-boundary segmentation
    recovers the reference exactly.

    Three knobs shape the training distribution (evaluation text is always
    canonical whole clauses):

    * ``dict_fraction`` mixes in single-word glossary pairs (sw_i -> tw_i),
      so word-for-word translations are well supported by training data.
    * ``n_glossary_only_types`` adds dictionary-only word types absent from
      every clause; with a frequency-capped vocabulary these are exactly
      the types that degrade to UNK, so clause text is UNK-free while the
      translation of an UNK is genuinely uncertain.
    * ``idiom_fraction`` makes some clauses idiomatic, so a word-by-word
      translation of such a clause is confidently produced yet wrong —
      only whole-clause translation recovers the reference.
      ``idiom_style`` picks how: "opaque" targets are dedicated idiom
      tokens the word map never produces; "reordered" targets use the
      word map in reversed order (right words, wrong order).
    * ``pair_fraction`` mixes in two-clause concatenations, so models see
      a little text longer than one clause without ever seeing the longest
      evaluation sentences.
    * ``variant_prob`` occasionally emits a clause target in the opposite
      within-clause order, i.e. the clause-level mapping is slightly
      ambiguous while the word-level mapping is not.
    """

    n_clauses: int = 12
    min_clause_len: int = 4
    max_clause_len: int = 8
    n_word_types: int = 30
    n_glossary_only_types: int = 0
    reorder: str = "none"  # "reverse" | "none"
    idiom_fraction: float = 0.5
    idiom_style: str = "opaque"  # "opaque" | "reordered"
    dict_fraction: float = 0.5
    pair_fraction: float = 0.0
    variant_prob: float = 0.3
    seed: int = 0

    def validate(self, length_cap: int | None = None) -> None:
        if self.min_clause_len < 1 or self.max_clause_len < self.min_clause_len:
            raise ValueError("invalid clause length range")
        if self.n_clauses < 1 or self.n_word_types < 1:
            raise ValueError("inventory and word pool must be non-empty")
        if self.n_glossary_only_types < 0:
            raise ValueError("n_glossary_only_types must be >= 0")
        if self.reorder not in ("reverse", "none"):
            raise ValueError(f"unknown reorder rule: {self.reorder!r}")
        if not 0.0 <= self.dict_fraction <= 1.0:
            raise ValueError("dict_fraction must be in [0, 1]")
        if not 0.0 <= self.idiom_fraction <= 1.0:
            raise ValueError("idiom_fraction must be in [0, 1]")
        if self.idiom_style not in ("opaque", "reordered"):
            raise ValueError(f"unknown idiom style: {self.idiom_style!r}")
        if not 0.0 <= self.pair_fraction <= 1.0 or \
                self.dict_fraction + self.pair_fraction > 1.0:
            raise ValueError(
                "pair_fraction must be in [0, 1] with "
                "dict_fraction + pair_fraction <= 1"
            )
        if not 0.0 <= self.variant_prob < 0.5:
            raise ValueError(
                "variant_prob must be in [0, 0.5) so the canonical order "
                "stays the majority translation"
            )
        if length_cap is not None and self.max_clause_len > length_cap:
            raise ValueError(
                f"max clause length {self.max_clause_len} exceeds "
                f"model length cap {length_cap}"
            )


@dataclass(frozen=True)
class Clause:
    source: tuple[str, ...]
    target: tuple[str, ...]


def _src_word(w: int) -> str:
    return f"sw{w:02d}"


def _tgt_word(w: int) -> str:
    return f"tw{w:02d}"


def _idiom_word(clause: int, pos: int) -> str:
    return f"iw{clause:02d}_{pos}"


def clause_inventory(spec: ToyGrammarSpec) -> list[Clause]:
    """Deterministic clause inventory for a grammar spec.

    A clause is either literal (its target is the word map applied word by
    word) or idiomatic (its target is a dedicated token sequence that no
    word-level mapping produces), so a literal clause translates correctly
    word for word while an idiomatic one only translates correctly as a
    whole.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    clauses = []
    for k in range(spec.n_clauses):
        length = int(rng.integers(spec.min_clause_len, spec.max_clause_len + 1))
        words = rng.integers(0, spec.n_word_types, size=length)
        src = tuple(_src_word(w) for w in words)
        if rng.random() < spec.idiom_fraction:
            if spec.idiom_style == "opaque":
                tgt = tuple(_idiom_word(k, j) for j in range(length))
            else:
                tgt = tuple(_tgt_word(w) for w in words[::-1])
        else:
            ordered = words[::-1] if spec.reorder == "reverse" else words
            tgt = tuple(_tgt_word(w) for w in ordered)
        clauses.append(Clause(source=src, target=tgt))
    return clauses


def glossary_entries(spec: ToyGrammarSpec) -> list[Clause]:
    """Single-word clauses sw_i -> tw_i for every word type.

    Covers the clause word pool plus ``n_glossary_only_types`` extra
    dictionary-only types that never occur in clause text; under a
    frequency-capped vocabulary those extra types are the ones that
    degrade to UNK.
    """
    return [
        Clause(source=(_src_word(w),), target=(_tgt_word(w),))
        for w in range(spec.n_word_types + spec.n_glossary_only_types)
    ]


def generate_toy_corpus(
    spec: ToyGrammarSpec,
    pairs: int,
    k_min: int = 1,
    k_max: int = 1,
    seed: int | None = None,
    split: str = "eval",
) -> list[tuple[str, str]]:
    """Sample `pairs` parallel sentences of k_min..k_max concatenated clauses.

    The "train" split emits one unit per line: a glossary entry with
    probability dict_fraction, a two-clause concatenation with probability
    pair_fraction, otherwise a single clause; each clause target takes the
    non-canonical order with probability variant_prob. The "eval" split
    concatenates k_min..k_max whole clauses with canonical targets only, so
    references are unambiguous.
    """
    spec.validate()
    if k_min < 1 or k_max < k_min:
        raise ValueError("invalid clause count range")
    if split not in ("train", "eval"):
        raise ValueError(f"unknown split: {split!r}")
    inventory = clause_inventory(spec)
    glossary = glossary_entries(spec)
    rng = np.random.default_rng(spec.seed if seed is None else seed)

    def clause_pair(clause: Clause) -> tuple[str, str]:
        # the non-canonical variant is the opposite within-clause order
        target = (
            clause.target[::-1]
            if rng.random() < spec.variant_prob
            else clause.target
        )
        return " ".join(clause.source), " ".join(target)

    out = []
    for _ in range(pairs):
        if split == "train":
            u = rng.random()
            if u < spec.dict_fraction:
                entry = glossary[int(rng.integers(0, len(glossary)))]
                out.append((" ".join(entry.source), " ".join(entry.target)))
                continue
            n_units = 2 if u < spec.dict_fraction + spec.pair_fraction else 1
            units = [
                clause_pair(inventory[int(rng.integers(0, len(inventory)))])
                for _ in range(n_units)
            ]
            out.append((
                " ".join(s for s, _ in units),
                " ".join(t for _, t in units),
            ))
            continue
        k = int(rng.integers(k_min, k_max + 1))
        picks = rng.integers(0, len(inventory), size=k)
        src = " ".join(" ".join(inventory[c].source) for c in picks)
        tgt = " ".join(" ".join(inventory[c].target) for c in picks)
        out.append((src, tgt))
    return out
