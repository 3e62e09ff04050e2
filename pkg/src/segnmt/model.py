"""Gated RNN encoder-decoder: forward pass and checkpoint I/O.

The encoder folds the source sentence (with a terminating EOS) into a
fixed-length context vector. The decoder is the same gated unit with the
context injected additively into each gate and candidate pre-activation;
its initial state is tanh of a learned projection of the context. There
are no bias vectors anywhere. Per-step target-word probabilities come
from a softmax over one weight row per target word.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .corpus import BOS_ID, EOS_ID

CHECKPOINT_MAGIC = b"GEDC"
CHECKPOINT_VERSION = 1

# Fixed tensor-name order in checkpoint files.
TENSOR_NAMES = [
    "emb.src", "emb.tgt",
    "enc.W", "enc.U", "enc.Wz", "enc.Uz", "enc.Wr", "enc.Ur",
    "dec.W", "dec.U", "dec.Wz", "dec.Uz", "dec.Wr", "dec.Ur",
    "dec.Cw", "dec.Cz", "dec.Cr", "dec.init", "dec.out",
]

_FIELD_OF_NAME = {name: name.replace(".", "_") for name in TENSOR_NAMES}


@dataclass
class GruEncDecParams:
    """All weights of one translation direction."""

    emb_src: np.ndarray   # (K_src, d_emb)
    emb_tgt: np.ndarray   # (K_tgt, d_emb)
    enc_W: np.ndarray     # (d_hidden, d_emb)
    enc_U: np.ndarray     # (d_hidden, d_hidden)
    enc_Wz: np.ndarray
    enc_Uz: np.ndarray
    enc_Wr: np.ndarray
    enc_Ur: np.ndarray
    dec_W: np.ndarray
    dec_U: np.ndarray
    dec_Wz: np.ndarray
    dec_Uz: np.ndarray
    dec_Wr: np.ndarray
    dec_Ur: np.ndarray
    dec_Cw: np.ndarray    # context injection, candidate
    dec_Cz: np.ndarray    # context injection, update gate
    dec_Cr: np.ndarray    # context injection, reset gate
    dec_init: np.ndarray  # (d_hidden, d_hidden), decoder initial state
    dec_out: np.ndarray   # (K_tgt, d_hidden), one output row per word

    @property
    def d_emb(self) -> int:
        return self.emb_src.shape[1]

    @property
    def d_hidden(self) -> int:
        return self.enc_U.shape[0]

    @property
    def K_source(self) -> int:
        return self.emb_src.shape[0]

    @property
    def K_target(self) -> int:
        return self.emb_tgt.shape[0]

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, _FIELD_OF_NAME[name]) for name in TENSOR_NAMES}

    def copy(self) -> "GruEncDecParams":
        return GruEncDecParams(**{f.name: getattr(self, f.name).copy() for f in fields(self)})

    def check_shapes(self) -> None:
        d_e, d_h = self.d_emb, self.d_hidden
        expect = {
            "emb.src": (self.K_source, d_e),
            "emb.tgt": (self.K_target, d_e),
            "dec.out": (self.K_target, d_h),
            "dec.init": (d_h, d_h),
        }
        for name in ("enc.W", "enc.Wz", "enc.Wr", "dec.W", "dec.Wz", "dec.Wr"):
            expect[name] = (d_h, d_e)
        for name in ("enc.U", "enc.Uz", "enc.Ur", "dec.U", "dec.Uz", "dec.Ur",
                     "dec.Cw", "dec.Cz", "dec.Cr"):
            expect[name] = (d_h, d_h)
        for name, shape in expect.items():
            got = self.tensors()[name].shape
            if got != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {got}")


def init_params(
    d_emb: int,
    d_hidden: int,
    K_source: int,
    K_target: int,
    seed: int = 0,
    scale: float = 0.08,
) -> GruEncDecParams:
    """Seeded uniform init in [-scale, scale], float64 throughout."""
    rng = np.random.default_rng(seed)

    def u(*shape):
        return rng.uniform(-scale, scale, size=shape)

    return GruEncDecParams(
        emb_src=u(K_source, d_emb),
        emb_tgt=u(K_target, d_emb),
        enc_W=u(d_hidden, d_emb), enc_U=u(d_hidden, d_hidden),
        enc_Wz=u(d_hidden, d_emb), enc_Uz=u(d_hidden, d_hidden),
        enc_Wr=u(d_hidden, d_emb), enc_Ur=u(d_hidden, d_hidden),
        dec_W=u(d_hidden, d_emb), dec_U=u(d_hidden, d_hidden),
        dec_Wz=u(d_hidden, d_emb), dec_Uz=u(d_hidden, d_hidden),
        dec_Wr=u(d_hidden, d_emb), dec_Ur=u(d_hidden, d_hidden),
        dec_Cw=u(d_hidden, d_hidden), dec_Cz=u(d_hidden, d_hidden),
        dec_Cr=u(d_hidden, d_hidden),
        dec_init=u(d_hidden, d_hidden),
        dec_out=u(K_target, d_hidden),
    )


def zero_params(d_emb: int, d_hidden: int, K_source: int, K_target: int) -> GruEncDecParams:
    p = init_params(d_emb, d_hidden, K_source, K_target, seed=0, scale=0.0)
    return p


def sigmoid(x: np.ndarray) -> np.ndarray:
    # Split by sign to avoid overflow in exp.
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable log-softmax over the last axis."""
    m = logits.max(axis=-1, keepdims=True)
    shifted = logits - m
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def gru_step(params: GruEncDecParams, x: np.ndarray, h_prev: np.ndarray) -> np.ndarray:
    """One encoder update: h = z*h_prev + (1-z)*tanh(Wx + r*(U h_prev))."""
    if x.shape[-1] != params.d_emb or h_prev.shape[-1] != params.d_hidden:
        raise ValueError(
            f"dimension mismatch: x {x.shape}, h {h_prev.shape}, "
            f"model ({params.d_emb}, {params.d_hidden})"
        )
    z = sigmoid(params.enc_Wz @ x + params.enc_Uz @ h_prev)
    r = sigmoid(params.enc_Wr @ x + params.enc_Ur @ h_prev)
    h_cand = np.tanh(params.enc_W @ x + r * (params.enc_U @ h_prev))
    return z * h_prev + (1.0 - z) * h_cand


def encode(params: GruEncDecParams, source: list[int]) -> np.ndarray:
    """Fold source embeddings (EOS-terminated) left-to-right from h=0."""
    for t in source:
        if not 0 <= t < params.K_source:
            raise ValueError(f"source id {t} out of range (K={params.K_source})")
    h = np.zeros(params.d_hidden)
    for t in list(source) + [EOS_ID]:
        h = gru_step(params, params.emb_src[t], h)
    return h


def initial_decoder_state(params: GruEncDecParams, context: np.ndarray) -> np.ndarray:
    return np.tanh(params.dec_init @ context)


def decoder_step(
    params: GruEncDecParams,
    prev_target_id: int,
    h_prev: np.ndarray,
    context: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """One decoder update; returns (new state, probability vector over K)."""
    h, logp = decoder_step_batch(
        params, np.array([prev_target_id]), h_prev[None, :], context
    )
    return h[0], np.exp(logp[0])


def decoder_step_batch(
    params: GruEncDecParams,
    prev_ids: np.ndarray,
    h_prev: np.ndarray,
    context: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized decoder step for a batch of hypotheses sharing one context.

    prev_ids: (m,) int; h_prev: (m, d_hidden). Returns new states (m, d_hidden)
    and log-probabilities (m, K_target).
    """
    if np.any(prev_ids < 0) or np.any(prev_ids >= params.K_target):
        raise ValueError("previous target id out of range")
    if h_prev.shape[1] != params.d_hidden or context.shape[-1] != params.d_hidden:
        raise ValueError("dimension mismatch in decoder step")
    y = params.emb_tgt[prev_ids]                       # (m, d_emb)
    cz = params.dec_Cz @ context
    cr = params.dec_Cr @ context
    cw = params.dec_Cw @ context
    z = sigmoid(y @ params.dec_Wz.T + h_prev @ params.dec_Uz.T + cz)
    r = sigmoid(y @ params.dec_Wr.T + h_prev @ params.dec_Ur.T + cr)
    h_cand = np.tanh(y @ params.dec_W.T + r * (h_prev @ params.dec_U.T) + cw)
    h = z * h_prev + (1.0 - z) * h_cand
    logits = h @ params.dec_out.T                      # (m, K_target)
    return h, log_softmax(logits)


def sequence_logprob(params: GruEncDecParams, source: list[int], target: list[int]) -> float:
    """Teacher-forced log p(target, EOS | source) in nats.

    The target is given without its terminating EOS; scoring appends it,
    so a target of m words contributes m+1 steps.
    """
    for t in target:
        if not 0 <= t < params.K_target:
            raise ValueError(f"target id {t} out of range (K={params.K_target})")
    context = encode(params, source)
    h = initial_decoder_state(params, context)
    inputs = [BOS_ID] + list(target)
    outputs = list(target) + [EOS_ID]
    total = 0.0
    for prev, nxt in zip(inputs, outputs):
        h, logp = decoder_step_batch(params, np.array([prev]), h[None, :], context)
        h = h[0]
        total += logp[0, nxt]
    return float(total)


def encode_batch(params: GruEncDecParams, sources: list[list[int]]) -> np.ndarray:
    """Encode several sources at once (masked for unequal lengths).

    Returns (m, d_hidden) context vectors, equal to encode() on each row
    up to floating-point batching differences.
    """
    seqs = [list(s) + [EOS_ID] for s in sources]
    m = len(seqs)
    max_len = max(len(s) for s in seqs)
    h = np.zeros((m, params.d_hidden))
    for t in range(max_len):
        ids = np.array([s[t] if t < len(s) else 0 for s in seqs])
        active = np.array([t < len(s) for s in seqs])
        x = params.emb_src[ids]
        z = sigmoid(x @ params.enc_Wz.T + h @ params.enc_Uz.T)
        r = sigmoid(x @ params.enc_Wr.T + h @ params.enc_Ur.T)
        h_cand = np.tanh(x @ params.enc_W.T + r * (h @ params.enc_U.T))
        h_new = z * h + (1.0 - z) * h_cand
        h = np.where(active[:, None], h_new, h)
    return h


def forced_logprob_batch(
    params: GruEncDecParams, contexts: np.ndarray, target: list[int]
) -> np.ndarray:
    """Teacher-forced log p(target, EOS | context) for a batch of contexts.

    All rows score the same target sequence; contexts is (m, d_hidden).
    """
    for t in target:
        if not 0 <= t < params.K_target:
            raise ValueError(f"target id {t} out of range (K={params.K_target})")
    h = np.tanh(contexts @ params.dec_init.T)
    cz = contexts @ params.dec_Cz.T
    cr = contexts @ params.dec_Cr.T
    cw = contexts @ params.dec_Cw.T
    inputs = [BOS_ID] + list(target)
    outputs = list(target) + [EOS_ID]
    total = np.zeros(contexts.shape[0])
    for prev, nxt in zip(inputs, outputs):
        y = params.emb_tgt[prev]
        z = sigmoid(y @ params.dec_Wz.T + h @ params.dec_Uz.T + cz)
        r = sigmoid(y @ params.dec_Wr.T + h @ params.dec_Ur.T + cr)
        h_cand = np.tanh(y @ params.dec_W.T + r * (h @ params.dec_U.T) + cw)
        h = z * h + (1.0 - z) * h_cand
        logp = log_softmax(h @ params.dec_out.T)
        total += logp[:, nxt]
    return total


# ---------------------------------------------------------------------------
# Checkpoint format: magic, version, dims, then named float32 tensors.
# ---------------------------------------------------------------------------

def save_checkpoint(params: GruEncDecParams, path: str | Path) -> None:
    tensors = params.tensors()
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack(
            "<5I", CHECKPOINT_VERSION, params.d_emb, params.d_hidden,
            params.K_source, params.K_target,
        ))
        f.write(struct.pack("<I", len(TENSOR_NAMES)))
        for name in TENSOR_NAMES:
            arr = np.ascontiguousarray(tensors[name], dtype="<f4")
            raw = name.encode("utf-8")
            f.write(struct.pack("<H", len(raw)))
            f.write(raw)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes())


def load_checkpoint(path: str | Path) -> GruEncDecParams:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"not a checkpoint file: bad magic {magic!r}")
        version, d_emb, d_hidden, k_src, k_tgt = struct.unpack("<5I", f.read(20))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        (count,) = struct.unpack("<I", f.read(4))
        tensors: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", f.read(2))
            name = f.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", f.read(1))
            shape = struct.unpack(f"<{ndim}I", f.read(4 * ndim))
            n = int(np.prod(shape))
            data = np.frombuffer(f.read(4 * n), dtype="<f4").reshape(shape)
            tensors[name] = data.astype(np.float64)
    missing = set(TENSOR_NAMES) - set(tensors)
    if missing:
        raise ValueError(f"checkpoint missing tensors: {sorted(missing)}")
    params = GruEncDecParams(**{_FIELD_OF_NAME[n]: tensors[n] for n in TENSOR_NAMES})
    params.check_shapes()
    if (params.d_emb, params.d_hidden) != (d_emb, d_hidden) or \
            (params.K_source, params.K_target) != (k_src, k_tgt):
        raise ValueError("checkpoint header disagrees with tensor shapes")
    return params
