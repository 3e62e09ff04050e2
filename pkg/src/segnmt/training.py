"""Maximum-likelihood training by backpropagation through time.

Plain SGD with global-norm gradient clipping, batch size 1, fully
deterministic given a seed. A central finite-difference oracle checks
the analytic gradients on tiny models.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .corpus import BOS_ID, EOS_ID
from .model import GruEncDecParams, log_softmax, sigmoid


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.2
    epochs: int = 40
    clip_norm: float = 5.0
    seed: int = 0
    max_len: int = 30  # pairs with a longer side are dropped

    def validate(self) -> None:
        if self.learning_rate < 0:
            raise ValueError("learning rate must be >= 0")
        if self.clip_norm <= 0:
            raise ValueError("clip norm must be > 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


def _zero_grads(params: GruEncDecParams) -> dict[str, np.ndarray]:
    return {f.name: np.zeros_like(getattr(params, f.name)) for f in fields(params)}


def forward_backward(
    params: GruEncDecParams, source: list[int], target: list[int]
) -> tuple[float, int, dict[str, np.ndarray]]:
    """Loss (summed NLL in nats over target+EOS steps), step count, gradients.

    Gradients are of the *mean* per-step loss, matching the training
    objective (mean negative log-likelihood per target token).
    """
    p = params
    d_h = p.d_hidden

    # --- encoder forward (source + EOS) ---
    src_seq = list(source) + [EOS_ID]
    enc_cache = []
    h = np.zeros(d_h)
    for tok in src_seq:
        x = p.emb_src[tok]
        z = sigmoid(p.enc_Wz @ x + p.enc_Uz @ h)
        r = sigmoid(p.enc_Wr @ x + p.enc_Ur @ h)
        u = p.enc_U @ h
        h_cand = np.tanh(p.enc_W @ x + r * u)
        h_new = z * h + (1.0 - z) * h_cand
        enc_cache.append((tok, h, z, r, u, h_cand))
        h = h_new
    context = h

    # --- decoder forward (teacher forced) ---
    init_pre = p.dec_init @ context
    h = np.tanh(init_pre)
    h0 = h
    cz = p.dec_Cz @ context
    cr = p.dec_Cr @ context
    cw = p.dec_Cw @ context
    inputs = [BOS_ID] + list(target)
    outputs = list(target) + [EOS_ID]
    n_steps = len(outputs)
    dec_cache = []
    loss = 0.0
    for prev, nxt in zip(inputs, outputs):
        y = p.emb_tgt[prev]
        z = sigmoid(p.dec_Wz @ y + p.dec_Uz @ h + cz)
        r = sigmoid(p.dec_Wr @ y + p.dec_Ur @ h + cr)
        u = p.dec_U @ h
        h_cand = np.tanh(p.dec_W @ y + r * u + cw)
        h_new = z * h + (1.0 - z) * h_cand
        logp = log_softmax(h_new @ p.dec_out.T)
        loss -= logp[nxt]
        dec_cache.append((prev, nxt, h, z, r, u, h_cand, h_new, np.exp(logp)))
        h = h_new

    # --- decoder backward ---
    g = _zero_grads(p)
    scale = 1.0 / n_steps  # gradient of the mean loss
    dh = np.zeros(d_h)
    dc_extra = np.zeros(d_h)  # accumulates dcz/dcr/dcw contributions
    for prev, nxt, h_prev, z, r, u, h_cand, h_new, probs in reversed(dec_cache):
        dlogits = probs * scale
        dlogits[nxt] -= scale
        g["dec_out"] += np.outer(dlogits, h_new)
        dh = dh + p.dec_out.T @ dlogits

        dz = dh * (h_prev - h_cand)
        dh_cand = dh * (1.0 - z)
        dh_prev = dh * z

        da_h = dh_cand * (1.0 - h_cand * h_cand)
        y = p.emb_tgt[prev]
        g["dec_W"] += np.outer(da_h, y)
        dcw = da_h
        dr = da_h * u
        du = da_h * r
        g["dec_U"] += np.outer(du, h_prev)
        dh_prev = dh_prev + p.dec_U.T @ du

        da_r = dr * r * (1.0 - r)
        g["dec_Wr"] += np.outer(da_r, y)
        g["dec_Ur"] += np.outer(da_r, h_prev)
        dh_prev = dh_prev + p.dec_Ur.T @ da_r

        da_z = dz * z * (1.0 - z)
        g["dec_Wz"] += np.outer(da_z, y)
        g["dec_Uz"] += np.outer(da_z, h_prev)
        dh_prev = dh_prev + p.dec_Uz.T @ da_z

        g["emb_tgt"][prev] += p.dec_W.T @ da_h + p.dec_Wr.T @ da_r + p.dec_Wz.T @ da_z
        dc_extra = dc_extra + p.dec_Cw.T @ dcw + p.dec_Cr.T @ da_r + p.dec_Cz.T @ da_z
        # dcz/dcr/dcw also feed the gate-injection matrices via the context
        g["dec_Cw"] += np.outer(dcw, context)
        g["dec_Cr"] += np.outer(da_r, context)
        g["dec_Cz"] += np.outer(da_z, context)

        dh = dh_prev

    # initial decoder state h0 = tanh(dec_init @ context)
    da0 = dh * (1.0 - h0 * h0)
    g["dec_init"] += np.outer(da0, context)
    dcontext = dc_extra + p.dec_init.T @ da0

    # --- encoder backward ---
    dh = dcontext
    for tok, h_prev, z, r, u, h_cand in reversed(enc_cache):
        dz = dh * (h_prev - h_cand)
        dh_cand = dh * (1.0 - z)
        dh_prev = dh * z

        da_h = dh_cand * (1.0 - h_cand * h_cand)
        x = p.emb_src[tok]
        g["enc_W"] += np.outer(da_h, x)
        dr = da_h * u
        du = da_h * r
        g["enc_U"] += np.outer(du, h_prev)
        dh_prev = dh_prev + p.enc_U.T @ du

        da_r = dr * r * (1.0 - r)
        g["enc_Wr"] += np.outer(da_r, x)
        g["enc_Ur"] += np.outer(da_r, h_prev)
        dh_prev = dh_prev + p.enc_Ur.T @ da_r

        da_z = dz * z * (1.0 - z)
        g["enc_Wz"] += np.outer(da_z, x)
        g["enc_Uz"] += np.outer(da_z, h_prev)
        dh_prev = dh_prev + p.enc_Uz.T @ da_z

        g["emb_src"][tok] += p.enc_W.T @ da_h + p.enc_Wr.T @ da_r + p.enc_Wz.T @ da_z
        dh = dh_prev

    return float(loss), n_steps, g


def pair_loss(params: GruEncDecParams, source: list[int], target: list[int]) -> float:
    """Mean NLL per step, without gradients (used by the oracle)."""
    from .model import sequence_logprob

    n_steps = len(target) + 1
    return -sequence_logprob(params, source, target) / n_steps


def _global_norm(grads: dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))


def sgd_step(params: GruEncDecParams, grads: dict[str, np.ndarray], lr: float, clip: float) -> None:
    norm = _global_norm(grads)
    factor = lr if norm <= clip else lr * clip / norm
    for name, g in grads.items():
        arr = getattr(params, name)
        arr -= factor * g


def train(
    params: GruEncDecParams,
    pairs: list[tuple[list[int], list[int]]],
    config: TrainConfig,
) -> tuple[GruEncDecParams, list[float]]:
    """SGD over the corpus; returns trained params and per-epoch mean nats/token."""
    config.validate()
    kept = [
        (s, t) for s, t in pairs
        if len(s) <= config.max_len and len(t) <= config.max_len
    ]
    if not kept:
        raise ValueError("no training pairs remain after length filtering")

    params = params.copy()
    rng = np.random.default_rng(config.seed)
    trace = []
    for _ in range(config.epochs):
        order = rng.permutation(len(kept))
        total_nll = 0.0
        total_steps = 0
        for idx in order:
            src, tgt = kept[idx]
            loss, n_steps, grads = forward_backward(params, src, tgt)
            total_nll += loss
            total_steps += n_steps
            if config.learning_rate > 0:
                sgd_step(params, grads, config.learning_rate, config.clip_norm)
        trace.append(total_nll / total_steps)
    return params, trace


def gradient_check(
    params: GruEncDecParams,
    pair: tuple[list[int], list[int]],
    epsilon: float = 1e-4,
) -> float:
    """Max relative error between BPTT and central finite differences.

    Meant for tiny models only; perturbs every single parameter entry.
    """
    source, target = pair
    _, _, analytic = forward_backward(params, source, target)
    worst = 0.0
    for f in fields(params):
        arr = getattr(params, f.name)
        ga = analytic[f.name]
        flat = arr.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            up = pair_loss(params, source, target)
            flat[i] = orig - epsilon
            down = pair_loss(params, source, target)
            flat[i] = orig
            gn = (up - down) / (2.0 * epsilon)
            gA = ga.reshape(-1)[i]
            err = abs(gA - gn) / max(abs(gA) + abs(gn), 1e-6)
            worst = max(worst, err)
    return worst
