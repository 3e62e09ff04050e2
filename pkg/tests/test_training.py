import dataclasses
import math

import numpy as np
import pytest

from segnmt.model import init_params, sequence_logprob
from segnmt.training import (
    TrainConfig,
    forward_backward,
    gradient_check,
    pair_loss,
    sgd_step,
    train,
)


def tiny(seed=0):
    return init_params(3, 4, 6, 5, seed=seed)


def test_pair_loss_matches_sequence_logprob():
    p = tiny(seed=2)
    source, target = [3, 4], [2, 3]
    expected = -sequence_logprob(p, source, target) / (len(target) + 1)
    assert pair_loss(p, source, target) == pytest.approx(expected, abs=1e-9)


def test_forward_backward_loss_agrees_with_pair_loss():
    p = tiny(seed=2)
    source, target = [3, 4, 5], [2]
    loss, steps, grads = forward_backward(p, source, target)
    assert steps == len(target) + 1
    assert loss / steps == pytest.approx(pair_loss(p, source, target), abs=1e-9)
    assert set(grads) == {f.name for f in dataclasses.fields(p)}


def test_gradient_check_small_models():
    for seed in range(3):
        p = init_params(2, 3, 5, 4, seed=seed)
        err = gradient_check(p, ([1, 3], [2, 1]))
        assert err <= 1e-4


def test_gradient_of_unused_embedding_row_is_zero():
    p = tiny(seed=5)
    _, _, grads = forward_backward(p, [3], [2])
    # source token 4 never appears in the pair
    assert np.allclose(grads["emb_src"][4], 0.0)


def test_gradient_check_epsilon_stays_finite():
    p = init_params(2, 3, 5, 4, seed=1)
    e1 = gradient_check(p, ([1, 2], [3]), epsilon=1e-4)
    e2 = gradient_check(p, ([1, 2], [3]), epsilon=2e-4)
    assert math.isfinite(e1) and math.isfinite(e2)


def test_sgd_clips_by_global_norm():
    p = tiny(seed=1)
    q = p.copy()
    grads = {f.name: np.ones_like(getattr(p, f.name)) for f in dataclasses.fields(p)}
    total = math.sqrt(sum(g.size for g in grads.values()))
    clip = 1.0
    sgd_step(q, grads, lr=1.0, clip=clip)
    # every entry moved by exactly lr * clip / ||g||
    step = clip / total
    for f in dataclasses.fields(p):
        assert np.allclose(getattr(p, f.name) - getattr(q, f.name), step, atol=1e-12)


def test_zero_learning_rate_is_identity():
    p = tiny(seed=3)
    q, _ = train(p.copy(), [([1, 2], [3])], TrainConfig(learning_rate=0.0, epochs=3))
    for name, t in p.tensors().items():
        assert np.array_equal(t, q.tensors()[name])


def test_untrained_loss_near_uniform_baseline():
    p = init_params(3, 4, 6, 9, seed=0)
    loss = pair_loss(p, [3, 4], [2, 3, 4])
    assert loss == pytest.approx(math.log(9), rel=0.05)


def test_memorizes_single_pair():
    p = init_params(32, 64, 8, 8, seed=0)
    q, trace = train(p, [([3, 4, 5], [5, 4, 3])], TrainConfig(
        learning_rate=0.25, epochs=500, clip_norm=2.0, seed=0))
    assert trace[-1] < 0.01


def test_training_deterministic():
    pairs = [([1, 2], [3]), ([4], [2, 2]), ([5, 1], [4, 3])]
    cfg = TrainConfig(learning_rate=0.2, epochs=4, seed=7)
    a, ta = train(tiny(seed=2), pairs, cfg)
    b, tb = train(tiny(seed=2), pairs, cfg)
    assert ta == tb
    for name, t in a.tensors().items():
        assert np.array_equal(t, b.tensors()[name])


def test_loss_trace_decreases_overall():
    pairs = [([1, 2, 3], [3, 2, 1]), ([4, 3], [3, 4])]
    _, trace = train(tiny(seed=2), pairs, TrainConfig(
        learning_rate=0.25, epochs=30, clip_norm=2.0, seed=1))
    assert trace[-1] < trace[0]


def test_max_len_filter_and_empty_rejection():
    long_pair = ([1] * 40, [2] * 40)
    with pytest.raises(ValueError):
        train(tiny(), [long_pair], TrainConfig(max_len=30, epochs=1))
