import numpy as np
import pytest

from blocktalk import world
from blocktalk.models import ARCH_PAIRS, Model, ModelConfig, grammar_vocabulary, encode_state
from blocktalk.optim import zero_grad
from blocktalk.stacked import StackedAdam, StackedModel, StackedSGD

from gradcheck import numeric_gradient, relative_error


def make_copies(encoder, decoder, k=3, hidden=6, dtype="float64", **kw):
    config = ModelConfig(encoder, decoder, hidden=hidden, dtype=dtype, **kw)
    vocab = grammar_vocabulary()
    return [Model(config, vocab, seed=100 + i) for i in range(k)]


def example_batch(rng, k, batch=2, m=5):
    utt_ids = rng.integers(0, 19, size=(k, batch, m))
    state_ids = rng.integers(0, 6, size=(k, batch, 23))
    target_ids = rng.integers(0, 6, size=(k, batch, 23))
    return utt_ids, state_ids, target_ids


@pytest.mark.parametrize("encoder,decoder", ARCH_PAIRS)
def test_stacked_forward_matches_single_copies(encoder, decoder):
    copies = make_copies(encoder, decoder)
    stackm = StackedModel(copies)
    rng = np.random.default_rng(0)
    utt_ids, state_ids, _ = example_batch(rng, k=3)
    logits = stackm.forward(utt_ids, state_ids).data
    for i, copy in enumerate(copies):
        single = copy.forward(utt_ids[i], state_ids[i]).data
        assert np.allclose(logits[i], single, atol=1e-12)


@pytest.mark.parametrize("fusion", ["concat", "tanh", "gated"])
def test_stacked_fusion_variants_match_single(fusion):
    copies = make_copies("lstm", "conv", fusion=fusion)
    stackm = StackedModel(copies)
    rng = np.random.default_rng(7)
    utt_ids, state_ids, target_ids = example_batch(rng, k=3, batch=1)
    loss, per_copy = stackm.loss(utt_ids, state_ids, target_ids)
    loss.backward()
    for i, copy in enumerate(copies):
        params = copy.parameters()
        zero_grad(params)
        single = copy.loss(utt_ids[i], state_ids[i], target_ids[i])
        single.backward()
        assert float(single.data) == pytest.approx(per_copy[i])
        for name, p in params.items():
            assert np.allclose(stackm.params[name].grad[i], p.grad,
                               atol=1e-10), name


@pytest.mark.parametrize("encoder,decoder", ARCH_PAIRS)
def test_stacked_gradients_match_single_copies(encoder, decoder):
    copies = make_copies(encoder, decoder)
    stackm = StackedModel(copies)
    rng = np.random.default_rng(1)
    utt_ids, state_ids, target_ids = example_batch(rng, k=3, batch=1)

    loss, per_copy = stackm.loss(utt_ids, state_ids, target_ids)
    loss.backward()
    assert loss.data == pytest.approx(per_copy.sum())

    for i, copy in enumerate(copies):
        params = copy.parameters()
        zero_grad(params)
        single = copy.loss(utt_ids[i], state_ids[i], target_ids[i])
        single.backward()
        assert float(single.data) == pytest.approx(per_copy[i])
        for name, p in params.items():
            assert np.allclose(stackm.params[name].grad[i], p.grad, atol=1e-10), name


def test_stacked_gradcheck_with_l2():
    copies = make_copies("lstm", "conv", k=2, hidden=4)
    stackm = StackedModel(copies)
    rng = np.random.default_rng(2)
    utt_ids, state_ids, target_ids = example_batch(rng, k=2, batch=1)
    l2_params = [stackm.params["enc_emb.W"], stackm.params["attn.W"]]

    def compute():
        loss, _ = stackm.loss(utt_ids, state_ids, target_ids,
                              l2=0.01, l2_params=l2_params)
        return loss

    loss = compute()
    loss.backward()
    for name in ("enc_emb.W", "encoder.l0.Wx", "decoder.l1.W", "attn.W", "out.b"):
        p = stackm.params[name]
        approx = numeric_gradient(lambda: float(compute().data), p.data)
        assert relative_error(p.grad, approx) <= 1e-4, name


def test_views_share_memory_and_updates():
    copies = make_copies("lstm", "conv", k=2, dtype="float32")
    stackm = StackedModel(copies)
    view = stackm.view(1)
    assert np.shares_memory(view.parameters()["attn.W"].data,
                            stackm.params["attn.W"].data)
    stackm.params["attn.W"].data[1] += 1.0
    assert np.allclose(view.parameters()["attn.W"].data,
                       copies[1].parameters()["attn.W"].data + 1.0)


def test_grow_vocab_per_copy_rows_differ():
    copies = make_copies("lstm", "conv", k=2, dtype="float32")
    stackm = StackedModel(copies)
    before = stackm.params["enc_emb.W"].data.copy()
    rngs = [np.random.default_rng(10), np.random.default_rng(20)]
    stackm.grow_vocab(["roze"], rngs)
    W = stackm.params["enc_emb.W"].data
    assert W.shape[1] == before.shape[1] + 1
    assert np.array_equal(W[:, :before.shape[1]], before)
    assert np.abs(W[0, -1] - W[1, -1]).max() > 0
    view = stackm.view(0)
    assert view.vocab.index["roze"] == before.shape[1]
    pred = view.predict_tokens(["add", "roze", "at", "1st", "tile"], ((),) * 6)
    assert len(pred) == 23


def test_stacked_adam_grows_with_vocab():
    copies = make_copies("lstm", "conv", k=2, dtype="float32")
    stackm = StackedModel(copies)
    opt = StackedAdam(lr=1e-2)
    rng = np.random.default_rng(3)
    utt_ids, state_ids, target_ids = example_batch(rng, k=2, batch=1)
    loss, _ = stackm.loss(utt_ids, state_ids, target_ids)
    loss.backward()
    opt.step(stackm.params, t=1)
    stackm.grow_vocab(["roze"], [np.random.default_rng(5), np.random.default_rng(6)])
    for p in stackm.params.values():
        p.grad = None
    loss, _ = stackm.loss(utt_ids, state_ids, target_ids)
    loss.backward()
    opt.step(stackm.params, t=2)  # must not blow up on the grown table
    assert opt._m["enc_emb.W"].shape == stackm.params["enc_emb.W"].data.shape


def test_masked_step_only_touches_active_copies():
    copies = make_copies("lstm", "conv", k=3, dtype="float64")
    stackm = StackedModel(copies)
    rng = np.random.default_rng(4)
    utt_ids, state_ids, target_ids = example_batch(rng, k=3, batch=1)
    for opt in (StackedSGD(0.1), StackedAdam(0.1)):
        snapshot = {n: p.data.copy() for n, p in stackm.params.items()}
        loss, _ = stackm.loss(utt_ids, state_ids, target_ids)
        loss.backward()
        active = np.array([True, False, True])
        for p in stackm.params.values():
            if p.grad is not None:
                p.grad[1] = 0.0
        opt.step(stackm.params, t=1, active=active)
        for name, p in stackm.params.items():
            assert np.array_equal(p.data[1], snapshot[name][1]), name
            assert np.abs(p.data[0] - snapshot[name][0]).max() > 0, name
        for p in stackm.params.values():
            p.grad = None
