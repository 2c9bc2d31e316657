"""Encoder-decoder bundles for mapping (utterance, start state) -> end state.

Encoders: lstm | conv | bow.  Decoders: lstm | conv.  The decoder reads the
23 serialized state tokens, attends over the encoder outputs, and emits one
distribution over the 6 state tokens per position.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import world
from .nn import (BilinearAttention, ConvStack, Embedding, LSTM, Linear,
                 apply_dropout, cross_entropy, per_example_nll)
from .tensor import concat, softmax, tanh

ENCODERS = ("lstm", "conv", "bow")
DECODERS = ("lstm", "conv")
ARCH_PAIRS = (
    ("lstm", "lstm"),   # seq2seq
    ("lstm", "conv"),   # seq2conv
    ("conv", "lstm"),   # conv2seq
    ("conv", "conv"),   # conv2conv
    ("bow", "lstm"),    # bow2seq
)

STATE_INDEX = {tok: i for i, tok in enumerate(world.STATE_TOKENS)}


def arch_name(encoder, decoder):
    enc = {"lstm": "seq", "conv": "conv", "bow": "bow"}[encoder]
    dec = {"lstm": "seq", "conv": "conv"}[decoder]
    return f"{enc}2{dec}"


def rng_from(seed, *tags):
    """Deterministic substream from a base seed plus context tags."""
    import zlib

    keys = [int(seed)]
    for tag in tags:
        keys.append(tag if isinstance(tag, int) else zlib.crc32(str(tag).encode()))
    return np.random.default_rng(np.random.SeedSequence(keys))


class UnknownTokenError(KeyError):
    pass


class DuplicateWordError(ValueError):
    pass


class Vocabulary:
    """Dense word ids; offline words are frozen, online words appended."""

    def __init__(self, words, frozen_size=None, new_word_ids=None):
        self.words = list(words)
        if len(set(self.words)) != len(self.words):
            raise DuplicateWordError("vocabulary has repeated words")
        self.index = {w: i for i, w in enumerate(self.words)}
        self.frozen_size = len(self.words) if frozen_size is None else frozen_size
        self.new_word_ids = list(new_word_ids or [])

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.index

    def add(self, word):
        if word in self.index:
            raise DuplicateWordError(f"word already registered: {word!r}")
        idx = len(self.words)
        self.words.append(word)
        self.index[word] = idx
        self.new_word_ids.append(idx)
        return idx

    def encode(self, tokens):
        try:
            return np.array([self.index[t] for t in tokens], dtype=np.int64)
        except KeyError as err:
            raise UnknownTokenError(f"token not in vocabulary: {err.args[0]!r}") from None

    def copy(self):
        return Vocabulary(self.words, self.frozen_size, self.new_word_ids)

    def to_dict(self):
        return {
            "words": self.words,
            "frozen_size": self.frozen_size,
            "new_word_ids": self.new_word_ids,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["words"], d["frozen_size"], d["new_word_ids"])


def grammar_vocabulary():
    return Vocabulary(sorted(world.GRAMMAR_WORDS))


def dataset_vocabulary(examples):
    """Frozen vocabulary over all words occurring in an example stream."""
    return Vocabulary(sorted({t for ex in examples for t in ex.utterance}))


@dataclass
class ModelConfig:
    encoder: str
    decoder: str
    hidden: int = 64
    enc_layers: Optional[int] = None
    dec_layers: Optional[int] = None
    dropout: float = 0.0
    fusion: str = "concat"  # how decoder features meet the attention context
    dtype: str = "float32"

    def __post_init__(self):
        if self.fusion not in ("concat", "tanh", "gated"):
            raise ValueError(f"unknown fusion {self.fusion!r}")
        if self.encoder not in ENCODERS:
            raise ValueError(f"unknown encoder {self.encoder!r}")
        if self.decoder not in DECODERS:
            raise ValueError(f"unknown decoder {self.decoder!r}")
        if self.enc_layers is None:
            self.enc_layers = {"lstm": 1, "conv": 4, "bow": 0}[self.encoder]
        if self.dec_layers is None:
            self.dec_layers = {"lstm": 1, "conv": 4}[self.decoder]

    @property
    def name(self):
        return arch_name(self.encoder, self.decoder)


MAX_UTTERANCE_LENGTH = 64  # positional table size for the conv encoder


class Model:
    """Parameter bundle plus forward pass; single-writer during training.

    Convolution stacks see only a local window, so conv encoders/decoders add
    a learned positional embedding to their inputs; position words like "3rd"
    or "even" need absolute slot identity.  LSTMs track position through
    recurrence and get none.
    """

    def __init__(self, config: ModelConfig, vocab: Vocabulary, seed=0, rng=None):
        self.config = config
        self.vocab = vocab
        rng = rng if rng is not None else rng_from(seed, "init")
        d, dt = config.hidden, config.dtype
        self.utt_emb = Embedding(len(vocab), d, rng, dt)
        self.enc_pos = None
        self.dec_pos = None
        if config.encoder == "lstm":
            self.encoder = LSTM(d, d, config.enc_layers, rng, dt)
        elif config.encoder == "conv":
            self.encoder = ConvStack(d, d, config.enc_layers, rng, dt)
            self.enc_pos = Embedding(MAX_UTTERANCE_LENGTH, d, rng, dt)
        else:
            self.encoder = None
        self.state_emb = Embedding(len(world.STATE_TOKENS), d, rng, dt)
        if config.decoder == "lstm":
            self.decoder = LSTM(d, d, config.dec_layers, rng, dt)
        else:
            self.decoder = ConvStack(d, d, config.dec_layers, rng, dt)
            self.dec_pos = Embedding(world.STATE_LENGTH, d, rng, dt)
        self.attention = BilinearAttention(d, rng, dt)
        self.fuse = None
        if config.fusion == "tanh":
            self.fuse = Linear(2 * d, d, rng, dt)
            self.out = Linear(d, len(world.STATE_TOKENS), rng, dt)
        elif config.fusion == "gated":
            self.out = Linear(3 * d, len(world.STATE_TOKENS), rng, dt)
        else:
            self.out = Linear(2 * d, len(world.STATE_TOKENS), rng, dt)

    # -- parameters ----------------------------------------------------------

    def parameters(self):
        params = {}
        params.update(self.utt_emb.params("enc_emb"))
        if self.encoder is not None:
            params.update(self.encoder.params("encoder"))
        if self.enc_pos is not None:
            params.update(self.enc_pos.params("encoder.pos"))
        if self.dec_pos is not None:
            params.update(self.dec_pos.params("decoder.pos"))
        params.update(self.state_emb.params("dec_emb"))
        params.update(self.decoder.params("decoder"))
        params.update(self.attention.params("attn"))
        if self.fuse is not None:
            params.update(self.fuse.params("fuse"))
        params.update(self.out.params("out"))
        return params

    def encoder_param_names(self):
        names = set(self.utt_emb.params("enc_emb"))
        if self.encoder is not None:
            names |= set(self.encoder.params("encoder"))
        if self.enc_pos is not None:
            names |= set(self.enc_pos.params("encoder.pos"))
        return names

    def decoder_param_names(self):
        return set(self.parameters()) - self.encoder_param_names()

    def state_dict(self):
        return {name: p.data.copy() for name, p in self.parameters().items()}

    def load_state_dict(self, state):
        params = self.parameters()
        if set(params) != set(state):
            raise ValueError("parameter names do not match")
        for name, p in params.items():
            if p.data.shape != state[name].shape:
                raise ValueError(f"shape mismatch for {name}")
            p.data = state[name].astype(p.data.dtype).copy()

    def clone(self):
        other = Model(self.config, self.vocab.copy(), rng=np.random.default_rng(0))
        other.load_state_dict(self.state_dict())
        return other

    # -- forward -------------------------------------------------------------

    def forward(self, utt_ids, state_ids, train=False, rng=None):
        """utt_ids (B, M), state_ids (B, 23) -> logits Tensor (B, 23, 6)."""
        cfg = self.config
        drop = cfg.dropout if train else 0.0
        E = self.utt_emb(utt_ids)
        if self.enc_pos is not None:
            m = utt_ids.shape[1]
            if m > MAX_UTTERANCE_LENGTH:
                raise ValueError(f"utterance longer than {MAX_UTTERANCE_LENGTH}")
            E = E + self.enc_pos.W[:m]
        if drop > 0.0:
            E = apply_dropout(E, drop, rng)
        enc_finals = None
        if cfg.encoder == "lstm":
            H, enc_finals = self.encoder(E, dropout=drop, rng=rng)
        elif cfg.encoder == "conv":
            H = self.encoder(E, dropout=drop, rng=rng)
        else:
            H = E.mean(axis=1, keepdims=True)
        S = self.state_emb(state_ids)
        if self.dec_pos is not None:
            S = S + self.dec_pos.W[:state_ids.shape[1]]
        if drop > 0.0:
            S = apply_dropout(S, drop, rng)
        if cfg.decoder == "lstm":
            F, _ = self.decoder(S, init=enc_finals, dropout=drop, rng=rng)
        else:
            F = self.decoder(S, dropout=drop, rng=rng)
        context = self.attention(F, H)
        if self.config.fusion == "tanh":
            return self.out(tanh(self.fuse(concat([F, context], axis=2))))
        if self.config.fusion == "gated":
            return self.out(concat([F, context, F * context], axis=2))
        return self.out(concat([F, context], axis=2))

    def loss(self, utt_ids, state_ids, target_ids, train=False, rng=None):
        """Mean negative log-likelihood per output position."""
        logits = self.forward(utt_ids, state_ids, train=train, rng=rng)
        return cross_entropy(logits, target_ids)

    # -- inference -----------------------------------------------------------

    def predict_ids(self, utt_ids, state_ids):
        logits = self.forward(utt_ids, state_ids)
        return np.argmax(logits.data, axis=-1)

    def predict_tokens(self, utt_tokens: Sequence[str], state):
        """Greedy per-position decode; returns 23 state tokens."""
        utt_ids = self.vocab.encode(utt_tokens)[None, :]
        state_ids = encode_state(state)[None, :]
        ids = self.predict_ids(utt_ids, state_ids)[0]
        return tuple(world.STATE_TOKENS[i] for i in ids)

    def predict_distributions(self, utt_tokens, state):
        """Per-position probabilities over the 6 state tokens, shape (23, 6)."""
        utt_ids = self.vocab.encode(utt_tokens)[None, :]
        state_ids = encode_state(state)[None, :]
        return softmax(self.forward(utt_ids, state_ids)).data[0]


def encode_state(state):
    return np.array([STATE_INDEX[t] for t in world.serialize_state(state)],
                    dtype=np.int64)


def encode_state_tokens(tokens):
    try:
        return np.array([STATE_INDEX[t] for t in tokens], dtype=np.int64)
    except KeyError as err:
        raise UnknownTokenError(f"not a state token: {err.args[0]!r}") from None


def register_new_words(model: Model, words, rng):
    """Append embedding rows for unseen words; existing rows are untouched."""
    for word in words:
        if word in model.vocab:
            raise DuplicateWordError(f"word already registered: {word!r}")
    ids = [model.vocab.add(w) for w in words]
    if ids:
        model.utt_emb.append_rows(len(ids), rng)
    return ids


def cosine(u, v):
    """Cosine similarity of two vectors; rejects zero vectors."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine undefined for zero vectors")
    return float(u @ v / (nu * nv))


# -- checkpoints ---------------------------------------------------------


def save_checkpoint(model: Model, path):
    meta = {"config": asdict(model.config), "vocab": model.vocab.to_dict()}
    np.savez(path, __meta__=np.array(json.dumps(meta)), **model.state_dict())


def load_checkpoint(path):
    with np.load(path) as data:
        meta = json.loads(str(data["__meta__"]))
        state = {k: data[k] for k in data.files if k != "__meta__"}
    config = ModelConfig(**meta["config"])
    vocab = Vocabulary.from_dict(meta["vocab"])
    model = Model(config, vocab, rng=np.random.default_rng(0))
    model.load_state_dict(state)
    return model
