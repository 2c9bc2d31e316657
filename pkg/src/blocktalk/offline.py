"""Supervised pre-training: minibatch loops, early stopping on validation
exact match, and the hyperparameter sweep grid."""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import world
from .models import (Model, ModelConfig, Vocabulary, dataset_vocabulary,
                     encode_state, rng_from)
from .optim import make_optimizer, zero_grad

LSTM_LAYER_GRID = (1, 2)
CONV_LAYER_GRID = (4, 5)
HIDDEN_GRID = (32, 64, 128, 256)
DROPOUT_GRID = (0.0, 0.2, 0.5)


class DivergenceError(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    encoder: str = "lstm"
    decoder: str = "conv"
    hidden: int = 64
    enc_layers: Optional[int] = None
    dec_layers: Optional[int] = None
    dropout: float = 0.0
    fusion: str = "concat"
    optimizer: str = "adam"
    lr: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 50
    eval_every: Optional[int] = None  # steps; None = once per epoch
    patience: int = 10                # evaluations without improvement
    seed: int = 0
    dtype: str = "float32"

    def model_config(self):
        return ModelConfig(self.encoder, self.decoder, hidden=self.hidden,
                           enc_layers=self.enc_layers, dec_layers=self.dec_layers,
                           dropout=self.dropout, fusion=self.fusion,
                           dtype=self.dtype)


@dataclass
class EvalReport:
    exact_match: float
    per_token: float
    count: int


def encode_examples(vocab: Vocabulary, examples):
    """Dense id arrays for a rectangular (equal utterance length) dataset."""
    lengths = {len(ex.utterance) for ex in examples}
    if len(lengths) != 1:
        raise ValueError(f"mixed utterance lengths {sorted(lengths)}; "
                         "offline batches must be rectangular")
    utt_ids = np.stack([vocab.encode(ex.utterance) for ex in examples])
    state_ids = np.stack([encode_state(ex.start) for ex in examples])
    target_ids = np.stack([encode_state(ex.target) for ex in examples])
    return utt_ids, state_ids, target_ids


def audit_no_overlap(train_examples, held_examples):
    """Raise if any held-out utterance or column occurs in the training set."""
    train_utts = {ex.utterance for ex in train_examples}
    train_cols = {c for ex in train_examples for c in ex.start}
    for ex in held_examples:
        if ex.utterance in train_utts:
            raise ValueError(f"utterance leaked into training set: {ex.utterance}")
        for c in ex.start:
            if c in train_cols:
                raise ValueError(f"column leaked into training set: {c}")


def evaluate(model, examples, batch_size=512) -> EvalReport:
    """Exact-match accuracy (all 23 tokens right) plus per-token diagnostics."""
    utt_ids, state_ids, target_ids = encode_examples(model.vocab, examples)
    exact = 0
    tokens = 0
    for lo in range(0, len(examples), batch_size):
        hi = lo + batch_size
        pred = model.predict_ids(utt_ids[lo:hi], state_ids[lo:hi])
        match = pred == target_ids[lo:hi]
        exact += int(match.all(axis=1).sum())
        tokens += int(match.sum())
    n = len(examples)
    return EvalReport(exact / n, tokens / (n * world.STATE_LENGTH), n)


def train(config: TrainConfig, train_examples, val_examples, vocab=None,
          audit=True, verbose=False):
    """Train one model; returns (best-checkpoint model, evaluation curve)."""
    if audit:
        audit_no_overlap(train_examples, val_examples)
    vocab = vocab if vocab is not None else dataset_vocabulary(train_examples)
    model = Model(config.model_config(), vocab, rng=rng_from(config.seed, "init"))
    utt_ids, state_ids, target_ids = encode_examples(vocab, train_examples)
    params = model.parameters()
    optimizer = make_optimizer(config.optimizer, config.lr)
    order_rng = rng_from(config.seed, "order")
    drop_rng = rng_from(config.seed, "dropout")

    n = len(train_examples)
    steps_per_epoch = max(1, (n + config.batch_size - 1) // config.batch_size)
    eval_every = config.eval_every or steps_per_epoch

    curve = []
    best = {"exact": -1.0, "state": None, "step": 0}
    stale = 0
    step = 0
    loss_sum, loss_count = 0.0, 0
    stop = False
    for _ in range(config.max_epochs):
        perm = order_rng.permutation(n)
        for lo in range(0, n, config.batch_size):
            idx = perm[lo:lo + config.batch_size]
            zero_grad(params)
            loss = model.loss(utt_ids[idx], state_ids[idx], target_ids[idx],
                              train=True, rng=drop_rng)
            value = float(loss.data)
            if not np.isfinite(value):
                raise DivergenceError(f"loss became {value} at step {step}")
            loss.backward()
            optimizer.step(params)
            loss_sum += value
            loss_count += 1
            step += 1
            if step % eval_every == 0:
                report = evaluate(model, val_examples)
                curve.append({"step": step,
                              "train_loss": loss_sum / loss_count,
                              "val_exact": report.exact_match,
                              "val_per_token": report.per_token})
                loss_sum, loss_count = 0.0, 0
                if verbose:
                    print(f"step {step}: loss {curve[-1]['train_loss']:.4f} "
                          f"val {report.exact_match:.3f}")
                if report.exact_match > best["exact"]:
                    best = {"exact": report.exact_match,
                            "state": model.state_dict(), "step": step}
                    stale = 0
                else:
                    stale += 1
                if stale >= config.patience or best["exact"] == 1.0:
                    stop = True
                    break
        if stop:
            break
    if best["state"] is not None:
        model.load_state_dict(best["state"])
    return model, curve


def paper_grid():
    """All architecture/layer/width/dropout combinations from the search grid."""
    configs = []
    for encoder, decoder in (("lstm", "lstm"), ("lstm", "conv"), ("conv", "lstm"),
                             ("conv", "conv"), ("bow", "lstm")):
        enc_options = ((None,) if encoder == "bow" else
                       LSTM_LAYER_GRID if encoder == "lstm" else CONV_LAYER_GRID)
        dec_options = LSTM_LAYER_GRID if decoder == "lstm" else CONV_LAYER_GRID
        for enc_layers, dec_layers, hidden, dropout in itertools.product(
                enc_options, dec_options, HIDDEN_GRID, DROPOUT_GRID):
            configs.append(TrainConfig(encoder=encoder, decoder=decoder,
                                       hidden=hidden, enc_layers=enc_layers,
                                       dec_layers=dec_layers, dropout=dropout))
    return configs


def sweep(train_examples, val_examples, grid=None, budget=None, seed=0,
          out_path=None, **train_kwargs):
    """Run a (possibly budgeted) grid search; returns (results, best per arch).

    Results are ordered like the grid; each record holds the config and its
    best validation exact match, reproducible from the config's seed.
    """
    grid = list(paper_grid() if grid is None else grid)
    if budget is not None and budget < len(grid):
        keep = rng_from(seed, "sweep").choice(len(grid), size=budget, replace=False)
        grid = [grid[i] for i in sorted(keep)]
    results = []
    best_by_arch = {}
    out = open(out_path, "w") if out_path else None
    try:
        for config in grid:
            model, curve = train(config, train_examples, val_examples,
                                 **train_kwargs)
            val_exact = max((pt["val_exact"] for pt in curve), default=0.0)
            record = {"config": asdict(config), "arch": model.config.name,
                      "val_exact": val_exact}
            results.append(record)
            if out:
                out.write(json.dumps(record) + "\n")
                out.flush()
            arch = model.config.name
            if arch not in best_by_arch or val_exact > best_by_arch[arch]["val_exact"]:
                best_by_arch[arch] = record
    finally:
        if out:
            out.close()
    return results, best_by_arch
