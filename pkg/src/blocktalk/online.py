"""Online adaptation: observe -> select -> predict -> feedback -> train.

A session keeps k copies of the pre-trained model (stacked for speed),
an append-only buffer of observed examples, and trains every copy for S
single-example gradient steps after each interaction, updating only the
configured adapt scope.  Prediction always happens before the feedback for
the current example is consumed, so online accuracy measures generalization
from past interactions only.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from . import world
from .models import Model, encode_state, rng_from
from .stacked import StackedModel, make_stacked_optimizer

REUSE_SCOPES = ("all", "dec", "none")
ADAPT_SCOPES = ("newwords", "embeddings", "encoder", "all")


class InvalidScopeError(ValueError):
    """Scope pair would leave a randomly initialized component untrained."""


class PendingFeedbackError(RuntimeError):
    pass


class NoPendingPredictionError(RuntimeError):
    pass


@dataclass
class AdaptConfig:
    reuse: str = "all"
    adapt: str = "embeddings"
    k: int = 7
    steps: int = 100
    optimizer: str = "adam"
    lr: float = 1e-2
    l2: float = 0.0
    selection: str = "greedy"
    seed: int = 0

    def __post_init__(self):
        if self.reuse not in REUSE_SCOPES:
            raise ValueError(f"unknown reuse scope {self.reuse!r}")
        if self.adapt not in ADAPT_SCOPES:
            raise ValueError(f"unknown adapt scope {self.adapt!r}")
        if self.selection not in ("greedy", "1out"):
            raise ValueError(f"unknown selection strategy {self.selection!r}")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        validate_scopes(self.reuse, self.adapt)


def validate_scopes(reuse, adapt):
    """Every reinitialized component must be inside the adapt scope."""
    reinit = {"all": frozenset(), "dec": frozenset({"enc"}),
              "none": frozenset({"enc", "dec"})}[reuse]
    trained = {"newwords": frozenset(), "embeddings": frozenset(),
               "encoder": frozenset({"enc"}),
               "all": frozenset({"enc", "dec"})}[adapt]
    if not reinit <= trained:
        raise InvalidScopeError(
            f"reuse={reuse!r} with adapt={adapt!r} leaves a randomly "
            f"initialized component permanently untrained"
        )


def valid_scope_pairs():
    return [(r, a) for r in REUSE_SCOPES for a in ADAPT_SCOPES
            if _is_valid(r, a)]


def _is_valid(reuse, adapt):
    try:
        validate_scopes(reuse, adapt)
        return True
    except InvalidScopeError:
        return False


def online_grid():
    """The online hyperparameter grid: 2 x 3 x 4 x 3 x 2 = 144 configs."""
    grid = []
    for opt, steps, l2, lr, sel in itertools.product(
            ("adam", "sgd"), (100, 200, 500), (0.0, 1e-2, 1e-3, 1e-4),
            (1e-1, 1e-2, 1e-3), ("greedy", "1out")):
        grid.append({"optimizer": opt, "steps": steps, "l2": l2, "lr": lr,
                     "selection": sel})
    return grid


@dataclass
class StepRecord:
    t: int
    utterance: list
    predicted: list
    target: list
    correct: bool
    selected_model: int
    losses: Optional[list]

    def to_dict(self):
        return asdict(self)


@dataclass
class _Stored:
    utt_tokens: tuple
    start: tuple
    target: tuple
    utt_ids: np.ndarray
    state_ids: np.ndarray
    target_ids: np.ndarray


def _reinit_copy(base: Model, config: AdaptConfig, copy_idx: int) -> Model:
    model = base.clone()
    if config.reuse == "all":
        return model
    fresh = Model(model.config, model.vocab,
                  rng=rng_from(config.seed, "reinit", copy_idx))
    names = (model.encoder_param_names() if config.reuse == "dec"
             else set(model.parameters()))
    params = model.parameters()
    fresh_params = fresh.parameters()
    for name in names:
        params[name].data = fresh_params[name].data.copy()
    return model


class AdaptSession:
    """k model copies + buffer + per-interaction log (Algorithm-1 mechanics)."""

    def __init__(self, base: Model, config: AdaptConfig):
        self.config = config
        copies = [_reinit_copy(base, config, i) for i in range(config.k)]
        for copy in copies[1:]:
            copy.vocab = copies[0].vocab
        self.stack = StackedModel(copies)
        self._set_adapt_scope()
        self.optimizer = make_stacked_optimizer(config.optimizer, config.lr)
        self.opt_steps = 0
        self.buffer: List[_Stored] = []
        self.log: List[StepRecord] = []
        self.pending = None
        self.quarantined = np.zeros(config.k, dtype=bool)
        self._word_rngs = [rng_from(config.seed, "newwords", i)
                           for i in range(config.k)]
        self._draw_rngs = [rng_from(config.seed, "draw", i)
                           for i in range(config.k)]

    # -- scope wiring ----------------------------------------------------

    def _set_adapt_scope(self):
        model = self.stack.view(0)
        enc = model.encoder_param_names()
        everything = set(self.stack.params)
        scope = self.config.adapt
        if scope in ("newwords", "embeddings"):
            names = {"enc_emb.W"}
        elif scope == "encoder":
            names = enc
        else:
            names = everything
        self.adapt_names = names
        for name, p in self.stack.params.items():
            p.requires_grad = name in names

    def _trainable_params(self):
        return {name: self.stack.params[name] for name in sorted(self.adapt_names)}

    def _newword_rows(self):
        return np.array(self.stack.vocab.new_word_ids, dtype=np.int64)

    def _l2_spec(self):
        """Penalty covers exactly the adapt scope."""
        if self.config.l2 <= 0.0:
            return [], None
        tensors = [self.stack.params[n] for n in sorted(self.adapt_names)]
        if self.config.adapt == "newwords":
            rows = self._newword_rows()
            if rows.size == 0:
                return [], None
            return tensors, rows
        return tensors, None

    # -- interaction protocol ---------------------------------------------

    @property
    def t(self):
        return len(self.log)

    @property
    def online_accuracy(self):
        if not self.log:
            return 0.0
        return float(np.mean([rec.correct for rec in self.log]))

    def observe(self, utt_tokens: Sequence[str], start_state):
        """Register words, select a copy, predict.  No training happens here."""
        if self.pending is not None:
            raise PendingFeedbackError("previous prediction still awaits feedback")
        utt_tokens = tuple(utt_tokens)
        new_words = [w for w in dict.fromkeys(utt_tokens)
                     if w not in self.stack.vocab]
        if new_words:
            self.stack.grow_vocab(new_words, self._word_rngs)
        selected, losses = self._select()
        predicted = self.stack.view(selected).predict_tokens(utt_tokens, start_state)
        self.pending = (utt_tokens, start_state, selected, predicted, losses)
        return predicted, selected

    def feedback(self, target_state):
        """Score the pending prediction, buffer the example, train all copies."""
        if self.pending is None:
            raise NoPendingPredictionError("no prediction awaiting feedback")
        utt_tokens, start, selected, predicted, losses = self.pending
        self.pending = None
        target_tokens = world.serialize_state(target_state)
        correct = tuple(predicted) == tuple(target_tokens)
        record = StepRecord(
            t=self.t + 1,
            utterance=list(utt_tokens),
            predicted=list(predicted),
            target=list(target_tokens),
            correct=bool(correct),
            selected_model=int(selected),
            losses=None if losses is None else [float(x) for x in losses],
        )
        self.log.append(record)
        self.buffer.append(_Stored(
            utt_tokens, start, target_state,
            self.stack.vocab.encode(utt_tokens),
            encode_state(start), encode_state(target_state),
        ))
        self._train()
        return record

    def interact(self, utt_tokens, start_state, target_state):
        self.observe(utt_tokens, start_state)
        return self.feedback(target_state)

    def run(self, examples):
        """Replay (utterance, start, target) triples; returns online accuracy."""
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            for utt, start, target in examples:
                self.interact(utt, start, target)
        return self.online_accuracy

    # -- selection ---------------------------------------------------------

    def _selection_pools(self):
        """(B_VA, B_TR) views of the buffer under the configured strategy."""
        buf = self.buffer
        if self.config.selection == "1out" and len(buf) >= 2:
            return buf[-1:], buf[:-1]
        return buf, buf

    def _select(self):
        b_va, _ = self._selection_pools()
        if not b_va:
            return 0, None
        losses = self._copy_losses(b_va)
        safe = np.where(np.isfinite(losses), losses, np.inf)
        return int(np.argmin(safe)), losses

    def _copy_losses(self, examples):
        """Per-copy total loss over a pool, batched by utterance length."""
        k = self.config.k
        totals = np.zeros(k)
        groups = {}
        for ex in examples:
            groups.setdefault(len(ex.utt_ids), []).append(ex)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            for group in groups.values():
                utt = np.broadcast_to(np.stack([ex.utt_ids for ex in group]),
                                      (k, len(group), len(group[0].utt_ids)))
                st = np.broadcast_to(np.stack([ex.state_ids for ex in group]),
                                     (k, len(group), world.STATE_LENGTH))
                tg = np.broadcast_to(np.stack([ex.target_ids for ex in group]),
                                     (k, len(group), world.STATE_LENGTH))
                totals += self.stack.per_copy_example_nll(utt, st, tg).sum(axis=1)
        return totals

    # -- training ------------------------------------------------------------

    def _train(self):
        steps = self.config.steps
        if steps <= 0:
            return
        _, b_tr = self._selection_pools()
        if not b_tr:
            return
        k = self.config.k
        params = self._trainable_params()
        l2_params, l2_rows = self._l2_spec()
        newword_rows = (self._newword_rows()
                        if self.config.adapt == "newwords" else None)
        for _ in range(steps):
            self.opt_steps += 1
            draws = [self._draw_rngs[i].integers(0, len(b_tr)) for i in range(k)]
            chosen = [b_tr[d] for d in draws]
            lengths = {len(ex.utt_ids) for ex in chosen}
            if len(lengths) == 1:
                self._train_substep(chosen, params, l2_params, l2_rows,
                                    newword_rows, active=None)
            else:
                # mixed utterance lengths: one masked sub-step per length
                for length in sorted(lengths):
                    idx = [i for i in range(k) if len(chosen[i].utt_ids) == length]
                    filled = [chosen[i] if i in idx else chosen[idx[0]]
                              for i in range(k)]
                    mask = np.zeros(k, dtype=bool)
                    mask[idx] = True
                    self._train_substep(filled, params, l2_params, l2_rows,
                                        newword_rows, active=mask)

    def _train_substep(self, chosen, params, l2_params, l2_rows, newword_rows,
                       active):
        k = self.config.k
        utt = np.stack([ex.utt_ids for ex in chosen])[:, None, :]
        st = np.stack([ex.state_ids for ex in chosen])[:, None, :]
        tg = np.stack([ex.target_ids for ex in chosen])[:, None, :]
        for p in params.values():
            p.grad = None
        loss, per_copy = self.stack.loss(utt, st, tg, l2=self.config.l2,
                                         l2_params=l2_params, l2_rows=l2_rows)
        bad = ~np.isfinite(per_copy)
        if bad.any():
            self.quarantined |= bad
        loss.backward()
        if newword_rows is not None:
            W = self.stack.params["enc_emb.W"]
            if W.grad is not None:
                keep = np.zeros(W.data.shape[1], dtype=bool)
                if newword_rows.size:
                    keep[newword_rows] = True
                W.grad[:, ~keep] = 0.0
        if active is None and not self.quarantined.any():
            self.optimizer.step(params, t=self.opt_steps, active=None)
        else:
            mask = (np.ones(k, dtype=bool) if active is None else active.copy())
            mask &= ~self.quarantined
            if mask.any():
                for p in params.values():
                    if p.grad is not None:
                        p.grad[~mask] = 0.0
                self.optimizer.step(params, t=self.opt_steps, active=mask)


def run_session(base: Model, config: AdaptConfig, examples):
    """Fresh session over an example stream -> (online accuracy, session)."""
    session = AdaptSession(base, config)
    accuracy = session.run(examples)
    return accuracy, session


def session_report(session: AdaptSession):
    return {
        "config": asdict(session.config),
        "summary": {
            "interactions": session.t,
            "online_accuracy": session.online_accuracy,
            "quarantined_copies": [int(i) for i in
                                   np.flatnonzero(session.quarantined)],
        },
        "steps": [rec.to_dict() for rec in session.log],
    }


def tune_online(base: Model, sessions, base_config: AdaptConfig, grid=None,
                budget=None, seed=0):
    """Grid-search online hyperparameters by mean accuracy over sessions.

    Returns (best AdaptConfig, leaderboard).  Deterministic: ties go to the
    earlier grid entry; a budget subsamples the grid with a seeded draw.
    """
    grid = list(online_grid() if grid is None else grid)
    if budget is not None and budget < len(grid):
        keep = rng_from(seed, "tune").choice(len(grid), size=budget, replace=False)
        grid = [grid[i] for i in sorted(keep)]
    leaderboard = []
    best = None
    for entry in grid:
        config = replace(base_config, **entry)
        accs = [run_session(base, config, sess)[0] for sess in sessions]
        mean = float(np.mean(accs))
        leaderboard.append({"config": asdict(config), "mean_accuracy": mean,
                            "per_session": accs})
        if best is None or mean > best[0]:
            best = (mean, config)
    return best[1], leaderboard
