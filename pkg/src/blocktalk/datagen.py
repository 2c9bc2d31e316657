"""Synthetic data for the block game: compositional splits over utterances
and columns, seeded dataset generation, word corruption, simulated word
recovery sessions, and the scrambled-language control.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import world
from .models import rng_from

SPLIT_UTTERANCE_SIZES = {"train": 66, "val": 11, "test": 11}
SPLIT_COLUMN_SIZES = {"train": 69, "val": 8, "test": 8}
DEFAULT_COUNTS = {"train": 42000, "val": 4000, "test": 4000}

# word-recovery vocabulary split: these words are corrupted for hyperparameter
# validation, everything else content-bearing goes to the test conditions
VALIDATION_CORRUPT_WORDS = ("add", "orange", "red", "1st", "3rd", "5th", "even")
TEST_CORRUPT_WORDS = tuple(
    w for w in world.VERBS + world.COLORS + world.POSITIONS
    if w not in VALIDATION_CORRUPT_WORDS
)

RECOVERY_CONDITIONS = ("1-word", "2-word", "3-word", "all")
RECOVERY_SESSION_COUNTS = {"1-word": 7, "2-word": 17, "3-word": 10, "all": 1}


@dataclass(frozen=True)
class Example:
    utterance: tuple
    start: tuple
    target: tuple


@dataclass
class Dataset:
    tag: str
    examples: List[Example]

    def __len__(self):
        return len(self.examples)


@dataclass
class SplitSpec:
    seed: int
    utterances: Dict[str, list]   # split -> list of Instruction
    columns: Dict[str, list]      # split -> list of column tuples

    def utterance_pool(self, tag):
        return [i.utterance() for i in self.utterances[tag]]

    def to_json(self):
        return {
            "seed": self.seed,
            "utterances": {k: [" ".join(i.utterance()) for i in v]
                           for k, v in self.utterances.items()},
            "columns": {k: [list(c) for c in v] for k, v in self.columns.items()},
        }

    @classmethod
    def from_json(cls, data):
        utterances = {
            k: [world.parse_utterance(s.split()) for s in v]
            for k, v in data["utterances"].items()
        }
        columns = {k: [tuple(c) for c in v] for k, v in data["columns"].items()}
        return cls(data["seed"], utterances, columns)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def make_split(seed: int) -> SplitSpec:
    """Seeded partition of the 88 utterances and 85 columns."""
    rng = rng_from(seed, "split")
    instructions = list(world.all_instructions())
    rng.shuffle(instructions)
    columns = world.all_columns()
    rng.shuffle(columns)
    utterances, pos = {}, 0
    for tag, size in SPLIT_UTTERANCE_SIZES.items():
        utterances[tag] = instructions[pos:pos + size]
        pos += size
    cols, pos = {}, 0
    for tag, size in SPLIT_COLUMN_SIZES.items():
        cols[tag] = columns[pos:pos + size]
        pos += size
    return SplitSpec(seed, utterances, cols)


def sample_state(columns_pool: Sequence[tuple], rng) -> tuple:
    """6 columns drawn i.i.d. uniformly (with replacement) from the pool."""
    idx = rng.integers(0, len(columns_pool), size=world.NUM_PILES)
    return tuple(columns_pool[i] for i in idx)


def generate(split: SplitSpec, counts=None, seed: Optional[int] = None):
    """Grammar-simulated datasets; each example draws an in-split utterance
    and an in-split state, target computed by the rule interpreter.

    Examples use per-index RNG substreams, so output is independent of any
    sharding of the index range.
    """
    counts = dict(DEFAULT_COUNTS if counts is None else counts)
    seed = split.seed if seed is None else seed
    datasets = {}
    for tag, n in counts.items():
        instructions = split.utterances[tag]
        columns = split.columns[tag]
        examples = []
        for index in range(n):
            rng = rng_from(seed, f"gen-{tag}", index)
            instr = instructions[rng.integers(0, len(instructions))]
            start = sample_state(columns, rng)
            examples.append(Example(instr.utterance(), start,
                                    world.apply_instruction(instr, start)))
        if n >= 10 * len(instructions):
            used = {ex.utterance for ex in examples}
            if used != set(i.utterance() for i in instructions):
                raise RuntimeError(f"{tag}: generated set misses utterances")
        datasets[tag] = Dataset(tag, examples)
    return datasets


# -- corruption ----------------------------------------------------------


def reversed_word(word: str) -> str:
    return word[::-1]


def build_corruption_map(words: Sequence[str]) -> dict:
    """Deterministic replacement tokens (reversed spelling) for given words."""
    return {w: reversed_word(w) for w in words}


def check_corruption_map(mapping: dict):
    values = list(mapping.values())
    if len(set(values)) != len(values):
        raise ValueError("corruption map is not injective")
    bad = [v for v in values if v in world.GRAMMAR_WORDS]
    if bad:
        raise ValueError(f"replacement tokens inside grammar vocabulary: {bad}")


def corrupt_utterance(tokens: Sequence[str], mapping: dict) -> tuple:
    return tuple(mapping.get(t, t) for t in tokens)


def corrupt(examples: Sequence[Example], mapping: dict) -> list:
    """Replace every occurrence of each mapped word; states untouched."""
    check_corruption_map(mapping)
    return [Example(corrupt_utterance(ex.utterance, mapping), ex.start, ex.target)
            for ex in examples]


# -- word recovery sessions ------------------------------------------------


@dataclass
class RecoverySession:
    condition: str
    words: tuple
    mapping: dict
    examples: List[Example]


def word_type(word):
    if word in world.VERBS:
        return "verb"
    if word in world.COLORS:
        return "color"
    return "position"


def _type_distinct_combos(words, arity):
    by_type = {}
    for w in words:
        by_type.setdefault(word_type(w), []).append(w)
    types = sorted(by_type)
    combos = []
    import itertools

    for chosen_types in itertools.combinations(types, arity):
        for combo in itertools.product(*(by_type[t] for t in chosen_types)):
            combos.append(tuple(combo))
    return combos


def _session_examples(split, words, mapping, rng, utterances_per_session=15,
                      states_per_utterance=3):
    """15 unseen utterances x 3 unseen-column states, corrupted consistently.

    Utterances come from the held-out (val + test) pools; ones containing a
    corrupted word are preferred so every session actually exercises the new
    tokens.
    """
    pool = split.utterance_pool("val") + split.utterance_pool("test")
    containing = [u for u in pool if any(w in u for w in words)]
    rest = [u for u in pool if u not in containing]
    rng.shuffle(containing)
    rng.shuffle(rest)
    chosen = (containing + rest)[:utterances_per_session]
    examples = []
    for utt in chosen:
        instr = world.parse_utterance(utt)
        for _ in range(states_per_utterance):
            start = sample_state(split.columns["test"], rng)
            target = world.apply_instruction(instr, start)
            examples.append(Example(corrupt_utterance(utt, mapping), start, target))
    rng.shuffle(examples)
    return examples


def build_recovery_sessions(split: SplitSpec, condition: str, seed: int = 0):
    """Simulated 45-example sessions for one corruption condition."""
    if condition not in RECOVERY_CONDITIONS:
        raise ValueError(f"unknown condition {condition!r}")
    if condition == "all":
        combos = [tuple(TEST_CORRUPT_WORDS)]
    else:
        arity = int(condition[0])
        combos = _type_distinct_combos(TEST_CORRUPT_WORDS, arity)
    rng = rng_from(seed, "recovery", condition)
    rng.shuffle(combos)
    # prefer combos whose every word occurs in the held-out utterances, so a
    # capped session set still exercises all its corrupted tokens
    pool = split.utterance_pool("val") + split.utterance_pool("test")
    present = {w: any(w in u for u in pool) for w in TEST_CORRUPT_WORDS}
    combos.sort(key=lambda ws: not all(present[w] for w in ws))
    combos = combos[:RECOVERY_SESSION_COUNTS[condition]]
    sessions = []
    for i, words in enumerate(combos):
        mapping = build_corruption_map(words)
        srng = rng_from(seed, "recovery", condition, i)
        sessions.append(RecoverySession(
            condition, tuple(words), mapping,
            _session_examples(split, words, mapping, srng)))
    return sessions


def build_validation_recovery_session(split: SplitSpec, seed: int = 0):
    """The hyperparameter-calibration session: validation words corrupted."""
    words = VALIDATION_CORRUPT_WORDS
    mapping = build_corruption_map(words)
    rng = rng_from(seed, "recovery", "validation")
    return RecoverySession(
        "validation", tuple(words), mapping,
        _session_examples(split, words, mapping, rng))


# -- scrambled language ------------------------------------------------------


@dataclass
class ScrambleMap:
    word_map: dict           # vocabulary bijection
    positions: tuple         # output slot i reads input slot positions[i]

    def apply(self, tokens: Sequence[str]) -> tuple:
        if len(tokens) == len(self.positions):
            tokens = [tokens[j] for j in self.positions]
        return tuple(self.word_map.get(t, t) for t in tokens)

    def invert(self) -> "ScrambleMap":
        inverse_words = {v: k for k, v in self.word_map.items()}
        inverse_pos = [0] * len(self.positions)
        for i, j in enumerate(self.positions):
            inverse_pos[j] = i
        return ScrambleMap(inverse_words, tuple(inverse_pos))


def make_scramble(seed: int, length: int = 5) -> ScrambleMap:
    """A seeded vocabulary bijection plus a word-order permutation."""
    rng = rng_from(seed, "scramble")
    words = sorted(world.GRAMMAR_WORDS)
    shuffled = list(words)
    rng.shuffle(shuffled)
    positions = np.arange(length)
    rng.shuffle(positions)
    return ScrambleMap(dict(zip(words, shuffled)), tuple(int(i) for i in positions))


def scramble_language(examples: Sequence[Example], seed: int):
    """Consistently scramble word identity and order; states untouched."""
    smap = make_scramble(seed)
    out = [Example(smap.apply(ex.utterance), ex.start, ex.target)
           for ex in examples]
    return out, smap


# -- dataset files -------------------------------------------------------


def save_dataset(path, examples: Sequence[Example]):
    """One example per line: utterance TAB start-tokens TAB target-tokens."""
    with open(path, "w") as fh:
        for ex in examples:
            fh.write("\t".join((
                " ".join(ex.utterance),
                " ".join(world.serialize_state(ex.start)),
                " ".join(world.serialize_state(ex.target)),
            )) + "\n")


def load_dataset(path) -> list:
    examples = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 tab fields")
            utt, start, target = (p.split() for p in parts)
            examples.append(Example(tuple(utt),
                                    world.deserialize_state(start),
                                    world.deserialize_state(target)))
    return examples
