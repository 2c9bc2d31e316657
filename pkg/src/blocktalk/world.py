"""Colored-block world: piles, the instruction grammar, a rule-based
interpreter, and the fixed-width token wire format for states.

Everything here is an immutable value and every function is pure.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

COLORS = ("red", "cyan", "brown", "orange")
VERBS = ("add", "remove")
POSITIONS = (
    "1st", "2nd", "3rd", "4th", "5th", "6th",
    "even", "odd", "leftmost", "rightmost", "every",
)

NUM_PILES = 6
MAX_HEIGHT = 3

EMPTY_TOKEN = "X"
DELIM_TOKEN = "#"
# Fixed order; the model's output alphabet.
STATE_TOKENS = ("RED", "CYAN", "BROWN", "ORANGE", EMPTY_TOKEN, DELIM_TOKEN)
STATE_LENGTH = NUM_PILES * MAX_HEIGHT + (NUM_PILES - 1)  # 23

# Every word the grammar can emit (utterance side, lowercase).
GRAMMAR_WORDS = VERBS + COLORS + POSITIONS + ("at", "tile")

# A pile is a tuple of colors, bottom first; a state is a 6-tuple of piles.
Pile = tuple
State = tuple

_SELECTED = {
    "even": frozenset({2, 4, 6}),
    "odd": frozenset({1, 3, 5}),
    "leftmost": frozenset({1}),
    "rightmost": frozenset({6}),
    "every": frozenset(range(1, NUM_PILES + 1)),
}
for _i, _pos in enumerate(("1st", "2nd", "3rd", "4th", "5th", "6th"), start=1):
    _SELECTED[_pos] = frozenset({_i})


class ParseError(ValueError):
    """Token sequence is not one of the 88 grammar utterances."""


class FormatError(ValueError):
    """Token sequence is not a well-formed serialized state."""


@dataclass(frozen=True)
class Instruction:
    verb: str
    color: str
    position: str

    def utterance(self) -> tuple:
        """The 5-token surface form of this instruction."""
        return (self.verb, self.color, "at", self.position, "tile")


def parse_utterance(tokens: Sequence[str]) -> Instruction:
    """Parse a "VERB COLOR at POS tile" utterance; raise ParseError otherwise."""
    if (
        len(tokens) != 5
        or tokens[0] not in VERBS
        or tokens[1] not in COLORS
        or tokens[2] != "at"
        or tokens[3] not in POSITIONS
        or tokens[4] != "tile"
    ):
        raise ParseError(f"not a grammar utterance: {list(tokens)!r}")
    return Instruction(tokens[0], tokens[1], tokens[3])


def is_grammar_utterance(tokens: Sequence[str]) -> bool:
    try:
        parse_utterance(tokens)
        return True
    except ParseError:
        return False


def select_piles(position: str) -> frozenset:
    """1-based pile indices a position word refers to."""
    try:
        return _SELECTED[position]
    except KeyError:
        raise ValueError(f"unknown position {position!r}") from None


def apply_instruction(instr: Instruction, state: State) -> State:
    """Interpret an instruction on a state.

    add pushes the color onto each selected pile that has room; remove pops the
    top block of each selected pile iff it has that color.  Degenerate cases
    (full pile, wrong or missing top block) leave the pile unchanged.
    """
    selected = select_piles(instr.position)
    piles = []
    for i, pile in enumerate(state, start=1):
        if i in selected:
            if instr.verb == "add":
                if len(pile) < MAX_HEIGHT:
                    pile = pile + (instr.color,)
            elif pile and pile[-1] == instr.color:
                pile = pile[:-1]
        piles.append(pile)
    return tuple(piles)


def check_state(state: State) -> None:
    """Raise FormatError unless state is 6 piles of ≤3 known colors each."""
    if len(state) != NUM_PILES:
        raise FormatError(f"expected {NUM_PILES} piles, got {len(state)}")
    for pile in state:
        if len(pile) > MAX_HEIGHT:
            raise FormatError(f"pile too tall: {pile!r}")
        for color in pile:
            if color not in COLORS:
                raise FormatError(f"unknown color {color!r}")


def serialize_state(state: State) -> tuple:
    """Fixed-width token form: 6 groups of 3 slots (X-padded), '#'-delimited."""
    tokens = []
    for i, pile in enumerate(state):
        if i:
            tokens.append(DELIM_TOKEN)
        tokens.extend(color.upper() for color in pile)
        tokens.extend([EMPTY_TOKEN] * (MAX_HEIGHT - len(pile)))
    return tuple(tokens)


def deserialize_state(tokens: Sequence[str]) -> State:
    """Inverse of serialize_state; raises FormatError on malformed input."""
    if len(tokens) != STATE_LENGTH:
        raise FormatError(f"expected {STATE_LENGTH} tokens, got {len(tokens)}")
    color_of = {c.upper(): c for c in COLORS}
    piles = []
    for g in range(NUM_PILES):
        base = g * (MAX_HEIGHT + 1)
        if g and tokens[base - 1] != DELIM_TOKEN:
            raise FormatError(f"expected {DELIM_TOKEN!r} at position {base - 1}")
        pile = []
        seen_empty = False
        for slot in tokens[base:base + MAX_HEIGHT]:
            if slot == EMPTY_TOKEN:
                seen_empty = True
            elif slot in color_of:
                if seen_empty:
                    raise FormatError(f"floating block in group {g + 1}")
                pile.append(color_of[slot])
            else:
                raise FormatError(f"unknown state token {slot!r}")
        piles.append(tuple(pile))
    return tuple(piles)


def all_instructions() -> Iterator[Instruction]:
    """All 88 instructions, in a fixed deterministic order."""
    for verb, color, pos in itertools.product(VERBS, COLORS, POSITIONS):
        yield Instruction(verb, color, pos)


def all_utterances() -> list:
    """Surface forms of all 88 instructions."""
    return [instr.utterance() for instr in all_instructions()]


def all_columns() -> list:
    """All 85 valid single columns: heights 0..3 over the 4 colors."""
    columns = []
    for height in range(MAX_HEIGHT + 1):
        columns.extend(itertools.product(COLORS, repeat=height))
    return columns
