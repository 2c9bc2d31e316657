"""A tour of the block world: the grammar, the interpreter, the wire format.

Run:  python3 demos/01_block_world.py
"""

from blocktalk import world

# The game: six piles of colored blocks, at most three blocks high.
# An instruction is one of 88 sentences of the form "VERB COLOR at POS tile".

state = (("brown",), ("red",), ("orange", "red"), (), (), ())
print("start piles:   ", " | ".join("".join(c[0] for c in p) or "-" for p in state))
print("serialized:    ", " ".join(world.serialize_state(state)))

instr = world.parse_utterance(["remove", "red", "at", "3rd", "tile"])
print("\nparsed:        ", instr)
print("selects piles: ", sorted(world.select_piles(instr.position)))

after = world.apply_instruction(instr, state)
print("after apply:   ", " ".join(world.serialize_state(after)))

# Position words cover single piles, parity, edges, and everything at once.
for pos in ("even", "odd", "leftmost", "rightmost", "every"):
    print(f"  {pos:10s} -> piles {sorted(world.select_piles(pos))}")

# Degenerate cases are no-ops: removing a color that is not on top, or
# adding onto a full pile, leaves the pile unchanged.
full = (("red", "cyan", "brown"), (), (), (), (), ())
assert world.apply_instruction(world.parse_utterance(
    ["add", "orange", "at", "1st", "tile"]), full) == full
print("\nadd onto a full pile is a no-op: ok")

# The language is exactly 88 sentences; anything else must go to the
# neural path (e.g. corrupted words a human might use).
print("grammar size:", len(world.all_utterances()))
print("valid single columns:", len(world.all_columns()))
try:
    world.parse_utterance(["rmv", "braun", "at", "evr", "tile"])
except world.ParseError as err:
    print("outside the grammar:", err)
