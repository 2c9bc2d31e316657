"""Building the offline dataset: compositional splits, corruption, scrambling.

Run:  python3 demos/02_synthetic_data.py
"""

from blocktalk import datagen, world

# Validation and test must contain only unseen utterances AND unseen block
# columns, so exact-match there measures composition, not memory.
split = datagen.make_split(seed=0)
print("utterance split sizes:",
      {tag: len(v) for tag, v in split.utterances.items()})
print("column split sizes:   ",
      {tag: len(v) for tag, v in split.columns.items()})

data = datagen.generate(split, counts={"train": 2000, "val": 300, "test": 300})
ex = data["train"].examples[0]
print("\na generated triple:")
print("  utterance:", " ".join(ex.utterance))
print("  start:    ", " ".join(world.serialize_state(ex.start)))
print("  target:   ", " ".join(world.serialize_state(ex.target)))

# Corruption simulates a speaker whose words we have never seen: each chosen
# word is consistently replaced by a token outside the grammar.
mapping = {"brown": "braun", "remove": "rmv", "every": "evr"}
corrupted = datagen.corrupt(data["val"].examples[:200], mapping)
victim = next(e for e in corrupted if "rmv" in e.utterance)
print("\ncorrupted utterance:", " ".join(victim.utterance))

# Scrambling goes further: a bijection over the whole vocabulary plus a
# word-order shuffle, destroying lexical and syntactic overlap while keeping
# the underlying task identical.
scrambled, smap = datagen.scramble_language(data["val"].examples[:200], seed=3)
print("scramble word map (sample):",
      dict(list(smap.word_map.items())[:4]))
print("scrambled utterance:", " ".join(scrambled[0].utterance),
      " (was:", " ".join(data["val"].examples[0].utterance) + ")")

# Word-recovery sessions: 15 held-out utterances x 3 states, with one
# condition's worth of words corrupted.
sessions = datagen.build_recovery_sessions(split, "2-word", seed=0)
print(f"\n2-word recovery sessions: {len(sessions)}, "
      f"first corrupts {sessions[0].words}")
print("session length:", len(sessions[0].examples))
