"""Online phase, uncontrolled: sessions in a fully unknown "dialect"
(scrambled vocabulary and word order plus novel tokens), the stand-in for
real human speakers when no recorded dataset is on disk.

Shows why pre-training matters: a model that keeps its decoder learns the
dialect far faster than one that starts from scratch, because the decoder
carries the task mechanics -- which piles exist, what edits are possible --
independent of any vocabulary.

Run 03_offline_training.py first, then:
      python3 demos/05_unknown_speaker.py
"""

import os

import numpy as np

from blocktalk.datagen import make_split
from blocktalk.experiments import make_dialect_sessions, replay_sessions
from blocktalk.models import load_checkpoint
from blocktalk.online import AdaptConfig

CKPT = "/tmp/blocktalk-demo.npz"
if not os.path.exists(CKPT):
    raise SystemExit("run demos/03_offline_training.py first")

model = load_checkpoint(CKPT)
split = make_split(seed=0)
sessions = make_dialect_sessions(split, count=4, seed=2)
print("a dialect sentence:", " ".join(sessions[0].examples[0].utterance))

variants = {
    "keep decoder, relearn encoder": AdaptConfig(
        reuse="dec", adapt="encoder", k=7, optimizer="adam", lr=1e-2,
        steps=100, l2=1e-3, seed=0),
    "from scratch":                  AdaptConfig(
        reuse="none", adapt="all", k=7, optimizer="adam", lr=1e-2,
        steps=100, l2=1e-3, seed=0),
}

print(f"\nreplaying {len(sessions)} sessions x "
      f"{len(sessions[0].examples)} corrections per variant...")
for name, config in variants.items():
    accs = replay_sessions(model, config, [s.stream() for s in sessions])
    print(f"  {name:32s} mean online accuracy {np.mean(accs):.2%} "
          f"(per session: {', '.join(f'{a:.0%}' for a in accs)})")
