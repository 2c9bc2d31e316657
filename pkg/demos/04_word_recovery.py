"""Online phase, controlled: the pre-trained model meets familiar sentences
whose words were swapped for unknown tokens, and has to recover their
meaning from a handful of corrections.

Teaches the full loop: predict -> observe the true target -> buffer -> train
k copies -> pick the best copy by buffer loss.  Ends with the embedding
neighborhood analysis for the newly learned words.

Run 03_offline_training.py first (it saves /tmp/blocktalk-demo.npz), then:
      python3 demos/04_word_recovery.py
"""

import os

from blocktalk.datagen import (build_validation_recovery_session, make_split)
from blocktalk.experiments import embedding_similarity_report
from blocktalk.models import load_checkpoint
from blocktalk.online import AdaptConfig, AdaptSession

CKPT = "/tmp/blocktalk-demo.npz"
if not os.path.exists(CKPT):
    raise SystemExit("run demos/03_offline_training.py first")

model = load_checkpoint(CKPT)
split = make_split(seed=0)
session_spec = build_validation_recovery_session(split, seed=0)
print("corrupted words:", dict(session_spec.mapping))

config = AdaptConfig(reuse="all", adapt="embeddings", k=7, optimizer="adam",
                     lr=1e-2, steps=100, l2=1e-4, selection="greedy", seed=0)
session = AdaptSession(model, config)

for i, ex in enumerate(session_spec.examples, start=1):
    record = session.interact(ex.utterance, ex.start, ex.target)
    if i % 9 == 0:
        print(f"  after {i:2d} corrections: online accuracy "
              f"{session.online_accuracy:.2%} (copy {record.selected_model} "
              f"selected)")

print(f"\nfinal online accuracy: {session.online_accuracy:.2%} "
      f"over {session.t} interactions")

# What did the new tokens come to mean?  Compare each new embedding to the
# original vocabulary of the selected copy.
best_copy, _ = session._select()
adapted = session.stack.view(best_copy)
probes = [session_spec.mapping[w] for w in ("red", "add", "even")]
report = embedding_similarity_report(adapted, probes)
for probe, sims in report.items():
    names = ", ".join(f"{w} {v:+.2f}" for w, v in sims[:3])
    print(f"  nearest to {probe!r}: {names}")
