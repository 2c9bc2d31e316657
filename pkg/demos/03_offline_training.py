"""Offline phase: train encoder-decoder models on grammar data and compare
architectures on the compositional validation split.

This is a miniature of the full comparison (small data, few epochs) so it
finishes in about a minute; the real protocol lives in the benchmarks and
the acceptance suite.

Run:  python3 demos/03_offline_training.py
"""

import time

from blocktalk.datagen import generate, make_split
from blocktalk.models import save_checkpoint
from blocktalk.offline import TrainConfig, evaluate, train

split = make_split(seed=0)
data = generate(split, counts={"train": 3000, "val": 400, "test": 400})

rows = []
for encoder, decoder in (("lstm", "conv"), ("lstm", "lstm"), ("bow", "lstm")):
    config = TrainConfig(encoder=encoder, decoder=decoder, hidden=48,
                         max_epochs=25, patience=6, seed=0)
    t0 = time.time()
    model, curve = train(config, data["train"].examples, data["val"].examples)
    val = evaluate(model, data["val"].examples)
    test = evaluate(model, data["test"].examples)
    rows.append((model.config.name, val.exact_match, test.exact_match,
                 time.time() - t0))
    print(f"trained {model.config.name}: val {val.exact_match:.2%} "
          f"test {test.exact_match:.2%} ({rows[-1][3]:.0f}s)")
    if model.config.name == "seq2conv":
        save_checkpoint(model, "/tmp/blocktalk-demo.npz")

print("\narchitecture comparison (exact match on unseen combinations):")
for name, val, test, secs in sorted(rows, key=lambda r: -r[1]):
    print(f"  {name:10s} val {val:6.2%}   test {test:6.2%}")
print("\nsaved the seq2conv checkpoint to /tmp/blocktalk-demo.npz")
print("(the word-recovery demos pick it up from there)")
