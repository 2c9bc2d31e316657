import json, time
import numpy as np
from blocktalk.datagen import make_split, generate
from blocktalk.offline import TrainConfig, train, evaluate
from blocktalk.models import save_checkpoint

t0 = time.time()
split = make_split(seed=0)
split.save("/root/pkg/.calib/split.json")
data = generate(split)  # default 42000/4000/4000
print(f"datagen: {time.time()-t0:.1f}s", flush=True)
train10k = data["train"].examples[:10000]

results = {}
for enc, dec, name in (("lstm","conv","seq2conv"), ("bow","lstm","bow2seq")):
    t1 = time.time()
    config = TrainConfig(encoder=enc, decoder=dec, hidden=64, batch_size=64,
                         lr=1e-3, optimizer="adam", max_epochs=60,
                         eval_every=500, patience=10, seed=0)
    model, curve = train(config, train10k, data["val"].examples, verbose=True)
    val = evaluate(model, data["val"].examples)
    test = evaluate(model, data["test"].examples)
    dt = time.time()-t1
    print(f"{name}: val {val.exact_match:.4f} test {test.exact_match:.4f} in {dt:.0f}s, {len(curve)} evals", flush=True)
    save_checkpoint(model, f"/root/pkg/.calib/{name}.npz")
    results[name] = {"val": val.exact_match, "test": test.exact_match,
                     "seconds": dt, "curve": curve}
json.dump(results, open("/root/pkg/.calib/desk_results.json","w"), indent=1)
print("TOTAL", time.time()-t0, flush=True)
