import json, time
import numpy as np
from blocktalk.datagen import make_split, generate
from blocktalk.offline import TrainConfig, train, evaluate
from blocktalk.models import save_checkpoint

split = make_split(seed=0)
data = generate(split)
train10k = data["train"].examples[:10000]
results = {}
for name, cfg in (
    ("s2c-d0",   TrainConfig("lstm","conv",hidden=64,dropout=0.0,eval_every=500,patience=12,max_epochs=80,seed=0)),
    ("s2c-d02",  TrainConfig("lstm","conv",hidden=64,dropout=0.2,eval_every=500,patience=12,max_epochs=80,seed=0)),
    ("s2c-d05",  TrainConfig("lstm","conv",hidden=64,dropout=0.5,eval_every=500,patience=12,max_epochs=80,seed=0)),
    ("bow-d0",   TrainConfig("bow","lstm",hidden=64,dropout=0.0,eval_every=500,patience=12,max_epochs=80,seed=0)),
    ("bow-d02",  TrainConfig("bow","lstm",hidden=64,dropout=0.2,eval_every=500,patience=12,max_epochs=80,seed=0)),
):
    t0 = time.time()
    model, curve = train(cfg, train10k, data["val"].examples)
    val = evaluate(model, data["val"].examples).exact_match
    test = evaluate(model, data["test"].examples).exact_match
    print(f"{name}: val {val:.4f} test {test:.4f} in {time.time()-t0:.0f}s ({len(curve)} evals)", flush=True)
    results[name] = {"val": val, "test": test}
    save_checkpoint(model, f"/root/pkg/.calib/{name}.npz")
json.dump(results, open("/root/pkg/.calib/sweep_results.json","w"), indent=1)
