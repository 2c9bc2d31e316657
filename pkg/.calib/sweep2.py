import json, time
import numpy as np
from blocktalk.datagen import make_split, generate
from blocktalk.offline import TrainConfig, train, evaluate
from blocktalk.models import save_checkpoint, load_checkpoint
from blocktalk.offline import encode_examples

split = make_split(seed=0)
data = generate(split)
train10k = data["train"].examples[:10000]
results = {}
for name, cfg in (
    ("s2c-lr3b32",    TrainConfig("lstm","conv",hidden=64,dropout=0.0,lr=3e-3,batch_size=32,eval_every=500,patience=12,max_epochs=60,seed=0)),
    ("s2c-lr3b32d02", TrainConfig("lstm","conv",hidden=64,dropout=0.2,lr=3e-3,batch_size=32,eval_every=500,patience=12,max_epochs=60,seed=0)),
    ("bow-lr3b32",    TrainConfig("bow","lstm",hidden=64,dropout=0.0,lr=3e-3,batch_size=32,eval_every=500,patience=12,max_epochs=60,seed=0)),
):
    t0 = time.time()
    model, curve = train(cfg, train10k, data["val"].examples)
    val = evaluate(model, data["val"].examples).exact_match
    test = evaluate(model, data["test"].examples).exact_match
    tr = evaluate(model, train10k[:2000]).exact_match
    u,s,t = encode_examples(model.vocab, data["val"].examples[:1000])
    copy = float((model.predict_ids(u,s) == s).all(axis=1).mean())
    print(f"{name}: train {tr:.3f} val {val:.4f} test {test:.4f} copy {copy:.3f} in {time.time()-t0:.0f}s ({len(curve)} evals)", flush=True)
    results[name] = {"val": val, "test": test, "train": tr, "copy": copy,
                     "curve": [(p['step'], round(p['val_exact'],4)) for p in curve]}
    save_checkpoint(model, f"/root/pkg/.calib/{name}.npz")
json.dump(results, open("/root/pkg/.calib/sweep2_results.json","w"), indent=1)
print("DONE")
