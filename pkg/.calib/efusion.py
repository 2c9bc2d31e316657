import time, sys
import numpy as np
from blocktalk.datagen import make_split, generate
from blocktalk.offline import TrainConfig, train, evaluate, encode_examples
from blocktalk.models import save_checkpoint

split = make_split(seed=0)
data = generate(split)
train10k = data["train"].examples[:10000]
for fusion in ("gated", "tanh"):
    cfg = TrainConfig("lstm","conv",hidden=64,dropout=0.0,lr=3e-3,batch_size=64,
                      eval_every=500,patience=20,max_epochs=100,seed=0,
                      fusion=fusion)
    t0 = time.time()
    model, curve = train(cfg, train10k, data["val"].examples)
    val = evaluate(model, data["val"].examples).exact_match
    u,s,t = encode_examples(model.vocab, data["val"].examples[:1000])
    copy = float((model.predict_ids(u,s) == s).all(axis=1).mean())
    best_steps = [(p['step'], round(p['val_exact'],3)) for p in curve if p['val_exact'] > 0.74]
    print(f"{fusion}: val {val:.4f} copy {copy:.3f} in {time.time()-t0:.0f}s; above-copy evals: {best_steps[:8]}", flush=True)
    save_checkpoint(model, f"/root/pkg/.calib/efusion-{fusion}.npz")
