import time
import numpy as np
from blocktalk.datagen import make_split, generate
from blocktalk.offline import TrainConfig, train, evaluate, encode_examples
from blocktalk.models import save_checkpoint

split = make_split(seed=0)
data = generate(split)
train10k = data["train"].examples[:10000]
def run(name, cfg):
    t0 = time.time()
    model, curve = train(cfg, train10k, data["val"].examples)
    val = evaluate(model, data["val"].examples).exact_match
    u,s,t = encode_examples(model.vocab, data["val"].examples[:1000])
    copy = float((model.predict_ids(u,s) == s).all(axis=1).mean())
    above = [(p['step'], round(p['val_exact'],3)) for p in curve if p['val_exact'] > 0.74]
    print(f"{name}: val {val:.4f} copy {copy:.3f} {time.time()-t0:.0f}s above-copy: {above[:6]}", flush=True)
    save_checkpoint(model, f"/root/pkg/.calib/{name}.npz")

run("seq2seq-lr3", TrainConfig("lstm","lstm",hidden=64,lr=3e-3,batch_size=64,eval_every=500,patience=20,max_epochs=100,seed=0))
run("s2c-lr10", TrainConfig("lstm","conv",hidden=64,lr=1e-2,batch_size=64,eval_every=500,patience=20,max_epochs=100,seed=0))
run("s2c-b16", TrainConfig("lstm","conv",hidden=64,lr=3e-3,batch_size=16,eval_every=1000,patience=20,max_epochs=60,seed=0))
run("s2c-d05-long", TrainConfig("lstm","conv",hidden=64,dropout=0.5,lr=3e-3,batch_size=64,eval_every=500,patience=30,max_epochs=150,seed=0))
print("E3 DONE", flush=True)
