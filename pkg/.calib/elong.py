import time
import numpy as np
from blocktalk.datagen import make_split, generate
from blocktalk.offline import TrainConfig, train, evaluate, encode_examples
from blocktalk.models import save_checkpoint

split = make_split(seed=0)
data = generate(split)
train10k = data["train"].examples[:10000]
cfg = TrainConfig("lstm","conv",hidden=64,dropout=0.0,lr=3e-3,batch_size=64,
                  eval_every=500,patience=60,max_epochs=300,seed=0)
t0 = time.time()
model, curve = train(cfg, train10k, data["val"].examples, verbose=True)
val = evaluate(model, data["val"].examples).exact_match
u,s,t = encode_examples(model.vocab, data["val"].examples[:1000])
copy = float((model.predict_ids(u,s) == s).all(axis=1).mean())
print(f"FINAL val {val:.4f} copy {copy:.3f} in {time.time()-t0:.0f}s")
save_checkpoint(model, "/root/pkg/.calib/elong.npz")
