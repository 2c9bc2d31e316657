"""The live teaching loop over HTTP: create a session, predict, correct,
watch the running accuracy.  This is the API the web UI drives.

Run 03_offline_training.py first, then:
      python3 demos/06_live_service.py
"""

import json
import os
import threading
import time
import urllib.request

import uvicorn

from blocktalk import world
from blocktalk.datagen import generate, make_split
from blocktalk.models import load_checkpoint
from blocktalk.online import AdaptConfig
from blocktalk.service import create_app

CKPT = "/tmp/blocktalk-demo.npz"
if not os.path.exists(CKPT):
    raise SystemExit("run demos/03_offline_training.py first")

PORT = 8977
app = create_app(load_checkpoint(CKPT), AdaptConfig())
server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=PORT,
                                       log_level="error"))
threading.Thread(target=server.run, daemon=True).start()
while not server.started:
    time.sleep(0.05)


def call(method, path, body=None):
    req = urllib.request.Request(
        f"http://127.0.0.1:{PORT}{path}", method=method,
        data=None if body is None else json.dumps(body).encode(),
        headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


sid = call("POST", "/sessions", {"k": 7, "steps": 50, "seed": 0})["id"]
print("session:", sid)

split = make_split(seed=0)
examples = generate(split, counts={"test": 8})["test"].examples
for ex in examples:
    predicted = call("POST", f"/sessions/{sid}/predict", {
        "utt": list(ex.utterance),
        "start": list(world.serialize_state(ex.start)),
    })
    verdict = call("POST", f"/sessions/{sid}/feedback", {
        "target": list(world.serialize_state(ex.target)),
    })
    mark = "+" if verdict["correct"] else "-"
    print(f"  [{mark}] t={verdict['t']} \"{' '.join(ex.utterance)}\" "
          f"accuracy {verdict['online_accuracy']:.2%}")

state = call("GET", f"/sessions/{sid}")
print("\nsession state: t =", state["t"],
      "accuracy =", f"{state['online_accuracy']:.2%}",
      "buffer =", state["buffer_size"])
call("DELETE", f"/sessions/{sid}")
server.should_exit = True
