import time

import pytest
from fastapi.testclient import TestClient

from blocktalk import world
from blocktalk.online import AdaptConfig, run_session
from blocktalk.service import create_app


@pytest.fixture()
def client(tiny_model):
    app = create_app(tiny_model, AdaptConfig())
    with TestClient(app) as client:
        yield client


def fast_overrides(**kw):
    out = {"k": 2, "steps": 1, "seed": 0}
    out.update(kw)
    return out


def turn(client, sid, ex):
    utt, start, target = ex
    r = client.post(f"/sessions/{sid}/predict",
                    json={"utt": list(utt),
                          "start": list(world.serialize_state(start))})
    assert r.status_code == 200, r.text
    r2 = client.post(f"/sessions/{sid}/feedback",
                     json={"target": list(world.serialize_state(target))})
    assert r2.status_code == 200, r2.text
    return r.json(), r2.json()


def examples_from(data, n, start=0):
    return [(ex.utterance, ex.start, ex.target)
            for ex in data["test"].examples[start:start + n]]


def test_create_defaults(client):
    r = client.post("/sessions", json={})
    assert r.status_code == 200
    body = r.json()
    assert body["config"]["k"] == 7
    assert body["config"]["adapt"] == "embeddings"


def test_create_rejects_excluded_scopes(client):
    r = client.post("/sessions", json={"reuse": "none", "adapt": "newwords"})
    assert r.status_code == 400
    r = client.post("/sessions", json={"nonsense_field": 1})
    assert r.status_code == 400


def test_two_creates_distinct_ids(client):
    a = client.post("/sessions", json=fast_overrides()).json()["id"]
    b = client.post("/sessions", json=fast_overrides()).json()["id"]
    assert a != b


def test_predict_matches_checkpoint_when_reused(client, tiny_model, tiny_data):
    sid = client.post("/sessions", json=fast_overrides(steps=0)).json()["id"]
    utt, start, target = examples_from(tiny_data, 1)[0]
    r = client.post(f"/sessions/{sid}/predict",
                    json={"utt": list(utt),
                          "start": list(world.serialize_state(start))})
    assert r.status_code == 200
    assert tuple(r.json()["predicted"]) == tiny_model.predict_tokens(utt, start)
    assert r.json()["selected_model"] == 0


def test_predict_error_codes(client, tiny_data):
    utt, start, _ = examples_from(tiny_data, 1)[0]
    good = {"utt": list(utt), "start": list(world.serialize_state(start))}
    r = client.post("/sessions/nope/predict", json=good)
    assert r.status_code == 404
    sid = client.post("/sessions", json=fast_overrides()).json()["id"]
    r = client.post(f"/sessions/{sid}/predict",
                    json={"utt": list(utt), "start": ["X"] * 22})
    assert r.status_code == 422
    assert client.post(f"/sessions/{sid}/predict", json=good).status_code == 200
    r = client.post(f"/sessions/{sid}/predict", json=good)
    assert r.status_code == 409  # pending feedback


def test_feedback_flow_and_accuracy(client, tiny_model, tiny_data):
    # one example the checkpoint gets right, one it gets wrong
    right = wrong = None
    for utt, start, target in examples_from(tiny_data, 80):
        ok = tiny_model.predict_tokens(utt, start) == world.serialize_state(target)
        if ok and right is None:
            right = (utt, start, target)
        if not ok and wrong is None:
            wrong = (utt, start, target)
        if right and wrong:
            break
    sid = client.post("/sessions", json=fast_overrides(steps=0)).json()["id"]
    empty = list(world.serialize_state(((),) * 6))
    r = client.post(f"/sessions/{sid}/feedback", json={"target": empty})
    assert r.status_code == 409  # nothing pending
    _, fb = turn(client, sid, right)
    assert fb["correct"] is True and fb["online_accuracy"] == 1.0
    _, fb = turn(client, sid, wrong)
    assert fb["correct"] is False and fb["online_accuracy"] == 0.5
    state = client.get(f"/sessions/{sid}").json()
    assert state["buffer_size"] == 2


def test_state_endpoint(client, tiny_data):
    sid = client.post("/sessions", json=fast_overrides()).json()["id"]
    state = client.get(f"/sessions/{sid}").json()
    assert state["t"] == 0 and state["trace"] == [] and state["losses"] is None
    turn(client, sid, examples_from(tiny_data, 1)[0])
    turn(client, sid, examples_from(tiny_data, 1, start=1)[0])
    state = client.get(f"/sessions/{sid}").json()
    assert state["t"] == 2
    assert len(state["trace"]) == 2
    assert len(state["losses"]) == 2  # k floats from the selection pass
    assert state["pending"] is False


def test_delete_session(client):
    sid = client.post("/sessions", json=fast_overrides()).json()["id"]
    assert client.delete(f"/sessions/{sid}").json() == {"deleted": True}
    assert client.get(f"/sessions/{sid}").status_code == 404


def test_idle_expiry(tiny_model):
    app = create_app(tiny_model, AdaptConfig(), idle_seconds=0.05)
    with TestClient(app) as client:
        sid = client.post("/sessions", json=fast_overrides()).json()["id"]
        assert client.get(f"/sessions/{sid}").status_code == 200
        time.sleep(0.1)
        assert client.get(f"/sessions/{sid}").status_code == 404


def test_api_replay_matches_library(client, tiny_model, tiny_data):
    examples = examples_from(tiny_data, 10)
    config = AdaptConfig(k=3, steps=10, lr=1e-2, seed=21)
    acc_lib, session = run_session(tiny_model, config, examples)

    sid = client.post("/sessions", json={"k": 3, "steps": 10, "lr": 1e-2,
                                         "seed": 21}).json()["id"]
    last = None
    predictions = []
    for ex in examples:
        pr, last = turn(client, sid, ex)
        predictions.append(tuple(pr["predicted"]))
    assert last["online_accuracy"] == pytest.approx(acc_lib)
    assert predictions == [tuple(rec.predicted) for rec in session.log]
