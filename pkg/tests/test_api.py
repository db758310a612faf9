import json

from fastapi.testclient import TestClient

from streamtopics import service as svc
from streamtopics.api import create_app
from streamtopics.pipeline import PipelineConfig

from test_service import feed_groups, make_engine


def client_for(engine):
    return TestClient(create_app(engine, update_interval=3600))


def test_command_and_state_roundtrip():
    engine = make_engine()
    now = feed_groups(engine)
    engine.tick(now)
    with client_for(engine) as client:
        state = client.get("/state").json()
        assert state["ingested"] == engine.ingested
        assert state["hash"] == engine.state_hash()
        tid = engine.active_session().topic_ids[0]
        resp = client.post("/command", json={"type": "select_topics", "ids": [tid]}).json()
        assert resp["ok"]
        assert client.get("/healthz").json() == {"ok": True}


def test_websocket_snapshot_then_ordered_events():
    engine = make_engine()
    now = feed_groups(engine)
    engine.tick(now)
    with client_for(engine) as client:
        with client.websocket_connect("/ws") as ws:
            first = ws.receive_json()
            assert first["kind"] == "snapshot" and first["seq"] == 1
            vm = svc.apply_event({}, first)
            assert svc.state_hash(vm) == engine.state_hash()
            engine.tick(now + 1)
            second = ws.receive_json()
            assert second["kind"] == "delta" and second["seq"] == 2
            vm = svc.apply_event(vm, second)
            assert svc.state_hash(vm) == engine.state_hash()
