import json

import pytest
from fastapi.testclient import TestClient

from kitchencell.service import create_app


@pytest.fixture()
def client(machines_doc):
    app = create_app(machines_doc, rate=1.0)
    with TestClient(app) as c:
        yield c
    app.state.session.pause()


@pytest.fixture()
def steak_order(recipes_doc):
    return json.loads(json.dumps(recipes_doc["orders"][0]))


@pytest.fixture()
def fries_order(recipes_doc):
    return json.loads(json.dumps(recipes_doc["orders"][1]))


def test_place_order_and_snapshot(client, steak_order):
    r = client.post("/orders", json=steak_order)
    assert r.status_code == 201
    body = r.json()
    assert body["id"] == steak_order["recipe_index"]
    snap = client.get("/schedule").json()
    assert snap["makespan_s"] > 0
    assert len(snap["assignments"]) == len(steak_order["tasks"])
    statuses = {a["status"] for a in snap["assignments"]}
    assert "running" in statuses  # first task dispatched immediately
    machines_in_rows = {row["machine"] for row in snap["gantt"]}
    assert {a["machine"] for a in snap["assignments"]} <= machines_in_rows


def test_order_schema_violation_is_400(client):
    r = client.post("/orders", json={"recipe_index": 0})
    assert r.status_code == 400
    assert "error" in r.json()


def test_infeasible_order_is_422(client, steak_order):
    steak_order["deadline_s"] = 1
    r = client.post("/orders", json=steak_order)
    assert r.status_code == 422
    assert "rejected" in r.json()["error"]
    # nothing was admitted
    assert client.get("/schedule").json()["assignments"] == []


def test_duplicate_order_is_422(client, steak_order):
    assert client.post("/orders", json=steak_order).status_code == 201
    r = client.post("/orders", json=steak_order)
    assert r.status_code == 422
    assert "duplicate" in r.json()["error"]


def test_fault_requires_running_simulation(client, steak_order):
    client.post("/orders", json=steak_order)
    r = client.post(
        "/faults",
        json={"recipe_index": 0, "task_index": 0, "kind": "machine_failure"},
    )
    assert r.status_code == 409
    assert "not running" in r.json()["error"]


def test_fault_validation_and_acceptance(client, steak_order):
    client.post("/orders", json=steak_order)
    assert client.post("/sim/start").json()["running"] is True
    bad_kind = client.post(
        "/faults",
        json={"recipe_index": 0, "task_index": 0, "kind": "tool_drop"},
    )
    assert bad_kind.status_code == 400
    not_running = client.post(
        "/faults",
        json={"recipe_index": 0, "task_index": 4, "kind": "machine_failure"},
    )
    assert not_running.status_code == 409
    ok = client.post(
        "/faults",
        json={"recipe_index": 0, "task_index": 0, "kind": "machine_failure"},
    )
    assert ok.status_code == 202
    client.post("/sim/pause")


def test_machines_snapshot(client, machines_doc):
    doc = client.get("/machines").json()
    ids = {m["id"] for m in doc["machines"]}
    assert ids == {m["id"] for m in machines_doc["machines"]}
    assert all(m["available"] for m in doc["machines"])


def test_rate_control(client):
    assert client.post("/sim/rate", json={"rate": 8.0}).json()["rate"] == 8.0
    assert client.post("/sim/rate", json={"rate": -1}).status_code == 400
    assert client.post("/sim/rate", json={}).status_code == 400


def test_pause_is_idempotent(client):
    assert client.post("/sim/pause").json()["running"] is False
    assert client.post("/sim/start").json()["running"] is True
    assert client.post("/sim/pause").json()["running"] is False
    assert client.post("/sim/pause").json()["running"] is False


def parse_sse(text):
    events = []
    for block in text.strip().split("\n\n"):
        ev = {}
        for line in block.splitlines():
            if line.startswith("id: "):
                ev["id"] = int(line[4:])
            elif line.startswith("data: "):
                ev["data"] = json.loads(line[6:])
        if ev:
            events.append(ev)
    return events


def test_event_stream_backlog_and_cursor(client, steak_order, fries_order):
    client.post("/orders", json=steak_order)
    client.post("/orders", json=fries_order)
    r = client.get("/events", params={"follow": "false", "since": -1})
    assert r.status_code == 200
    assert r.headers["content-type"].startswith("text/event-stream")
    events = parse_sse(r.text)
    seqs = [e["id"] for e in events]
    assert seqs == sorted(seqs)
    assert len(seqs) == len(set(seqs))
    kinds = [e["data"]["kind"] for e in events]
    assert kinds.count("order_placed") == 2
    assert kinds.count("reschedule") == 2
    # resume from a cursor: only strictly newer events come back
    mid = seqs[len(seqs) // 2]
    tail = parse_sse(
        client.get("/events", params={"follow": "false", "since": mid}).text
    )
    assert [e["id"] for e in tail] == [s for s in seqs if s > mid]
    # snapshot cursor points at the last logged event
    assert client.get("/schedule").json()["cursor"] == seqs[-1]
