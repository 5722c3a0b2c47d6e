import pytest
from fastapi.testclient import TestClient

from votemander.instances import generate_grid_instance, graph_to_json
from votemander.service import handlers, schemas
from votemander.service.app import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


@pytest.fixture(scope="module")
def state(client):
    graph = client.post("/generate", json={"rows": 6, "cols": 6, "seed": 4}).json()
    sampled = client.post("/sample", json={"graph": graph, "n_districts": 4, "steps": 40,
                                           "seed": 1, "pop_deviation": 0.1}).json()
    return graph, sampled["seed_plan"], sampled["pool"]


def test_health(client):
    assert client.get("/health").json()["status"] == "ok"


def test_generate_matches_library(client):
    doc = client.post("/generate", json={"rows": 3, "cols": 3, "seed": 9}).json()
    assert doc == graph_to_json(generate_grid_instance(3, 3, seed=9))


def test_sample_pool(state):
    _, plan, pool = state
    assert plan["n"] == 4
    assert pool and {"assign", "n", "wins_on_original", "cut_edges"} <= set(pool[0])


def test_score(client, state):
    graph, plan, _ = state
    doc = client.post("/score", json={
        "graph": graph, "plan": plan, "pop_deviation": 0.1,
        "scenario": {"alpha": 0.5, "budgetA": 10, "budgetB": 10}}).json()
    assert doc["valid"]
    assert len(doc["original"]["districts"]) == 4
    assert "campaigned" in doc and -0.5 <= doc["original"]["eg"] <= 0.5
    assert doc["morans_i"] is not None


def test_fairness_step(client, state):
    graph, plan, pool = state
    doc = client.post("/fairness-step", json={
        "graph": graph, "initial_plan": plan, "target_plan": pool[-1],
        "scenario": {"alpha": 0.5, "budgetA": 100, "budgetB": 50},
        "window": {"lo": None, "hi": None}}).json()
    assert doc["feasible"]


def test_votemander_matches_handler(client, state):
    graph, plan, pool = state
    body = {"graph": graph, "plan": plan, "pool": pool,
            "scenario": {"alpha": 0.5, "budgetA": 100, "budgetB": 50}}
    remote = client.post("/votemander", json=body).json()
    local = handlers.run_votemander(schemas.VotemanderRequest.model_validate(body))
    assert remote == local
    assert remote["table"].splitlines()[1].startswith("Initial Map")


def test_local(client, state):
    graph, plan, _ = state
    resp = client.post("/local", json={
        "graph": graph, "plan": plan, "submap_pool_size": 5, "pop_deviation": 0.1,
        "scenario": {"alpha": 0.5, "budgetA": 50, "budgetB": 20},
        "window": {"lo": -0.5, "hi": 0.5}})
    assert resp.status_code == 200
    assert "district_graph" in resp.json()


def test_sweep(client):
    resp = client.post("/sweep", json={"config": {
        "factor": "alpha", "levels": [0.5], "replicates": 1, "rows": 6, "cols": 6,
        "n_districts": 4, "pool_size": 10, "pool_steps": 20, "pop_deviation": 0.1,
        "output": "ignored.csv"}})
    doc = resp.json()
    assert doc["rows"] == 1
    assert doc["csv"].startswith("factor,level,replicate,seed,")


def test_ingest(client, state):
    graph, plan, _ = state
    doc = client.post("/ingest", json={"graph": graph, "plan": plan}).json()
    assert doc["units"] == 36 and doc["districts"] == 4
    assert isinstance(doc["plan_valid"], bool)


def test_bad_input_is_422(client, state):
    graph, _, _ = state
    resp = client.post("/score", json={"graph": graph, "plan": {"assign": [0, 1]}})
    assert resp.status_code == 422
    assert "plan" in resp.json()["detail"]
    bad = dict(graph, units=graph["units"][:-1])
    assert client.post("/ingest", json={"graph": bad}).status_code == 422


def test_schema_rejects_unknown_fields(client):
    assert client.post("/generate", json={"rows": 2, "colz": 3}).status_code == 422
    resp = client.post("/fairness-step", json={
        "graph": {}, "initial_plan": {}, "target_plan": {},
        "scenario": {"alpha": 0.5}, "window": {"lo": 0.2, "hi": 0.1}})
    assert resp.status_code == 422
