"""HTTP service: request/response models, endpoint flows, error mapping."""

import numpy as np
import pytest
from fastapi.testclient import TestClient

from l1sq.linalg import orthonormalize
from l1sq.service import create_app
from l1sq.service.schemas import GapInfo, MatrixPayload


@pytest.fixture()
def client():
    with TestClient(create_app()) as c:
        yield c


def generate_db(client, n=6, big_d=80, r=3, seed=5):
    resp = client.post(
        "/databases/generate", json={"n": n, "D": big_d, "r": r, "seed": seed}
    )
    assert resp.status_code == 200, resp.text
    return resp.json()


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"
    assert body["version"]


def test_generate_and_fetch_database(client):
    info = generate_db(client)
    assert info["n"] == 6 and info["D"] == 80 and info["r"] == 3
    assert len(info["labels"]) == 6

    got = client.get(f"/databases/{info['db_id']}")
    assert got.status_code == 200
    assert got.json() == info

    missing = client.get("/databases/db-999")
    assert missing.status_code == 404


def test_upload_database_and_exhaustive(client):
    rng = np.random.default_rng(7)
    bases = [orthonormalize(rng.standard_normal((40, 2))).basis for _ in range(2)]
    payload = {
        "labels": ["left", "right"],
        "bases": [
            {"rows": 40, "cols": 2, "data": b.ravel().tolist()} for b in bases
        ],
    }
    resp = client.post("/databases/upload", json=payload)
    assert resp.status_code == 200, resp.text
    db_id = resp.json()["db_id"]

    q = bases[1] @ rng.standard_normal(2)
    ex = client.post("/exhaustive", json={"db_id": db_id, "query": q.tolist()})
    assert ex.status_code == 200, ex.text
    body = ex.json()
    assert body["winner"] == "right"
    assert body["distances"]["right"] < 1e-7
    assert body["gap"]["nearest"] == "right"
    assert body["gap"]["eta"] is None or body["gap"]["eta"] > 1e6


def test_upload_rejects_non_orthonormal(client):
    payload = {
        "labels": ["bad"],
        "bases": [{"rows": 2, "cols": 2, "data": [1.0, 1.0, 0.0, 1.0]}],
    }
    resp = client.post("/databases/upload", json=payload)
    assert resp.status_code == 400
    assert "orthonormal" in resp.json()["detail"]


def test_upload_label_count_mismatch(client):
    payload = {
        "labels": ["a", "b"],
        "bases": [{"rows": 4, "cols": 1, "data": [1.0, 0.0, 0.0, 0.0]}],
    }
    resp = client.post("/databases/upload", json=payload)
    assert resp.status_code == 422


def test_index_and_query_flow(client):
    info = generate_db(client, n=5, big_d=60, r=2, seed=9)
    resp = client.post(
        "/indexes",
        json={"db_id": info["db_id"], "k": 6, "d": 8, "master_seed": 3},
    )
    assert resp.status_code == 200, resp.text
    ix = resp.json()
    assert ix["k"] == 6 and ix["d"] == 8 and ix["n"] == 5

    rng = np.random.default_rng(11)
    q = rng.standard_normal(60)
    resp = client.post(
        "/query",
        json={
            "index_id": ix["index_id"],
            "query": q.tolist(),
            "n_rep": 3,
            "n_back": 2,
            "rng_seed": 4,
        },
    )
    assert resp.status_code == 200, resp.text
    body = resp.json()
    assert body["stage1_solves"] == 5 * 3
    assert body["stage2_solves"] <= 2
    assert body["winner"] in {c["label"] for c in body["ranked_candidates"]}
    assert body["winner"] in body["refined_distances"]

    again = client.post(
        "/query",
        json={
            "index_id": ix["index_id"],
            "query": q.tolist(),
            "n_rep": 3,
            "n_back": 2,
            "rng_seed": 4,
        },
    )
    assert again.json() == body, "same seed must give an identical response"


def test_query_error_mapping(client):
    info = generate_db(client, n=3, big_d=50, r=2, seed=13)
    resp = client.post(
        "/indexes",
        json={"db_id": info["db_id"], "k": 2, "d": 6, "master_seed": 0},
    )
    ix_id = resp.json()["index_id"]

    missing = client.post(
        "/query", json={"index_id": "ix-999", "query": [0.0] * 50}
    )
    assert missing.status_code == 404

    wrong_dim = client.post(
        "/query", json={"index_id": ix_id, "query": [0.0] * 49}
    )
    assert wrong_dim.status_code == 400

    bad_cfg = client.post(
        "/query",
        json={"index_id": ix_id, "query": [0.0] * 50, "n_rep": 10},
    )
    assert bad_cfg.status_code == 400, "n_rep beyond pool size is a config error"

    malformed = client.post("/query", json={"index_id": ix_id})
    assert malformed.status_code == 422


def test_index_on_missing_database(client):
    resp = client.post(
        "/indexes", json={"db_id": "db-404", "k": 2, "d": 5, "master_seed": 0}
    )
    assert resp.status_code == 404


def test_exhaustive_requires_two_labels_for_gap(client):
    info = generate_db(client, n=2, big_d=40, r=2, seed=15)
    q = np.random.default_rng(16).standard_normal(40)
    resp = client.post(
        "/exhaustive", json={"db_id": info["db_id"], "query": q.tolist()}
    )
    assert resp.status_code == 200
    body = resp.json()
    assert set(body["distances"]) == set(info["labels"])
    assert body["gap"]["eta"] >= 1.0


def test_matrix_payload_round_trip_and_validation():
    m = MatrixPayload(rows=2, cols=3, data=[1, 2, 3, 4, 5, 6])
    arr = m.to_array()
    assert arr.shape == (2, 3)
    back = MatrixPayload.from_array(arr)
    assert back.data == [1, 2, 3, 4, 5, 6]
    with pytest.raises(ValueError):
        MatrixPayload(rows=2, cols=3, data=[1.0, 2.0])


def test_gap_info_allows_null_eta():
    gap = GapInfo(
        eta=None, nearest="a", second="b", nearest_distance=0.0, second_distance=1.0
    )
    assert gap.model_dump()["eta"] is None
