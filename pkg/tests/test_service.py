import json

import pytest
from fastapi.testclient import TestClient

from querysteer.service import RegisteredDataset, create_app, load_manifest
from querysteer.simuser import generate_target, synth_dataset


@pytest.fixture()
def registry():
    ds = synth_dataset("uniform", 4000, 2, seed=1)
    truth = generate_target(2, 1, "large", seed=2, ds=ds, placement="dense")
    return {"demo": RegisteredDataset(dataset=ds, truth=truth)}


@pytest.fixture()
def client(registry):
    app = create_app(
        registry, defaults={"betas": [4, 8], "cluster_ks": [4, 16]}
    )
    return TestClient(app)


def create(client, **overrides):
    body = {"dataset_id": "demo"}
    body.update(overrides)
    res = client.post("/v1/sessions", json=body)
    return res


def label_all(client, sid, batch, label="irrelevant"):
    labels = [{"tuple_id": s["tuple_id"], "label": label} for s in batch["samples"]]
    return client.post(f"/v1/sessions/{sid}/feedback", json={"labels": labels})


class TestCreateSession:
    def test_valid_request(self, client):
        res = create(client)
        assert res.status_code == 201
        doc = res.json()
        assert doc["version"] == 1
        assert doc["data"]["status"] == "ready"
        assert doc["data"]["links"]["batch"].endswith("/batch")
        attrs = doc["data"]["attributes"]
        assert [a["name"] for a in attrs] == ["attr0", "attr1"]
        assert attrs[0]["raw_min"] == 0.0 and attrs[0]["raw_max"] == 100.0
        assert doc["data"]["has_truth"] is True

    def test_unknown_dataset(self, client):
        res = client.post("/v1/sessions", json={"dataset_id": "nope"})
        assert res.status_code == 404
        assert res.json()["error"]["code"] == "unknown-dataset"

    def test_invalid_config_names_field(self, client):
        res = create(client, config={"budget": 0})
        assert res.status_code == 400
        err = res.json()["error"]
        assert err["code"] == "invalid-config"
        assert "budget" in err["message"]

    def test_unknown_config_field(self, client):
        res = create(client, config={"bogus_knob": 3})
        assert res.status_code == 400


class TestBatchLifecycle:
    def test_first_batch_is_discovery(self, client):
        sid = create(client).json()["data"]["session_id"]
        res = client.get(f"/v1/sessions/{sid}/batch")
        assert res.status_code == 200
        data = res.json()["data"]
        assert data["status"] == "awaiting-feedback"
        assert len(data["samples"]) >= 1
        assert all(s["phase"] == "discovery" for s in data["samples"])
        assert set(data["samples"][0]["values"]) == {"attr0", "attr1"}

    def test_second_batch_without_feedback_conflicts(self, client):
        sid = create(client).json()["data"]["session_id"]
        client.get(f"/v1/sessions/{sid}/batch")
        res = client.get(f"/v1/sessions/{sid}/batch")
        assert res.status_code == 409
        assert res.json()["error"]["code"] == "awaiting-feedback"

    def test_feedback_then_next_batch(self, client):
        sid = create(client).json()["data"]["session_id"]
        batch = client.get(f"/v1/sessions/{sid}/batch").json()["data"]
        res = label_all(client, sid, batch)
        assert res.status_code == 200
        summary = res.json()["data"]
        assert summary["labeled"]["irrelevant"] == len(batch["samples"])
        assert summary["session_status"] == "ready"
        assert "metrics" in summary  # truth attached in fixture
        res = client.get(f"/v1/sessions/{sid}/batch")
        assert res.status_code == 200

    def test_foreign_tuple_rejected_atomically(self, client):
        sid = create(client).json()["data"]["session_id"]
        batch = client.get(f"/v1/sessions/{sid}/batch").json()["data"]
        labels = [{"tuple_id": s["tuple_id"], "label": "irrelevant"} for s in batch["samples"]]
        labels.append({"tuple_id": 99_999_999, "label": "relevant"})
        res = client.post(f"/v1/sessions/{sid}/feedback", json={"labels": labels})
        assert res.status_code == 400
        assert res.json()["error"]["code"] == "unknown-tuple"
        # nothing applied: the batch still awaits feedback
        assert label_all(client, sid, batch).status_code == 200

    def test_similar_dimensions_echoed(self, client):
        sid = create(client).json()["data"]["session_id"]
        batch = client.get(f"/v1/sessions/{sid}/batch").json()["data"]
        labels = [{"tuple_id": s["tuple_id"], "label": "irrelevant"} for s in batch["samples"][:-1]]
        last = batch["samples"][-1]
        labels.append(
            {"tuple_id": last["tuple_id"], "label": "similar", "dimensions": ["attr0"]}
        )
        res = client.post(f"/v1/sessions/{sid}/feedback", json={"labels": labels})
        assert res.status_code == 200
        echo = res.json()["data"]["similar_dimensions"]
        assert echo[str(last["tuple_id"])] == ["attr0"]

    def test_feedback_without_batch_conflicts(self, client):
        sid = create(client).json()["data"]["session_id"]
        res = client.post(f"/v1/sessions/{sid}/feedback", json={"labels": []})
        assert res.status_code == 409


class TestPrediction:
    def test_no_model_marker(self, client):
        sid = create(client).json()["data"]["session_id"]
        res = client.get(f"/v1/sessions/{sid}/prediction")
        assert res.status_code == 200
        assert res.json()["data"]["model"] is None

    def test_prediction_after_training(self, client):
        sid = create(client).json()["data"]["session_id"]
        batch = client.get(f"/v1/sessions/{sid}/batch").json()["data"]
        labels = []
        for s in batch["samples"]:
            lab = "relevant" if s["values"]["attr0"] <= 50.0 else "irrelevant"
            labels.append({"tuple_id": s["tuple_id"], "label": lab})
        client.post(f"/v1/sessions/{sid}/feedback", json={"labels": labels})
        res = client.get(f"/v1/sessions/{sid}/prediction")
        model = res.json()["data"]["model"]
        assert model is not None
        assert model["relevant_regions"]
        assert model["query_text"] not in ("", None)
        # purity: identical consecutive reads
        again = client.get(f"/v1/sessions/{sid}/prediction")
        assert res.json() == again.json()

    def test_grid_overlay_present(self, client):
        sid = create(client).json()["data"]["session_id"]
        client.get(f"/v1/sessions/{sid}/batch")
        res = client.get(f"/v1/sessions/{sid}/prediction")
        grid = res.json()["data"]["grid"]
        assert grid["levels"][0]["beta"] == 4
        assert isinstance(grid["cells"], list)


class TestMetricsAndTermination:
    def test_metrics_with_truth(self, client):
        sid = create(client).json()["data"]["session_id"]
        res = client.get(f"/v1/sessions/{sid}/metrics")
        assert res.status_code == 200
        m = res.json()["data"]
        assert m["f_measure"] == 0.0  # no model yet

    def test_metrics_without_truth(self, client):
        sid = create(client, attach_truth=False).json()["data"]["session_id"]
        res = client.get(f"/v1/sessions/{sid}/metrics")
        assert res.status_code == 409

    def test_terminate(self, client):
        sid = create(client).json()["data"]["session_id"]
        res = client.post(f"/v1/sessions/{sid}/terminate")
        assert res.json()["data"]["status"] == "completed"
        res = client.get(f"/v1/sessions/{sid}/batch")
        assert res.json()["data"]["status"] == "completed"
        assert res.json()["data"]["samples"] == []

    def test_unknown_session_404(self, client):
        assert client.get("/v1/sessions/zzz/batch").status_code == 404
        assert client.get("/v1/sessions/zzz/prediction").status_code == 404

    def test_concurrent_mutation_gets_busy_conflict(self, client):
        sid = create(client).json()["data"]["session_id"]
        box = client.app.state.sessions[sid]
        assert box.lock.acquire(blocking=False)  # simulate an in-flight call
        try:
            res = client.get(f"/v1/sessions/{sid}/batch")
            assert res.status_code == 409
            assert res.json()["error"]["code"] == "busy"
            res = client.post(f"/v1/sessions/{sid}/feedback", json={"labels": []})
            assert res.status_code == 409
        finally:
            box.lock.release()
        assert client.get(f"/v1/sessions/{sid}/batch").status_code == 200


class TestManifest:
    def test_synthetic_and_file_entries(self, tmp_path):
        csv = tmp_path / "data.csv"
        csv.write_text("a,b\n1,10\n2,20\n3,30\n")
        manifest = tmp_path / "manifest.json"
        manifest.write_text(
            json.dumps(
                {
                    "datasets": [
                        {
                            "id": "synth",
                            "synthetic": {"kind": "uniform", "n": 500, "d": 2, "seed": 3},
                            "target": {"count": 1, "size_class": "large", "seed": 4},
                        },
                        {"id": "filecsv", "file": str(csv)},
                    ]
                }
            )
        )
        registry = load_manifest(manifest)
        assert registry["synth"].dataset.n == 500
        assert registry["synth"].truth is not None
        assert registry["filecsv"].dataset.n == 3
        assert registry["filecsv"].truth is None

    def test_empty_manifest_rejected(self, tmp_path):
        manifest = tmp_path / "m.json"
        manifest.write_text(json.dumps({"datasets": []}))
        with pytest.raises(Exception):
            load_manifest(manifest)
