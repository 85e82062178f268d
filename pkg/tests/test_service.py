import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from camsteer.service.app import create_app

from conftest import make_separable_dataset

TRAIN_BODY = {"epochs": 6, "batch_size": 8, "learning_rate": 5e-3, "seed": 0}
FINETUNE_BODY = {"epochs": 1, "batch_size": 4, "learning_rate": 5e-4, "seed": 0,
                 "replay_fraction": 0.05}


def write_labels_csv(manifest, root):
    rows = ["image," + ",".join(manifest.label_names)]
    for rec in manifest.items:
        rows.append(rec.image_id + "," + ",".join(str(v) for v in rec.labels))
    (root / "labels.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("svc-data")
    manifest = make_separable_dataset(root, n=100, size=64, seed=0)
    write_labels_csv(manifest, root)
    return root


def wait_for_job(client, sid, timeout=300.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        status = client.get(f"/api/v1/sessions/{sid}/job").json()
        if status["state"] in ("done", "failed", "idle"):
            return status
        time.sleep(0.2)
    raise TimeoutError("job did not finish")


@pytest.fixture(scope="module")
def trained_session(tmp_path_factory, dataset_dir):
    """One session with an uploaded dataset and a round-0 model."""
    data_dir = tmp_path_factory.mktemp("svc-store")
    app = create_app(data_dir)
    client = TestClient(app)
    sid = client.post("/api/v1/sessions", json={}).json()["session_id"]
    up = client.post(f"/api/v1/sessions/{sid}/dataset", json={
        "root": str(dataset_dir), "input_size": 64, "seed": 1,
    })
    assert up.status_code == 200, up.text
    r = client.post(f"/api/v1/sessions/{sid}/train", json=TRAIN_BODY)
    assert r.status_code == 200, r.text
    status = wait_for_job(client, sid)
    assert status["state"] == "done", status
    return client, sid, data_dir


class TestSessionAndDataset:
    def test_unknown_session_404(self, trained_session):
        client, _, _ = trained_session
        assert client.get("/api/v1/sessions/nope").status_code == 404

    def test_upload_reports_stats(self, trained_session):
        client, sid, _ = trained_session
        info = client.get(f"/api/v1/sessions/{sid}").json()
        assert info["dataset_loaded"]
        assert info["current_round"] == 0
        stats = client.get(f"/api/v1/sessions/{sid}/label-stats").json()
        assert stats["label_names"] == ["topleft", "bottomright"]
        assert len(stats["counts"]) == 2

    def test_cooccurrence_matrix_symmetric(self, trained_session):
        client, sid, _ = trained_session
        doc = client.get(f"/api/v1/sessions/{sid}/cooccurrence").json()
        m = np.array(doc["matrix"])
        assert np.array_equal(m, m.T)
        assert np.diagonal(m).sum() == 0

    def test_train_guard_without_dataset(self, trained_session):
        client, _, _ = trained_session
        sid2 = client.post("/api/v1/sessions", json={}).json()["session_id"]
        r = client.post(f"/api/v1/sessions/{sid2}/train", json=TRAIN_BODY)
        assert r.status_code == 404


class TestRankedAndHeatmaps:
    @pytest.mark.parametrize("mode", ["accuracy", "dependency"])
    def test_ranked_images_modes(self, trained_session, mode):
        client, sid, _ = trained_session
        doc = client.get(f"/api/v1/sessions/{sid}/ranked-images",
                         params={"label": 0, "mode": mode}).json()
        images = doc["images"]
        assert len(images) > 0
        assert [i["rank"] for i in images] == list(range(1, len(images) + 1))
        assert all(0.0 <= i["score"] <= 1.0 for i in images)

    def test_concentration_mode_small_split(self, trained_session):
        client, sid, _ = trained_session
        doc = client.get(f"/api/v1/sessions/{sid}/ranked-images",
                         params={"label": 0, "mode": "concentration"}).json()
        assert len(doc["images"]) > 0
        # most diffuse first
        scores = [i["score"] for i in doc["images"]]
        assert scores == sorted(scores)

    def test_heatmap_grid_and_overlay(self, trained_session):
        client, sid, _ = trained_session
        ranked = client.get(f"/api/v1/sessions/{sid}/ranked-images",
                            params={"label": 0, "mode": "accuracy"}).json()
        image_id = ranked["images"][0]["image_id"]
        doc = client.get(f"/api/v1/sessions/{sid}/heatmap",
                         params={"image_id": image_id, "label": 0}).json()
        values = np.array(doc["values"])
        assert values.shape == (16, 16)
        assert values.min() >= 0.0 and values.max() <= 1.0
        png = client.get(f"/api/v1/sessions/{sid}/heatmap",
                         params={"image_id": image_id, "label": 0, "overlay": "true"})
        assert png.headers["content-type"] == "image/png"
        assert png.content[:8] == b"\x89PNG\r\n\x1a\n"

    def test_unknown_image_404(self, trained_session):
        client, sid, _ = trained_session
        r = client.get(f"/api/v1/sessions/{sid}/heatmap",
                       params={"image_id": "ghost.png", "label": 0})
        assert r.status_code == 404


class TestAnnotationFlow:
    def _some_val_image(self, client, sid, label=0):
        doc = client.get(f"/api/v1/sessions/{sid}/ranked-images",
                         params={"label": label, "mode": "accuracy"}).json()
        return doc["images"][0]["image_id"]

    def test_put_annotation_and_flag(self, trained_session):
        client, sid, _ = trained_session
        image_id = self._some_val_image(client, sid)
        r = client.put(f"/api/v1/sessions/{sid}/annotations", json={
            "image_id": image_id, "label_index": 0,
            "polygons": [[(0.2, 0.2), (0.6, 0.2), (0.6, 0.6), (0.2, 0.6)]],
            "note": "focus here",
        })
        assert r.status_code == 200, r.text
        doc = r.json()
        assert doc["round"] == 0
        assert doc["note"] == "focus here"
        assert not doc["accepted_from_heatmap"]
        ranked = client.get(f"/api/v1/sessions/{sid}/ranked-images",
                            params={"label": 0, "mode": "accuracy"}).json()
        flag = {i["image_id"]: i["annotated"] for i in ranked["images"]}
        assert flag[image_id] is True

    def test_invalid_polygon_rejected_verbatim(self, trained_session):
        client, sid, _ = trained_session
        image_id = self._some_val_image(client, sid)
        r = client.put(f"/api/v1/sessions/{sid}/annotations", json={
            "image_id": image_id, "label_index": 0,
            "polygons": [[(0.2, 0.2), (0.6, 0.2)]],
        })
        assert r.status_code == 422
        assert "3 vertices" in r.json()["error"]

    def test_accept_heatmap_round_trip(self, trained_session):
        client, sid, _ = trained_session
        # find an image/label whose heatmap is not degenerate
        chosen = None
        for label in (0, 1):
            ranked = client.get(f"/api/v1/sessions/{sid}/ranked-images",
                                params={"label": label, "mode": "accuracy"}).json()
            for entry in ranked["images"]:
                hm = client.get(f"/api/v1/sessions/{sid}/heatmap",
                                params={"image_id": entry["image_id"], "label": label}).json()
                if not hm["degenerate"]:
                    chosen = (entry["image_id"], label)
                    break
            if chosen:
                break
        assert chosen is not None, "every validation heatmap came out degenerate"
        r = client.post(f"/api/v1/sessions/{sid}/accept-heatmap", json={
            "image_id": chosen[0], "label_index": chosen[1],
        })
        assert r.status_code == 200, r.text
        doc = r.json()
        assert doc["accepted_from_heatmap"] is True
        assert len(doc["polygons"]) >= 1

    def test_accept_degenerate_heatmap_rejected(self, trained_session):
        client, sid, _ = trained_session
        for label in (0, 1):
            ranked = client.get(f"/api/v1/sessions/{sid}/ranked-images",
                                params={"label": label, "mode": "accuracy"}).json()
            for entry in ranked["images"]:
                hm = client.get(f"/api/v1/sessions/{sid}/heatmap",
                                params={"image_id": entry["image_id"], "label": label}).json()
                if hm["degenerate"]:
                    r = client.post(f"/api/v1/sessions/{sid}/accept-heatmap", json={
                        "image_id": entry["image_id"], "label_index": label,
                    })
                    assert r.status_code == 422
                    assert "manually" in r.json()["error"]
                    return
        pytest.skip("no degenerate heatmap in this fixture")

    def test_annotation_idempotent_replay(self, trained_session):
        client, sid, _ = trained_session
        image_id = self._some_val_image(client, sid)
        body = {
            "image_id": image_id, "label_index": 1,
            "polygons": [[(0.1, 0.1), (0.4, 0.1), (0.4, 0.4)]],
            "request_id": "req-ann-1",
        }
        first = client.put(f"/api/v1/sessions/{sid}/annotations", json=body).json()
        body["polygons"] = [[(0.5, 0.5), (0.9, 0.5), (0.9, 0.9)]]  # replay ignores changes
        second = client.put(f"/api/v1/sessions/{sid}/annotations", json=body).json()
        assert first == second


class TestFinetuneRound:
    def test_full_round_advances_and_serves_history(self, trained_session):
        client, sid, _ = trained_session
        r = client.post(f"/api/v1/sessions/{sid}/finetune", json=FINETUNE_BODY)
        assert r.status_code == 200, r.text
        status = wait_for_job(client, sid)
        assert status["state"] == "done", status
        info = client.get(f"/api/v1/sessions/{sid}").json()
        assert info["current_round"] == 1
        assert info["rounds"][1]["parent_round"] == 0
        history = client.get(f"/api/v1/sessions/{sid}/history", params={"label": 0}).json()
        assert [row["round_index"] for row in history["reports"]] == [0, 1]
        for row in history["reports"]:
            assert set(row) >= {"precision", "recall", "f1", "auc",
                                "correct_count", "incorrect_count"}

    def test_comparison_after_round(self, trained_session):
        client, sid, _ = trained_session
        ranked = client.get(f"/api/v1/sessions/{sid}/ranked-images",
                            params={"label": 0, "mode": "accuracy"}).json()
        image_id = ranked["images"][0]["image_id"]
        doc = client.get(f"/api/v1/sessions/{sid}/comparison",
                         params={"image_id": image_id, "label": 0}).json()
        assert len(doc["rounds"]) == 2  # preliminary + 1 round
        for row in doc["rounds"]:
            assert isinstance(row["correct"], bool)
            assert np.array(row["values"]).shape == (16, 16)

    def test_finetune_without_new_annotations_rejected(self, trained_session):
        client, sid, _ = trained_session
        r = client.post(f"/api/v1/sessions/{sid}/finetune", json=FINETUNE_BODY)
        assert r.status_code == 422
        assert "annotate" in r.json()["error"]


class TestPersistenceAcrossRestart:
    def test_restart_reconstructs_state(self, trained_session):
        client, sid, data_dir = trained_session
        before = client.get(f"/api/v1/sessions/{sid}").json()
        history_before = client.get(f"/api/v1/sessions/{sid}/history", params={"label": 0}).json()

        fresh = TestClient(create_app(data_dir))
        after = fresh.get(f"/api/v1/sessions/{sid}").json()
        assert after["current_round"] == before["current_round"]
        assert after["rounds"] == before["rounds"]
        history_after = fresh.get(f"/api/v1/sessions/{sid}/history", params={"label": 0}).json()
        assert history_after == history_before
        ranked = fresh.get(f"/api/v1/sessions/{sid}/ranked-images",
                           params={"label": 0, "mode": "accuracy"})
        assert ranked.status_code == 200
        assert len(ranked.json()["images"]) > 0


class TestJobConflicts:
    def test_second_job_rejected_while_running(self, tmp_path, dataset_dir):
        app = create_app(tmp_path / "store2")
        client = TestClient(app)
        sid = client.post("/api/v1/sessions", json={}).json()["session_id"]
        client.post(f"/api/v1/sessions/{sid}/dataset",
                    json={"root": str(dataset_dir), "input_size": 64})
        slow_train = dict(TRAIN_BODY, epochs=30)
        assert client.post(f"/api/v1/sessions/{sid}/train", json=slow_train).status_code == 200
        retry = client.post(f"/api/v1/sessions/{sid}/train", json=dict(slow_train, seed=9))
        assert retry.status_code == 409
        wait_for_job(client, sid)

    def test_train_request_idempotent(self, tmp_path, dataset_dir):
        app = create_app(tmp_path / "store3")
        client = TestClient(app)
        sid = client.post("/api/v1/sessions", json={}).json()["session_id"]
        client.post(f"/api/v1/sessions/{sid}/dataset",
                    json={"root": str(dataset_dir), "input_size": 64})
        body = dict(TRAIN_BODY, request_id="train-once")
        first = client.post(f"/api/v1/sessions/{sid}/train", json=body)
        second = client.post(f"/api/v1/sessions/{sid}/train", json=body)
        assert first.status_code == 200
        assert second.status_code == 200  # replay, not a 409
        assert first.json() == second.json()
        wait_for_job(client, sid)

    def test_failed_job_leaves_round_unchanged(self, trained_session, monkeypatch):
        client, sid, _ = trained_session
        before = client.get(f"/api/v1/sessions/{sid}").json()["current_round"]
        image_id = client.get(f"/api/v1/sessions/{sid}/ranked-images",
                              params={"label": 0, "mode": "accuracy"}).json()["images"][1]["image_id"]
        client.put(f"/api/v1/sessions/{sid}/annotations", json={
            "image_id": image_id, "label_index": 0,
            "polygons": [[(0.2, 0.2), (0.7, 0.2), (0.7, 0.7), (0.2, 0.7)]],
        })

        import camsteer.service.app as app_module

        def explode(*args, **kwargs):
            raise RuntimeError("injected fault")

        monkeypatch.setattr(app_module, "finetune_round", explode)
        r = client.post(f"/api/v1/sessions/{sid}/finetune", json=FINETUNE_BODY)
        assert r.status_code == 200
        status = wait_for_job(client, sid)
        assert status["state"] == "failed"
        assert "injected fault" in status["message"]
        after = client.get(f"/api/v1/sessions/{sid}").json()["current_round"]
        assert after == before
