from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from parlpol.config import RunPaths, load_config
from parlpol.pipeline import run_all
from parlpol.service import ReviewService, create_app
from parlpol.synthetic import generate


@pytest.fixture(scope="module")
def pipeline_state(tmp_path_factory):
    """A full pipeline run whose artifacts back the service under test."""
    root = tmp_path_factory.mktemp("svc")
    corpus = generate(root / "corpus")
    cfg = load_config(corpus.config)
    run_all(cfg)
    return corpus, cfg


@pytest.fixture
def client(pipeline_state, tmp_path):
    # copy the artifacts into a private workdir so journaled writes from one
    # test cannot leak into another
    import shutil

    corpus, base_cfg = pipeline_state
    workdir = tmp_path / "state"
    shutil.copytree(RunPaths(base_cfg.workdir).workdir, workdir)
    (workdir / ".lock").unlink(missing_ok=True)
    (workdir / "service_journal.jsonl").unlink(missing_ok=True)

    cfg = load_config(corpus.config, overrides={"workdir": str(workdir)})
    service = ReviewService(cfg)
    return TestClient(create_app(service)), service, cfg


class TestHealthAndSample:
    def test_health(self, client):
        http, _, _ = client
        resp = http.get("/health")
        assert resp.status_code == 200
        body = resp.json()
        assert body["status"] == "ok" and "version" in body

    def test_sample_is_persisted_and_creates_tasks(self, client):
        http, service, cfg = client
        resp = http.get("/speeches/sample", params={"k": 50, "seed": 3})
        assert resp.status_code == 200
        first = [s["speech_id"] for s in resp.json()]
        assert len(first) == 50
        # second call returns the persisted sample regardless of params
        resp = http.get("/speeches/sample", params={"k": 10, "seed": 99})
        assert [s["speech_id"] for s in resp.json()] == first
        tasks = http.get("/tasks", params={"kind": "code-speech"}).json()
        assert len(tasks) == 50

    def test_speech_detail_404(self, client):
        http, _, _ = client
        assert http.get("/speeches/nope").status_code == 404


class TestGold:
    def test_post_gold_persists(self, client):
        http, service, cfg = client
        sid = service.speeches[0].speech_id
        resp = http.post(
            "/gold",
            json={"speech_id": sid, "actor": "Alpha", "sentiment": -3},
            headers={"X-Coder": "anna"},
        )
        assert resp.status_code == 201
        record = resp.json()["record"]
        assert record["coder"] == "anna"
        listed = http.get("/gold", params={"speech_id": sid}).json()
        assert any(g["actor_surface"] == "Alpha" for g in listed)
        # journaled, so a fresh service instance sees it
        fresh = ReviewService(cfg)
        assert any(
            g.actor_surface == "Alpha" and g.speech_id == sid for g in fresh.gold
        )

    def test_validation_rules(self, client):
        http, service, _ = client
        sid = service.speeches[0].speech_id
        assert http.post("/gold", json={"speech_id": sid, "actor": "", "sentiment": 0}).status_code == 422
        assert http.post("/gold", json={"speech_id": sid, "actor": "X", "sentiment": 9}).status_code == 422
        assert http.post("/gold", json={"speech_id": "nope", "actor": "X", "sentiment": 0}).status_code == 404


class TestMatchesAndMetrics:
    def test_metrics_computable_from_pipeline_state(self, client):
        http, _, _ = client
        resp = http.get("/metrics")
        assert resp.status_code == 200
        body = resp.json()
        assert body["sensitivity_vs_supergold"] == 100.0
        assert body["fdr"] == 0.0

    def test_match_correction_reflects_in_metrics(self, client):
        http, _, _ = client
        before = http.get("/metrics").json()
        matches = http.get("/matches").json()
        pair = next(t for t in matches["triples"] if t["ai"] and t["gold"])
        resp = http.patch(
            f"/matches/{pair['match_id']}",
            json={"op": "reject", "revision": matches["revision"]},
        )
        assert resp.status_code == 200
        after = http.get("/metrics").json()
        # the rejected pair removes one matched sentiment comparison
        assert after["n_matched_pairs"] == before["n_matched_pairs"] - 1

    def test_stale_matchset_revision_conflicts(self, client):
        http, _, _ = client
        matches = http.get("/matches").json()
        pair = next(t for t in matches["triples"] if t["ai"] and t["gold"])
        resp = http.patch(
            f"/matches/{pair['match_id']}",
            json={"op": "reject", "revision": matches["revision"] + 5},
        )
        assert resp.status_code == 409

    def test_unknown_match_404(self, client):
        http, _, _ = client
        revision = http.get("/matches").json()["revision"]
        assert (
            http.patch("/matches/zzz", json={"op": "reject", "revision": revision}).status_code
            == 404
        )


class TestSupergold:
    def test_confirm_round_trip(self, client):
        http, service, _ = client
        record = service.supergold[0]
        state = http.get(f"/supergold/{record.supergold_id}/confirm").json()
        resp = http.post(
            f"/supergold/{record.supergold_id}/confirm",
            json={"confirmed": False, "revision": state["revision"]},
        )
        assert resp.status_code == 200
        assert http.get(f"/supergold/{record.supergold_id}/confirm").json()["confirmed"] is False
        # metrics denominator shrinks by exactly one
        metrics = http.get("/metrics").json()
        assert metrics["n_supergold"] == len(service.supergold) - 1

    def test_concurrent_confirmation_single_winner(self, client):
        http, service, _ = client
        record = service.supergold[1]
        revision = http.get(f"/supergold/{record.supergold_id}/confirm").json()["revision"]
        first = http.post(
            f"/supergold/{record.supergold_id}/confirm",
            json={"confirmed": False, "revision": revision},
        )
        second = http.post(
            f"/supergold/{record.supergold_id}/confirm",
            json={"confirmed": True, "revision": revision},
        )
        assert first.status_code == 200
        assert second.status_code == 409


class TestTasks:
    def test_unknown_kind_400(self, client):
        http, _, _ = client
        assert http.get("/tasks", params={"kind": "bogus"}).status_code == 400

    def test_open_tasks_first_stable_order(self, client):
        http, _, _ = client
        http.get("/speeches/sample", params={"k": 5, "seed": 1})
        tasks = http.get("/tasks").json()
        open_flags = [t["status"] == "open" for t in tasks]
        assert open_flags == sorted(open_flags, reverse=True)

    def test_concurrent_completion_one_winner(self, client):
        http, _, _ = client
        http.get("/speeches/sample", params={"k": 5, "seed": 1})
        task = http.get("/tasks", params={"status": "open"}).json()[0]
        first = http.post(
            f"/tasks/{task['task_id']}/complete",
            json={"status": "done", "revision": task["revision"]},
        )
        second = http.post(
            f"/tasks/{task['task_id']}/complete",
            json={"status": "skipped", "revision": task["revision"]},
        )
        assert first.status_code == 200
        assert second.status_code == 409

    def test_completed_tasks_immutable(self, client):
        http, _, _ = client
        http.get("/speeches/sample", params={"k": 5, "seed": 1})
        task = http.get("/tasks", params={"status": "open"}).json()[0]
        http.post(
            f"/tasks/{task['task_id']}/complete",
            json={"status": "done", "revision": task["revision"]},
        )
        again = http.post(
            f"/tasks/{task['task_id']}/complete",
            json={"status": "skipped", "revision": task["revision"] + 1},
        )
        assert again.status_code == 409


class TestResolutionQueue:
    def test_queue_lists_and_decides(self, client, tmp_path):
        http, service, cfg = client
        # plant one open queue item directly in the state
        item = {
            "mention_id": "x00001:000",
            "speech_id": "x00001",
            "actor_surface": "Unknown Figure",
            "country": "XX",
            "date": "2021-02-01",
            "suggested_class": "party_or_member",
            "rationale": "",
            "status": "open",
        }
        service.resolution_queue[item["mention_id"]] = dict(item)
        service._add_task("res:" + item["mention_id"], "approve-resolution",
                          {"mention_id": item["mention_id"]})
        queue = http.get("/resolution-queue").json()
        target = next(q for q in queue if q["mention_id"] == item["mention_id"])
        resp = http.post(
            f"/resolution-queue/{item['mention_id']}",
            json={"action": "approve", "party_id": "ALPHA", "revision": target["revision"]},
        )
        assert resp.status_code == 200
        assert service.resolution_queue[item["mention_id"]]["status"] == "approve"
        # no longer listed as open
        remaining = [q["mention_id"] for q in http.get("/resolution-queue").json()]
        assert item["mention_id"] not in remaining


class TestJournalReplay:
    def test_replay_reconstructs_state(self, client):
        http, service, cfg = client
        http.get("/speeches/sample", params={"k": 5, "seed": 1})
        sid = service.sample_ids[0]
        http.post("/gold", json={"speech_id": sid, "actor": "Beta", "sentiment": 2})
        task = http.get("/tasks", params={"status": "open"}).json()[0]
        http.post(
            f"/tasks/{task['task_id']}/complete",
            json={"status": "done", "revision": task["revision"]},
        )
        record = service.supergold[2]
        revision = http.get(f"/supergold/{record.supergold_id}/confirm").json()["revision"]
        http.post(
            f"/supergold/{record.supergold_id}/confirm",
            json={"confirmed": False, "revision": revision},
        )

        fresh = ReviewService(cfg)
        assert fresh.sample_ids == service.sample_ids
        assert [g.to_record() for g in fresh.gold] == [g.to_record() for g in service.gold]
        assert fresh.tasks[task["task_id"]]["status"] == "done"
        assert fresh.supergold_by_id[record.supergold_id].confirmed is False
        assert fresh.metrics() == service.metrics()
