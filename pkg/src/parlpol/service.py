"""Local review service for the human-in-the-loop workflows.

Serves the coder-facing endpoints: sampling speeches for gold coding,
correcting fuzzy-match errors, confirming reference-file entries, and
approving queued entity resolutions.  Every write is appended to a journal
and kept as a correction overlay; the pipeline artifacts themselves are
never mutated, so re-running a stage replays the same corrections.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Header, HTTPException, Query
from pydantic import BaseModel, Field

from . import __version__
from .config import PipelineConfig, RunPaths
from .corpus import read_speech_store
from .jsonio import append_jsonl, load_jsonl
from .parsing import Mention
from .validation import (
    GoldRecord,
    MatchSet,
    SupergoldRecord,
    ValidationError,
    align,
    compute_metrics,
    sample_speeches,
)


class ReviewService:
    """In-memory state rebuilt from pipeline artifacts plus the write journal."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.paths = RunPaths(cfg.workdir)
        self.speeches = (
            read_speech_store(self.paths.speeches) if self.paths.speeches.exists() else []
        )
        self.speeches_by_id = {s.speech_id: s for s in self.speeches}

        self.mentions: list[Mention] = []
        if self.paths.mentions.exists():
            self.mentions = [Mention.from_record(r) for r in load_jsonl(self.paths.mentions)]

        self.supergold: list[SupergoldRecord] = []
        if self.paths.supergold.exists():
            self.supergold = [
                SupergoldRecord.from_record(r) for r in load_jsonl(self.paths.supergold)
            ]
        self.supergold_by_id = {r.supergold_id: r for r in self.supergold}

        self.resolution_queue: dict[str, dict] = {}
        if self.paths.review_queue.exists():
            for item in load_jsonl(self.paths.review_queue):
                self.resolution_queue[item["mention_id"]] = dict(item)

        # pipeline gold (fixture or configured CSV) seeds the working set
        self.gold: list[GoldRecord] = []
        if self.paths.gold_out.exists():
            self.gold = [GoldRecord.from_record(r) for r in load_jsonl(self.paths.gold_out)]

        self.sample_ids: list[str] = []
        self.forbidden_pairs: set[tuple[str, str]] = set()
        self.dropped_gold: set[str] = set()
        self.tasks: dict[str, dict] = {}
        self.revisions: dict[str, int] = {}
        self.matchset_revision = 0
        self._gold_seq = 0
        # completions seen during replay before their tasks are seeded
        self._pending_task_status: dict[str, dict] = {}

        self._replay_journal()
        self._seed_tasks()
        for task_id, event in self._pending_task_status.items():
            task = self.tasks.get(task_id)
            if task is not None:
                task["status"] = event["status"]
                task["completed_by"] = event.get("coder", "")
                self.revisions[task_id] = event["revision"]
        self._pending_task_status.clear()

    # -- journaling ------------------------------------------------------------

    def _journal(self, event: dict) -> None:
        append_jsonl(self.paths.service_journal, event)

    def _replay_journal(self) -> None:
        if not self.paths.service_journal.exists():
            return
        for event in load_jsonl(self.paths.service_journal):
            self._apply(event, replay=True)

    def _apply(self, event: dict, replay: bool = False) -> None:
        kind = event["event"]
        if kind == "sample_drawn":
            self.sample_ids = list(event["speech_ids"])
        elif kind == "gold_added":
            self.gold.append(GoldRecord.from_record(event["record"]))
            self._gold_seq = max(self._gold_seq, int(event.get("seq", 0)) + 1)
            self.matchset_revision += 1
        elif kind == "match_reject":
            self.forbidden_pairs.add((event["ai_id"], event["gold_id"]))
            self.matchset_revision += 1
        elif kind == "gold_dropped":
            self.dropped_gold.add(event["gold_id"])
            self.matchset_revision += 1
        elif kind == "supergold_confirm":
            record = self.supergold_by_id.get(event["supergold_id"])
            if record is not None:
                record.confirmed = bool(event["confirmed"])
                self.revisions[event["supergold_id"]] = event["revision"]
        elif kind == "resolution_decision":
            item = self.resolution_queue.get(event["item_id"])
            if item is not None:
                item["status"] = event["action"]
                item["party_id"] = event.get("party_id", "")
                self.revisions[event["item_id"]] = event["revision"]
        elif kind == "task_created":
            task_id = event["task_id"]
            if task_id not in self.tasks:
                self.tasks[task_id] = {
                    "task_id": task_id,
                    "kind": event["kind"],
                    "payload": event.get("payload", {}),
                    "status": "open",
                    "completed_by": "",
                    "created": len(self.tasks),
                }
                self.revisions.setdefault(task_id, 0)
        elif kind == "task_completed":
            task = self.tasks.get(event["task_id"])
            if task is not None:
                task["status"] = event["status"]
                task["completed_by"] = event.get("coder", "")
                self.revisions[event["task_id"]] = event["revision"]
            elif replay:
                self._pending_task_status[event["task_id"]] = event
        if not replay:
            self._journal(event)

    # -- tasks -------------------------------------------------------------------

    def _add_task(self, task_id: str, kind: str, payload: dict) -> None:
        # creation goes through the journal so a replayed service rebuilds
        # tasks that were derived under an earlier scope
        if task_id in self.tasks:
            return
        self._apply(
            {"event": "task_created", "task_id": task_id, "kind": kind, "payload": payload}
        )

    def _seed_tasks(self) -> None:
        for sid in self.sample_ids:
            self._add_task(f"code:{sid}", "code-speech", {"speech_id": sid})
        for record in self.supergold:
            if not record.confirmed:
                self._add_task(
                    f"sg:{record.supergold_id}",
                    "confirm-supergold",
                    {"supergold_id": record.supergold_id},
                )
        for item_id, item in self.resolution_queue.items():
            if item.get("status", "open") == "open":
                self._add_task(f"res:{item_id}", "approve-resolution", {"mention_id": item_id})
        for triple in self.current_matchset().triples:
            # duplicate groups are keyed by content: match ids renumber when
            # the gold set changes, task identity must not
            if triple.duplicate_gold and triple.gold is not None:
                self._add_task(
                    self._fix_task_id(triple.speech_id, triple.gold["actor_surface"]),
                    "fix-match",
                    {"speech_id": triple.speech_id,
                     "actor_surface": triple.gold["actor_surface"]},
                )

    @staticmethod
    def _fix_task_id(speech_id: str, actor_surface: str) -> str:
        from .resolution import fold

        return f"fix:{speech_id}:{fold(actor_surface)}"

    # -- state views --------------------------------------------------------------

    def draw_sample(self, k: int | None, seed: int | None) -> list[str]:
        if self.sample_ids:
            return self.sample_ids
        k = k or self.cfg.validation.k
        seed = seed if seed is not None else self.cfg.validation.seed
        sample = sample_speeches(self.speeches, k, seed)
        ids = [s.speech_id for s in sample]
        self._apply({"event": "sample_drawn", "speech_ids": ids, "k": k, "seed": seed})
        for sid in ids:
            self._add_task(f"code:{sid}", "code-speech", {"speech_id": sid})
        return ids

    def scope_ids(self) -> set[str]:
        if self.sample_ids:
            return set(self.sample_ids)
        return {g.speech_id for g in self.gold} | {r.speech_id for r in self.supergold}

    def current_matchset(self) -> MatchSet:
        scope = self.scope_ids()
        ai = [m for m in self.mentions if m.speech_id in scope]
        gold = [g for g in self.gold if g.speech_id in scope]
        return align(
            ai,
            gold,
            threshold=self.cfg.fuzzy_threshold,
            forbidden_pairs=self.forbidden_pairs,
            dropped_gold_ids=self.dropped_gold,
        )

    def add_gold(self, speech_id: str, actor: str, sentiment: int, coder: str) -> GoldRecord:
        record = GoldRecord(
            speech_id=speech_id, coder=coder, actor_surface=actor, sentiment=sentiment
        )
        self._apply(
            {"event": "gold_added", "record": record.to_record(), "seq": self._gold_seq}
        )
        return record

    def metrics(self):
        matchset = self.current_matchset()
        return compute_metrics(matchset, self.supergold, threshold=self.cfg.fuzzy_threshold)


# -- HTTP layer -------------------------------------------------------------------


class GoldIn(BaseModel):
    speech_id: str
    actor: str = Field(min_length=1)
    sentiment: int = Field(ge=-5, le=5)


class MatchPatch(BaseModel):
    op: str  # "reject" | "drop-gold"
    revision: int
    gold_id: Optional[str] = None


class ConfirmIn(BaseModel):
    confirmed: bool
    revision: int


class ResolutionIn(BaseModel):
    action: str  # "approve" | "reject"
    party_id: str = ""
    revision: int


class TaskComplete(BaseModel):
    status: str  # "done" | "skipped"
    revision: int


def create_app(service: ReviewService) -> FastAPI:
    app = FastAPI(title="parlpol review service", version=__version__)

    # localhost tool without authentication; the UI may be served from
    # another local port
    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def check_revision(key: str, revision: int) -> int:
        current = service.revisions.get(key, 0)
        if revision != current:
            raise HTTPException(
                status_code=409,
                detail=f"stale revision {revision}, current is {current}",
            )
        return current + 1

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.get("/speeches/sample")
    def speeches_sample(k: Optional[int] = Query(default=None),
                        seed: Optional[int] = Query(default=None)):
        try:
            ids = service.draw_sample(k, seed)
        except ValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        out = []
        for sid in ids:
            speech = service.speeches_by_id[sid]
            out.append(
                {
                    "speech_id": speech.speech_id,
                    "date": speech.date,
                    "speaker_name": speech.speaker_name,
                    "speaker_party": speech.speaker_party,
                    "text": speech.text,
                }
            )
        return out

    @app.get("/speeches/{speech_id}")
    def speech_detail(speech_id: str):
        speech = service.speeches_by_id.get(speech_id)
        if speech is None:
            raise HTTPException(status_code=404, detail="unknown speech")
        return speech.to_record()

    @app.get("/gold")
    def gold_list(speech_id: Optional[str] = None):
        records = service.gold
        if speech_id is not None:
            records = [g for g in records if g.speech_id == speech_id]
        return [g.to_record() for g in records]

    @app.post("/gold", status_code=201)
    def gold_add(body: GoldIn, x_coder: str = Header(default="anonymous")):
        if body.speech_id not in service.speeches_by_id:
            raise HTTPException(status_code=404, detail="unknown speech")
        record = service.add_gold(body.speech_id, body.actor, body.sentiment, x_coder)
        task = service.tasks.get(f"code:{body.speech_id}")
        return {"record": record.to_record(), "task": task}

    @app.get("/matches")
    def matches():
        matchset = service.current_matchset()
        return {
            "revision": service.matchset_revision,
            "threshold": matchset.threshold,
            "triples": [t.to_record() for t in matchset.triples],
        }

    @app.patch("/matches/{match_id}")
    def match_patch(match_id: str, body: MatchPatch):
        if body.revision != service.matchset_revision:
            raise HTTPException(
                status_code=409,
                detail=f"stale matchset revision {body.revision}, "
                f"current is {service.matchset_revision}",
            )
        matchset = service.current_matchset()
        triple = next((t for t in matchset.triples if t.match_id == match_id), None)
        if triple is None:
            raise HTTPException(status_code=404, detail="unknown match")
        if body.op == "reject":
            if not (triple.ai and triple.gold):
                raise HTTPException(status_code=400, detail="not a matched pair")
            service._apply(
                {
                    "event": "match_reject",
                    "ai_id": triple.ai["ai_id"],
                    "gold_id": triple.gold["gold_id"],
                }
            )
        elif body.op == "drop-gold":
            gold_id = body.gold_id or (triple.gold or {}).get("gold_id")
            if not gold_id:
                raise HTTPException(status_code=400, detail="no gold finding to drop")
            service._apply({"event": "gold_dropped", "gold_id": gold_id})
        else:
            raise HTTPException(status_code=400, detail=f"unknown op {body.op!r}")
        if triple.gold is not None:
            task_id = service._fix_task_id(triple.speech_id, triple.gold["actor_surface"])
            if task_id in service.tasks and service.tasks[task_id]["status"] == "open":
                revision = service.revisions.get(task_id, 0)
                service._apply(
                    {
                        "event": "task_completed",
                        "task_id": task_id,
                        "status": "done",
                        "coder": "",
                        "revision": revision + 1,
                    }
                )
        return {"revision": service.matchset_revision}

    @app.get("/supergold")
    def supergold_list():
        return [
            {**r.to_record(), "revision": service.revisions.get(r.supergold_id, 0)}
            for r in service.supergold
        ]

    @app.get("/supergold/{supergold_id}/confirm")
    def supergold_state(supergold_id: str):
        record = service.supergold_by_id.get(supergold_id)
        if record is None:
            raise HTTPException(status_code=404, detail="unknown supergold record")
        return {
            "supergold_id": supergold_id,
            "confirmed": record.confirmed,
            "provenance": record.provenance,
            "revision": service.revisions.get(supergold_id, 0),
        }

    @app.post("/supergold/{supergold_id}/confirm")
    def supergold_confirm(supergold_id: str, body: ConfirmIn):
        record = service.supergold_by_id.get(supergold_id)
        if record is None:
            raise HTTPException(status_code=404, detail="unknown supergold record")
        new_revision = check_revision(supergold_id, body.revision)
        service._apply(
            {
                "event": "supergold_confirm",
                "supergold_id": supergold_id,
                "confirmed": body.confirmed,
                "revision": new_revision,
            }
        )
        return {"supergold_id": supergold_id, "confirmed": record.confirmed,
                "revision": new_revision}

    @app.get("/resolution-queue")
    def resolution_queue():
        return [
            {**item, "revision": service.revisions.get(item_id, 0)}
            for item_id, item in sorted(service.resolution_queue.items())
            if item.get("status", "open") == "open"
        ]

    @app.post("/resolution-queue/{item_id:path}")
    def resolution_decide(item_id: str, body: ResolutionIn):
        item = service.resolution_queue.get(item_id)
        if item is None:
            raise HTTPException(status_code=404, detail="unknown queue item")
        if body.action not in ("approve", "reject"):
            raise HTTPException(status_code=400, detail=f"unknown action {body.action!r}")
        new_revision = check_revision(item_id, body.revision)
        service._apply(
            {
                "event": "resolution_decision",
                "item_id": item_id,
                "action": body.action,
                "party_id": body.party_id,
                "revision": new_revision,
            }
        )
        return {"item_id": item_id, "status": item["status"], "revision": new_revision}

    @app.get("/metrics")
    def metrics():
        try:
            return service.metrics().to_record()
        except ValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/tasks")
    def tasks(kind: Optional[str] = None, status: Optional[str] = None):
        known = {"code-speech", "fix-match", "confirm-supergold", "approve-resolution"}
        if kind is not None and kind not in known:
            raise HTTPException(status_code=400, detail=f"unknown task kind {kind!r}")
        items = list(service.tasks.values())
        if kind:
            items = [t for t in items if t["kind"] == kind]
        if status:
            items = [t for t in items if t["status"] == status]
        items.sort(key=lambda t: (t["status"] != "open", t["created"]))
        return [
            {**t, "revision": service.revisions.get(t["task_id"], 0)} for t in items
        ]

    @app.post("/tasks/{task_id:path}/complete")
    def task_complete(task_id: str, body: TaskComplete):
        task = service.tasks.get(task_id)
        if task is None:
            raise HTTPException(status_code=404, detail="unknown task")
        if body.status not in ("done", "skipped"):
            raise HTTPException(status_code=400, detail="status must be done or skipped")
        if task["status"] != "open":
            raise HTTPException(status_code=409, detail="task already completed")
        new_revision = check_revision(task_id, body.revision)
        service._apply(
            {
                "event": "task_completed",
                "task_id": task_id,
                "status": body.status,
                "coder": "",
                "revision": new_revision,
            }
        )
        return {"task_id": task_id, "status": task["status"], "revision": new_revision}

    return app
