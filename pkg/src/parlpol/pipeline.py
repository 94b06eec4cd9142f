"""Stage orchestration: ingest, extract, parse, resolve, index, validate, export.

Each stage reads and writes files under the configured working directory and
is idempotent given unchanged inputs.  A run manifest records digests of the
config, the inputs, and every deterministic artifact, so two runs over the
same corpus can be compared byte for byte.
"""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path

from . import __version__
from .config import BackendSettings, PipelineConfig, RunPaths
from .corpus import (
    CorpusManifest,
    Speech,
    default_vocative_patterns,
    ingest_file,
    load_vocative_patterns,
    read_speech_store,
    strip_address,
    write_speech_store,
)
from .gateway import (
    FORMAT_REMINDER,
    HttpChatBackend,
    MockBackend,
    PromptTemplate,
    RetryPolicy,
    extract_once,
    render_prompt,
    submit_batch,
)
from .indexing import (
    aggregate_dyads,
    compute_series,
    export_dyads_csv,
    export_series_csv,
    export_series_json,
    read_records_jsonl,
    write_records_jsonl,
)
from .jsonio import canonical_json, dump_jsonl, load_jsonl, sha256_file, sha256_text
from .parsing import Mention, parse_responses, reprocess
from .resolution import Registry, ResolvedReference, resolve_all
from .validation import (
    GoldRecord,
    align,
    build_supergold,
    compute_metrics,
    confirm_supergold,
    entity_stage_metrics,
    load_gold_csv,
    sample_speeches,
)

log = logging.getLogger("parlpol.pipeline")


class StageError(RuntimeError):
    pass


def build_backend(settings: BackendSettings):
    if settings.kind == "mock":
        return MockBackend(
            settings.fixture,
            backend_id=settings.id,
            prose_fraction=settings.prose_fraction,
            corrupt_fraction=settings.corrupt_fraction,
            wrap_fraction=settings.wrap_fraction,
        )
    return HttpChatBackend(
        settings.endpoint,
        settings.model,
        backend_id=settings.id or settings.model,
        api_key_env=settings.api_key_env,
        timeout=settings.timeout,
    )


def _prompt(cfg: PipelineConfig) -> str:
    template = (
        PromptTemplate.load(cfg.prompt_template_path)
        if cfg.prompt_template_path
        else PromptTemplate.packaged()
    )
    return render_prompt(
        template, cfg.country, cfg.year_start, cfg.year_end, country_name=cfg.country_name
    )


def _retry(cfg: PipelineConfig) -> RetryPolicy:
    return RetryPolicy(max_attempts=cfg.max_attempts)


def _load_mentions(paths: RunPaths) -> list[tuple[str, Mention]]:
    return [
        (rec["mention_id"], Mention.from_record(rec))
        for rec in load_jsonl(paths.mentions)
    ]


def stage_ingest(cfg: PipelineConfig) -> dict:
    paths = RunPaths(cfg.workdir)
    manifest = CorpusManifest.load(cfg.corpus_manifest)
    result = ingest_file(manifest, cfg.corpus_path)
    patterns = (
        load_vocative_patterns(cfg.vocatives_path)
        if cfg.vocatives_path
        else default_vocative_patterns()
    )
    speeches = [strip_address(s, patterns) for s in result.speeches]
    write_speech_store(paths.speeches, speeches, manifest)
    dump_jsonl(paths.rejects, result.rejects)
    stats = {
        "stage": "ingest",
        "accepted": len(speeches),
        "rejected": len(result.rejects),
        "stripped": sum(1 for s in speeches if s.address_stripped),
        "excluded": sum(1 for s in speeches if s.excluded),
    }
    if manifest.expected_count is not None:
        stats["expected_count"] = manifest.expected_count
        total = stats["accepted"] + stats["rejected"]
        if total != manifest.expected_count:
            log.warning(
                "manifest declares %d records, saw %d", manifest.expected_count, total
            )
    return stats


def stage_extract(cfg: PipelineConfig) -> dict:
    paths = RunPaths(cfg.workdir)
    speeches = read_speech_store(paths.speeches)
    backend = build_backend(cfg.backend)
    prompt = _prompt(cfg)
    responses = submit_batch(
        speeches,
        backend,
        prompt,
        paths.journal,
        paths.responses,
        max_in_flight=cfg.max_in_flight,
        retry=_retry(cfg),
        truncate_chars=cfg.truncate_chars,
    )
    return {
        "stage": "extract",
        "submitted": len(responses),
        "skipped_excluded": sum(1 for s in speeches if s.excluded),
        "backend": backend.backend_id,
    }


def stage_parse(cfg: PipelineConfig) -> dict:
    paths = RunPaths(cfg.workdir)
    if not Path(paths.responses).exists():
        raise StageError("no responses store; run extract first")
    records = list(load_jsonl(paths.responses))
    mentions_by_speech, queue, report = parse_responses(records)
    # the failure log is an artifact of its own, kept before reprocessing
    dump_jsonl(paths.reprocess_queue, (e.to_record() for e in queue))

    parked = []
    resubmissions = 0
    if queue:
        backend = build_backend(cfg.backend)
        speeches = {s.speech_id: s for s in read_speech_store(paths.speeches)}
        prompt = _prompt(cfg) + "\n\n" + FORMAT_REMINDER
        retry = _retry(cfg)

        def submit_fn(speech_id: str) -> str:
            return extract_once(backend, prompt, speeches[speech_id], retry)

        outcome = reprocess(queue, submit_fn, cap=cfg.reprocess_cap)
        # a recovered speech supersedes its earlier partial table, so rows
        # kept on the first pass are never double counted
        mentions_by_speech.update(outcome.recovered)
        parked = outcome.parked
        resubmissions = outcome.resubmissions

    records_out = []
    for sid in sorted(mentions_by_speech):
        for k, mention in enumerate(mentions_by_speech[sid]):
            records_out.append({"mention_id": f"{sid}:{k:03d}", **mention.to_record()})
    dump_jsonl(paths.mentions, records_out)
    dump_jsonl(paths.parked, (e.to_record() for e in parked))

    queued_speeches = {e.speech_id for e in queue}
    parked_speeches = {e.speech_id for e in parked}
    run_report = {
        "stage": "parse",
        **report.to_record(),
        "reprocess_queued": len(queue),
        "reprocess_resubmissions": resubmissions,
        "reprocess_recovered_speeches": len(queued_speeches - parked_speeches),
        "parked": len(parked),
        "final_mentions": len(records_out),
    }
    Path(paths.run_report).write_text(
        json.dumps(run_report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return run_report


def stage_resolve(cfg: PipelineConfig) -> dict:
    paths = RunPaths(cfg.workdir)
    mentions = _load_mentions(paths)
    speeches = {s.speech_id: s for s in read_speech_store(paths.speeches)}
    registry = Registry.load_csv(cfg.registry_path)
    backend = build_backend(cfg.backend)

    preloaded = {}
    if Path(paths.classify_cache).exists():
        for rec in load_jsonl(paths.classify_cache):
            preloaded[(rec["alias"], rec["country"])] = (rec["entity_class"], rec["rationale"])

    outcome = resolve_all(
        mentions,
        speeches,
        registry,
        backend=backend,
        threshold=cfg.fuzzy_threshold,
        preloaded_cache=preloaded,
    )
    outcome.check_conservation(len(mentions))
    dump_jsonl(
        paths.resolved,
        (r.to_record() for r in sorted(outcome.resolved, key=lambda r: r.mention_id)),
    )
    dump_jsonl(paths.review_queue, sorted(outcome.review_queue, key=lambda r: r["mention_id"]))
    dump_jsonl(
        paths.classify_cache,
        (
            {"alias": k[0], "country": k[1], "entity_class": v[0], "rationale": v[1]}
            for k, v in sorted(outcome.classify_cache.items())
        ),
    )
    return {"stage": "resolve", **outcome.counts, "review_queue": len(outcome.review_queue)}


def stage_index(cfg: PipelineConfig) -> dict:
    paths = RunPaths(cfg.workdir)
    refs = [ResolvedReference.from_record(rec) for rec in load_jsonl(paths.resolved)]
    agg = aggregate_dyads(
        refs, granularity=cfg.granularity, government_as_party=cfg.government_as_party
    )
    records = compute_series(agg, min_out_references=cfg.min_out_references)
    write_records_jsonl(records, paths.eps_records)
    export_series_csv(records, paths.eps_csv)
    export_series_json(records, paths.eps_json)
    export_dyads_csv(agg, paths.dyads_csv)
    return {
        "stage": "index",
        "periods": len(agg.periods()),
        "records": len(records),
        "diagnostics": agg.diagnostics,
    }


def _service_overlays(paths: RunPaths) -> dict:
    """Corrections recorded by the review service, replayed onto fresh runs."""
    overlays = {
        "forbidden_pairs": set(),
        "dropped_gold": set(),
        "extra_gold": [],
        "supergold_confirm": {},
        "resolution": {},
    }
    if not Path(paths.service_journal).exists():
        return overlays
    for event in load_jsonl(paths.service_journal):
        kind = event.get("event")
        if kind == "match_reject":
            overlays["forbidden_pairs"].add((event["ai_id"], event["gold_id"]))
        elif kind == "gold_dropped":
            overlays["dropped_gold"].add(event["gold_id"])
        elif kind == "gold_added":
            overlays["extra_gold"].append(event["record"])
        elif kind == "supergold_confirm":
            overlays["supergold_confirm"][event["supergold_id"]] = event["confirmed"]
        elif kind == "resolution_decision":
            overlays["resolution"][event["item_id"]] = event
    return overlays


def stage_validate(cfg: PipelineConfig) -> dict:
    paths = RunPaths(cfg.workdir)
    speeches = read_speech_store(paths.speeches)
    sample = sample_speeches(speeches, cfg.validation.k, cfg.validation.seed)
    sample_ids = {s.speech_id for s in sample}
    speeches_by_id = {s.speech_id: s for s in speeches}

    if cfg.validation.gold_path:
        gold = [g for g in load_gold_csv(cfg.validation.gold_path) if g.speech_id in sample_ids]
    elif cfg.backend.kind == "mock":
        # unattended fixture runs treat the planted annotations as the coder
        fixture = json.loads(Path(cfg.backend.fixture).read_text(encoding="utf-8"))
        gold = [
            GoldRecord(
                speech_id=sid,
                coder="fixture",
                actor_surface=row["actor"],
                sentiment=int(row["sentiment"]),
            )
            for sid in sorted(sample_ids)
            for row in fixture["speeches"].get(sid, [])
        ]
    else:
        raise StageError("validation.gold_path is required for non-mock backends")

    overlays = _service_overlays(paths)
    for rec in overlays["extra_gold"]:
        if rec["speech_id"] in sample_ids:
            gold.append(GoldRecord.from_record(rec))

    ai_mentions = [
        m for _mid, m in _load_mentions(paths) if m.speech_id in sample_ids
    ]
    matchset = align(
        ai_mentions,
        gold,
        threshold=cfg.fuzzy_threshold,
        forbidden_pairs=overlays["forbidden_pairs"],
        dropped_gold_ids=overlays["dropped_gold"],
    )

    verifier_settings = cfg.verifier_backend or cfg.backend
    verifier = build_backend(verifier_settings)
    supergold = build_supergold(matchset, verifier, speeches_by_id, retry=_retry(cfg))
    supergold = confirm_supergold(supergold, auto=cfg.validation.auto_confirm)
    for record in supergold:
        if record.supergold_id in overlays["supergold_confirm"]:
            record.confirmed = overlays["supergold_confirm"][record.supergold_id]

    metrics = compute_metrics(matchset, supergold, threshold=cfg.fuzzy_threshold)

    if cfg.validation.truth_path:
        truth_per_speech = json.loads(Path(cfg.validation.truth_path).read_text(encoding="utf-8"))
        truth = {}
        for sid, rows in truth_per_speech.items():
            if sid not in sample_ids:
                continue
            for k, row in enumerate(rows):
                truth[f"{sid}:{k:03d}"] = row.get("party", "")
        if Path(paths.resolved).exists() and truth:
            resolved = [
                ResolvedReference.from_record(rec)
                for rec in load_jsonl(paths.resolved)
                if rec["speech_id"] in sample_ids
            ]
            p, r, f1 = entity_stage_metrics(resolved, truth)
            metrics.entity_precision = p
            metrics.entity_recall = r
            metrics.entity_f1 = f1

    Path(paths.matchset).write_text(
        canonical_json(matchset.to_record()) + "\n", encoding="utf-8"
    )
    dump_jsonl(paths.supergold, (r.to_record() for r in supergold))
    dump_jsonl(paths.gold_out, (g.to_record() for g in gold))
    Path(paths.validation_json).write_text(
        json.dumps(metrics.to_record(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    Path(paths.validation_txt).write_text(
        metrics.to_table(backend=cfg.backend.id, country=cfg.country) + "\n",
        encoding="utf-8",
    )
    return {"stage": "validate", "sampled": len(sample), **metrics.to_record()}


def stage_export(cfg: PipelineConfig, out: str | None = None) -> dict:
    paths = RunPaths(cfg.workdir)
    if not Path(paths.eps_records).exists():
        raise StageError("no computed series; run index first")
    records = read_records_jsonl(paths.eps_records)
    outdir = Path(out) if out else Path(cfg.workdir)
    export_series_csv(records, outdir / "eps_series.csv")
    export_series_json(records, outdir / "eps_series.json")
    return {"stage": "export", "records": len(records), "outdir": str(outdir)}


def write_run_manifest(cfg: PipelineConfig) -> Path:
    paths = RunPaths(cfg.workdir)
    inputs = {}
    for name in ("corpus_manifest", "corpus_path", "registry_path", "vocatives_path",
                 "prompt_template_path"):
        value = getattr(cfg, name)
        if value and Path(value).exists():
            inputs[name] = sha256_file(value)
    if cfg.backend.fixture and Path(cfg.backend.fixture).exists():
        inputs["backend_fixture"] = sha256_file(cfg.backend.fixture)

    artifacts = {}
    for name in RunPaths.DIGEST_ARTIFACTS:
        p = getattr(paths, name)
        if p.exists():
            artifacts[p.name] = sha256_file(p)

    manifest = {
        "version": __version__,
        "config_digest": sha256_text(canonical_json(cfg.to_dict())),
        "inputs": inputs,
        "artifacts": artifacts,
    }
    paths.run_manifest.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return paths.run_manifest


STAGES = {
    "ingest": stage_ingest,
    "extract": stage_extract,
    "parse": stage_parse,
    "resolve": stage_resolve,
    "index": stage_index,
    "validate": stage_validate,
}


def run_all(cfg: PipelineConfig) -> dict:
    results = {}
    for name in ("ingest", "extract", "parse", "resolve", "index", "validate"):
        log.info("running stage %s", name)
        results[name] = STAGES[name](cfg)
    results["export"] = stage_export(cfg)
    write_run_manifest(cfg)
    return results


class WorkdirLock:
    """One pipeline run per working directory."""

    def __init__(self, workdir: str | Path):
        self.path = RunPaths(workdir).lock

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if self.path.exists():
            try:
                pid = int(self.path.read_text().strip())
                os.kill(pid, 0)
            except (ValueError, ProcessLookupError):
                pass  # stale lock
            else:
                raise StageError(f"workdir locked by running pid {pid}")
        self.path.write_text(str(os.getpid()), encoding="utf-8")
        return self

    def __exit__(self, *exc):
        try:
            self.path.unlink()
        except FileNotFoundError:
            pass
        return False
