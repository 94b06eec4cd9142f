"""Human-in-the-loop quality control for the extraction pipeline.

A random non-consecutive sample of speeches is coded by a human with the
same instructions the model receives.  Machine and human findings are
fuzzy-aligned per speech, disagreements are reconciled into a confirmed
reference file whose union of sources beats either coder alone, and the
calculators derive sensitivity, false-discovery rate, and attitude accuracy
from the aligned sets.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass, field, asdict
from pathlib import Path

from .corpus import Speech
from .gateway import verify_mention
from .parsing import Mention
from .resolution import ResolvedReference, fold, fuzzy_match

DEFAULT_ALIGN_THRESHOLD = 0.85


class ValidationError(ValueError):
    pass


# -- sampling ------------------------------------------------------------------


def sample_speeches(speeches: list[Speech], k: int, seed: int) -> list[Speech]:
    """Draw k speeches, no two adjacent in source order, reproducibly.

    Uses the standard bijection between k-subsets of n-k+1 positions and
    non-adjacent k-subsets of n positions, so the draw is uniform.
    """
    n = len(speeches)
    if k <= 0:
        raise ValidationError("sample size must be positive")
    required = 2 * k - 1
    if n < required:
        raise ValidationError(
            f"store has {n} speeches but sampling {k} non-consecutive texts needs at least {required}"
        )
    rng = random.Random(seed)
    base = sorted(rng.sample(range(n - k + 1), k))
    indices = [c + i for i, c in enumerate(base)]
    return [speeches[i] for i in indices]


# -- gold records --------------------------------------------------------------


@dataclass
class GoldRecord:
    speech_id: str
    coder: str
    actor_surface: str
    sentiment: int

    def to_record(self) -> dict:
        return asdict(self)

    @classmethod
    def from_record(cls, rec: dict) -> "GoldRecord":
        return cls(
            speech_id=rec["speech_id"],
            coder=rec.get("coder", ""),
            actor_surface=rec["actor_surface"],
            sentiment=int(rec["sentiment"]),
        )


def load_gold_csv(path: str | Path) -> list[GoldRecord]:
    records: list[GoldRecord] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            sentiment = int(row["sentiment"])
            if not (-5 <= sentiment <= 5):
                raise ValidationError(f"gold sentiment out of range: {row}")
            records.append(
                GoldRecord(
                    speech_id=row["speech_id"],
                    coder=row.get("coder", ""),
                    actor_surface=row["actor"],
                    sentiment=sentiment,
                )
            )
    return records


# -- alignment -----------------------------------------------------------------


@dataclass
class MatchTriple:
    match_id: str
    speech_id: str
    ai: dict | None = None
    gold: dict | None = None
    supergold_id: str | None = None
    score: float | None = None
    duplicate_gold: bool = False

    def to_record(self) -> dict:
        return asdict(self)

    @classmethod
    def from_record(cls, rec: dict) -> "MatchTriple":
        return cls(**rec)


@dataclass
class MatchSet:
    triples: list[MatchTriple] = field(default_factory=list)
    threshold: float = DEFAULT_ALIGN_THRESHOLD

    def by_speech(self) -> dict[str, list[MatchTriple]]:
        grouped: dict[str, list[MatchTriple]] = {}
        for t in self.triples:
            grouped.setdefault(t.speech_id, []).append(t)
        return grouped

    def to_record(self) -> dict:
        return {
            "threshold": self.threshold,
            "triples": [t.to_record() for t in self.triples],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "MatchSet":
        return cls(
            triples=[MatchTriple.from_record(t) for t in rec["triples"]],
            threshold=rec.get("threshold", DEFAULT_ALIGN_THRESHOLD),
        )


def _ai_payload(index: int, m: Mention) -> dict:
    return {
        "ai_id": f"ai{index}",
        "actor_surface": m.actor_surface,
        "sentiment": m.sentiment,
    }

def _gold_payload(index: int, g: GoldRecord) -> dict:
    return {
        "gold_id": f"g{index}",
        "actor_surface": g.actor_surface,
        "sentiment": g.sentiment,
        "coder": g.coder,
    }


def align(
    ai_mentions: list[Mention],
    gold_records: list[GoldRecord],
    threshold: float = DEFAULT_ALIGN_THRESHOLD,
    forbidden_pairs: set[tuple[str, str]] | None = None,
    dropped_gold_ids: set[str] | None = None,
) -> MatchSet:
    """Greedy best-score matching of AI and human findings per speech.

    Unmatched findings stay as singletons; duplicate human rows for the same
    actor are flagged so the manual-correction pass can merge them.  The
    ``forbidden_pairs`` and ``dropped_gold_ids`` overlays replay human
    corrections deterministically on a fresh alignment.
    """
    forbidden = forbidden_pairs or set()
    dropped = dropped_gold_ids or set()

    ai_items = [ _ai_payload(i, m) | {"speech_id": m.speech_id} for i, m in enumerate(ai_mentions) ]
    gold_items = [
        _gold_payload(i, g) | {"speech_id": g.speech_id}
        for i, g in enumerate(gold_records)
    ]
    gold_items = [g for g in gold_items if g["gold_id"] not in dropped]

    speech_ids = sorted(
        {x["speech_id"] for x in ai_items} | {x["speech_id"] for x in gold_items}
    )
    ai_by_speech: dict[str, list[dict]] = {}
    for item in ai_items:
        ai_by_speech.setdefault(item["speech_id"], []).append(item)
    gold_by_speech: dict[str, list[dict]] = {}
    for item in gold_items:
        gold_by_speech.setdefault(item["speech_id"], []).append(item)

    triples: list[MatchTriple] = []
    seq = 0
    for speech_id in speech_ids:
        ais = ai_by_speech.get(speech_id, [])
        golds = gold_by_speech.get(speech_id, [])

        duplicate_ids: set[str] = set()
        seen_folds: dict[str, str] = {}
        for g in golds:
            f = fold(g["actor_surface"])
            if f in seen_folds:
                duplicate_ids.add(g["gold_id"])
                duplicate_ids.add(seen_folds[f])
            else:
                seen_folds[f] = g["gold_id"]

        scored = []
        for a in ais:
            for g in golds:
                if (a["ai_id"], g["gold_id"]) in forbidden:
                    continue
                s = fuzzy_match(a["actor_surface"], g["actor_surface"])
                if s >= threshold:
                    scored.append((s, a["ai_id"], g["gold_id"], a, g))
        scored.sort(key=lambda x: (-x[0], x[1], x[2]))

        used_ai: set[str] = set()
        used_gold: set[str] = set()
        for s, ai_id, gold_id, a, g in scored:
            if ai_id in used_ai or gold_id in used_gold:
                continue
            used_ai.add(ai_id)
            used_gold.add(gold_id)
            triples.append(
                MatchTriple(
                    match_id=f"m{seq}",
                    speech_id=speech_id,
                    ai={k: v for k, v in a.items() if k != "speech_id"},
                    gold={k: v for k, v in g.items() if k != "speech_id"},
                    score=s,
                    duplicate_gold=gold_id in duplicate_ids,
                )
            )
            seq += 1
        for a in ais:
            if a["ai_id"] not in used_ai:
                triples.append(
                    MatchTriple(
                        match_id=f"m{seq}",
                        speech_id=speech_id,
                        ai={k: v for k, v in a.items() if k != "speech_id"},
                    )
                )
                seq += 1
        for g in golds:
            if g["gold_id"] not in used_gold:
                triples.append(
                    MatchTriple(
                        match_id=f"m{seq}",
                        speech_id=speech_id,
                        gold={k: v for k, v in g.items() if k != "speech_id"},
                        duplicate_gold=g["gold_id"] in duplicate_ids,
                    )
                )
                seq += 1

    return MatchSet(triples=triples, threshold=threshold)


# -- supergold -----------------------------------------------------------------


@dataclass
class SupergoldRecord:
    supergold_id: str
    speech_id: str
    actor_surface: str
    provenance: str  # human-only | ai-verified | both
    confirmed: bool = False
    verifier: str = ""  # affirmed | rejected | indeterminate | "" (not needed)
    rationale: str = ""

    def to_record(self) -> dict:
        return asdict(self)

    @classmethod
    def from_record(cls, rec: dict) -> "SupergoldRecord":
        return cls(**rec)


def build_supergold(
    matchset: MatchSet,
    verifier_backend,
    speeches_by_id: dict[str, Speech],
    retry=None,
) -> list[SupergoldRecord]:
    """Reconcile aligned findings into the candidate reference file.

    Human findings are copied directly; machine-only findings survive only
    when a second backend affirms the actor is really referenced, and only
    when no record for that actor exists yet in the speech (the reference
    file holds distinct actor locations, so machine duplicates never inflate
    it).  Every record still needs human confirmation before it counts.
    """
    records: list[SupergoldRecord] = []
    by_speech: dict[str, list[SupergoldRecord]] = {}
    seq = 0

    def add(speech_id: str, actor: str, provenance: str, verifier: str = "",
            rationale: str = "") -> None:
        nonlocal seq
        record = SupergoldRecord(
            supergold_id=f"sg{seq}",
            speech_id=speech_id,
            actor_surface=actor,
            provenance=provenance,
            confirmed=False,
            verifier=verifier,
            rationale=rationale,
        )
        records.append(record)
        by_speech.setdefault(speech_id, []).append(record)
        seq += 1

    for triple in matchset.triples:
        if triple.gold is not None and triple.ai is not None:
            add(triple.speech_id, triple.gold["actor_surface"], "both")
        elif triple.gold is not None:
            add(triple.speech_id, triple.gold["actor_surface"], "human-only")

    for triple in matchset.triples:
        if triple.ai is None or triple.gold is not None:
            continue
        actor = triple.ai["actor_surface"]
        existing = by_speech.get(triple.speech_id, [])
        if any(
            fuzzy_match(actor, r.actor_surface) >= matchset.threshold for r in existing
        ):
            continue  # already located in this speech
        speech = speeches_by_id.get(triple.speech_id)
        if speech is None:
            continue
        result = verify_mention(actor, speech, verifier_backend, retry=retry)
        if result["verified"] is True:
            add(triple.speech_id, actor, "ai-verified", "affirmed", result["rationale"])
        elif result["verified"] is None:
            add(triple.speech_id, actor, "ai-verified", "indeterminate", result["rationale"])
        # rejected machine-only findings never reach the reference file

    return records


def confirm_supergold(records: list[SupergoldRecord], auto: bool = False) -> list[SupergoldRecord]:
    """Apply the final human pass; with auto=True every determinate record
    is confirmed (used for unattended fixture runs)."""
    if not auto:
        return records
    for r in records:
        if r.verifier != "indeterminate":
            r.confirmed = True
    return records


# -- metrics -------------------------------------------------------------------


@dataclass
class ValidationMetrics:
    sensitivity_vs_supergold: float | None
    sensitivity_vs_human: float | None
    fdr: float | None
    mean_abs_diff: float | None
    mean_signed_diff: float | None
    n_supergold: int
    n_gold: int
    n_ai: int
    n_valid_ai: int
    n_matched_pairs: int
    entity_precision: float | None = None
    entity_recall: float | None = None
    entity_f1: float | None = None

    def to_record(self) -> dict:
        return asdict(self)

    def to_table(self, backend: str = "", country: str = "") -> str:
        def pct(v):
            return "N/A" if v is None else f"{v:.1f}"

        def num(v):
            return "N/A" if v is None else f"{v:.2f}"

        header = (
            f"{'Model':<18} {'Country':<8} {'Sens. vs Supergold (%)':<24} "
            f"{'Sens. vs Human (%)':<20} {'Diff vs Human':<14} {'FDR (%)':<8}"
        )
        row = (
            f"{backend:<18} {country:<8} {pct(self.sensitivity_vs_supergold):<24} "
            f"{pct(self.sensitivity_vs_human):<20} {num(self.mean_abs_diff):<14} "
            f"{pct(self.fdr):<8}"
        )
        return header + "\n" + row


def compute_metrics(
    matchset: MatchSet,
    supergold: list[SupergoldRecord],
    threshold: float | None = None,
) -> ValidationMetrics:
    """Score the machine findings against gold and the confirmed reference file.

    A machine finding is valid when it fuzzy-matches a confirmed reference
    record in its speech; duplicates of the same actor all count, which is
    the reading under which machine sensitivity can exceed 100% of human.
    """
    threshold = threshold if threshold is not None else matchset.threshold
    confirmed = [r for r in supergold if r.confirmed]
    if not confirmed:
        raise ValidationError("supergold has no confirmed records")

    sg_by_speech: dict[str, list[SupergoldRecord]] = {}
    for r in confirmed:
        sg_by_speech.setdefault(r.speech_id, []).append(r)

    ai_findings = [(t.speech_id, t.ai) for t in matchset.triples if t.ai is not None]
    gold_findings = [t.gold for t in matchset.triples if t.gold is not None]

    n_valid = 0
    for speech_id, ai in ai_findings:
        candidates = sg_by_speech.get(speech_id, [])
        if any(
            fuzzy_match(ai["actor_surface"], r.actor_surface) >= threshold for r in candidates
        ):
            n_valid += 1

    ai_by_speech: dict[str, list[dict]] = {}
    for speech_id, ai in ai_findings:
        ai_by_speech.setdefault(speech_id, []).append(ai)
    matched_sg = 0
    for r in confirmed:
        candidates = ai_by_speech.get(r.speech_id, [])
        if any(
            fuzzy_match(a["actor_surface"], r.actor_surface) >= threshold for a in candidates
        ):
            matched_sg += 1

    pairs = [
        t for t in matchset.triples if t.ai is not None and t.gold is not None
    ]
    diffs = [t.ai["sentiment"] - t.gold["sentiment"] for t in pairs]

    n_ai = len(ai_findings)
    n_gold = len(gold_findings)
    return ValidationMetrics(
        sensitivity_vs_supergold=100.0 * matched_sg / len(confirmed),
        sensitivity_vs_human=(100.0 * n_valid / n_gold) if n_gold else None,
        fdr=(100.0 * (n_ai - n_valid) / n_ai) if n_ai else None,
        mean_abs_diff=(sum(abs(d) for d in diffs) / len(diffs)) if diffs else None,
        mean_signed_diff=(sum(diffs) / len(diffs)) if diffs else None,
        n_supergold=len(confirmed),
        n_gold=n_gold,
        n_ai=n_ai,
        n_valid_ai=n_valid,
        n_matched_pairs=len(pairs),
    )


def entity_stage_metrics(
    resolved: list[ResolvedReference],
    truth: dict[str, str],
) -> tuple[float, float, float]:
    """Precision/recall/F1 of party canonicalization against labeled truth.

    ``truth`` maps mention_id to the expected party id ("" when the mention
    should not resolve to any party).  A wrong party counts against both
    precision and recall; an unresolved mention with a labeled party counts
    against recall only.
    """
    if not truth:
        raise ValidationError("empty truth fixture")
    tp = fp = fn = 0
    for ref in resolved:
        if ref.mention_id not in truth:
            continue
        expected = truth[ref.mention_id]
        predicted = ref.referred_party
        if predicted:
            if expected and predicted == expected:
                tp += 1
            else:
                fp += 1
                if expected:
                    fn += 1
        else:
            if expected:
                fn += 1
    if tp + fp == 0 or tp + fn == 0:
        raise ValidationError("truth fixture yields no decisions to score")
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1
