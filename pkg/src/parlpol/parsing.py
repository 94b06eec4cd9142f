"""Turn raw model responses into structured mentions.

Models are asked for a CSV table but a consistent share of responses comes
back as prose, with renamed columns, or with unusable sentiment values.
Parsing is total: any response lands either in the mention list or in a
reprocess queue entry, never in an exception.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field, asdict
from typing import Callable, Iterable

SENTIMENT_MIN = -5
SENTIMENT_MAX = 5

REASON_NOT_CSV = "not-csv"
REASON_BAD_COLUMNS = "bad-columns"
REASON_BAD_SENTIMENT = "bad-sentiment"

COLUMN_ALIASES: dict[str, tuple[str, ...]] = {
    "actor": ("actor", "name", "actor_name", "entity", "political_actor", "political_entity"),
    "context": ("context", "context_description", "description", "mention_context", "sections",
                "specific_sections", "context_of_mention"),
    "rationale": ("rationale", "political_rationale", "reason", "justification"),
    "sentiment": ("sentiment", "score", "attitude", "sentiment_score", "evaluation",
                  "emotional_attitude", "attitude_score"),
}

_FENCE_RE = re.compile(r"^```[a-zA-Z0-9]*\s*$")


@dataclass
class Mention:
    speech_id: str
    actor_surface: str
    context_description: str
    political_rationale: str
    sentiment: int
    flags: list[str] = field(default_factory=list)

    def to_record(self) -> dict:
        return asdict(self)

    @classmethod
    def from_record(cls, rec: dict) -> "Mention":
        rec = dict(rec)
        rec.pop("mention_id", None)
        return cls(**rec)


@dataclass
class ReprocessEntry:
    speech_id: str
    raw_body: str
    reason: str  # not-csv | bad-columns | bad-sentiment
    attempts: int = 1
    detail: str = ""

    def to_record(self) -> dict:
        return asdict(self)

    @classmethod
    def from_record(cls, rec: dict) -> "ReprocessEntry":
        return cls(**rec)


@dataclass
class ParseOutcome:
    mentions: list[Mention]
    entries: list[ReprocessEntry]
    disposition: str  # "mentions" | "reprocess" | "empty"
    row_rejects: int = 0


def _normalize_header_cell(cell: str) -> str:
    return re.sub(r"[\s_/-]+", "_", cell.strip().strip('"').lower())


def _resolve_header(cells: list[str]) -> dict[str, int] | None:
    """Map canonical column names to indices; needs actor + sentiment."""
    normalized = [_normalize_header_cell(c) for c in cells]
    columns: dict[str, int] = {}
    for canonical, aliases in COLUMN_ALIASES.items():
        for i, cell in enumerate(normalized):
            if cell in aliases and canonical not in columns:
                columns[canonical] = i
                break
    if "actor" in columns and "sentiment" in columns:
        return columns
    return None


def _strip_fences(body: str) -> list[str]:
    return [line for line in body.split("\n") if not _FENCE_RE.match(line)]


def _parse_csv_line(line: str) -> list[str] | None:
    try:
        rows = list(csv.reader(io.StringIO(line)))
    except csv.Error:
        return None
    if len(rows) != 1:
        return None
    return rows[0]


def _extract_table(lines: list[str]) -> tuple[dict[str, int], list[list[str]]] | str:
    """Locate the longest contiguous CSV block with a recognizable header.

    Returns (columns, rows) on success, or a failure reason. The block is
    parsed with the csv module from the header onward so quoted fields with
    embedded commas and newlines survive.
    """
    candidates: list[tuple[int, dict[str, int], list[list[str]]]] = []
    for i, line in enumerate(lines):
        cells = _parse_csv_line(line)
        if not cells or len(cells) < 2:
            continue
        columns = _resolve_header(cells)
        if columns is None:
            continue
        width = len(cells)
        block_text = "\n".join(lines[i + 1 :])
        rows: list[list[str]] = []
        try:
            for row in csv.reader(io.StringIO(block_text)):
                if len(row) != width:
                    break
                rows.append(row)
        except csv.Error:
            pass
        candidates.append((i, columns, rows))

    if candidates:
        candidates.sort(key=lambda c: (-len(c[2]), c[0]))
        _, columns, rows = candidates[0]
        return columns, rows

    # No usable header. Distinguish a mis-labelled table from plain prose.
    run = 0
    prev_width = 0
    for line in lines:
        cells = _parse_csv_line(line)
        width = len(cells) if cells else 0
        if width >= 3 and width == prev_width:
            run += 1
            if run >= 2:
                return REASON_BAD_COLUMNS
        else:
            run = 1 if width >= 3 else 0
        prev_width = width
    return REASON_NOT_CSV


def _parse_sentiment(raw: str) -> tuple[int | None, bool]:
    """Returns (value, was_rounded); value None when unusable or out of range."""
    text = raw.strip().strip('"').replace("–", "-").replace("−", "-")
    if not text:
        return None, False
    try:
        value = int(text)
        rounded = False
    except ValueError:
        try:
            number = float(text)
        except ValueError:
            return None, False
        if math.isnan(number) or math.isinf(number):
            return None, False
        if number == int(number):
            value, rounded = int(number), False
        else:
            value = int(math.floor(abs(number) + 0.5)) * (1 if number > 0 else -1)
            rounded = True
    if not (SENTIMENT_MIN <= value <= SENTIMENT_MAX):
        return None, rounded
    return value, rounded


def parse_response(speech_id: str, body: str) -> ParseOutcome:
    """Parse one successful response body; never raises on arbitrary text."""
    lines = _strip_fences(body or "")
    table = _extract_table(lines)
    if isinstance(table, str):
        entry = ReprocessEntry(speech_id=speech_id, raw_body=body, reason=table)
        return ParseOutcome(mentions=[], entries=[entry], disposition="reprocess")

    columns, rows = table
    mentions: list[Mention] = []
    entries: list[ReprocessEntry] = []
    for row in rows:
        actor = row[columns["actor"]].strip()
        raw_sentiment = row[columns["sentiment"]]
        if not actor:
            entries.append(
                ReprocessEntry(
                    speech_id=speech_id,
                    raw_body=",".join(row),
                    reason=REASON_BAD_COLUMNS,
                    detail="empty actor cell",
                )
            )
            continue
        sentiment, was_rounded = _parse_sentiment(raw_sentiment)
        if sentiment is None:
            entries.append(
                ReprocessEntry(
                    speech_id=speech_id,
                    raw_body=",".join(row),
                    reason=REASON_BAD_SENTIMENT,
                    detail=f"sentiment {raw_sentiment!r}",
                )
            )
            continue
        mentions.append(
            Mention(
                speech_id=speech_id,
                actor_surface=actor,
                context_description=row[columns["context"]].strip() if "context" in columns else "",
                political_rationale=row[columns["rationale"]].strip() if "rationale" in columns else "",
                sentiment=sentiment,
                flags=["rounded"] if was_rounded else [],
            )
        )

    if mentions:
        disposition = "mentions"
    elif entries:
        disposition = "reprocess"
    else:
        disposition = "empty"
    return ParseOutcome(
        mentions=mentions, entries=entries, disposition=disposition, row_rejects=len(entries)
    )


@dataclass
class ParseReport:
    responses: int = 0
    failed: int = 0
    with_mentions: int = 0
    reprocess_responses: int = 0
    empty: int = 0
    row_rejects: int = 0
    mentions: int = 0

    def check_conservation(self) -> None:
        parsed = self.responses - self.failed
        buckets = self.with_mentions + self.reprocess_responses + self.empty
        if parsed != buckets:
            raise AssertionError(
                f"response conservation broken: {parsed} parsed != {buckets} bucketed"
            )

    def to_record(self) -> dict:
        return asdict(self)


def parse_responses(
    records: Iterable[dict],
) -> tuple[dict[str, list[Mention]], list[ReprocessEntry], ParseReport]:
    """Parse a response store; returns mentions per speech, queue, report.

    The store is append-only, so a crash-resume can leave more than one
    entry per speech; the last one wins.
    """
    report = ParseReport()
    mentions_by_speech: dict[str, list[Mention]] = {}
    queue: list[ReprocessEntry] = []
    last_per_speech: dict[str, dict] = {}
    for rec in records:
        last_per_speech[rec["speech_id"]] = rec
    for rec in sorted(last_per_speech.values(), key=lambda r: r["speech_id"]):
        report.responses += 1
        if rec.get("status") != "ok":
            report.failed += 1
            continue
        outcome = parse_response(rec["speech_id"], rec.get("body", ""))
        report.row_rejects += outcome.row_rejects
        queue.extend(outcome.entries)
        if outcome.disposition == "mentions":
            report.with_mentions += 1
            report.mentions += len(outcome.mentions)
            mentions_by_speech[rec["speech_id"]] = outcome.mentions
        elif outcome.disposition == "reprocess":
            report.reprocess_responses += 1
        else:
            report.empty += 1
    report.check_conservation()
    return mentions_by_speech, queue, report


@dataclass
class ReprocessResult:
    recovered: dict[str, list[Mention]]
    parked: list[ReprocessEntry]
    resubmissions: int = 0


def reprocess(
    entries: list[ReprocessEntry],
    submit_fn: Callable[[str], str],
    cap: int = 3,
) -> ReprocessResult:
    """Resubmit queued speeches until they parse or the attempt cap parks them.

    ``submit_fn(speech_id)`` performs the backend round trip with the format
    reminder appended to the prompt; a successful reparse supersedes every
    queued entry for that speech.
    """
    recovered: dict[str, list[Mention]] = {}
    parked: list[ReprocessEntry] = []
    resubmissions = 0

    # one resubmission per speech per round, keeping the worst attempt count
    # and the latest failure for the parked record
    pending: dict[str, ReprocessEntry] = {}
    for entry in entries:
        current = pending.get(entry.speech_id)
        if current is None or entry.attempts > current.attempts:
            pending[entry.speech_id] = entry

    while pending:
        next_round: dict[str, ReprocessEntry] = {}
        for speech_id in sorted(pending):
            entry = pending[speech_id]
            if entry.attempts >= cap:
                parked.append(
                    ReprocessEntry(
                        speech_id=speech_id,
                        raw_body=entry.raw_body,
                        reason=entry.reason,
                        attempts=entry.attempts,
                        detail="attempt cap reached",
                    )
                )
                continue
            try:
                body = submit_fn(speech_id)
            except Exception:
                next_round[speech_id] = ReprocessEntry(
                    speech_id=speech_id, raw_body=entry.raw_body,
                    reason=entry.reason, attempts=entry.attempts + 1,
                    detail="resubmission failed",
                )
                resubmissions += 1
                continue
            resubmissions += 1
            outcome = parse_response(speech_id, body)
            if not outcome.entries and outcome.disposition in ("mentions", "empty"):
                recovered[speech_id] = outcome.mentions
            else:
                failure = outcome.entries[0] if outcome.entries else None
                next_round[speech_id] = ReprocessEntry(
                    speech_id=speech_id,
                    raw_body=body,
                    reason=failure.reason if failure else REASON_NOT_CSV,
                    attempts=entry.attempts + 1,
                )
        pending = next_round

    return ReprocessResult(recovered=recovered, parked=parked, resubmissions=resubmissions)
