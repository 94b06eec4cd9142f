"""Speech corpus ingestion and the procedural-address pre-filter.

Heterogeneous source corpora (ParlSpeech-style CSV, ParlaMint-derived JSONL
exports) are normalized into a single line-delimited speech store described
by a manifest sidecar.  Malformed source records go to a reject log instead
of aborting the run.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import re
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Iterator, TextIO

from .jsonio import dump_jsonl, load_jsonl

REQUIRED_FIELDS = ("speech_id", "date", "speaker_name", "speaker_party", "text")

_COUNTRY_RE = re.compile(r"^[A-Z]{2}$")
_SENTENCE_END_RE = re.compile(r"[.!?](?=\s)")


class ManifestError(ValueError):
    """Raised when a corpus manifest is structurally invalid."""


@dataclass
class Speech:
    speech_id: str
    country: str
    date: str  # ISO YYYY-MM-DD
    speaker_name: str
    speaker_party: str  # canonical party id, "" when unknown
    text: str
    source: str
    chamber: str | None = None
    address_stripped: bool = False
    excluded: bool = False

    def to_record(self) -> dict:
        return asdict(self)

    @classmethod
    def from_record(cls, rec: dict) -> "Speech":
        return cls(**rec)


@dataclass
class CorpusManifest:
    """Declares where a corpus lives and how its columns map onto Speech."""

    name: str
    country: str
    year_start: int
    year_end: int
    format: str  # "csv" | "jsonl"
    mapping: dict[str, str]
    expected_count: int | None = None
    # optional include filter: column -> list of accepted values
    include_when: dict[str, list[str]] = field(default_factory=dict)

    def validate(self) -> None:
        if not _COUNTRY_RE.match(self.country):
            raise ManifestError(f"country must be ISO-3166 alpha-2, got {self.country!r}")
        if self.year_end < self.year_start:
            raise ManifestError("year range is empty")
        if self.format not in ("csv", "jsonl"):
            raise ManifestError(f"unsupported format {self.format!r}")
        missing = [f for f in REQUIRED_FIELDS if f not in self.mapping]
        if missing:
            raise ManifestError(f"mapping lacks required fields: {', '.join(missing)}")

    @classmethod
    def load(cls, path: str | Path) -> "CorpusManifest":
        path = Path(path)
        raw = path.read_text(encoding="utf-8")
        if path.suffix == ".toml":
            try:
                import tomllib  # type: ignore[import-not-found]
            except ModuleNotFoundError:
                import tomli as tomllib  # type: ignore[no-redef]
            data = tomllib.loads(raw)
        else:
            data = json.loads(raw)
        manifest = cls(
            name=data["name"],
            country=data["country"],
            year_start=int(data["year_start"]),
            year_end=int(data["year_end"]),
            format=data["format"],
            mapping=dict(data["mapping"]),
            expected_count=data.get("expected_count"),
            include_when={k: list(v) for k, v in data.get("include_when", {}).items()},
        )
        manifest.validate()
        return manifest


@dataclass
class IngestResult:
    speeches: list[Speech]
    rejects: list[dict]

    @property
    def counts(self) -> dict:
        return {"accepted": len(self.speeches), "rejected": len(self.rejects)}


def _parse_date(value: str) -> dt.date:
    value = value.strip()
    for fmt in ("%Y-%m-%d", "%Y/%m/%d", "%d.%m.%Y"):
        try:
            return dt.datetime.strptime(value, fmt).date()
        except ValueError:
            continue
    raise ValueError(f"unparseable date {value!r}")


def _iter_raw_records(manifest: CorpusManifest, stream: TextIO) -> Iterator[tuple[int, dict]]:
    if manifest.format == "csv":
        reader = csv.DictReader(stream)
        for i, row in enumerate(reader, start=2):  # header is line 1
            yield i, {k: (v if v is not None else "") for k, v in row.items()}
    else:
        for i, line in enumerate(stream, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield i, json.loads(line)
            except json.JSONDecodeError:
                yield i, {"__parse_error__": line}


def ingest(manifest: CorpusManifest, stream: TextIO) -> IngestResult:
    """Normalize a raw corpus stream into Speech records plus a reject list.

    Every input record lands either in ``speeches`` or in ``rejects`` with a
    line number and reason; nothing is dropped silently.
    """
    manifest.validate()
    speeches: list[Speech] = []
    rejects: list[dict] = []
    seen_ids: set[str] = set()

    def reject(line: int, reason: str, record: dict | None = None) -> None:
        rejects.append({"line": line, "reason": reason, "record": record or {}})

    for line_no, raw in _iter_raw_records(manifest, stream):
        if "__parse_error__" in raw:
            reject(line_no, "unparseable-record")
            continue
        if manifest.include_when:
            skip = False
            for col, allowed in manifest.include_when.items():
                if str(raw.get(col, "")) not in allowed:
                    skip = True
                    break
            if skip:
                reject(line_no, "filtered-out", {"speech_id": str(raw.get(manifest.mapping["speech_id"], ""))})
                continue
        try:
            fields = {name: str(raw.get(col, "") or "") for name, col in manifest.mapping.items()}
        except Exception:
            reject(line_no, "bad-mapping")
            continue

        speech_id = fields.get("speech_id", "").strip()
        if not speech_id:
            reject(line_no, "missing-speech-id")
            continue
        if speech_id in seen_ids:
            reject(line_no, "duplicate-speech-id", {"speech_id": speech_id})
            continue
        try:
            date = _parse_date(fields["date"])
        except ValueError:
            reject(line_no, "bad-date", {"speech_id": speech_id})
            continue
        if not (manifest.year_start <= date.year <= manifest.year_end):
            reject(line_no, "date-out-of-range", {"speech_id": speech_id, "date": date.isoformat()})
            continue
        text = fields["text"].replace("\r\n", "\n").strip()
        if not text:
            reject(line_no, "empty-text", {"speech_id": speech_id})
            continue

        seen_ids.add(speech_id)
        speeches.append(
            Speech(
                speech_id=speech_id,
                country=manifest.country,
                date=date.isoformat(),
                speaker_name=fields["speaker_name"].strip(),
                speaker_party=fields["speaker_party"].strip(),
                text=text,
                source=manifest.name,
                chamber=fields.get("chamber", "").strip() or None,
            )
        )
    return IngestResult(speeches=speeches, rejects=rejects)


def ingest_file(manifest: CorpusManifest, path: str | Path) -> IngestResult:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return ingest(manifest, fh)


# -- procedural address stripping -------------------------------------------


def load_vocative_patterns(path: str | Path) -> dict[str, list[re.Pattern]]:
    """Load per-country vocative patterns from a JSON file.

    The file maps a lowercase country code to a list of regexes; a pattern
    strips a leading sentence only when it matches that whole sentence.
    """
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    compiled: dict[str, list[re.Pattern]] = {}
    for country, patterns in data.items():
        compiled[country.lower()] = [re.compile(p, re.IGNORECASE) for p in patterns]
    return compiled


def default_vocative_patterns() -> dict[str, list[re.Pattern]]:
    from importlib.resources import files

    return load_vocative_patterns(str(files("parlpol").joinpath("data/vocatives.json")))


def _split_first_sentence(text: str) -> tuple[str, str]:
    """Split at the first terminal punctuation followed by whitespace."""
    m = _SENTENCE_END_RE.search(text)
    if m is None:
        return text, ""
    cut = m.end()
    return text[:cut], text[cut:]


def strip_address(speech: Speech, patterns: dict[str, list[re.Pattern]]) -> Speech:
    """Remove leading vocative sentences ("Dear colleagues!") from a speech.

    Runs until the first remaining sentence is substantive, which makes the
    operation idempotent.  Speeches reduced to nothing are flagged excluded.
    """
    country_patterns = patterns.get(speech.country.lower(), [])
    if not country_patterns:
        return speech

    text = speech.text
    stripped_any = False
    while text:
        sentence, rest = _split_first_sentence(text)
        candidate = sentence.strip().rstrip(".!?").strip()
        if any(p.fullmatch(candidate) for p in country_patterns):
            stripped_any = True
            text = rest.lstrip()
        else:
            break

    if not stripped_any:
        return speech
    return Speech(
        speech_id=speech.speech_id,
        country=speech.country,
        date=speech.date,
        speaker_name=speech.speaker_name,
        speaker_party=speech.speaker_party,
        text=text,
        source=speech.source,
        chamber=speech.chamber,
        address_stripped=True,
        excluded=not text,
    )


# -- store IO ----------------------------------------------------------------


def write_speech_store(path: str | Path, speeches: Iterable[Speech],
                       manifest: CorpusManifest | None = None) -> int:
    ordered = sorted(speeches, key=lambda s: s.speech_id)
    n = dump_jsonl(path, (s.to_record() for s in ordered))
    if manifest is not None:
        sidecar = Path(str(path) + ".meta.json")
        sidecar.write_text(
            json.dumps(
                {
                    "corpus": manifest.name,
                    "country": manifest.country,
                    "year_start": manifest.year_start,
                    "year_end": manifest.year_end,
                    "records": n,
                },
                indent=2,
                sort_keys=True,
            )
            + "\n",
            encoding="utf-8",
        )
    return n


def read_speech_store(path: str | Path) -> list[Speech]:
    return [Speech.from_record(rec) for rec in load_jsonl(path)]
