"""Prompt construction and LLM backend access.

Two backend implementations share one interface: an HTTP chat-completion
client for real models, and a deterministic mock that replays planted
annotations from a fixture store and serves as the test oracle for the whole
pipeline.  Batch submission runs a bounded worker pool with retry/backoff
and an append-only journal that makes interrupted runs resumable.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import random
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Speech
from .jsonio import append_jsonl, load_jsonl, sha256_text
from .resolution import fold, fuzzy_match

log = logging.getLogger("parlpol.gateway")

RESPONSE_COLUMNS = ("actor", "context", "rationale", "sentiment")

FORMAT_REMINDER = (
    "Reminder: respond with only a CSV table using the header "
    "actor,context,rationale,sentiment and no surrounding prose."
)

COUNTRY_NAMES = {
    "AT": "Austria", "BE": "Belgium", "BG": "Bulgaria", "CH": "Switzerland",
    "CZ": "the Czech Republic", "DE": "Germany", "DK": "Denmark", "EE": "Estonia",
    "ES": "Spain", "FI": "Finland", "FR": "France", "GB": "the United Kingdom",
    "GR": "Greece", "HR": "Croatia", "HU": "Hungary", "IE": "Ireland",
    "IT": "Italy", "LT": "Lithuania", "LV": "Latvia", "NL": "the Netherlands",
    "NO": "Norway", "PL": "Poland", "PT": "Portugal", "RO": "Romania",
    "SE": "Sweden", "SI": "Slovenia", "SK": "Slovakia",
    "UK": "the United Kingdom", "US": "the United States",
}

REQUIRED_PROMPT_MARKERS = (
    "Identification of Political Actors",
    "Detailed Analysis of References",
    "Analysis of Sentiment",
    "scale from –5",
)


class BackendError(Exception):
    """Permanent backend failure for one request."""


class TransientBackendError(BackendError):
    """Retryable failure: timeout, rate limit, or server error."""


class AuthError(BackendError):
    """Credential problem; aborts the whole batch."""


class PromptError(ValueError):
    """Template cannot be rendered."""


@dataclass
class PromptTemplate:
    text: str
    version: str = "v1"

    @classmethod
    def load(cls, path: str | Path, version: str | None = None) -> "PromptTemplate":
        path = Path(path)
        return cls(text=path.read_text(encoding="utf-8"), version=version or path.stem)

    @classmethod
    def packaged(cls) -> "PromptTemplate":
        from importlib.resources import files

        res = files("parlpol").joinpath("data/extraction_prompt_v1.txt")
        return cls(text=res.read_text(encoding="utf-8"), version="extraction_prompt_v1")


def render_prompt(
    template: PromptTemplate,
    country: str,
    year_start: int,
    year_end: int,
    country_name: str | None = None,
) -> str:
    """Substitute country name and year range into the extraction prompt.

    Byte-stable for identical inputs; fails loudly when a placeholder is
    missing from the template or the country code is unknown.
    """
    for placeholder in ("{country}", "{year_range}"):
        if placeholder not in template.text:
            raise PromptError(f"template {template.version} lacks placeholder {placeholder}")
    name = country_name or COUNTRY_NAMES.get(country.upper())
    if not name:
        raise PromptError(f"no country name known for code {country!r}; set country_name")
    year_range = f"{year_start}–{year_end}" if year_start != year_end else str(year_start)
    rendered = template.text.replace("{country}", name).replace("{year_range}", year_range)
    missing = [m for m in REQUIRED_PROMPT_MARKERS if m not in rendered]
    if missing:
        raise PromptError(f"rendered prompt lacks required sections: {missing}")
    return rendered


@dataclass
class RawResponse:
    speech_id: str
    body: str
    backend_id: str
    status: str  # "ok" | "failed"
    attempts: int
    latency_ms: float = 0.0
    timestamp: float = 0.0


@dataclass
class RetryPolicy:
    max_attempts: int = 5
    base_delay: float = 0.25
    max_delay: float = 8.0
    jitter: float = 0.25

    def delay(self, attempt: int, rng: random.Random) -> float:
        raw = min(self.base_delay * (2 ** (attempt - 1)), self.max_delay)
        return raw * (1.0 + self.jitter * rng.random())


# -- deterministic mock backend ----------------------------------------------


def _bucket(tag: str) -> float:
    """Map a tag to a stable value in [0, 1) for fraction-based switching."""
    digest = hashlib.sha256(tag.encode("utf-8")).hexdigest()
    return (int(digest[:8], 16) % 10_000) / 10_000


class MockBackend:
    """Replays planted annotations; pure function of (prompt, speech).

    A configurable fraction of responses comes back as plain prose instead of
    a CSV table, and a fraction of rows carries an out-of-range sentiment,
    to exercise the fallback paths.  When the prompt carries the format
    reminder the response is always a clean table, so reprocessing recovers
    every planted row.
    """

    def __init__(
        self,
        fixture_path: str | Path,
        backend_id: str = "mock",
        prose_fraction: float = 0.0,
        corrupt_fraction: float = 0.0,
        wrap_fraction: float = 0.25,
    ):
        data = json.loads(Path(fixture_path).read_text(encoding="utf-8"))
        self.backend_id = backend_id
        self.speeches: dict[str, list[dict]] = data.get("speeches", {})
        self.classes: dict[str, dict] = data.get("classes", {})
        self.prose_fraction = prose_fraction
        self.corrupt_fraction = corrupt_fraction
        self.wrap_fraction = wrap_fraction

    def _rows(self, speech_id: str, corrupt: bool) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(RESPONSE_COLUMNS)
        for i, row in enumerate(self.speeches.get(speech_id, [])):
            sentiment = row["sentiment"]
            if corrupt and _bucket(f"beyond:{speech_id}:{i}") < self.corrupt_fraction:
                sentiment = 7
            writer.writerow([row["actor"], row["context"], row["rationale"], sentiment])
        return buf.getvalue().rstrip("\n")

    def extract(self, prompt: str, speech: Speech) -> str:
        sid = speech.speech_id
        if FORMAT_REMINDER in prompt:
            return self._rows(sid, corrupt=False)
        if _bucket(f"prose:{sid}") < self.prose_fraction:
            rows = self.speeches.get(sid, [])
            parts = [
                "Here is my analysis of the speech as requested.",
            ]
            for row in rows:
                parts.append(
                    f"The speaker refers to {row['actor']} with an overall attitude "
                    f"of {row['sentiment']} on the scale. {row['rationale']}"
                )
            if not rows:
                parts.append("No political actors are mentioned in this speech.")
            return " ".join(parts)
        table = self._rows(sid, corrupt=True)
        if _bucket(f"wrap:{sid}") < self.wrap_fraction:
            return (
                "Here is the analysis you requested:\n\n```csv\n"
                + table
                + "\n```\nLet me know if anything needs refining."
            )
        return table

    def verify(self, actor: str, speech: Speech) -> tuple[bool, str]:
        planted = self.speeches.get(speech.speech_id, [])
        for row in planted:
            if fold(row["actor"]) == fold(actor) or fuzzy_match(row["actor"], actor) >= 0.85:
                return True, f"{actor} is referenced: {row['context']}"
        return False, f"No reference to {actor} found in the speech."

    def classify(self, alias: str, country: str) -> tuple[str, str]:
        info = self.classes.get(fold(alias))
        if info is None:
            return "unresolved", "No classification available."
        return info["entity_class"], info.get("rationale", "")


# -- HTTP chat-completion backend --------------------------------------------


CLASSIFY_PROMPT = (
    "Classify the political actor {alias!r}, mentioned in a parliamentary speech "
    "in {country}, into exactly one category: party_or_member, government, "
    "institution, foreign_institution, or discard (not a political actor). "
    "Answer with the category name on the first line, then a one-sentence rationale."
)

VERIFY_PROMPT = (
    "Does the following parliamentary speech refer to the political actor "
    "{alias!r}? Answer yes or no on the first line, then a one-sentence "
    "rationale.\n\n{text}"
)


class HttpChatBackend:
    """Chat-completion client; endpoint, model, and key come from config/env."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        backend_id: str | None = None,
        api_key_env: str = "PARLPOL_API_KEY",
        timeout: float = 120.0,
        temperature: float = 0.0,
    ):
        import os

        self.endpoint = endpoint
        self.model = model
        self.backend_id = backend_id or model
        self.timeout = timeout
        self.temperature = temperature
        self.api_key = os.environ.get(api_key_env, "")
        if not self.api_key:
            raise AuthError(f"environment variable {api_key_env} is not set")

    def _chat(self, content: str) -> str:
        import httpx

        payload = {
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{"role": "user", "content": content}],
        }
        headers = {"Authorization": f"Bearer {self.api_key}"}
        try:
            resp = httpx.post(self.endpoint, json=payload, headers=headers, timeout=self.timeout)
        except httpx.TimeoutException as exc:
            raise TransientBackendError(f"timeout: {exc}") from exc
        except httpx.TransportError as exc:
            raise TransientBackendError(f"transport error: {exc}") from exc
        if resp.status_code in (401, 403):
            raise AuthError(f"authentication failed: HTTP {resp.status_code}")
        if resp.status_code == 429 or resp.status_code >= 500 or resp.status_code == 408:
            raise TransientBackendError(f"HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise BackendError(f"HTTP {resp.status_code}: {resp.text[:500]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise BackendError(f"malformed completion payload: {exc}") from exc

    def extract(self, prompt: str, speech: Speech) -> str:
        return self._chat(f"{prompt}\n\n{speech.text}")

    def verify(self, actor: str, speech: Speech) -> tuple[bool, str]:
        body = self._chat(VERIFY_PROMPT.format(alias=actor, text=speech.text))
        first = body.strip().splitlines()[0].strip().lower() if body.strip() else ""
        return first.startswith("yes"), body.strip()

    def classify(self, alias: str, country: str) -> tuple[str, str]:
        body = self._chat(CLASSIFY_PROMPT.format(alias=alias, country=country))
        lines = [ln.strip() for ln in body.strip().splitlines() if ln.strip()]
        label = lines[0].lower().replace(" ", "_") if lines else ""
        valid = {"party_or_member", "government", "institution", "foreign_institution", "discard"}
        if label not in valid:
            raise BackendError(f"unusable classification answer: {body[:200]}")
        return label, " ".join(lines[1:])


# -- batch submission ---------------------------------------------------------


def _call_with_retry(fn, policy: RetryPolicy, rng: random.Random) -> tuple[object, int]:
    attempt = 0
    while True:
        attempt += 1
        try:
            return fn(), attempt
        except TransientBackendError:
            if attempt >= policy.max_attempts:
                raise
            time.sleep(policy.delay(attempt, rng))


def read_journal(journal_path: str | Path) -> dict[str, dict]:
    """Last terminal journal entry per speech_id."""
    done: dict[str, dict] = {}
    path = Path(journal_path)
    if not path.exists():
        return done
    for rec in load_jsonl(path):
        if rec.get("status") in ("ok", "failed"):
            done[rec["speech_id"]] = rec
    return done


def submit_batch(
    speeches: list[Speech],
    backend,
    prompt: str,
    journal_path: str | Path,
    responses_path: str | Path,
    max_in_flight: int = 4,
    retry: RetryPolicy | None = None,
    truncate_chars: int = 60_000,
) -> list[RawResponse]:
    """Submit speeches to the backend; returns responses produced this run.

    Excluded speeches are skipped; speeches already terminal in the journal
    are never re-submitted.  The journal and the response store are written
    by this coordinator only, one flushed line per completed speech.
    """
    retry = retry or RetryPolicy()
    done = read_journal(journal_path)
    pending: list[Speech] = []
    seen: set[str] = set()
    for s in speeches:
        if s.excluded or s.speech_id in done or s.speech_id in seen:
            continue
        seen.add(s.speech_id)
        pending.append(s)

    results: list[RawResponse] = []
    if not pending:
        return results

    def work(speech: Speech) -> RawResponse:
        text = speech.text
        truncated = False
        if len(text) > truncate_chars:
            log.warning("speech %s truncated to %d chars", speech.speech_id, truncate_chars)
            text = text[:truncate_chars]
            truncated = True
            speech = Speech(**{**speech.to_record(), "text": text})
        rng = random.Random(speech.speech_id)
        start = time.monotonic()
        try:
            body, attempts = _call_with_retry(
                lambda: backend.extract(prompt, speech), retry, rng
            )
            status = "ok"
        except AuthError:
            raise
        except BackendError as exc:
            body, attempts, status = f"backend failure: {exc}", retry.max_attempts, "failed"
        latency = (time.monotonic() - start) * 1000
        resp = RawResponse(
            speech_id=speech.speech_id,
            body=str(body),
            backend_id=backend.backend_id,
            status=status,
            attempts=attempts,
            latency_ms=latency,
            timestamp=time.time(),
        )
        resp._truncated = truncated  # type: ignore[attr-defined]
        return resp

    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        futures = {pool.submit(work, s): s for s in pending}
        try:
            for fut in as_completed(futures):
                resp = fut.result()  # AuthError propagates and aborts
                # response body first, journal second: a crash in between
                # resubmits the speech instead of losing the body, and the
                # parser deduplicates by last entry per speech_id
                append_jsonl(
                    responses_path,
                    {
                        "speech_id": resp.speech_id,
                        "status": resp.status,
                        "attempts": resp.attempts,
                        "body": resp.body,
                        "backend": resp.backend_id,
                    },
                )
                append_jsonl(
                    journal_path,
                    {
                        "speech_id": resp.speech_id,
                        "status": resp.status,
                        "attempts": resp.attempts,
                        "digest": sha256_text(resp.body),
                        "backend": resp.backend_id,
                        "temperature": getattr(backend, "temperature", 0.0),
                        "truncated": getattr(resp, "_truncated", False),
                        "latency_ms": round(resp.latency_ms, 3),
                        "ts": resp.timestamp,
                    },
                )
                results.append(resp)
        except AuthError:
            for f in futures:
                f.cancel()
            raise
    return results


def extract_once(backend, prompt: str, speech: Speech,
                 retry: RetryPolicy | None = None) -> str:
    """One extraction round trip with the standard retry discipline."""
    retry = retry or RetryPolicy()
    rng = random.Random(f"once:{speech.speech_id}")
    body, _attempts = _call_with_retry(lambda: backend.extract(prompt, speech), retry, rng)
    return str(body)


def verify_mention(
    actor: str,
    speech: Speech,
    backend,
    retry: RetryPolicy | None = None,
) -> dict:
    """Ask the backend whether the actor is referenced in the speech.

    Exhausted retries yield verified=None so the record can be routed to
    human review instead of being silently decided.
    """
    if not actor:
        raise ValueError("actor must be non-empty")
    retry = retry or RetryPolicy()
    rng = random.Random(f"verify:{speech.speech_id}:{actor}")
    try:
        (affirmed, rationale), attempts = _call_with_retry(
            lambda: backend.verify(actor, speech), retry, rng
        )
        verified: bool | None = bool(affirmed)
    except AuthError:
        raise
    except BackendError as exc:
        verified, rationale, attempts = None, f"backend failure: {exc}", retry.max_attempts
    return {
        "actor": actor,
        "speech_id": speech.speech_id,
        "verified": verified,
        "rationale": rationale,
        "backend": backend.backend_id,
        "attempts": attempts,
    }
