"""Actor classification and canonicalization against a dated alias registry.

Surface forms coming out of the extraction stage ("Orban", "miniszterelnök",
"Prime Minister") are matched against registry entries whose validity spans
make the mapping date-dependent: the same office alias resolves to different
parties in different years.  Unknown aliases fall back to backend-assisted
classification with a review queue for human confirmation.
"""

from __future__ import annotations

import csv
import datetime as dt
import re
import unicodedata
from dataclasses import dataclass, asdict
from difflib import SequenceMatcher
from pathlib import Path

from .parsing import Mention

ENTITY_CLASSES = ("party_or_member", "government", "institution", "foreign_institution")
DEFAULT_FUZZY_THRESHOLD = 0.85

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class RegistryError(ValueError):
    """Raised when a registry file violates its integrity rules."""


def fold(text: str) -> str:
    """Lowercase, strip diacritics, and collapse whitespace."""
    decomposed = unicodedata.normalize("NFKD", text)
    stripped = "".join(c for c in decomposed if not unicodedata.combining(c))
    return " ".join(stripped.casefold().split())


def _tokens(folded: str) -> list[str]:
    return sorted(set(_TOKEN_RE.findall(folded)))


def _pair_ratio(a: str, b: str) -> float:
    # Canonical argument order keeps the ratio symmetric.
    if b < a:
        a, b = b, a
    return SequenceMatcher(None, a, b, autojunk=False).ratio()


def fuzzy_match(a: str, b: str) -> float:
    """Similarity in [0, 1] between two actor surface forms.

    Equal folded strings score exactly 1.0; anything else is capped at 0.99.
    Token sets are greedily paired by character similarity and the pair total
    is normalized by the smaller set, so a bare surname still scores high
    against a full name, while appending unrelated tokens never raises the
    score.
    """
    fa, fb = fold(a), fold(b)
    if fa == fb:
        return 1.0
    ta, tb = _tokens(fa), _tokens(fb)
    if not ta or not tb:
        return 0.0

    candidates = sorted(
        ((_pair_ratio(x, y), min(x, y), max(x, y), x, y) for x in ta for y in tb),
        key=lambda c: (-c[0], c[1], c[2]),
    )
    used_a: set[str] = set()
    used_b: set[str] = set()
    total = 0.0
    pairs = 0
    limit = min(len(ta), len(tb))
    for score, _, _, x, y in candidates:
        if pairs == limit:
            break
        if x in used_a or y in used_b:
            continue
        used_a.add(x)
        used_b.add(y)
        total += score
        pairs += 1
    return min(total / limit, 0.99)


@dataclass(frozen=True)
class RegistryEntry:
    alias: str
    country: str
    entity_class: str
    canonical_entity: str
    party_id: str  # "" when the entry does not resolve to a party
    valid_from: dt.date
    valid_to: dt.date

    @property
    def folded_alias(self) -> str:
        return fold(self.alias)


class Registry:
    """Immutable dated alias table, loaded once per run."""

    def __init__(self, entries: list[RegistryEntry]):
        self._check_overlaps(entries)
        self.entries = entries
        self._by_alias: dict[tuple[str, str], list[RegistryEntry]] = {}
        for e in entries:
            self._by_alias.setdefault((e.folded_alias, e.country), []).append(e)

    @staticmethod
    def _check_overlaps(entries: list[RegistryEntry]) -> None:
        spans: dict[tuple[str, str], list[RegistryEntry]] = {}
        for e in entries:
            if e.valid_from > e.valid_to:
                raise RegistryError(
                    f"entry {e.alias!r}: valid_from {e.valid_from} after valid_to {e.valid_to}"
                )
            if e.entity_class not in ENTITY_CLASSES:
                raise RegistryError(f"entry {e.alias!r}: unknown class {e.entity_class!r}")
            spans.setdefault((e.folded_alias, e.country), []).append(e)
        for (alias, country), group in spans.items():
            group = sorted(group, key=lambda e: e.valid_from)
            for prev, cur in zip(group, group[1:]):
                if cur.valid_from <= prev.valid_to:
                    raise RegistryError(
                        f"overlapping validity spans for alias {alias!r} ({country}): "
                        f"{prev.valid_from}..{prev.valid_to} overlaps {cur.valid_from}..{cur.valid_to}"
                    )

    @classmethod
    def load_csv(cls, path: str | Path) -> "Registry":
        entries: list[RegistryEntry] = []
        with open(path, "r", encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                entries.append(
                    RegistryEntry(
                        alias=row["alias"].strip(),
                        country=row["country"].strip().upper(),
                        entity_class=row["entity_class"].strip(),
                        canonical_entity=row["canonical_entity"].strip(),
                        party_id=(row.get("party_id") or "").strip(),
                        valid_from=dt.date.fromisoformat(row["valid_from"].strip()),
                        valid_to=dt.date.fromisoformat(row["valid_to"].strip()),
                    )
                )
        return cls(entries)

    def lookup(self, alias: str, country: str, date: dt.date) -> RegistryEntry | None:
        """Exact fold-match valid at the given date."""
        for e in self._by_alias.get((fold(alias), country.upper()), []):
            if e.valid_from <= date <= e.valid_to:
                return e
        return None

    def fuzzy_lookup(
        self, alias: str, country: str, date: dt.date, threshold: float
    ) -> tuple[RegistryEntry, float] | None:
        best: tuple[float, str, RegistryEntry] | None = None
        for e in self.entries:
            if e.country != country.upper():
                continue
            if not (e.valid_from <= date <= e.valid_to):
                continue
            score = fuzzy_match(alias, e.alias)
            if score < threshold:
                continue
            key = (score, e.folded_alias)
            if best is None or key > (best[0], best[1]):
                best = (score, e.folded_alias, e)
        if best is None:
            return None
        return best[2], best[0]


@dataclass
class ResolvedReference:
    mention_id: str
    speech_id: str
    actor_surface: str
    context_description: str
    political_rationale: str
    sentiment: int
    date: str
    entity_class: str  # registry class, or "discard"/"unresolved"
    canonical_entity: str
    referring_party: str
    referred_party: str  # "" when the reference does not resolve to a party
    resolution_method: str  # registry-exact | registry-fuzzy | llm-assisted | unresolved
    self_reference: bool

    def to_record(self) -> dict:
        return asdict(self)

    @classmethod
    def from_record(cls, rec: dict) -> "ResolvedReference":
        return cls(**rec)


@dataclass
class ResolutionOutcome:
    resolved: list[ResolvedReference]
    review_queue: list[dict]
    classify_cache: dict[tuple[str, str], tuple[str, str]]
    counts: dict

    def check_conservation(self, mentions_in: int) -> None:
        total = self.counts["resolved"] + self.counts["discarded"] + self.counts["unresolved"]
        if total != mentions_in:
            raise AssertionError(f"mention conservation broken: {total} != {mentions_in}")


def _make_reference(
    mention: Mention,
    mention_id: str,
    date: str,
    referring_party: str,
    entity_class: str,
    canonical: str,
    party: str,
    method: str,
) -> ResolvedReference:
    return ResolvedReference(
        mention_id=mention_id,
        speech_id=mention.speech_id,
        actor_surface=mention.actor_surface,
        context_description=mention.context_description,
        political_rationale=mention.political_rationale,
        sentiment=mention.sentiment,
        date=date,
        entity_class=entity_class,
        canonical_entity=canonical,
        referring_party=referring_party,
        referred_party=party,
        resolution_method=method,
        self_reference=bool(party) and bool(referring_party) and party == referring_party,
    )


def resolve_mention(
    mention: Mention,
    mention_id: str,
    speech_date: str,
    speech_country: str,
    referring_party: str,
    registry: Registry,
    backend=None,
    threshold: float = DEFAULT_FUZZY_THRESHOLD,
    classify_cache: dict[tuple[str, str], tuple[str, str]] | None = None,
) -> tuple[ResolvedReference, dict | None]:
    """Resolve one mention; returns the reference plus an optional review item.

    Resolution order: exact fold-match in the registry, fuzzy match above the
    threshold, then backend classification for unknown aliases.  Backend
    verdicts are cached by (folded alias, country).
    """
    date = dt.date.fromisoformat(speech_date)
    country = speech_country.upper()

    entry = registry.lookup(mention.actor_surface, country, date)
    if entry is not None:
        ref = _make_reference(
            mention, mention_id, speech_date, referring_party,
            entry.entity_class, entry.canonical_entity, entry.party_id, "registry-exact",
        )
        return ref, None

    fuzzy = registry.fuzzy_lookup(mention.actor_surface, country, date, threshold)
    if fuzzy is not None:
        entry, score = fuzzy
        ref = _make_reference(
            mention, mention_id, speech_date, referring_party,
            entry.entity_class, entry.canonical_entity, entry.party_id, "registry-fuzzy",
        )
        return ref, None

    # Unknown alias: ask the backend what kind of actor this is.
    entity_class = "unresolved"
    rationale = ""
    key = (fold(mention.actor_surface), country)
    if classify_cache is not None and key in classify_cache:
        entity_class, rationale = classify_cache[key]
    elif backend is not None:
        try:
            entity_class, rationale = backend.classify(mention.actor_surface, country)
        except Exception:
            entity_class = "unresolved"
        if classify_cache is not None and entity_class != "unresolved":
            classify_cache[key] = (entity_class, rationale)

    if entity_class == "discard":
        ref = _make_reference(
            mention, mention_id, speech_date, referring_party,
            "discard", "", "", "llm-assisted",
        )
        return ref, None

    method = "llm-assisted" if entity_class in ENTITY_CLASSES else "unresolved"
    ref = _make_reference(
        mention, mention_id, speech_date, referring_party,
        entity_class if entity_class in ENTITY_CLASSES else "unresolved",
        "", "", method,
    )
    review = {
        "mention_id": mention_id,
        "speech_id": mention.speech_id,
        "actor_surface": mention.actor_surface,
        "country": country,
        "date": speech_date,
        "suggested_class": entity_class,
        "rationale": rationale,
        "status": "open",
    }
    return ref, review


def resolve_all(
    mentions: list[tuple[str, Mention]],
    speeches_by_id: dict,
    registry: Registry,
    backend=None,
    threshold: float = DEFAULT_FUZZY_THRESHOLD,
    preloaded_cache: dict[tuple[str, str], tuple[str, str]] | None = None,
) -> ResolutionOutcome:
    """Resolve (mention_id, Mention) pairs against the registry.

    Every input mention yields exactly one ResolvedReference; discarded and
    unresolved ones are kept with their class marking so nothing is lost.
    """
    cache: dict[tuple[str, str], tuple[str, str]] = dict(preloaded_cache or {})
    resolved: list[ResolvedReference] = []
    review: list[dict] = []
    counts = {"resolved": 0, "discarded": 0, "unresolved": 0}

    for mention_id, mention in mentions:
        speech = speeches_by_id[mention.speech_id]
        ref, item = resolve_mention(
            mention, mention_id, speech.date, speech.country, speech.speaker_party,
            registry, backend=backend, threshold=threshold, classify_cache=cache,
        )
        resolved.append(ref)
        if item is not None:
            review.append(item)
        if ref.entity_class == "discard":
            counts["discarded"] += 1
        elif ref.resolution_method == "unresolved":
            counts["unresolved"] += 1
        else:
            counts["resolved"] += 1

    return ResolutionOutcome(
        resolved=resolved, review_queue=review, classify_cache=cache, counts=counts
    )
