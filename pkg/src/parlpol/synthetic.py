"""Synthetic parliamentary corpus with planted annotations.

The generator fabricates a small country with four parties, writes a
ParlSpeech-style CSV, an alias registry, a mock-backend fixture keyed by
speech id, and an analytically derived expected polarization series.  The
plant controls every sentiment and every reference share, so the pipeline's
output can be checked cell by cell against the expectation file.

The expected series is computed here with plain float loops, independently
of the index engine.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass, field
from pathlib import Path

PARTIES = ("ALPHA", "BETA", "GAMMA", "DELTA")

LEADERS = {
    "ALPHA": "Anna Kovács",
    "BETA": "Bálint Nagy",
    "GAMMA": "Gábor Szabó",
    "DELTA": "Dóra Tóth",
}

SPEAKERS = {
    "ALPHA": ["Áron Fekete", "Berta Halász", "Csilla Orsós"],
    "BETA": ["Dávid Pintér", "Emese Váradi", "Ferenc Bodnár"],
    "GAMMA": ["Gréta Major", "Henrik Pásztor", "Ilona Vincze"],
    "DELTA": ["János Barta", "Katalin Szűcs", "László Csonka"],
}

VOCATIVES = ["Dear colleagues!", "Dear Madam President!", "Dear Mr Speaker!"]

CRITICAL_TEMPLATES = [
    "It is clear that {actor} has failed this country once again.",
    "The record of {actor} on this matter speaks for itself, and not kindly.",
    "We cannot accept the conduct of {actor} in this affair.",
]
NEUTRAL_TEMPLATES = [
    "The proposal from {actor} is before the house today.",
    "{actor} submitted the amendment in committee.",
    "As {actor} noted earlier, the schedule stands.",
]
POSITIVE_TEMPLATES = [
    "I want to thank {actor} for their constructive work on this bill.",
    "The initiative of {actor} deserves recognition across the aisle.",
]
FILLER = "The committee will reconvene on the matter after the recess."


@dataclass
class SyntheticSpec:
    seed: int = 20240501
    country: str = "XX"
    country_name: str = "Examplia"
    year_start: int = 2021
    year_end: int = 2022
    min_refs_per_dyad: int = 10
    max_refs_per_dyad: int = 14
    self_refs_per_party: int = 3
    mentions_per_speech: int = 2
    min_speeches: int = 620
    empty_speeches: int = 25
    vocative_fraction: float = 0.3
    extra_class_refs_per_quarter: int = 4


@dataclass
class PlantedRef:
    quarter: tuple[int, int]  # (year, q)
    referring: str
    target_party: str  # "" for non-party targets
    entity_class: str
    surface: str
    sentiment: int


def _quarters(spec: SyntheticSpec) -> list[tuple[int, int]]:
    return [(y, q) for y in range(spec.year_start, spec.year_end + 1) for q in (1, 2, 3, 4)]


def _quarter_date(rng: random.Random, year: int, q: int) -> str:
    month = 3 * (q - 1) + rng.randint(1, 3)
    day = rng.randint(1, 28)
    return f"{year:04d}-{month:02d}-{day:02d}"


def pm_party(year: int, spec: SyntheticSpec) -> str:
    """The office alias flips parties at the year boundary."""
    return "ALPHA" if year == spec.year_start else "BETA"


def _party_surfaces(party: str) -> list[str]:
    title = party.title()
    leader = LEADERS[party]
    surname = leader.split()[-1]
    return [
        title,                      # exact fold match on the party alias
        party,                      # upper-case variant, fold-equal
        f"the {title} Party",       # fuzzy against "<Title> Party"
        leader,                     # exact person alias
        surname,                    # fuzzy surname-only reference
    ]


def _sentiment_templates(sentiment: int) -> list[str]:
    if sentiment < 0:
        return CRITICAL_TEMPLATES
    if sentiment > 0:
        return POSITIVE_TEMPLATES
    return NEUTRAL_TEMPLATES


def plant_references(spec: SyntheticSpec, rng: random.Random) -> list[PlantedRef]:
    refs: list[PlantedRef] = []
    for year, q in _quarters(spec):
        for n in PARTIES:
            for m in PARTIES:
                if n == m:
                    continue
                count = rng.randint(spec.min_refs_per_dyad, spec.max_refs_per_dyad)
                base = rng.randint(-4, 1)
                for _ in range(count):
                    sentiment = max(-5, min(5, base + rng.choice((-1, 0, 1))))
                    surface = rng.choice(_party_surfaces(m))
                    refs.append(
                        PlantedRef((year, q), n, m, "party_or_member", surface, sentiment)
                    )
            for _ in range(spec.self_refs_per_party):
                sentiment = rng.randint(2, 5)
                refs.append(
                    PlantedRef(
                        (year, q), n, n, "party_or_member",
                        rng.choice(_party_surfaces(n)), sentiment,
                    )
                )
        # office references resolve through the dated alias
        for _ in range(2):
            n = rng.choice([p for p in PARTIES if p != pm_party(year, spec)])
            target = pm_party(year, spec)
            refs.append(
                PlantedRef(
                    (year, q), n, target, "party_or_member",
                    rng.choice(["Prime Minister", "the Prime Minister"]),
                    rng.randint(-4, -1),
                )
            )
        # non-party classes: excluded from the index but kept in diagnostics
        for _ in range(spec.extra_class_refs_per_quarter):
            n = rng.choice(PARTIES)
            kind = rng.choice(["government", "foreign", "institution", "discard"])
            if kind == "government":
                # the correct recode for a government mention is the governing
                # party of the date; the index still excludes it by class
                refs.append(
                    PlantedRef((year, q), n, pm_party(year, spec), "government",
                               "the Government", rng.randint(-3, 0))
                )
            elif kind == "foreign":
                refs.append(
                    PlantedRef((year, q), n, "", "foreign_institution",
                               "European Commission", rng.randint(-2, 2))
                )
            elif kind == "institution":
                refs.append(
                    PlantedRef((year, q), n, "", "institution",
                               "National Audit Office", rng.randint(-1, 1))
                )
            else:
                refs.append(
                    PlantedRef((year, q), n, "", "discard",
                               rng.choice(["local transport", "small businesses"]),
                               rng.randint(-2, 2))
                )
    return refs


def expected_series(refs: list[PlantedRef], min_out_refs: int = 30) -> dict:
    """Analytic polarization series straight from the plant (plain floats).

    Only party-class references enter; shares include self-references; the
    parliament value renormalizes over parties with enough out-references.
    """
    quarters = sorted({r.quarter for r in refs})
    out: dict[str, dict] = {}
    for quarter in quarters:
        period = f"{quarter[0]}Q{quarter[1]}"
        items = [r for r in refs if r.quarter == quarter and r.entity_class == "party_or_member"]
        received: dict[str, int] = {}
        sentiments: dict[tuple[str, str], list[int]] = {}
        for r in items:
            received[r.target_party] = received.get(r.target_party, 0) + 1
            sentiments.setdefault((r.referring, r.target_party), []).append(r.sentiment)
        total = sum(received.values())
        eps: dict[str, float | None] = {}
        out_counts: dict[str, int] = {}
        for n in PARTIES:
            denom = total - received.get(n, 0)
            n_out = sum(
                len(v) for (a, b), v in sentiments.items() if a == n and b != n
            )
            out_counts[n] = n_out
            if denom == 0:
                eps[n] = None
                continue
            value = 0.0
            for m in sorted(received):
                if m == n:
                    continue
                key = (n, m)
                if key not in sentiments:
                    continue
                like = sum(sentiments[key]) / len(sentiments[key])
                value += -like * (received[m] / denom)
            eps[n] = value
        included = [
            n for n in PARTIES
            if eps[n] is not None and out_counts[n] >= min_out_refs
        ]
        weight_sum = sum(received.get(n, 0) / total for n in included)
        parliament = (
            sum(eps[n] * received.get(n, 0) / total for n in included) / weight_sum
            if included and weight_sum > 0
            else None
        )
        out[period] = {"parties": eps, "parliament": parliament, "out_counts": out_counts}
    return out


def registry_rows(spec: SyntheticSpec) -> list[list[str]]:
    from .resolution import fold

    start = f"{spec.year_start}-01-01"
    end = f"{spec.year_end}-12-31"
    mid_end = f"{spec.year_start}-12-31"
    mid_start = f"{spec.year_start + 1}-01-01"
    rows = []
    for party in PARTIES:
        title = party.title()
        rows.append([title, spec.country, "party_or_member", party.lower(), party, start, end])
        rows.append([f"{title} Party", spec.country, "party_or_member", party.lower(), party, start, end])
        leader = LEADERS[party]
        slug = fold(leader).replace(" ", "-")
        rows.append([leader, spec.country, "party_or_member", slug, party, start, end])
    rows.append(["Prime Minister", spec.country, "party_or_member",
                 "pm-" + pm_party(spec.year_start, spec).lower(),
                 pm_party(spec.year_start, spec), start, mid_end])
    rows.append(["the Government", spec.country, "government", "xx-government",
                 pm_party(spec.year_start, spec), start, mid_end])
    if spec.year_end > spec.year_start:
        rows.append(["Prime Minister", spec.country, "party_or_member",
                     "pm-" + pm_party(spec.year_end, spec).lower(),
                     pm_party(spec.year_end, spec), mid_start, end])
        rows.append(["the Government", spec.country, "government", "xx-government",
                     pm_party(spec.year_end, spec), mid_start, end])
    rows.append(["European Commission", spec.country, "foreign_institution",
                 "european-commission", "", start, end])
    rows.append(["National Audit Office", spec.country, "institution",
                 "xx-audit-office", "", start, end])
    return rows


@dataclass
class GeneratedCorpus:
    outdir: Path
    speeches_csv: Path
    manifest: Path
    registry: Path
    fixture: Path
    vocatives: Path
    expected_eps: Path
    truth: Path
    config: Path
    stats: dict = field(default_factory=dict)


def generate(outdir: str | Path, spec: SyntheticSpec | None = None) -> GeneratedCorpus:
    spec = spec or SyntheticSpec()
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(spec.seed)

    refs = plant_references(spec, rng)

    # group per (quarter, speaker party) and chunk into speeches
    groups: dict[tuple[tuple[int, int], str], list[PlantedRef]] = {}
    for r in refs:
        groups.setdefault((r.quarter, r.referring), []).append(r)

    speeches: list[dict] = []
    fixture_speeches: dict[str, list[dict]] = {}
    truth: dict[str, list[dict]] = {}
    seq = 0

    def new_speech(quarter, party, planted: list[PlantedRef]) -> None:
        nonlocal seq
        sid = f"x{seq:05d}"
        seq += 1
        year, q = quarter
        date = _quarter_date(rng, year, q)
        sentences = []
        if rng.random() < spec.vocative_fraction:
            sentences.append(rng.choice(VOCATIVES))
        rows = []
        truth_rows = []
        for ref in planted:
            template = rng.choice(_sentiment_templates(ref.sentiment))
            sentences.append(template.format(actor=ref.surface))
            rows.append(
                {
                    "actor": ref.surface,
                    "context": "mentioned while discussing quarterly business",
                    "rationale": f"{ref.surface} is a political actor in this debate",
                    "sentiment": ref.sentiment,
                }
            )
            truth_rows.append({"actor": ref.surface, "party": ref.target_party,
                               "entity_class": ref.entity_class})
        sentences.append(FILLER)
        speeches.append(
            {
                "id": sid,
                "date": date,
                "speaker": rng.choice(SPEAKERS[party]),
                "party": party,
                "text": " ".join(sentences),
            }
        )
        fixture_speeches[sid] = rows
        truth[sid] = truth_rows

    for (quarter, party) in sorted(groups.keys()):
        planted = groups[(quarter, party)]
        rng.shuffle(planted)
        for i in range(0, len(planted), spec.mentions_per_speech):
            new_speech(quarter, party, planted[i : i + spec.mentions_per_speech])

    # mention-free speeches exercise the empty-table path, then pad further
    # so validation sampling has room
    quarters = _quarters(spec)
    for _ in range(spec.empty_speeches):
        new_speech(rng.choice(quarters), rng.choice(PARTIES), [])
    while len(speeches) < spec.min_speeches:
        new_speech(rng.choice(quarters), rng.choice(PARTIES), [])

    # one speech that is nothing but a formal address: stripped to nothing
    sid = f"x{seq:05d}"
    seq += 1
    speeches.append(
        {
            "id": sid,
            "date": f"{spec.year_start}-02-15",
            "speaker": SPEAKERS["ALPHA"][0],
            "party": "ALPHA",
            "text": "Dear colleagues!",
        }
    )
    fixture_speeches[sid] = []
    truth[sid] = []

    speeches_csv = outdir / "speeches.csv"
    with open(speeches_csv, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "date", "speaker", "party", "text"])
        for s in speeches:
            writer.writerow([s["id"], s["date"], s["speaker"], s["party"], s["text"]])
        # two malformed rows exercising the reject log
        writer.writerow(["bad1", "not-a-date", "Nobody", "ALPHA", "Broken row."])
        writer.writerow([speeches[0]["id"], f"{spec.year_start}-03-03", "Dup", "BETA", "Duplicate id."])

    manifest = outdir / "manifest.json"
    manifest.write_text(
        json.dumps(
            {
                "name": "synthetic-examplia",
                "country": spec.country,
                "year_start": spec.year_start,
                "year_end": spec.year_end,
                "format": "csv",
                "expected_count": len(speeches) + 2,
                "mapping": {
                    "speech_id": "id",
                    "date": "date",
                    "speaker_name": "speaker",
                    "speaker_party": "party",
                    "text": "text",
                },
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )

    registry = outdir / "registry.csv"
    with open(registry, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["alias", "country", "entity_class", "canonical_entity", "party_id",
             "valid_from", "valid_to"]
        )
        writer.writerows(registry_rows(spec))

    fixture = outdir / "fixture.json"
    classes = {
        "local transport": {"entity_class": "discard", "rationale": "a sector, not an actor"},
        "small businesses": {"entity_class": "discard", "rationale": "a general group"},
    }
    fixture.write_text(
        json.dumps(
            {"speeches": fixture_speeches, "classes": classes},
            indent=2,
            sort_keys=True,
            ensure_ascii=False,
        )
        + "\n",
        encoding="utf-8",
    )

    vocatives = outdir / "vocatives.json"
    vocatives.write_text(
        json.dumps({spec.country.lower(): ["dear\\s.{0,80}"]}, indent=2) + "\n",
        encoding="utf-8",
    )

    expected = expected_series(refs)
    expected_eps = outdir / "expected_eps.csv"
    with open(expected_eps, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["period", "scope", "eps"])
        for period in sorted(expected):
            for party in PARTIES:
                value = expected[period]["parties"][party]
                writer.writerow([period, party, "" if value is None else repr(value)])
            parliament = expected[period]["parliament"]
            writer.writerow([period, "parliament", "" if parliament is None else repr(parliament)])

    truth_path = outdir / "truth.json"
    truth_path.write_text(
        json.dumps(truth, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )

    config = outdir / "pipeline.json"
    config.write_text(
        json.dumps(
            {
                "workdir": "run",
                "corpus_manifest": "manifest.json",
                "corpus_path": "speeches.csv",
                "registry_path": "registry.csv",
                "vocatives_path": "vocatives.json",
                "country": spec.country,
                "country_name": spec.country_name,
                "year_start": spec.year_start,
                "year_end": spec.year_end,
                "granularity": "quarter",
                "seed": spec.seed,
                "backend": {
                    "kind": "mock",
                    "id": "mock-extractor",
                    "fixture": "fixture.json",
                    "prose_fraction": 0.1,
                    "corrupt_fraction": 0.02,
                },
                "verifier_backend": {
                    "kind": "mock",
                    "id": "mock-verifier",
                    "fixture": "fixture.json",
                },
                "validation": {
                    "k": 300,
                    "seed": 7,
                    "auto_confirm": True,
                    "truth_path": "truth.json",
                },
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )

    stats = {
        "speeches": len(speeches),
        "planted_refs": len(refs),
        "party_refs": sum(1 for r in refs if r.entity_class == "party_or_member"),
        "expected_rejects": 2,
        "periods": len(expected),
    }
    (outdir / "stats.json").write_text(
        json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    return GeneratedCorpus(
        outdir=outdir,
        speeches_csv=speeches_csv,
        manifest=manifest,
        registry=registry,
        fixture=fixture,
        vocatives=vocatives,
        expected_eps=expected_eps,
        truth=truth_path,
        config=config,
        stats=stats,
    )
