"""Dyadic sentiment aggregation and the polarization score.

References resolved to parties are grouped per period into directed dyad
cells (who talks about whom, how warmly).  A party's score is the weighted
negative mean of its out-party sentiment, weights being the share of
references each target party receives; the parliament score is the
share-weighted sum over parties.

Counts and sentiments are integers, so every score is a rational number;
the engine computes with exact fractions and converts to float only at the
record boundary.  That keeps the theoretical bounds and weight-sum
identities exact instead of approximately true.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import dataclass, field, asdict
from fractions import Fraction
from pathlib import Path
from typing import Iterable

from .resolution import ResolvedReference

FLAG_INSUFFICIENT = "insufficient-data"
FLAG_DEGENERATE = "degenerate-share"

DEFAULT_MIN_OUT_REFERENCES = 30


def period_label(date: str | dt.date, granularity: str) -> str:
    if isinstance(date, str):
        date = dt.date.fromisoformat(date)
    if granularity == "year":
        return f"{date.year}"
    if granularity == "quarter":
        return f"{date.year}Q{(date.month - 1) // 3 + 1}"
    raise ValueError(f"unknown granularity {granularity!r}")


@dataclass
class DyadCell:
    period: str
    referring: str
    referred: str
    ref_count: int = 0
    sentiment_sum: int = 0
    sentiment_sumsq: int = 0

    @property
    def like_exact(self) -> Fraction:
        return Fraction(self.sentiment_sum, self.ref_count)

    @property
    def like(self) -> float:
        return self.sentiment_sum / self.ref_count

    def add(self, sentiment: int) -> None:
        self.ref_count += 1
        self.sentiment_sum += sentiment
        self.sentiment_sumsq += sentiment * sentiment


@dataclass
class PeriodShares:
    period: str
    received: dict[str, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.received.values())

    def share(self, party: str) -> float:
        total = self.total
        return self.received.get(party, 0) / total if total else 0.0

    def share_exact(self, party: str) -> Fraction:
        total = self.total
        return Fraction(self.received.get(party, 0), total) if total else Fraction(0)

    @property
    def parties(self) -> list[str]:
        return sorted(p for p, c in self.received.items() if c > 0)


@dataclass
class AggregateResult:
    granularity: str
    cells: dict[tuple[str, str, str], DyadCell]
    shares: dict[str, PeriodShares]
    diagnostics: dict

    def periods(self) -> list[str]:
        return sorted(self.shares.keys())

    def out_cells(self, period: str, party: str) -> list[DyadCell]:
        return [
            c
            for (p, n, m), c in sorted(self.cells.items())
            if p == period and n == party and m != party
        ]


def aggregate_dyads(
    refs: Iterable[ResolvedReference],
    granularity: str = "quarter",
    government_as_party: bool = False,
) -> AggregateResult:
    """Group party-directed references into dyad cells and period shares.

    Self-cells are stored for diagnostics and count toward reference shares,
    but never enter the polarization sum.  References without a known
    speaker party, and non-party entity classes, go to diagnostic buckets.
    """
    cells: dict[tuple[str, str, str], DyadCell] = {}
    shares: dict[str, PeriodShares] = {}
    diagnostics = {
        "missing_referring_party": 0,
        "non_party_class": 0,
        "discarded": 0,
        "unresolved": 0,
        "self_references": 0,
        "included": 0,
    }

    party_classes = {"party_or_member"}
    if government_as_party:
        party_classes.add("government")

    for ref in refs:
        if ref.entity_class == "discard":
            diagnostics["discarded"] += 1
            continue
        if ref.resolution_method == "unresolved" or ref.entity_class == "unresolved":
            diagnostics["unresolved"] += 1
            continue
        if ref.entity_class not in party_classes or not ref.referred_party:
            diagnostics["non_party_class"] += 1
            continue
        if not ref.referring_party:
            diagnostics["missing_referring_party"] += 1
            continue

        period = period_label(ref.date, granularity)
        key = (period, ref.referring_party, ref.referred_party)
        cell = cells.get(key)
        if cell is None:
            cell = cells[key] = DyadCell(
                period=period, referring=ref.referring_party, referred=ref.referred_party
            )
        cell.add(ref.sentiment)

        period_shares = shares.get(period)
        if period_shares is None:
            period_shares = shares[period] = PeriodShares(period=period)
        period_shares.received[ref.referred_party] = (
            period_shares.received.get(ref.referred_party, 0) + 1
        )

        diagnostics["included"] += 1
        if ref.referring_party == ref.referred_party:
            diagnostics["self_references"] += 1

    return AggregateResult(
        granularity=granularity, cells=cells, shares=shares, diagnostics=diagnostics
    )


@dataclass
class EpsComponent:
    referred: str
    like: float | None  # None when the dyad has no stored cell
    weight: float
    absent: bool

    def to_record(self) -> dict:
        return asdict(self)


@dataclass
class EpsRecord:
    period: str
    granularity: str
    scope: str  # party id or "parliament"
    eps: float | None
    n_refs: int
    sentiment_sd: float | None
    flags: list[str] = field(default_factory=list)
    components: list[EpsComponent] = field(default_factory=list)
    renormalization: float | None = None
    eps_exact: Fraction | None = field(default=None, repr=False, compare=False)

    def to_record(self) -> dict:
        rec = asdict(self)
        rec.pop("eps_exact", None)
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "EpsRecord":
        rec = dict(rec)
        rec["components"] = [EpsComponent(**c) for c in rec.get("components", [])]
        return cls(**rec)


def _population_sd(count: int, total: int, total_sq: int) -> float | None:
    if count < 2:
        return None
    mean = total / count
    variance = max(total_sq / count - mean * mean, 0.0)
    return math.sqrt(variance)


def eps_party(
    party: str,
    period: str,
    agg: AggregateResult,
    min_out_references: int = DEFAULT_MIN_OUT_REFERENCES,
) -> EpsRecord:
    """Polarization score of one party in one period.

    Missing dyads contribute nothing: the weight of an unmentioned out-party
    is recorded as absent rather than redistributed, so a party that talks
    about a single rival is not extrapolated to hate everyone.
    """
    shares = agg.shares[period]
    total = shares.total
    own_received = shares.received.get(party, 0)
    out_cells = {c.referred: c for c in agg.out_cells(period, party)}
    n_out_refs = sum(c.ref_count for c in out_cells.values())
    sd = _population_sd(
        n_out_refs,
        sum(c.sentiment_sum for c in out_cells.values()),
        sum(c.sentiment_sumsq for c in out_cells.values()),
    )

    if total == 0 or own_received >= total:
        return EpsRecord(
            period=period,
            granularity=agg.granularity,
            scope=party,
            eps=None,
            n_refs=n_out_refs,
            sentiment_sd=sd,
            flags=[FLAG_DEGENERATE],
        )

    denominator = total - own_received  # exact (1 - own share) in counts
    components: list[EpsComponent] = []
    eps = Fraction(0)
    for other in shares.parties:
        if other == party:
            continue
        weight = Fraction(shares.received[other], denominator)
        cell = out_cells.get(other)
        if cell is None:
            components.append(
                EpsComponent(referred=other, like=None, weight=float(weight), absent=True)
            )
        else:
            like = cell.like_exact
            eps += -like * weight
            components.append(
                EpsComponent(referred=other, like=float(like), weight=float(weight), absent=False)
            )

    flags = []
    if n_out_refs < min_out_references:
        flags.append(FLAG_INSUFFICIENT)
    return EpsRecord(
        period=period,
        granularity=agg.granularity,
        scope=party,
        eps=float(eps),
        n_refs=n_out_refs,
        sentiment_sd=sd,
        flags=flags,
        components=components,
        eps_exact=eps,
    )


def eps_parliament(period: str, party_records: list[EpsRecord], shares: PeriodShares,
                   granularity: str) -> EpsRecord:
    """Share-weighted sum of party scores, renormalized over usable parties."""
    included = [r for r in party_records if r.eps is not None and not r.flags]
    total_refs = sum(r.n_refs for r in party_records)
    weight_sum = Fraction(0)
    for r in included:
        weight_sum += shares.share_exact(r.scope)
    if not included or weight_sum == 0:
        return EpsRecord(
            period=period,
            granularity=granularity,
            scope="parliament",
            eps=None,
            n_refs=total_refs,
            sentiment_sd=None,
            flags=[FLAG_INSUFFICIENT],
        )
    eps = Fraction(0)
    for r in included:
        exact = r.eps_exact if r.eps_exact is not None else Fraction(r.eps)
        eps += exact * shares.share_exact(r.scope)
    eps /= weight_sum
    return EpsRecord(
        period=period,
        granularity=granularity,
        scope="parliament",
        eps=float(eps),
        n_refs=sum(r.n_refs for r in included),
        sentiment_sd=None,
        flags=[],
        renormalization=float(1 / weight_sum),
        eps_exact=eps,
    )


def compute_series(
    agg: AggregateResult,
    min_out_references: int = DEFAULT_MIN_OUT_REFERENCES,
) -> list[EpsRecord]:
    """Party and parliament records for every period, in stable order."""
    records: list[EpsRecord] = []
    for period in agg.periods():
        shares = agg.shares[period]
        referring = sorted({n for (p, n, _m) in agg.cells if p == period})
        parties = sorted(set(shares.parties) | set(referring))
        party_records = [
            eps_party(party, period, agg, min_out_references) for party in parties
        ]
        records.extend(party_records)
        records.append(eps_parliament(period, party_records, shares, agg.granularity))
    return records


# -- export -------------------------------------------------------------------

CSV_COLUMNS = ("period", "granularity", "scope", "eps", "n_refs", "sentiment_sd", "flags")


def _format_float(value: float | None) -> str:
    if value is None:
        return ""
    return repr(round(value, 12))


def export_series_csv(records: list[EpsRecord], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.period,
                    r.granularity,
                    r.scope,
                    _format_float(r.eps),
                    r.n_refs,
                    _format_float(r.sentiment_sd),
                    ";".join(r.flags),
                ]
            )


def export_series_json(records: list[EpsRecord], path: str | Path) -> None:
    """Plot-ready layout: parliament series plus one series per party."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    parliament = [r.to_record() for r in records if r.scope == "parliament"]
    parties: dict[str, list[dict]] = {}
    for r in records:
        if r.scope != "parliament":
            parties.setdefault(r.scope, []).append(r.to_record())
    payload = {
        "granularity": records[0].granularity if records else None,
        "parliament": parliament,
        "parties": {k: parties[k] for k in sorted(parties)},
    }
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def export_dyads_csv(agg: AggregateResult, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["period", "referring", "referred", "ref_count", "like"])
        for key in sorted(agg.cells):
            cell = agg.cells[key]
            writer.writerow(
                [cell.period, cell.referring, cell.referred, cell.ref_count,
                 _format_float(cell.like)]
            )


def write_records_jsonl(records: list[EpsRecord], path: str | Path) -> None:
    from .jsonio import dump_jsonl

    dump_jsonl(path, (r.to_record() for r in records))


def read_records_jsonl(path: str | Path) -> list[EpsRecord]:
    from .jsonio import load_jsonl

    return [EpsRecord.from_record(rec) for rec in load_jsonl(path)]
