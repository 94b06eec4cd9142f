"""Independent naive re-derivations used as test oracles.

Everything here is deliberately written from the definitions with plain
loops and floats, without importing the engine under test, so the two
implementations can disagree.
"""

from __future__ import annotations

from collections import defaultdict


def naive_period(date: str, granularity: str) -> str:
    year, month, _day = date.split("-")
    if granularity == "year":
        return year
    return f"{year}Q{(int(month) - 1) // 3 + 1}"


def naive_eps_series(refs, granularity="quarter", min_out_refs=0):
    """Recompute party and parliament scores from raw references.

    refs: iterable of (date, referring_party, referred_party, sentiment).
    Returns {period: {"parties": {party: eps_or_None}, "parliament": eps_or_None}}.
    """
    by_period = defaultdict(list)
    for date, n, m, s in refs:
        by_period[naive_period(date, granularity)].append((n, m, s))

    out = {}
    for period, items in by_period.items():
        received = defaultdict(int)
        sentiments = defaultdict(list)
        for n, m, s in items:
            received[m] += 1
            sentiments[(n, m)].append(s)
        total = sum(received.values())
        parties = sorted(set(received) | {n for n, _m, _s in items})

        eps = {}
        out_counts = {}
        for n in parties:
            if total - received[n] == 0:
                eps[n] = None
                out_counts[n] = sum(len(v) for (a, b), v in sentiments.items() if a == n and b != n)
                continue
            value = 0.0
            n_out = 0
            for m in sorted(received):
                if m == n or received[m] == 0:
                    continue
                key = (n, m)
                if key not in sentiments:
                    continue
                like = sum(sentiments[key]) / len(sentiments[key])
                weight = received[m] / (total - received[n])
                value += -like * weight
                n_out += len(sentiments[key])
            eps[n] = value
            out_counts[n] = n_out

        included = [
            n for n in parties if eps[n] is not None and out_counts[n] >= min_out_refs
        ]
        weight_sum = sum(received[n] / total for n in included) if total else 0.0
        if included and weight_sum > 0:
            parliament = (
                sum(eps[n] * received[n] / total for n in included) / weight_sum
            )
        else:
            parliament = None
        out[period] = {"parties": eps, "parliament": parliament, "out_counts": out_counts}
    return out


def naive_shares(refs):
    """Reference shares per period from raw (date, n, m, s) tuples."""
    by_period = defaultdict(lambda: defaultdict(int))
    for date, _n, m, _s in refs:
        by_period[naive_period(date, "quarter")][m] += 1
    out = {}
    for period, received in by_period.items():
        total = sum(received.values())
        out[period] = {m: c / total for m, c in received.items()}
    return out
