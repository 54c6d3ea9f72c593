"""Quantitative KPIs: hypothetic conversion rate, revenue figures, SNP, scaling.

The conversion rate aggregates order/view counts over all (seed, alternative)
pairs realized by a model's top-k lists, so it depends on the model *only*
through those lists: two models with identical lists produce bitwise-equal
rates on the same evaluation log.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .cor import RecommendationList
from .corpus import EvalLog, Session

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PairCounts:
    """(n_views, n_ordered) per (seed, alternative) pair."""

    counts: Mapping[tuple[str, str], tuple[int, int]]

    def total_views(self) -> int:
        return sum(v for v, _ in self.counts.values())

    def total_ordered(self) -> int:
        return sum(o for _, o in self.counts.values())


@dataclass(frozen=True)
class KpiReport:
    n_products: int
    cr: float
    revenue: float
    revenue_per_session: float
    snp: float
    cpu_seconds: float
    n_sessions: int
    correction_c: float


def aggregate_pairs(recs: Mapping[str, RecommendationList], eval_log: EvalLog) -> PairCounts:
    """Count, per (seed, alternative), the eval sessions viewing the seed.

    A session increments n_views once per pair regardless of how often the
    seed was viewed within it; n_ordered increments iff the alternative is in
    the session's ordered set. Seeds absent from ``recs`` contribute nothing.
    """
    acc: dict[tuple[str, str], tuple[int, int]] = {}
    for es in eval_log.sessions:
        for seed in sorted(es.viewed):
            rl = recs.get(seed)
            if rl is None:
                continue
            for alt, _score in rl.items:
                views, ordered = acc.get((seed, alt), (0, 0))
                acc[(seed, alt)] = (views + 1, ordered + (1 if alt in es.ordered else 0))
    return PairCounts(counts=acc)


def conversion_rate(pairs: PairCounts, c: float = 1.0) -> float:
    """Total orders over total views, scaled by the correction constant ``c``.

    Zero total views is not an error: the rate is reported as 0.0 and flagged
    via a warning (there is nothing to convert).
    """
    if c <= 0:
        raise ValueError(f"correction constant c must be > 0, got {c}")
    views = pairs.total_views()
    if views == 0:
        log.warning("conversion rate has zero views; reporting 0.0")
        return 0.0
    return pairs.total_ordered() / views * c


def revenue(n_products: int, cr: float, unit_value: float = 1.0) -> float:
    """Coverage-proportional revenue approximation: products x rate x unit value."""
    if unit_value <= 0:
        raise ValueError(f"unit_value must be > 0, got {unit_value}")
    return n_products * cr * unit_value


def revenue_per_session(total_revenue: float, n_sessions: int) -> float:
    """Equal share of the overall revenue per contributing session."""
    if n_sessions < 1:
        raise ValueError(f"n_sessions must be >= 1, got {n_sessions}")
    return total_revenue / n_sessions


def snp(prev_products: frozenset[str] | set[str], added_sessions: Sequence[Session]) -> float:
    """Fraction of newly added sessions holding at least one unseen product."""
    if not added_sessions:
        log.warning("snp over an empty added-session list; reporting 0.0")
        return 0.0
    hits = sum(1 for s in added_sessions if not s.unique_products <= prev_products)
    return hits / len(added_sessions)


def feature_scale(series: Sequence[float]) -> list[float]:
    """Affine rescale of a series onto [0, 1]; constant input maps to all zeros."""
    if not series:
        raise ValueError("feature_scale requires a non-empty series")
    lo = min(series)
    hi = max(series)
    if lo == hi:
        log.warning("feature_scale over a constant series; reporting all zeros")
        return [0.0 for _ in series]
    span = hi - lo
    return [(x - lo) / span for x in series]


REPORT_COLUMNS = (
    "days",
    "n_sessions",
    "n_products",
    "snp",
    "cr",
    "revenue",
    "revenue_per_session",
    "cpu_seconds",
)


def report_row(days: int, report: KpiReport) -> list[str]:
    """One CSV row per model, matching REPORT_COLUMNS."""
    return [
        str(days),
        str(report.n_sessions),
        str(report.n_products),
        repr(report.snp),
        repr(report.cr),
        repr(report.revenue),
        repr(report.revenue_per_session),
        repr(report.cpu_seconds),
    ]


def mean(values: Iterable[float]) -> float:
    vals = list(values)
    return sum(vals) / len(vals) if vals else 0.0
