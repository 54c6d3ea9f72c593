"""Rolling-window impact analysis: CV trajectories and impact classes.

A cohort session's contribution-to-visibility (CV) score counts the ordered
(seed, recommendation) pairs of the session realized in the current model's
top-k lists. Tracking the score over a daily-shifting activity window and
fitting a line yields four impact classes: no impact, stable, increasing,
decreasing.
"""

from __future__ import annotations

import csv
import logging
import statistics
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

from .cor import RecommendationList, all_top_k, build_matrix
from .corpus import Dataset, Session, heterogeneity_ratio, slice_days
from .kpi import mean

log = logging.getLogger(__name__)

# The classification rule's "= 0" is exact-arithmetic language; floating OLS
# needs a tolerance.
DEFAULT_EPS = 1e-9


class Impact(Enum):
    NO_IMPACT = "no_impact"
    STABLE = "stable"
    INCREASING = "increasing"
    DECREASING = "decreasing"


@dataclass(frozen=True)
class FramePlan:
    window_days: int = 51
    n_frames: int = 50
    cohort_day: int | None = None

    def __post_init__(self) -> None:
        if self.window_days < 1:
            raise ValueError(f"window_days must be >= 1, got {self.window_days}")
        if self.n_frames < 1:
            raise ValueError(f"n_frames must be >= 1, got {self.n_frames}")


@dataclass(frozen=True)
class CvTrajectory:
    session_id: str
    scores: tuple[int, ...]
    slope: float
    intercept: float
    impact: Impact


@dataclass(frozen=True)
class ClassRow:
    impact: Impact
    n_sessions: int
    percentage: float
    mean_hr: float
    mean_unique_len: float


@dataclass(frozen=True)
class ClassStats:
    rows: tuple[ClassRow, ...]
    cohort_size: int


def cv_score(session: Session, topk: Mapping[str, RecommendationList]) -> int:
    """Ordered (seed, recommendation) pairs of the session realized in ``topk``.

    Both products must be in the session's unique set; (a, b) and (b, a)
    count separately because seed and recommendation roles are asymmetric.
    """
    products = sorted(session.unique_products)
    score = 0
    for seed in products:
        rl = topk.get(seed)
        if rl is None:
            continue
        recommended = set(rl.product_ids)
        score += sum(1 for other in products if other != seed and other in recommended)
    return score


def ols(scores: Sequence[float]) -> tuple[float, float]:
    """Least-squares line over x = 0..n-1; a single point fits slope 0."""
    if not scores:
        raise ValueError("ols requires at least one score")
    if len(scores) == 1:
        return 0.0, float(scores[0])
    fit = statistics.linear_regression(range(len(scores)), scores)
    return float(fit.slope), float(fit.intercept)


def classify_impact(slope: float, intercept: float, eps: float = DEFAULT_EPS) -> Impact:
    if eps < 0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    if abs(slope) <= eps:
        if abs(intercept) <= eps:
            return Impact.NO_IMPACT
        if intercept > eps:
            return Impact.STABLE
        return Impact.NO_IMPACT  # negative intercept with flat slope: no visibility
    if slope > eps:
        return Impact.INCREASING
    return Impact.DECREASING


def trajectories(dataset: Dataset, plan: FramePlan, k: int = 5) -> list[CvTrajectory]:
    """CV series for the cohort-day sessions over daily-shifting windows.

    Frame f's model is built from the ``window_days``-day slice ending at
    cohort_day + f - 1, so with window_days >= n_frames the cohort stays
    inside every window. Frames beyond the last data day are clipped (and
    flagged via a warning).
    """
    cohort_day = plan.cohort_day if plan.cohort_day is not None else dataset.min_day
    cohort = [s for s in dataset.sessions if s.day == cohort_day]
    if not cohort:
        log.warning("empty cohort for day %d; no trajectories", cohort_day)
        return []
    max_day = dataset.max_day
    n_frames = plan.n_frames
    if cohort_day + n_frames - 1 > max_day:
        n_frames = max_day - cohort_day + 1
        log.warning(
            "frame plan clipped to %d frames (data ends at day %d)", n_frames, max_day
        )
    series: dict[str, list[int]] = {s.session_id: [] for s in cohort}
    for frame in range(1, n_frames + 1):
        end_day = cohort_day + frame - 1
        window = slice_days(dataset, end_day=end_day, n_days=plan.window_days)
        topk = all_top_k(build_matrix(window), k)
        for session in cohort:
            series[session.session_id].append(cv_score(session, topk))
    out = []
    for session in cohort:
        scores = series[session.session_id]
        slope, intercept = ols(scores)
        out.append(
            CvTrajectory(
                session_id=session.session_id,
                scores=tuple(scores),
                slope=slope,
                intercept=intercept,
                impact=classify_impact(slope, intercept),
            )
        )
    out.sort(key=lambda t: t.session_id)
    return out


def class_stats(
    trajectories_: Sequence[CvTrajectory],
    dataset: Dataset,
    hr_level: int | None = None,
) -> ClassStats:
    """Per-class counts, percentages, mean heterogeneity ratio and mean unique length."""
    grouped: dict[Impact, list[Session]] = {impact: [] for impact in Impact}
    for t in trajectories_:
        grouped[t.impact].append(dataset.by_id[t.session_id])
    total = len(trajectories_)
    rows = []
    for impact in Impact:
        sessions = grouped[impact]
        rows.append(
            ClassRow(
                impact=impact,
                n_sessions=len(sessions),
                percentage=100.0 * len(sessions) / total if total else 0.0,
                mean_hr=mean(
                    heterogeneity_ratio(s, dataset.catalog, hr_level) for s in sessions
                )
                if sessions
                else float("nan"),
                mean_unique_len=mean(len(s.unique_products) for s in sessions)
                if sessions
                else float("nan"),
            )
        )
    return ClassStats(rows=tuple(rows), cohort_size=total)


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------


def write_trajectories_csv(trajectories_: Sequence[CvTrajectory], path: str | Path) -> None:
    n_frames = max((len(t.scores) for t in trajectories_), default=0)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["session_id"]
            + [f"f{i}" for i in range(1, n_frames + 1)]
            + ["slope", "intercept", "impact"]
        )
        for t in trajectories_:
            writer.writerow(
                [t.session_id]
                + [str(s) for s in t.scores]
                + [repr(t.slope), repr(t.intercept), t.impact.value]
            )


def write_class_stats_csv(stats: ClassStats, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("impact", "n_sessions", "percentage", "mean_hr", "mean_unique_len"))
        for row in stats.rows:
            writer.writerow(
                (
                    row.impact.value,
                    row.n_sessions,
                    repr(row.percentage),
                    "" if row.n_sessions == 0 else repr(row.mean_hr),
                    "" if row.n_sessions == 0 else repr(row.mean_unique_len),
                )
            )
