"""Leave-one-out sensitivity harness: output diffs, KPI deltas, session values.

The pipeline per left-out session: derive the delta dataset, rebuild (or
incrementally derive) the model, detect top-k output changes against the
baseline, translate the conversion-rate delta into a monetary value and
classify the session into one of four outcome constellations:

* no output change (the session is informationally redundant),
* output change without KPI movement (choices between equally good options),
* KPI rise on removal (a toxic session, negative value),
* KPI fall on removal (a valuable session, positive value).
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

from . import cor, embed
from .cor import RecommendationList
from .corpus import Dataset, EvalLog, leave_one_out
from .errors import UndefinedBaselineError, UnknownSessionError
from .kpi import aggregate_pairs, conversion_rate

log = logging.getLogger(__name__)


class ChangeKind(Enum):
    SAME_LIST = "same_list"
    REORDERED_ONLY = "reordered_only"
    MEMBERSHIP_CHANGED = "membership_changed"
    SEED_MISSING = "seed_missing"


class Constellation(Enum):
    NO_OUTPUT_CHANGE = "no_output_change"
    CHANGE_NO_KPI = "change_no_kpi"
    TOXIC = "toxic"
    VALUABLE = "valuable"


@dataclass(frozen=True)
class OutputDiff:
    """Per-seed comparison of two top-k maps; scores are ignored, only the
    ranked id sequences matter. ``change_kinds`` lists changed seeds only
    (unchanged seeds are implicitly SAME_LIST)."""

    changed: bool
    n_changed_seeds: int
    n_compared_seeds: int
    change_kinds: Mapping[str, ChangeKind]


@dataclass(frozen=True)
class SensitivityRecord:
    session_id: str
    diff: OutputDiff
    cr_base: float
    cr_delta: float
    rel_cr_change: float
    value: float
    constellation: Constellation


@dataclass(frozen=True)
class HarnessConfig:
    k: int = 5
    neutral_band: float = 0.0005
    sample: tuple[str, ...] | None = None
    revenue_base: float = 1.0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.neutral_band < 0:
            raise ValueError(f"neutral_band must be >= 0, got {self.neutral_band}")


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    detail: str


# ---------------------------------------------------------------------------
# Engines: the model builders the harness drives
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorEngine:
    """Co-occurrence recommender behind the common engine surface."""

    k: int = 5
    name: str = "cor"

    def fit(self, dataset: Dataset):
        return cor.build_matrix(dataset)

    def top_k_map(self, model) -> dict[str, RecommendationList]:
        return cor.all_top_k(model, self.k)

    def serialize(self, model) -> bytes:
        return cor.dump_matrix(model).encode("utf-8")


@dataclass(frozen=True)
class VrEngine:
    """Embedding recommender behind the common engine surface."""

    hyper: embed.Hyperparams
    k: int = 5
    name: str = "vr"

    def fit(self, dataset: Dataset):
        return embed.train(dataset, self.hyper)

    def top_k_map(self, model) -> dict[str, RecommendationList]:
        return embed.all_top_k_similar(model, self.k)

    def serialize(self, model) -> bytes:
        return embed.dump_model(model).encode("utf-8")


# ---------------------------------------------------------------------------
# Core operations
# ---------------------------------------------------------------------------


def verify_stability(dataset: Dataset, engine) -> StabilityReport:
    """Train twice on identical input; stable iff dumps are byte-identical and
    all top-k lists agree pointwise. The report names the first divergence."""
    first = engine.fit(dataset)
    second = engine.fit(dataset)
    bytes_a = engine.serialize(first)
    bytes_b = engine.serialize(second)
    if bytes_a != bytes_b:
        for line_no, (la, lb) in enumerate(
            zip(bytes_a.split(b"\n"), bytes_b.split(b"\n")), start=1
        ):
            if la != lb:
                return StabilityReport(
                    stable=False,
                    detail=(
                        f"serialized models diverge at line {line_no}: "
                        f"{la[:80]!r} != {lb[:80]!r}"
                    ),
                )
        return StabilityReport(stable=False, detail="serialized models differ in length")
    topk_a = engine.top_k_map(first)
    topk_b = engine.top_k_map(second)
    for seed in sorted(set(topk_a) | set(topk_b)):
        la = topk_a.get(seed)
        lb = topk_b.get(seed)
        if la is None or lb is None or la.product_ids != lb.product_ids:
            return StabilityReport(
                stable=False, detail=f"top-k lists diverge at seed {seed!r}"
            )
    return StabilityReport(stable=True, detail="two runs byte-identical")


def diff_topk(
    base: Mapping[str, RecommendationList],
    delta: Mapping[str, RecommendationList],
    k: int | None = None,
) -> OutputDiff:
    """Compare ranked id sequences per seed. Seeds lost by the delta map count
    as SEED_MISSING; seeds the delta gained count as MEMBERSHIP_CHANGED."""
    kinds: dict[str, ChangeKind] = {}
    seeds = set(base) | set(delta)
    for seed in sorted(seeds):
        if seed not in delta:
            kinds[seed] = ChangeKind.SEED_MISSING
            continue
        if seed not in base:
            kinds[seed] = ChangeKind.MEMBERSHIP_CHANGED
            continue
        ids_base = base[seed].product_ids[:k] if k else base[seed].product_ids
        ids_delta = delta[seed].product_ids[:k] if k else delta[seed].product_ids
        if ids_base == ids_delta:
            continue
        if sorted(ids_base) == sorted(ids_delta):
            kinds[seed] = ChangeKind.REORDERED_ONLY
        else:
            kinds[seed] = ChangeKind.MEMBERSHIP_CHANGED
    return OutputDiff(
        changed=bool(kinds),
        n_changed_seeds=len(kinds),
        n_compared_seeds=len(seeds),
        change_kinds=kinds,
    )


def relative_cr_change(cr_base: float, cr_delta: float) -> float:
    if cr_base == 0:
        raise UndefinedBaselineError()
    return (cr_delta - cr_base) / cr_base


def session_value(rel_cr_change_: float, revenue_base: float) -> float:
    """Monetary value attributed to the session: -1 x relative CR change x revenue."""
    return -1.0 * rel_cr_change_ * revenue_base + 0.0


def classify(diff: OutputDiff, rel_cr_change_: float, neutral_band: float) -> Constellation:
    if not diff.changed:
        return Constellation.NO_OUTPUT_CHANGE
    if abs(rel_cr_change_) <= neutral_band:
        return Constellation.CHANGE_NO_KPI
    if rel_cr_change_ > neutral_band:
        return Constellation.TOXIC
    return Constellation.VALUABLE


def _make_record(
    session_id: str,
    base_topk: Mapping[str, RecommendationList],
    delta_topk: Mapping[str, RecommendationList],
    cr_base: float,
    eval_log: EvalLog,
    cfg: HarnessConfig,
) -> SensitivityRecord:
    diff = diff_topk(base_topk, delta_topk)
    cr_delta = conversion_rate(aggregate_pairs(delta_topk, eval_log))
    rel = relative_cr_change(cr_base, cr_delta)
    return SensitivityRecord(
        session_id=session_id,
        diff=diff,
        cr_base=cr_base,
        cr_delta=cr_delta,
        rel_cr_change=rel,
        value=session_value(rel, cfg.revenue_base),
        constellation=classify(diff, rel, cfg.neutral_band),
    )


def run_cor_loo(dataset: Dataset, eval_log: EvalLog, cfg: HarnessConfig) -> list[SensitivityRecord]:
    """Exhaustive leave-one-out under the co-occurrence recommender.

    The baseline matrix is built once; each delta model comes from the exact
    incremental removal. Records are ordered by session_id.
    """
    base_matrix = cor.build_matrix(dataset)
    base_topk = cor.all_top_k(base_matrix, cfg.k)
    cr_base = conversion_rate(aggregate_pairs(base_topk, eval_log))
    records = []
    for session in dataset.sessions:
        delta_matrix = cor.remove_session(base_matrix, session)
        delta_topk = cor.all_top_k(delta_matrix, cfg.k)
        records.append(
            _make_record(session.session_id, base_topk, delta_topk, cr_base, eval_log, cfg)
        )
    records.sort(key=lambda r: r.session_id)
    return records


def _vr_loo_one(args) -> SensitivityRecord:
    dataset, eval_log, cfg, hyper, base_topk, base_seeds, cr_base, session_id = args
    delta_ds = leave_one_out(dataset, session_id).materialized
    delta_model = embed.train(delta_ds, hyper)
    delta_topk = embed.all_top_k_similar(delta_model, cfg.k, seeds=base_seeds)
    return _make_record(session_id, base_topk, delta_topk, cr_base, eval_log, cfg)


def run_vr_loo(
    dataset: Dataset,
    eval_log: EvalLog,
    cfg: HarnessConfig,
    hyper: embed.Hyperparams,
    jobs: int = 1,
) -> list[SensitivityRecord]:
    """Sampled leave-one-out under the embedding recommender.

    Every delta model is a full single-threaded retrain with the baseline's
    rng_seed, so vector differences stem from the data alone. Delta rankings
    are computed over the baseline seed universe; vanished seeds surface as
    SEED_MISSING changes. Results are ordered by session_id and independent
    of ``jobs``.
    """
    if not cfg.sample:
        raise ValueError("run_vr_loo requires a non-empty session sample; "
                         "exhaustive retraining is not tractable")
    for sid in cfg.sample:
        if sid not in dataset.by_id:
            raise UnknownSessionError(sid)
    base_model = embed.train(dataset, hyper)
    base_topk = embed.all_top_k_similar(base_model, cfg.k)
    base_seeds = frozenset(base_model.vocabulary.products)
    cr_base = conversion_rate(aggregate_pairs(base_topk, eval_log))

    sids = sorted(set(cfg.sample))
    payloads = [
        (dataset, eval_log, cfg, hyper, base_topk, base_seeds, cr_base, sid) for sid in sids
    ]
    if jobs <= 1:
        return [_vr_loo_one(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_vr_loo_one, payloads))


@dataclass(frozen=True)
class Histogram:
    """Delta-CR distribution with the near-zero records pooled in a neutral bin."""

    neutral: int
    neutral_band: float
    bin_width: float
    bins: tuple[tuple[float, float, int], ...]

    def total(self) -> int:
        return self.neutral + sum(count for _, _, count in self.bins)


def histogram(
    records: Sequence[SensitivityRecord],
    bin_width: float = 0.001,
    neutral_band: float = 0.0005,
) -> Histogram:
    """Bin relative CR changes into half-open intervals of ``bin_width`` aligned
    at zero; records within the neutral band pool into one distinguished bin."""
    if bin_width <= 0:
        raise ValueError(f"bin_width must be > 0, got {bin_width}")
    neutral = 0
    counts: dict[int, int] = {}
    for record in records:
        rel = record.rel_cr_change
        if abs(rel) <= neutral_band:
            neutral += 1
            continue
        idx = math.floor(rel / bin_width)
        counts[idx] = counts.get(idx, 0) + 1
    bins = tuple(
        (idx * bin_width, (idx + 1) * bin_width, counts[idx]) for idx in sorted(counts)
    )
    return Histogram(neutral=neutral, neutral_band=neutral_band, bin_width=bin_width, bins=bins)


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------

RECORD_COLUMNS = (
    "session_id",
    "changed",
    "n_changed_seeds",
    "cr_base",
    "cr_delta",
    "rel_cr_change",
    "value",
    "constellation",
)


def write_records_csv(records: Sequence[SensitivityRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.session_id,
                    "true" if r.diff.changed else "false",
                    r.diff.n_changed_seeds,
                    repr(r.cr_base),
                    repr(r.cr_delta),
                    repr(r.rel_cr_change),
                    repr(r.value),
                    r.constellation.value,
                ]
            )


def write_histogram_csv(hist: Histogram, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("bin_lo", "bin_hi", "count"))
        writer.writerow(("neutral", "neutral", hist.neutral))
        for lo, hi, count in hist.bins:
            writer.writerow((repr(lo), repr(hi), count))


def summarize(records: Sequence[SensitivityRecord]) -> dict:
    """Constellation counts plus min/mean/max of the relative CR change."""
    by_constellation = {c.value: 0 for c in Constellation}
    for r in records:
        by_constellation[r.constellation.value] += 1
    rels = [r.rel_cr_change for r in records]
    return {
        "n_records": len(records),
        "constellations": by_constellation,
        "rel_cr_change": {
            "min": min(rels) if rels else 0.0,
            "mean": sum(rels) / len(rels) if rels else 0.0,
            "max": max(rels) if rels else 0.0,
        },
        "value": {
            "min": min((r.value for r in records), default=0.0),
            "max": max((r.value for r in records), default=0.0),
        },
    }
