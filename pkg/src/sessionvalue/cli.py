"""Command-line surface: synth, train, recommend, stability, value, lifecycle, curve.

Every command is driven by one YAML config (checked-in experiment recipes run
as-is) and is idempotent: identical config and inputs produce byte-identical
output files, regardless of ``--jobs``. The one exception is the measured
``cpu_seconds`` column of the curve table, which is machine- and run-dependent
by nature.
"""

from __future__ import annotations

import csv
import functools
import json
import logging
from pathlib import Path

import click
import numpy as np

from . import curve, kpi, lifecycle, sensitivity, synthgen
from .config import RunConfig, SampleSpec, load_run_config
from .corpus import (
    Dataset,
    EvalLog,
    load_dataset,
    read_eval_log,
    write_dataset,
    write_eval_log,
)
from .errors import SessionValueError, UnknownSessionError
from .sensitivity import CorEngine, HarnessConfig, VrEngine
from .synthgen import write_truth

log = logging.getLogger(__name__)


@click.group()
def main() -> None:
    """Session-level data valuation for item-to-item recommenders."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")


def _wrap_errors(fn):
    @functools.wraps(fn)
    def inner(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SessionValueError as exc:
            raise click.ClickException(str(exc)) from exc

    return inner


def _common_options(fn):
    fn = click.option(
        "--config", "config_path", required=True,
        type=click.Path(exists=True, dir_okay=False), help="Run config (YAML).",
    )(fn)
    fn = click.option(
        "--out", "out_override", default=None, type=click.Path(file_okay=False),
        help="Output directory (overrides the config's output_dir).",
    )(fn)
    fn = click.option(
        "--summary", "summary_mode", type=click.Choice(["text", "json"]), default="text",
        help="Print the run summary as text or machine-readable JSON.",
    )(fn)
    return fn


def _prepare(config_path: str, out_override: str | None) -> tuple[RunConfig, Path]:
    rc = load_run_config(config_path)
    if out_override is not None:
        out_dir = Path(out_override)
    elif rc.output_dir is not None:
        out_dir = rc.output_dir
    else:
        raise click.ClickException("no output directory: set output_dir in the config or pass --out")
    out_dir.mkdir(parents=True, exist_ok=True)
    return rc, out_dir


def _require_file(path: Path) -> Path:
    if not path.is_file():
        raise click.ClickException(f"input file not found: {path}")
    return path


def _load_data(rc: RunConfig, out_dir: Path, need_eval: bool = True):
    dataset = load_dataset(
        _require_file(rc.input_path("sessions", out_dir)),
        _require_file(rc.input_path("catalog", out_dir)),
    )
    eval_log = read_eval_log(_require_file(rc.input_path("eval", out_dir))) if need_eval else None
    return dataset, eval_log


def _engine(rc: RunConfig, name: str):
    if name == "cor":
        return CorEngine(k=rc.harness.k)
    return VrEngine(hyper=rc.hyper, k=rc.harness.k)


def _resolve_sample(spec: SampleSpec | None, dataset: Dataset) -> tuple[str, ...] | None:
    if spec is None:
        return None
    if spec.ids is not None:
        for sid in spec.ids:
            if sid not in dataset.by_id:
                raise UnknownSessionError(sid)
        return tuple(sorted(set(spec.ids)))
    ids = sorted(dataset.by_id)
    size = min(spec.size or 0, len(ids))
    rng = np.random.default_rng(spec.rng_seed)
    picked = rng.choice(len(ids), size=size, replace=False)
    return tuple(sorted(ids[int(i)] for i in picked))


def _emit_summary(summary_mode: str, summary: dict, text_lines: list[str]) -> None:
    if summary_mode == "json":
        click.echo(json.dumps(summary, indent=2, sort_keys=True))
    else:
        for line in text_lines:
            click.echo(line)


def synth_pipeline(rc: RunConfig) -> tuple[Dataset, EvalLog, synthgen.GroundTruth, str | None]:
    """Generate per config and apply the configured plants, in a fixed order:
    duplicates first (so the toxic verification sees the final dataset), then
    the toxic plant, then a re-check that the duplicates still have no impact."""
    if rc.synth is None:
        raise SessionValueError("config has no synth section (rng_seed and counts required)")
    dataset, eval_log, truth = synthgen.generate(rc.synth)

    dup = rc.plants.duplicates
    dup_source = None
    if dup is not None:
        if dup.session_id is not None:
            dataset = synthgen.plant_duplicate_sessions(dataset, dup.session_id, dup.copies)
            added = tuple(
                (cid, synthgen.PlantKind.DUPLICATE)
                for cid in synthgen.clone_ids(dup.session_id, dup.copies)
            )
            truth = synthgen.GroundTruth(affinity=truth.affinity, planted=truth.planted + added)
            dup_source = dup.session_id
        else:
            dataset, truth, dup_source = synthgen.plant_no_impact_duplicates(
                dataset, truth, copies=dup.copies, k=rc.harness.k,
                max_candidates=dup.max_candidates,
            )
    tox = rc.plants.toxic
    if tox is not None:
        dataset, truth = synthgen.plant_toxic_session(
            dataset, eval_log, truth, tox.rng_seed,
            k=rc.harness.k, retries=tox.retries, min_rel_gain=tox.min_rel_gain,
            vr_hyper=rc.hyper if tox.verify_vr else None, repeats=tox.repeats,
        )
        if dup is not None and dup_source is not None:
            if not synthgen.duplicates_still_no_impact(dataset, dup_source, dup.copies, rc.harness.k):
                raise SessionValueError(
                    "toxic plant invalidated the duplicate plant; change plant seeds"
                )
    return dataset, eval_log, truth, dup_source


@main.command()
@_common_options
@_wrap_errors
def synth(config_path: str, out_override: str | None, summary_mode: str) -> None:
    """Generate the synthetic dataset, eval log and ground truth."""
    rc, out_dir = _prepare(config_path, out_override)
    dataset, eval_log, truth, _ = synth_pipeline(rc)

    write_dataset(dataset, out_dir / "sessions.jsonl", out_dir / "catalog.jsonl")
    write_eval_log(eval_log, out_dir / "eval.jsonl")
    write_truth(truth, out_dir / "truth.json")

    mean_len = kpi.mean(s.length for s in dataset.sessions)
    summary = {
        "n_sessions": len(dataset.sessions),
        "n_products": len(dataset.catalog.products),
        "mean_session_length": mean_len,
        "n_eval_sessions": len(eval_log.sessions),
        "planted": [[sid, kind.value] for sid, kind in truth.planted],
        "out_dir": str(out_dir),
    }
    _emit_summary(summary_mode, summary, [
        f"sessions: {summary['n_sessions']}",
        f"products: {summary['n_products']}",
        f"mean session length: {mean_len:.3f}",
        f"eval sessions: {summary['n_eval_sessions']}",
        f"planted: {summary['planted']}",
        f"wrote sessions.jsonl catalog.jsonl eval.jsonl truth.json to {out_dir}",
    ])


@main.command()
@_common_options
@click.option("--engine", type=click.Choice(["cor", "vr"]), required=True)
@_wrap_errors
def train(config_path: str, out_override: str | None, summary_mode: str, engine: str) -> None:
    """Train one recommender and write its canonical model dump."""
    rc, out_dir = _prepare(config_path, out_override)
    dataset, _ = _load_data(rc, out_dir, need_eval=False)
    eng = _engine(rc, engine)
    model = eng.fit(dataset)
    filename = "cor_matrix.tsv" if engine == "cor" else "vr_model.txt"
    (out_dir / filename).write_bytes(eng.serialize(model))
    n_products = (
        len(model.session_membership) if engine == "cor" else len(model.vocabulary)
    )
    summary = {"engine": engine, "n_products": n_products, "model_file": str(out_dir / filename)}
    _emit_summary(summary_mode, summary, [f"{engine}: {n_products} products -> {out_dir / filename}"])


@main.command()
@_common_options
@click.option("--engine", type=click.Choice(["cor", "vr"]), required=True)
@_wrap_errors
def recommend(config_path: str, out_override: str | None, summary_mode: str, engine: str) -> None:
    """Write the top-k lists of every seed product as CSV."""
    rc, out_dir = _prepare(config_path, out_override)
    dataset, _ = _load_data(rc, out_dir, need_eval=False)
    eng = _engine(rc, engine)
    topk = eng.top_k_map(eng.fit(dataset))
    out_path = out_dir / f"recs_{engine}.csv"
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("seed", "rank", "product", "score"))
        for seed in sorted(topk):
            for rank, (product, score) in enumerate(topk[seed].items, start=1):
                writer.writerow((seed, rank, product, repr(score)))
    summary = {"engine": engine, "n_seeds": len(topk), "recs_file": str(out_path)}
    _emit_summary(summary_mode, summary, [f"{engine}: {len(topk)} seed lists -> {out_path}"])


@main.command()
@_common_options
@_wrap_errors
def stability(config_path: str, out_override: str | None, summary_mode: str) -> None:
    """Train each engine twice and verify byte-identical models (the stability gate)."""
    rc, out_dir = _prepare(config_path, out_override)
    dataset, _ = _load_data(rc, out_dir, need_eval=False)
    results = {}
    for name in ("cor", "vr"):
        report = sensitivity.verify_stability(dataset, _engine(rc, name))
        results[name] = {"stable": report.stable, "detail": report.detail}
    (out_dir / "stability.json").write_text(
        json.dumps(results, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _emit_summary(summary_mode, results, [
        f"{name}: {'PASS' if results[name]['stable'] else 'FAIL'}" for name in ("cor", "vr")
    ])
    if not all(r["stable"] for r in results.values()):
        raise click.ClickException("stability gate failed")


@main.command()
@_common_options
@click.option("--engine", type=click.Choice(["cor", "vr"]), required=True)
@click.option("--jobs", default=1, show_default=True, type=click.IntRange(min=1),
              help="Parallel delta retrains (vr only).")
@_wrap_errors
def value(config_path: str, out_override: str | None, summary_mode: str, engine: str, jobs: int) -> None:
    """Leave-one-out session valuation: records, histogram and summary files."""
    rc, out_dir = _prepare(config_path, out_override)
    dataset, eval_log = _load_data(rc, out_dir)
    sample = None
    if engine == "vr":
        sample = _resolve_sample(rc.harness.sample, dataset)
        if sample is None:
            if len(dataset.sessions) > rc.harness.vr_exhaustive_limit:
                raise click.ClickException(
                    f"exhaustive VR leave-one-out over {len(dataset.sessions)} sessions is not "
                    f"tractable (limit {rc.harness.vr_exhaustive_limit}); configure harness.sample"
                )
            sample = tuple(sorted(dataset.by_id))
    cfg = HarnessConfig(
        k=rc.harness.k,
        neutral_band=rc.harness.neutral_band,
        sample=sample,
        revenue_base=rc.harness.revenue_base,
    )
    if engine == "cor":
        records = sensitivity.run_cor_loo(dataset, eval_log, cfg)
    else:
        records = sensitivity.run_vr_loo(dataset, eval_log, cfg, rc.hyper, jobs=jobs)
    hist = sensitivity.histogram(records, rc.harness.bin_width, rc.harness.neutral_band)
    sensitivity.write_records_csv(records, out_dir / f"records_{engine}.csv")
    sensitivity.write_histogram_csv(hist, out_dir / f"histogram_{engine}.csv")
    summary = sensitivity.summarize(records)
    summary["engine"] = engine
    (out_dir / f"summary_{engine}.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    counts = summary["constellations"]
    _emit_summary(summary_mode, summary, [
        f"records: {summary['n_records']}",
        "constellations: " + " ".join(f"{name}={counts[name]}" for name in sorted(counts)),
        (
            "rel CR change: "
            f"min={summary['rel_cr_change']['min']:.6f} "
            f"mean={summary['rel_cr_change']['mean']:.6f} "
            f"max={summary['rel_cr_change']['max']:.6f}"
        ),
        f"wrote records_{engine}.csv histogram_{engine}.csv summary_{engine}.json to {out_dir}",
    ])


@main.command(name="lifecycle")
@_common_options
@_wrap_errors
def lifecycle_cmd(config_path: str, out_override: str | None, summary_mode: str) -> None:
    """Rolling-window CV trajectories and impact-class statistics."""
    rc, out_dir = _prepare(config_path, out_override)
    dataset, _ = _load_data(rc, out_dir, need_eval=False)
    trajs = lifecycle.trajectories(dataset, rc.lifecycle.plan, k=rc.lifecycle.k)
    stats = lifecycle.class_stats(trajs, dataset, hr_level=rc.lifecycle.hr_level)
    lifecycle.write_trajectories_csv(trajs, out_dir / "trajectories.csv")
    lifecycle.write_class_stats_csv(stats, out_dir / "lifecycle_stats.csv")
    summary = {
        "cohort_size": stats.cohort_size,
        "classes": {row.impact.value: row.n_sessions for row in stats.rows},
    }
    _emit_summary(summary_mode, summary, [
        f"cohort: {stats.cohort_size} sessions",
        "classes: " + " ".join(f"{row.impact.value}={row.n_sessions}" for row in stats.rows),
        f"wrote trajectories.csv lifecycle_stats.csv to {out_dir}",
    ])


@main.command(name="curve")
@_common_options
@click.option("--jobs", default=1, show_default=True, type=click.IntRange(min=1),
              help="Accepted for interface symmetry; grid entries run serially so "
                   "timing rows come from isolated calls.")
@click.option("--serial-timing", is_flag=True, default=False,
              help="Guarantee serially measured timings (always honored).")
@_wrap_errors
def curve_cmd(config_path: str, out_override: str | None, summary_mode: str,
              jobs: int, serial_timing: bool) -> None:
    """Learning-curve KPI table and feature-scaled plot data."""
    rc, out_dir = _prepare(config_path, out_override)
    if rc.curve is None:
        raise click.ClickException("config has no curve section (day_grid required)")
    dataset, eval_log = _load_data(rc, out_dir)
    end_day = rc.curve.end_day if rc.curve.end_day is not None else dataset.max_day
    plan = curve.CurvePlan(
        end_day=end_day,
        day_grid=rc.curve.day_grid,
        hyper=rc.hyper,
        k=rc.curve.k,
        correction_c=rc.curve.correction_c,
        unit_value=rc.curve.unit_value,
    )
    rows = curve.run_curve(dataset, eval_log, plan)
    curve.write_table_csv(rows, out_dir / "curve_table.csv")
    curve.write_curves_csv(curve.emit_curves(rows), out_dir / "curve_scaled.csv")
    summary = {
        "rows": [
            {
                "n_days": row.n_days,
                "n_sessions": row.report.n_sessions,
                "n_products": row.report.n_products,
                "snp": row.report.snp,
                "cr": row.report.cr,
            }
            for row in rows
        ]
    }
    _emit_summary(summary_mode, summary, [
        f"{row.n_days:>4} days: {row.report.n_sessions} sessions, "
        f"{row.report.n_products} products, snp={row.report.snp:.4f}, cr={row.report.cr:.6f}"
        for row in rows
    ] + [f"wrote curve_table.csv curve_scaled.csv to {out_dir}"])


if __name__ == "__main__":
    main()
