from __future__ import annotations

from pathlib import Path

import pytest

from sessionvalue.cli import synth_pipeline
from sessionvalue.config import load_run_config

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
BENCHMARK_CONFIG = CONFIG_DIR / "benchmark.yaml"
SMOKE_CONFIG = CONFIG_DIR / "smoke.yaml"


@pytest.fixture(scope="session")
def benchmark_rc():
    return load_run_config(BENCHMARK_CONFIG)


@pytest.fixture(scope="session")
def benchmark_data(benchmark_rc):
    """The pinned benchmark fixture: generated data plus oracle-verified plants."""
    dataset, eval_log, truth, dup_source = synth_pipeline(benchmark_rc)
    return dataset, eval_log, truth, dup_source
