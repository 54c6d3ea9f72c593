"""Session-level data valuation for item-to-item recommenders.

Train a co-occurrence recommender and a deterministic embedding recommender
on clickstream sessions, measure decision quality via a hypothetic conversion
rate, and price individual sessions by exact leave-one-out sensitivity
analysis, including impact-lifecycle and learning-curve studies.
"""

from .corpus import (
    Catalog,
    ClickEvent,
    Dataset,
    DeltaDataset,
    EvalLog,
    EvalSession,
    Session,
    heterogeneity_ratio,
    leave_one_out,
    load_dataset,
    sessionize,
    slice_days,
)
from .cor import CoocMatrix, RecommendationList, all_top_k, build_matrix, remove_session, top_k
from .embed import EmbeddingModel, Hyperparams, Vocabulary, all_top_k_similar, top_k_similar, train
from .kpi import KpiReport, PairCounts, aggregate_pairs, conversion_rate, feature_scale, snp
from .sensitivity import (
    Constellation,
    HarnessConfig,
    OutputDiff,
    SensitivityRecord,
    classify,
    diff_topk,
    histogram,
    relative_cr_change,
    run_cor_loo,
    run_vr_loo,
    session_value,
    verify_stability,
)
from .synthgen import GenConfig, GroundTruth, PlantKind, generate, plant_duplicate_sessions, plant_toxic_session

__version__ = "0.1.0"
