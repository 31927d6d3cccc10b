"""Mis/disinformation prevalence estimation with sampling, annotation,
retrieval and joint uncertainty."""

from misprev.labels import (
    EMPTY_KEYWORD,
    AnalysisUnit,
    AnnotatedPost,
    GroupedCounts,
    LabelCategory,
    LabelGroup,
    Platform,
    PrevalenceDefinition,
    count_groups,
    effective_label,
    group_label,
)
from misprev.stats import (
    PercentileSummary,
    RandomStream,
    WilsonInterval,
    derive_substream,
    multinomial_draw,
    percentile_summary,
    prevalence,
    wilson_interval,
)
from misprev.ingest import Corpus, Provenance, parse_corpus, preprocess, slice_by_unit, load_corpus
from misprev.annotation import ReferenceMatrix, build_reference_matrix, simulate_annotation
from misprev.retrieval import KeywordPool, bootstrap_retrieval, keyword_pool
from misprev.joint import estimate_joint
from misprev.report import EstimateReport, EstimationParams, emit_report, export_distribution, run_estimation

__version__ = "0.1.0"

__all__ = [
    "EMPTY_KEYWORD",
    "AnalysisUnit",
    "AnnotatedPost",
    "Corpus",
    "EstimateReport",
    "EstimationParams",
    "GroupedCounts",
    "KeywordPool",
    "LabelCategory",
    "LabelGroup",
    "PercentileSummary",
    "Platform",
    "PrevalenceDefinition",
    "Provenance",
    "RandomStream",
    "ReferenceMatrix",
    "WilsonInterval",
    "bootstrap_retrieval",
    "build_reference_matrix",
    "count_groups",
    "derive_substream",
    "effective_label",
    "emit_report",
    "estimate_joint",
    "export_distribution",
    "group_label",
    "keyword_pool",
    "load_corpus",
    "multinomial_draw",
    "parse_corpus",
    "percentile_summary",
    "preprocess",
    "prevalence",
    "run_estimation",
    "simulate_annotation",
    "slice_by_unit",
    "wilson_interval",
]
