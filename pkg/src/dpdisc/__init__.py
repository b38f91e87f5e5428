"""Differentially private discretization for synthetic tabular data.

Domain extraction, four discretizers (uniform, quantile, k-means, PrivTree),
inverse sampling, bin-count rules, a Laplace-histogram synthesizer, utility
metrics and a membership-inference harness.
"""
from .attacks import AttackScore, ShadowGameConfig, TargetRecord, auc, run_shadow_game, select_target, target_at
from .binsel import BinCount, BinRule, bins_rice_opt, select_bins
from .discretizers import BinnedColumn, BinSpec, BinStrategy, decode_mixture, decode_uniform, encode, fit_discretizer
from .domain import Domain, DomainSource, extract_domain_dp, extract_domain_raw
from .estimators import DPDiscretizer, fit_column
from .generator import DPHistogramSynthesizer, PipelineConfig, SyntheticDataset, pipeline_run
from .mechanisms import BudgetLedger, PrivacyBudget, SeededRng, geometric_noise, laplace_noise
from .metrics import MetricReport, aggregate

__version__ = "0.1.0"

__all__ = [
    "AttackScore",
    "BinCount",
    "BinRule",
    "BinSpec",
    "BinStrategy",
    "BinnedColumn",
    "BudgetLedger",
    "DPDiscretizer",
    "DPHistogramSynthesizer",
    "Domain",
    "DomainSource",
    "MetricReport",
    "PipelineConfig",
    "PrivacyBudget",
    "SeededRng",
    "ShadowGameConfig",
    "SyntheticDataset",
    "TargetRecord",
    "aggregate",
    "auc",
    "bins_rice_opt",
    "decode_mixture",
    "decode_uniform",
    "encode",
    "extract_domain_dp",
    "extract_domain_raw",
    "fit_column",
    "fit_discretizer",
    "geometric_noise",
    "laplace_noise",
    "pipeline_run",
    "run_shadow_game",
    "select_bins",
    "select_target",
    "target_at",
]
