"""Explainer implementations, one module per output modality."""

from .attribution import (
    EXACT_FEATURE_CAP,
    AttributionResult,
    exact_shapley,
    sampled_shapley,
)
from .counterfactual import Counterfactual, CounterfactualResult, search_counterfactuals
from .prototypes import PrototypeResult, select_prototypes
from .rules import Rule, RuleSet, extract_rules, first_cover_predict
from .summary import DataSummaryResult, FeatureStats, summarize

__all__ = [
    "EXACT_FEATURE_CAP",
    "AttributionResult",
    "exact_shapley",
    "sampled_shapley",
    "Counterfactual",
    "CounterfactualResult",
    "search_counterfactuals",
    "PrototypeResult",
    "select_prototypes",
    "Rule",
    "RuleSet",
    "extract_rules",
    "first_cover_predict",
    "DataSummaryResult",
    "FeatureStats",
    "summarize",
]
