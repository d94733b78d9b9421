"""whykit: a question-driven explanation engine for tabular classifiers.

Ask a plain-language question about a trained model; the engine reframes it
into a typed, machine-readable form, routes it to the explainers registered
for that explanation type, scores their outputs, and renders a natural-
language answer whose every number traces back to a persisted artifact.
"""

__version__ = "0.1.0"

from .decompose import (
    BankEntry,
    PatternDecomposer,
    ReframedQuestion,
    evaluate_decomposition,
    generate_question_bank,
    load_bank,
    save_bank,
)
from .delegate import DelegateConfig, DelegateRun, delegate, load_run, parse_stats
from .errors import WhykitError
from .interp import (
    FeatureConstraint,
    FeatureGroup,
    ParsedInterpretation,
    parse_interpretation,
    serialize_interpretation,
)
from .registry import (
    ExplainerRegistration,
    ExplanationType,
    Registry,
    SynthesisTemplate,
    default_registry,
    load_registry,
    parse_registry,
    serialize_registry,
)
from .schema import DatasetSchema, FeatureSpec, OutcomeSpec, pima_csv_path, pima_schema
from .synthesis import ExplanationTuple, lexical_grounding_score, replay, synthesize
from .tabular import (
    DEFAULT_TRAIN_CONFIG,
    MODEL_KINDS,
    Dataset,
    TrainedModel,
    filter_records,
    load_dataset,
    load_model,
    save_model,
    train,
)

__all__ = [
    "__version__",
    "WhykitError",
    "BankEntry",
    "PatternDecomposer",
    "ReframedQuestion",
    "evaluate_decomposition",
    "generate_question_bank",
    "load_bank",
    "save_bank",
    "DelegateConfig",
    "DelegateRun",
    "delegate",
    "load_run",
    "parse_stats",
    "ExplanationTuple",
    "lexical_grounding_score",
    "replay",
    "synthesize",
    "DEFAULT_TRAIN_CONFIG",
    "MODEL_KINDS",
    "Dataset",
    "TrainedModel",
    "filter_records",
    "load_dataset",
    "load_model",
    "save_model",
    "train",
    "FeatureConstraint",
    "FeatureGroup",
    "ParsedInterpretation",
    "parse_interpretation",
    "serialize_interpretation",
    "ExplainerRegistration",
    "ExplanationType",
    "Registry",
    "SynthesisTemplate",
    "default_registry",
    "load_registry",
    "parse_registry",
    "serialize_registry",
    "DatasetSchema",
    "FeatureSpec",
    "OutcomeSpec",
    "pima_csv_path",
    "pima_schema",
]
