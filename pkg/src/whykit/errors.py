"""Error types shared across the package.

Every error carries a stable ``code`` (its class name) so the service layer
can map it onto a structured JSON body without string matching.
"""

from __future__ import annotations


class WhykitError(Exception):
    """Base class for all package errors."""

    #: HTTP status the service layer maps this error onto.
    http_status = 400

    def __init__(self, message: str, detail: dict | None = None):
        super().__init__(message)
        self.message = message
        self.detail = detail or {}

    @property
    def code(self) -> str:
        return type(self).__name__

    def to_json(self) -> dict:
        return {"code": self.code, "message": self.message, "detail": self.detail}


# -- dataset / schema ----------------------------------------------------

class SchemaMismatch(WhykitError):
    """CSV header or value types do not match the declared schema."""


class EmptyDataset(WhykitError):
    """A dataset with zero data rows."""


class UnknownDataset(WhykitError):
    """Dataset id with nothing stored under it."""
    http_status = 404


class ImputationError(WhykitError):
    """A column marked for zero-imputation has no nonzero entries."""


class UnknownFeature(WhykitError):
    """A feature name that resolves to nothing in the schema."""
    http_status = 404


# -- model training ------------------------------------------------------

class SingleClassData(WhykitError):
    """Training split contains only one outcome class."""
    http_status = 409


class UnknownModelKind(WhykitError):
    """Requested model kind is not one of the supported kinds."""


# -- parsing -------------------------------------------------------------

class UnusableParse(WhykitError):
    """Machine interpretation text the grammar cannot make sense of."""
    http_status = 422


# -- registry ------------------------------------------------------------

class RegistryFormatError(WhykitError):
    """Registry document that violates the registry schema."""


class UnknownExplanationType(WhykitError):
    """Explanation type id absent from the registry."""
    http_status = 404


class UnsupportedExplanationType(WhykitError):
    """Explanation type registered with zero explainers."""
    http_status = 200  # surfaced as a warning, not a failure


# -- record filtering ----------------------------------------------------

class NoFeasibleRecord(WhykitError):
    """Hard constraints that no record can satisfy."""
    http_status = 404


# -- explainers ----------------------------------------------------------

class FeatureLimitExceeded(WhykitError):
    """Exact attribution asked for more features than the subset budget."""


class NoCounterfactualFound(WhykitError):
    """Search budget exhausted without a single label flip."""
    http_status = 404


class InvalidBandwidth(WhykitError):
    """Kernel bandwidth that is zero, negative, or not derivable."""


# -- metrics -------------------------------------------------------------

class DegenerateVariance(WhykitError):
    """Correlation asked for on a constant vector; reported as undefined."""


class TooFewInstances(WhykitError):
    """Pairwise-distance metric on fewer than two instances."""


class EmptyRuleSet(WhykitError):
    """Rule metric on a rule set with no rules."""


# -- delegate / synthesis ------------------------------------------------

class UnknownRun(WhykitError):
    """Run id with no persisted run directory."""
    http_status = 404


class NoOutputs(WhykitError):
    """Synthesis over a run that produced no usable explainer outputs."""


class TemplateSlotUnfillable(WhykitError):
    """Template slot whose modality has no ranked outputs to draw from."""


class EndpointError(WhykitError):
    """Remote text-generation endpoint unreachable or misbehaving."""
    http_status = 502
