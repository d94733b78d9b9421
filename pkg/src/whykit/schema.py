"""Dataset schema: feature declarations, aliases, and outcome labels.

A schema is the shared vocabulary between the question decomposer, the
interpretation parser, and the tabular data loader.  Features may be marked
``mention_only``: they are recognized in questions and interpretations
(e.g. a demographic the cohort does not record as a column) but are not
expected in the CSV and cannot restrict records.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import UnknownFeature


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    type: str = "numeric"  # numeric | categorical
    unit: str = ""
    precision: int = 2  # decimals used when sampling question values
    aliases: tuple[str, ...] = ()
    impute_zero: bool = False
    mention_only: bool = False
    sample_range: tuple[float, float] | None = None
    categories: tuple[str, ...] = ()

    @property
    def is_numeric(self) -> bool:
        return self.type == "numeric"


@dataclass(frozen=True)
class OutcomeSpec:
    name: str
    positive_label: str
    negative_label: str
    aliases: tuple[str, ...] = ()


@dataclass
class DatasetSchema:
    name: str
    features: list[FeatureSpec]
    outcome: OutcomeSpec
    description: str = ""
    _by_key: dict[str, FeatureSpec] = field(init=False, repr=False)

    def __post_init__(self):
        self._by_key = {}
        for spec in self.features:
            for key in (spec.name, *spec.aliases):
                self._by_key[_norm(key)] = spec

    # -- lookups ----------------------------------------------------------

    def resolve(self, name_or_alias: str) -> FeatureSpec:
        """Map a feature name or alias to its spec; raise UnknownFeature otherwise."""
        spec = self._by_key.get(_norm(name_or_alias))
        if spec is None:
            raise UnknownFeature(
                f"unknown feature {name_or_alias!r}",
                {"known": [f.name for f in self.features]},
            )
        return spec

    def try_resolve(self, name_or_alias: str) -> FeatureSpec | None:
        return self._by_key.get(_norm(name_or_alias))

    def is_outcome_label(self, token: str) -> bool:
        t = _norm(token)
        return t in {
            _norm(self.outcome.positive_label),
            _norm(self.outcome.negative_label),
            *(_norm(a) for a in self.outcome.aliases),
        }

    @property
    def column_features(self) -> list[FeatureSpec]:
        """Features expected as CSV columns (mention-only excluded)."""
        return [f for f in self.features if not f.mention_only]

    @property
    def numeric_features(self) -> list[FeatureSpec]:
        return [f for f in self.column_features if f.is_numeric]

    def unit_of(self, feature_name: str) -> str:
        spec = self.try_resolve(feature_name)
        return spec.unit if spec else ""

    # -- serialization ----------------------------------------------------

    @classmethod
    def from_dict(cls, doc: dict) -> "DatasetSchema":
        feats = []
        for f in doc["features"]:
            rng = f.get("sample_range")
            feats.append(
                FeatureSpec(
                    name=f["name"],
                    type=f.get("type", "numeric"),
                    unit=f.get("unit", ""),
                    precision=int(f.get("precision", 2)),
                    aliases=tuple(f.get("aliases", ())),
                    impute_zero=bool(f.get("impute_zero", False)),
                    mention_only=bool(f.get("mention_only", False)),
                    sample_range=tuple(rng) if rng else None,
                    categories=tuple(f.get("categories", ())),
                )
            )
        o = doc["outcome"]
        outcome = OutcomeSpec(
            name=o["name"],
            positive_label=o["positive_label"],
            negative_label=o["negative_label"],
            aliases=tuple(o.get("aliases", ())),
        )
        return cls(
            name=doc.get("name", "dataset"),
            features=feats,
            outcome=outcome,
            description=doc.get("description", ""),
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "outcome": {
                "name": self.outcome.name,
                "positive_label": self.outcome.positive_label,
                "negative_label": self.outcome.negative_label,
                "aliases": list(self.outcome.aliases),
            },
            "features": [
                {
                    "name": f.name,
                    "type": f.type,
                    "unit": f.unit,
                    "precision": f.precision,
                    "aliases": list(f.aliases),
                    "impute_zero": f.impute_zero,
                    "mention_only": f.mention_only,
                    "sample_range": list(f.sample_range) if f.sample_range else None,
                    "categories": list(f.categories),
                }
                for f in self.features
            ],
        }

    @classmethod
    def load(cls, path: str | Path) -> "DatasetSchema":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def _norm(s: str) -> str:
    return " ".join(s.lower().split())


def bundled_path(filename: str) -> Path:
    """Path of a data file shipped inside the package."""
    return Path(str(resources.files("whykit").joinpath("data", filename)))


def pima_schema() -> DatasetSchema:
    return DatasetSchema.load(bundled_path("pima_schema.json"))


def pima_csv_path() -> Path:
    return bundled_path("pima.csv")
