"""Descriptive summary of a record set: per-feature statistics and class
balance.  An empty selection yields a zero-count summary with undefined
(None) statistics rather than an error."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..tabular import Dataset


@dataclass
class FeatureStats:
    name: str
    count: int
    mean: float | None
    sd: float | None  # population standard deviation
    min: float | None
    max: float | None

    def to_dict(self) -> dict:
        return {
            "feature": self.name,
            "count": self.count,
            "mean": self.mean,
            "sd": self.sd,
            "min": self.min,
            "max": self.max,
        }


@dataclass
class DataSummaryResult:
    n: int
    stats: list[FeatureStats]
    class_balance: dict[str, int] | None = None
    category_counts: dict[str, dict[str, int]] = field(default_factory=dict)


def summarize(dataset: Dataset, indices: np.ndarray | None = None) -> DataSummaryResult:
    idx = np.arange(dataset.n) if indices is None else np.asarray(indices, dtype=int)
    stats = []
    for j, name in enumerate(dataset.feature_names):
        col = dataset.X[idx, j]
        if col.size == 0:
            stats.append(FeatureStats(name, 0, None, None, None, None))
        else:
            stats.append(
                FeatureStats(
                    name=name,
                    count=int(col.size),
                    mean=float(col.mean()),
                    sd=float(col.std()),
                    min=float(col.min()),
                    max=float(col.max()),
                )
            )

    balance = None
    if dataset.y is not None:
        yy = dataset.y[idx]
        balance = {
            dataset.outcome_label(1): int((yy == 1).sum()),
            dataset.outcome_label(0): int((yy == 0).sum()),
        }

    cat_counts: dict[str, dict[str, int]] = {}
    for name, col in dataset.categorical.items():
        vals, counts = np.unique(col[idx], return_counts=True)
        cat_counts[name] = {str(v): int(c) for v, c in zip(vals, counts)}

    return DataSummaryResult(
        n=int(idx.size), stats=stats, class_balance=balance, category_counts=cat_counts
    )
