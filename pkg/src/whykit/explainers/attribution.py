"""Shapley-value feature attribution.

The coalition value v(S) is the model's positive-class probability for the
explained instance with every feature outside S replaced by the background
median.  Exact mode enumerates all 2^d coalitions (d capped); sampled mode
averages marginal contributions over seeded random permutations and reports
a standard error per feature.  Positive values push toward the positive
class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import FeatureLimitExceeded

EXACT_FEATURE_CAP = 12


@dataclass
class AttributionResult:
    feature_names: list[str]
    phi: np.ndarray
    baseline: float  # v(empty set): prediction at the all-background point
    fx: float  # prediction at the explained instance
    mode: str  # exact | sampled
    n_samples: int = 0
    stderr: np.ndarray | None = None

    def ranked(self) -> list[int]:
        """Feature indices by |phi| descending, ties in feature order."""
        order = sorted(range(len(self.phi)), key=lambda i: (-abs(self.phi[i]), i))
        return order


def _background_point(background: np.ndarray) -> np.ndarray:
    background = np.atleast_2d(background)
    return np.median(background, axis=0)


def exact_shapley(
    predict_fn,
    x: np.ndarray,
    background: np.ndarray,
    feature_names: list[str] | None = None,
) -> AttributionResult:
    """Exact Shapley values by full coalition enumeration."""
    x = np.asarray(x, dtype=float).ravel()
    d = x.size
    if d > EXACT_FEATURE_CAP:
        raise FeatureLimitExceeded(
            f"exact attribution enumerates 2^d coalitions; {d} features exceed "
            f"the cap of {EXACT_FEATURE_CAP} (use sampled mode)"
        )
    base = _background_point(background)

    n_masks = 1 << d
    rows = np.tile(base, (n_masks, 1))
    for mask in range(n_masks):
        for i in range(d):
            if mask >> i & 1:
                rows[mask, i] = x[i]
    values = np.asarray(predict_fn(rows), dtype=float).ravel()

    fact = [math.factorial(i) for i in range(d + 1)]
    dfact = fact[d]
    weights = [fact[s] * fact[d - s - 1] / dfact for s in range(d)]

    phi = np.zeros(d)
    for mask in range(n_masks):
        s = bin(mask).count("1")
        for i in range(d):
            if mask >> i & 1:
                continue
            phi[i] += weights[s] * (values[mask | (1 << i)] - values[mask])

    return AttributionResult(
        feature_names=list(feature_names or [f"x{i}" for i in range(d)]),
        phi=phi,
        baseline=float(values[0]),
        fx=float(values[n_masks - 1]),
        mode="exact",
    )


def sampled_shapley(
    predict_fn,
    x: np.ndarray,
    background: np.ndarray,
    n_permutations: int = 200,
    seed: int = 0,
    feature_names: list[str] | None = None,
) -> AttributionResult:
    """Monte-Carlo Shapley values over seeded feature permutations."""
    x = np.asarray(x, dtype=float).ravel()
    d = x.size
    base = _background_point(background)
    rng = np.random.default_rng(seed)

    # One batch: for every permutation, the d+1 prefix points.
    rows = np.empty((n_permutations * (d + 1), d))
    perms = np.empty((n_permutations, d), dtype=int)
    for p in range(n_permutations):
        perm = rng.permutation(d)
        perms[p] = perm
        cur = base.copy()
        rows[p * (d + 1)] = cur
        for step, i in enumerate(perm, start=1):
            cur = cur.copy()
            cur[i] = x[i]
            rows[p * (d + 1) + step] = cur
    values = np.asarray(predict_fn(rows), dtype=float).ravel()

    contrib = np.zeros((n_permutations, d))
    for p in range(n_permutations):
        block = values[p * (d + 1) : (p + 1) * (d + 1)]
        deltas = np.diff(block)
        contrib[p, perms[p]] = deltas
    phi = contrib.mean(axis=0)
    stderr = contrib.std(axis=0, ddof=1) / math.sqrt(n_permutations)

    return AttributionResult(
        feature_names=list(feature_names or [f"x{i}" for i in range(d)]),
        phi=phi,
        baseline=float(values[0]),
        fx=float(values[d]),
        mode="sampled",
        n_samples=n_permutations,
        stderr=stderr,
    )
