"""Quality metrics for explainer outputs, grouped by output modality.

Feature attributions: faithfulness (Pearson correlation between attribution
values and single-feature deletion effects) and monotonicity (Spearman rank
correlation between absolute attributions and expected perturbation losses,
average ranks on ties).  Rules: fidelity (agreement of the first-covering-
rule prediction with the model, abstentions counting as disagreement) and
average rule length.  Instance sets: diversity (mean pairwise Euclidean
distance) and non-representativeness (squared maximum mean discrepancy
against a reference set under an RBF kernel).

Correlation on a constant vector has no defined value; those cases raise
DegenerateVariance so callers report the metric as undefined rather than 0.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .errors import (
    DegenerateVariance,
    EmptyRuleSet,
    TooFewInstances,
)
from .explainers.rules import RuleSet, first_cover_predict
from .kernels import pairwise_sq_dists, rbf_kernel, resolve_bandwidth


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size or a.size < 2:
        raise DegenerateVariance("correlation needs two aligned vectors of size >= 2")
    da, db = a - a.mean(), b - b.mean()
    na, nb = np.sqrt((da * da).sum()), np.sqrt((db * db).sum())
    if na == 0 or nb == 0:
        raise DegenerateVariance("a constant vector has no defined correlation")
    return float((da * db).sum() / (na * nb))


def faithfulness(
    predict_fn,
    phi: np.ndarray,
    x: np.ndarray,
    background: np.ndarray,
) -> float:
    """Pearson correlation between attributions and deletion effects.

    The deletion effect of feature i is f(x) minus the prediction with
    feature i set to the background median, matching the perturbation that
    defines the attribution's coalition value.
    """
    x = np.asarray(x, dtype=float).ravel()
    d = x.size
    base = np.median(np.atleast_2d(background), axis=0)
    perturbed = np.tile(x, (d, 1))
    perturbed[np.arange(d), np.arange(d)] = base
    rows = np.vstack([x[None, :], perturbed])
    preds = np.asarray(predict_fn(rows), dtype=float).ravel()
    deltas = preds[0] - preds[1:]
    return _pearson(phi, deltas)


def expectation_vector(predict_fn, x: np.ndarray, background: np.ndarray) -> np.ndarray:
    """Per-feature expected loss under the same single-feature perturbation
    scheme as faithfulness, with squared output deviation as the loss."""
    x = np.asarray(x, dtype=float).ravel()
    d = x.size
    base = np.median(np.atleast_2d(background), axis=0)
    perturbed = np.tile(x, (d, 1))
    perturbed[np.arange(d), np.arange(d)] = base
    rows = np.vstack([x[None, :], perturbed])
    preds = np.asarray(predict_fn(rows), dtype=float).ravel()
    return (preds[0] - preds[1:]) ** 2


def monotonicity(phi: np.ndarray, expectations: np.ndarray) -> float:
    """Spearman rank correlation between |attributions| and expected losses."""
    a = np.abs(np.asarray(phi, dtype=float).ravel())
    e = np.asarray(expectations, dtype=float).ravel()
    return _pearson(rankdata(a), rankdata(e))


def fidelity(ruleset: RuleSet, predict_fn, X: np.ndarray) -> float:
    """Fraction of rows where the first-covering rule agrees with the model."""
    X = np.atleast_2d(X)
    if len(ruleset) == 0:
        raise EmptyRuleSet("cannot score an empty rule set")
    rule_labels = first_cover_predict(ruleset, X)
    model_labels = (np.asarray(predict_fn(X), dtype=float).ravel() >= 0.5).astype(int)
    return float(np.mean(rule_labels == model_labels))


def average_rule_length(ruleset: RuleSet) -> float:
    if len(ruleset) == 0:
        raise EmptyRuleSet("an empty rule set has no average length")
    return float(np.mean([len(r) for r in ruleset.rules]))


def diversity(X: np.ndarray) -> float:
    """Mean pairwise Euclidean distance between instances."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[0]
    if n < 2:
        raise TooFewInstances(f"diversity needs >= 2 instances, got {n}")
    d = np.sqrt(pairwise_sq_dists(X, X))
    return float(d[np.triu_indices(n, k=1)].mean())


def non_representativeness(
    X: np.ndarray, Y: np.ndarray, bandwidth: float | str = "median"
) -> float:
    """Squared maximum mean discrepancy between a selected set X and a
    reference set Y under an RBF kernel (biased V-statistic, so identical
    sets score exactly 0)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    sigma = resolve_bandwidth(np.vstack([X, Y]), bandwidth)
    kxx = rbf_kernel(X, X, sigma).mean()
    kyy = rbf_kernel(Y, Y, sigma).mean()
    kxy = rbf_kernel(X, Y, sigma).mean()
    return float(kxx + kyy - 2.0 * kxy)


METRIC_IDS = (
    "faithfulness",
    "monotonicity",
    "fidelity",
    "average_rule_length",
    "diversity",
    "non_representativeness",
)
