"""Rule extraction from decision trees.

One rule per root-to-leaf path.  With simplification on, the conditions a
path imposes on one feature merge into a single half-open interval, so each
feature appears at most once per rule; the rule's length is its condition
count after that merge.  Coverage is counted on supplied reference rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..interp import FeatureConstraint
from ..tabular import DecisionTreeModel


@dataclass(frozen=True)
class Rule:
    conditions: tuple[FeatureConstraint, ...]
    label: int
    coverage: int = 0
    support: tuple[int, int] = (0, 0)  # (negatives, positives) among covered

    def __len__(self) -> int:
        return len(self.conditions)

    def covers(self, x: np.ndarray, feature_index: dict[str, int]) -> bool:
        return all(c.satisfied(x[feature_index[c.feature]]) for c in self.conditions)

    def render(self, outcome_name: str = "label") -> str:
        if self.conditions:
            ante = " AND ".join(c.render() for c in self.conditions)
        else:
            ante = "TRUE"
        return f"IF {ante} THEN {outcome_name} = {{{self.label}}}"


@dataclass
class RuleSet:
    rules: list[Rule]
    feature_names: list[str]
    source: str = "tree"
    surrogate: bool = False
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self._index = {name: j for j, name in enumerate(self.feature_names)}

    def __len__(self) -> int:
        return len(self.rules)

    @property
    def feature_index(self) -> dict[str, int]:
        return self._index

    def by_coverage(self) -> list[Rule]:
        """Rules in coverage-descending order, stable for ties."""
        return sorted(self.rules, key=lambda r: -r.coverage)


def extract_rules(
    tree: DecisionTreeModel,
    feature_names: list[str],
    X: np.ndarray | None = None,
    y: np.ndarray | None = None,
    simplify: bool = True,
    source: str = "tree",
    surrogate: bool = False,
) -> RuleSet:
    """Turn every root-to-leaf path of a fitted tree into a rule."""
    rules: list[Rule] = []

    def walk(node: dict, path: list[tuple[int, str, float]]):
        if "leaf" in node:
            neg, pos = node["leaf"]
            label = 1 if pos >= neg else 0  # ties go positive, same as predict()
            conditions = _conditions_from_path(path, feature_names, simplify)
            rules.append(Rule(conditions=tuple(conditions), label=label))
            return
        j, thr = node["feature"], node["threshold"]
        walk(node["left"], path + [(j, "lt", thr)])
        walk(node["right"], path + [(j, "ge", thr)])

    walk(tree.root, [])

    if X is not None:
        X = np.atleast_2d(X)
        index = {name: j for j, name in enumerate(feature_names)}
        with_cov = []
        for rule in rules:
            mask = np.ones(X.shape[0], dtype=bool)
            for c in rule.conditions:
                col = X[:, index[c.feature]]
                if c.op == "range":
                    mask &= (col >= c.low) & (col < c.high)
                elif c.op == "lt":
                    mask &= col < c.value
                else:
                    mask &= col >= c.value
            coverage = int(mask.sum())
            support = (0, 0)
            if y is not None:
                yy = np.asarray(y)[mask]
                support = (int((yy == 0).sum()), int((yy == 1).sum()))
            with_cov.append(
                Rule(
                    conditions=rule.conditions,
                    label=rule.label,
                    coverage=coverage,
                    support=support,
                )
            )
        rules = with_cov

    return RuleSet(
        rules=rules, feature_names=list(feature_names), source=source, surrogate=surrogate
    )


def _conditions_from_path(
    path: list[tuple[int, str, float]], feature_names: list[str], simplify: bool
) -> list[FeatureConstraint]:
    if not simplify:
        return [
            FeatureConstraint(feature_names[j], op, value=thr) for j, op, thr in path
        ]
    bounds: dict[int, list[float]] = {}
    order: list[int] = []
    for j, op, thr in path:
        if j not in bounds:
            bounds[j] = [-math.inf, math.inf]
            order.append(j)
        if op == "lt":  # went left: feature < thr
            bounds[j][1] = min(bounds[j][1], thr)
        else:  # went right: feature >= thr
            bounds[j][0] = max(bounds[j][0], thr)
    return [
        FeatureConstraint(feature_names[j], "range", low=bounds[j][0], high=bounds[j][1])
        for j in order
    ]


def first_cover_predict(ruleset: RuleSet, X: np.ndarray) -> np.ndarray:
    """Label each row by its first covering rule in coverage-descending
    order; -1 marks abstention (no rule covers the row)."""
    X = np.atleast_2d(X)
    ordered = ruleset.by_coverage()
    out = np.full(X.shape[0], -1, dtype=int)
    for i, x in enumerate(X):
        for rule in ordered:
            if rule.covers(x, ruleset.feature_index):
                out[i] = rule.label
                break
    return out
