"""Explainer correctness against independent re-implementations.

The additive-attribution oracle below computes Shapley values by averaging
marginal contributions over all feature permutations; the library enumerates
coalitions with combinatorial weights. Agreement between the two routes is
the point of the comparison.
"""

import itertools
import math

import numpy as np
import pytest

from whykit.errors import (
    FeatureLimitExceeded,
    InvalidBandwidth,
    NoCounterfactualFound,
)
from whykit.explainers import (
    EXACT_FEATURE_CAP,
    exact_shapley,
    extract_rules,
    first_cover_predict,
    sampled_shapley,
    search_counterfactuals,
    select_prototypes,
    summarize,
)
from whykit.kernels import median_bandwidth, rbf_kernel, resolve_bandwidth
from whykit.tabular import DecisionTreeModel


# -- oracle: permutation-average Shapley ----------------------------------------


def _oracle_shapley(f, x, background):
    """Average marginal contribution over all d! feature orderings."""
    base = np.median(np.atleast_2d(background), axis=0)
    d = x.size

    cache = {}

    def value(subset: frozenset) -> float:
        if subset not in cache:
            z = base.copy()
            for i in subset:
                z[i] = x[i]
            cache[subset] = float(np.asarray(f(z[None, :])).ravel()[0])
        return cache[subset]

    phi = np.zeros(d)
    perms = list(itertools.permutations(range(d)))
    for perm in perms:
        seen = frozenset()
        for i in perm:
            with_i = seen | {i}
            phi[i] += value(with_i) - value(seen)
            seen = with_i
    return phi / len(perms)


def _random_model(rng, d):
    a = rng.normal(size=d)
    b = rng.normal(size=d)
    c = float(rng.normal() * 0.5)

    def f(X):
        X = np.atleast_2d(X)
        z = X @ a + c * (X @ b) ** 2
        return 1.0 / (1.0 + np.exp(-z))

    return f


def test_exact_attribution_matches_permutation_oracle():
    rng = np.random.default_rng(123)
    for _ in range(20):
        d = int(rng.integers(2, 5))
        f = _random_model(rng, d)
        x = rng.normal(size=d)
        background = rng.normal(size=(25, d))
        result = exact_shapley(f, x, background)
        oracle = _oracle_shapley(f, x, background)
        np.testing.assert_allclose(result.phi, oracle, atol=1e-8)
        # efficiency: contributions account exactly for baseline-to-output gap
        assert abs(result.phi.sum() - (result.fx - result.baseline)) < 1e-10


def test_dummy_feature_gets_zero_attribution():
    def f(X):
        X = np.atleast_2d(X)
        return np.tanh(X[:, 0] - 2.0 * X[:, 2])  # ignores feature 1

    rng = np.random.default_rng(5)
    result = exact_shapley(f, rng.normal(size=3), rng.normal(size=(20, 3)))
    assert abs(result.phi[1]) < 1e-12


def test_symmetric_features_get_equal_attribution():
    def f(X):
        X = np.atleast_2d(X)
        return np.tanh(X[:, 0] + X[:, 1])  # interchangeable inputs

    x = np.array([0.7, 0.7, -1.0])
    background = np.zeros((5, 3))  # identical background for both features
    result = exact_shapley(f, x, background)
    assert result.phi[0] == pytest.approx(result.phi[1], abs=1e-12)


def test_attribution_is_linear_in_the_model():
    rng = np.random.default_rng(11)
    d = 4
    f = _random_model(rng, d)
    g = _random_model(rng, d)
    x = rng.normal(size=d)
    bg = rng.normal(size=(15, d))

    def fg(X):
        return f(X) + g(X)

    phi_sum = exact_shapley(f, x, bg).phi + exact_shapley(g, x, bg).phi
    np.testing.assert_allclose(exact_shapley(fg, x, bg).phi, phi_sum, atol=1e-10)


def test_exact_attribution_enforces_feature_cap():
    d = EXACT_FEATURE_CAP + 1
    with pytest.raises(FeatureLimitExceeded):
        exact_shapley(lambda X: np.zeros(len(np.atleast_2d(X))), np.zeros(d), np.zeros((3, d)))


def test_sampled_attribution_tracks_exact():
    rng = np.random.default_rng(7)
    for _ in range(5):
        d = 6
        f = _random_model(rng, d)
        x = rng.normal(size=d)
        bg = rng.normal(size=(30, d))
        ex = exact_shapley(f, x, bg)
        sa = sampled_shapley(f, x, bg, n_permutations=400, seed=3)
        assert float(np.max(np.abs(ex.phi - sa.phi))) < 0.03
        assert sa.mode == "sampled" and ex.mode == "exact"
        assert sa.stderr is not None and np.all(sa.stderr >= 0.0)
        assert abs(sa.phi.sum() - (sa.fx - sa.baseline)) < 1e-10


def test_sampled_attribution_is_seeded():
    rng = np.random.default_rng(2)
    f = _random_model(rng, 5)
    x = rng.normal(size=5)
    bg = rng.normal(size=(10, 5))
    a = sampled_shapley(f, x, bg, n_permutations=50, seed=9)
    b = sampled_shapley(f, x, bg, n_permutations=50, seed=9)
    np.testing.assert_array_equal(a.phi, b.phi)


def test_ranked_orders_by_magnitude_with_stable_ties():
    from whykit.explainers import AttributionResult

    res = AttributionResult(
        feature_names=["a", "b", "c", "d"],
        phi=np.array([0.1, -0.5, 0.5, 0.0]),
        baseline=0.0,
        fx=0.1,
        mode="exact",
    )
    assert res.ranked() == [1, 2, 0, 3]


# -- prototype selection ---------------------------------------------------------


def test_first_prototype_maximizes_mean_similarity():
    # Independent check with an inline kernel: the first pick must be the
    # candidate with the highest mean RBF similarity to the target set.
    rng = np.random.default_rng(4)
    X = rng.normal(size=(12, 3))
    Y = rng.normal(size=(8, 3))
    sigma = median_bandwidth(np.vstack([X, Y]))
    mu = [
        sum(math.exp(-sum((xi - yj) ** 2) / (2 * sigma**2)) for yj in Y) / len(Y)
        for xi in X
    ]
    res = select_prototypes(X, Y, m=4)
    assert res.indices[0] == int(np.argmax(mu))
    assert res.bandwidth == pytest.approx(sigma)


def test_prototype_objective_is_monotone_and_weights_nonnegative():
    rng = np.random.default_rng(10)
    X = rng.normal(size=(30, 4))
    res = select_prototypes(X, X, m=6)
    assert len(res.indices) == len(set(res.indices)) <= 6
    assert np.all(res.weights >= 0.0)
    assert all(b >= a - 1e-12 for a, b in zip(res.objective, res.objective[1:]))


def test_prototypes_cover_both_clusters():
    rng = np.random.default_rng(0)
    lo = rng.normal(0.0, 0.05, size=(5, 2))
    hi = rng.normal(5.0, 0.05, size=(5, 2)) + np.array([0.0, 5.0])
    X = np.vstack([lo, hi])
    res = select_prototypes(X, X, m=2)
    assert {int(i >= 5) for i in res.indices} == {0, 1}
    # a balanced target set earns roughly equal cluster weights
    assert res.weights[0] == pytest.approx(res.weights[1], abs=0.05)


def test_prototype_edge_sizes():
    X = np.arange(6.0).reshape(3, 2)
    assert select_prototypes(X, X, m=0).indices == []
    assert len(select_prototypes(X, X, m=10).indices) <= 3


def test_bandwidth_resolution():
    Z = np.array([[0.0, 0.0], [3.0, 4.0]])
    assert median_bandwidth(Z) == pytest.approx(5.0)
    assert resolve_bandwidth(Z, 2.0) == 2.0
    with pytest.raises(InvalidBandwidth):
        resolve_bandwidth(Z, -1.0)
    with pytest.raises(InvalidBandwidth):
        resolve_bandwidth(Z, "mean")
    with pytest.raises(InvalidBandwidth):
        median_bandwidth(np.zeros((4, 2)))
    with pytest.raises(InvalidBandwidth):
        rbf_kernel(Z, Z, 0.0)


def test_rbf_kernel_hand_value():
    A = np.array([[0.0, 0.0]])
    B = np.array([[3.0, 4.0]])
    # squared distance 25, bandwidth 5 -> exp(-25 / 50)
    assert rbf_kernel(A, B, 5.0)[0, 0] == pytest.approx(math.exp(-0.5))


# -- rule extraction -------------------------------------------------------------


def _manual_tree(root: dict) -> DecisionTreeModel:
    m = DecisionTreeModel()
    m.root = root
    return m


def test_path_conditions_merge_into_intervals():
    root = {
        "n": 12,
        "feature": 0,
        "threshold": 2.0,
        "left": {"n": 5, "leaf": [5, 0]},
        "right": {
            "n": 7,
            "feature": 0,
            "threshold": 5.0,
            "left": {"n": 4, "leaf": [0, 4]},
            "right": {"n": 3, "leaf": [2, 1]},
        },
    }
    rs = extract_rules(_manual_tree(root), ["x0"])
    assert len(rs.rules) == 3
    low_rule, mid_rule, high_rule = rs.rules
    (c,) = mid_rule.conditions
    assert (c.op, c.low, c.high) == ("range", 2.0, 5.0)
    assert mid_rule.label == 1
    (c,) = low_rule.conditions
    assert (c.low, c.high) == (-math.inf, 2.0)
    assert low_rule.label == 0
    assert high_rule.label == 0  # 2 negatives vs 1 positive


def test_tied_leaf_labels_match_tree_prediction():
    tree = _manual_tree({"n": 6, "leaf": [3, 3]})
    rs = extract_rules(tree, ["x0"])
    assert len(rs.rules) == 1
    assert rs.rules[0].label == 1
    assert rs.rules[0].conditions == ()
    assert tree.predict(np.array([[0.0]]))[0] == 1
    assert rs.rules[0].render("Outcome") == "IF TRUE THEN Outcome = {1}"


def test_coverage_and_support_counts(dataset, tree_model):
    rs = extract_rules(
        tree_model.model, dataset.feature_names, X=dataset.X, y=dataset.y
    )
    assert sum(r.coverage for r in rs.rules) == dataset.n  # leaves partition rows
    for rule in rs.rules:
        mask = np.array(
            [rule.covers(x, rs.feature_index) for x in dataset.X], dtype=bool
        )
        assert rule.coverage == int(mask.sum())
        neg, pos = rule.support
        assert neg == int((dataset.y[mask] == 0).sum())
        assert pos == int((dataset.y[mask] == 1).sum())


def test_rules_reproduce_their_tree_exactly(dataset, tree_model):
    rs = extract_rules(tree_model.model, dataset.feature_names, X=dataset.X)
    preds = first_cover_predict(rs, dataset.X)
    assert not np.any(preds == -1)
    np.testing.assert_array_equal(preds, tree_model.predict(dataset.X))


def test_by_coverage_orders_descending(dataset, tree_model):
    rs = extract_rules(tree_model.model, dataset.feature_names, X=dataset.X)
    covs = [r.coverage for r in rs.by_coverage()]
    assert covs == sorted(covs, reverse=True)


def test_unsimplified_rules_keep_raw_path():
    root = {
        "n": 12,
        "feature": 0,
        "threshold": 2.0,
        "left": {"n": 5, "leaf": [5, 0]},
        "right": {
            "n": 7,
            "feature": 0,
            "threshold": 5.0,
            "left": {"n": 4, "leaf": [0, 4]},
            "right": {"n": 3, "leaf": [2, 1]},
        },
    }
    rs = extract_rules(_manual_tree(root), ["x0"], simplify=False)
    mid = rs.rules[1]
    assert [(c.op, c.value) for c in mid.conditions] == [("ge", 2.0), ("lt", 5.0)]


# -- counterfactual search --------------------------------------------------------


def test_counterfactuals_flip_and_respect_immutables(dataset, logistic_model):
    lo, hi = dataset.feature_ranges()
    x = dataset.X[0]  # predicted positive
    age = dataset.feature_names.index("Age")
    res = search_counterfactuals(
        logistic_model.predict_proba, x, lo, hi, k=4, immutable=(age,), seed=1
    )
    assert res.original_label == 1
    assert 1 <= len(res.candidates) <= 4
    for cand in res.candidates:
        p = float(logistic_model.predict_proba(cand.x[None, :])[0])
        assert int(p >= 0.5) != res.original_label
        assert cand.x[age] == x[age]
        assert age not in cand.changed
        assert 0.0 <= cand.proximity <= 1.0
        for j, (before, after) in cand.changed.items():
            assert before == pytest.approx(x[j])
            assert after == pytest.approx(cand.x[j])
            assert lo[j] <= after <= hi[j]
    proxs = [c.proximity for c in res.candidates]
    assert proxs == sorted(proxs)


def test_counterfactual_search_is_seeded(dataset, logistic_model):
    lo, hi = dataset.feature_ranges()
    x = dataset.X[2]
    a = search_counterfactuals(logistic_model.predict_proba, x, lo, hi, k=3, seed=7)
    b = search_counterfactuals(logistic_model.predict_proba, x, lo, hi, k=3, seed=7)
    assert len(a.candidates) == len(b.candidates)
    for ca, cb in zip(a.candidates, b.candidates):
        np.testing.assert_array_equal(ca.x, cb.x)


def test_counterfactual_failure_modes():
    lo, hi = np.zeros(2), np.ones(2)
    with pytest.raises(NoCounterfactualFound, match="immutable"):
        search_counterfactuals(
            lambda X: np.full(len(np.atleast_2d(X)), 0.9),
            np.array([0.5, 0.5]),
            lo,
            hi,
            immutable=(0, 1),
        )
    with pytest.raises(NoCounterfactualFound) as exc:
        search_counterfactuals(
            lambda X: np.full(len(np.atleast_2d(X)), 0.9),
            np.array([0.5, 0.5]),
            lo,
            hi,
            restarts=2,
            max_evals=50,
        )
    assert "best_margin" in (exc.value.detail or {})


def test_counterfactual_candidates_are_distinct(dataset, logistic_model):
    lo, hi = dataset.feature_ranges()
    res = search_counterfactuals(
        logistic_model.predict_proba, dataset.X[0], lo, hi, k=4, seed=0
    )
    keys = {tuple(np.round(c.x, 9)) for c in res.candidates}
    assert len(keys) == len(res.candidates)


# -- data summaries ---------------------------------------------------------------


def test_summary_matches_independent_stats(dataset):
    res = summarize(dataset)
    assert res.n == 768
    assert res.class_balance == {"Diabetes": 268, "No Diabetes": 500}
    glucose = next(s for s in res.stats if s.name == "Glucose")
    col = dataset.column("Glucose")
    assert glucose.count == 768
    assert glucose.mean == pytest.approx(float(col.mean()))
    assert glucose.sd == pytest.approx(float(col.std()))
    assert glucose.min == pytest.approx(float(col.min()))
    assert glucose.max == pytest.approx(float(col.max()))


def test_summary_over_subset(dataset):
    idx = np.array([0, 1, 2])
    res = summarize(dataset, idx)
    assert res.n == 3
    age = next(s for s in res.stats if s.name == "Age")
    assert age.mean == pytest.approx(float(dataset.X[idx, 7].mean()))
    assert sum(res.class_balance.values()) == 3


def test_summary_of_nothing(dataset):
    res = summarize(dataset, np.array([], dtype=int))
    assert res.n == 0
    assert all(s.count == 0 and s.mean is None for s in res.stats)
    assert res.class_balance == {"Diabetes": 0, "No Diabetes": 0}
