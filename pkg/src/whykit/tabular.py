"""Tabular data handling and from-scratch classifiers.

Covers loading a CSV against a schema (with zero-imputation by nonzero
column medians), seeded train/test splitting, three classifier kinds
(logistic regression by accelerated gradient descent, a Gini decision tree
with midpoint thresholds, and a bootstrap random forest), evaluation into a
single-confusion-matrix report, and constraint-based record filtering with
a closest-match fallback.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    EmptyDataset,
    ImputationError,
    NoFeasibleRecord,
    SchemaMismatch,
    SingleClassData,
    UnknownModelKind,
)
from .interp import FeatureGroup
from .schema import DatasetSchema

# -- dataset ------------------------------------------------------------------


@dataclass
class Dataset:
    schema: DatasetSchema
    feature_names: list[str]  # numeric model features, schema order
    X: np.ndarray  # (n, len(feature_names)) float
    y: np.ndarray | None  # (n,) int in {0, 1}, None if no outcome column
    categorical: dict[str, np.ndarray] = field(default_factory=dict)
    imputation_log: list[dict] = field(default_factory=list)
    content_hash: str = ""

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def column(self, name: str) -> np.ndarray:
        spec = self.schema.resolve(name)
        if spec.name in self.categorical:
            return self.categorical[spec.name]
        return self.X[:, self.feature_names.index(spec.name)]

    def row_dict(self, i: int) -> dict:
        out = {name: float(self.X[i, j]) for j, name in enumerate(self.feature_names)}
        for name, col in self.categorical.items():
            out[name] = str(col[i])
        if self.y is not None:
            out[self.schema.outcome.name] = int(self.y[i])
        return out

    def outcome_label(self, value: int) -> str:
        o = self.schema.outcome
        return o.positive_label if value == 1 else o.negative_label

    def feature_ranges(self) -> tuple[np.ndarray, np.ndarray]:
        return self.X.min(axis=0), self.X.max(axis=0)


def load_dataset(
    source: str | Path,
    schema: DatasetSchema,
    impute: bool = True,
) -> Dataset:
    """Load a CSV file (or CSV text) against a schema.

    Columns marked ``impute_zero`` get zeros replaced by the median of the
    column's nonzero entries; each replacement batch is logged.
    """
    text = None
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        path = Path(source)
        if not path.exists():
            raise SchemaMismatch(f"no such CSV file: {source}")
        text = path.read_text()
    else:
        text = source

    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyDataset("CSV has no header row") from None
    header = [h.strip() for h in header]

    expected = [f.name for f in schema.column_features]
    has_outcome = schema.outcome.name in header
    wanted = expected + ([schema.outcome.name] if has_outcome else [])
    missing = [c for c in wanted if c not in header]
    extra = [c for c in header if c not in wanted]
    if missing or extra:
        raise SchemaMismatch(
            "CSV header does not match schema",
            {"missing": missing, "unexpected": extra},
        )

    rows = [r for r in reader if r and any(cell.strip() for cell in r)]
    if not rows:
        raise EmptyDataset("CSV has a header but no data rows")

    col_idx = {name: header.index(name) for name in header}
    numeric_specs = [f for f in schema.column_features if f.is_numeric]
    cat_specs = [f for f in schema.column_features if not f.is_numeric]

    X = np.empty((len(rows), len(numeric_specs)), dtype=float)
    for j, spec in enumerate(numeric_specs):
        idx = col_idx[spec.name]
        try:
            X[:, j] = [float(r[idx]) for r in rows]
        except (ValueError, IndexError) as exc:
            raise SchemaMismatch(
                f"non-numeric value in column {spec.name!r}: {exc}"
            ) from None

    categorical = {
        spec.name: np.array([r[col_idx[spec.name]].strip() for r in rows], dtype=object)
        for spec in cat_specs
    }

    y = None
    if has_outcome:
        idx = col_idx[schema.outcome.name]
        try:
            y = np.array([int(float(r[idx])) for r in rows], dtype=int)
        except ValueError as exc:
            raise SchemaMismatch(f"non-numeric outcome value: {exc}") from None
        if not set(np.unique(y)) <= {0, 1}:
            raise SchemaMismatch("outcome column must be binary 0/1")

    log: list[dict] = []
    if impute:
        for j, spec in enumerate(numeric_specs):
            if not spec.impute_zero:
                continue
            col = X[:, j]
            zero = col == 0
            if not zero.any():
                continue
            nonzero = col[~zero]
            if nonzero.size == 0:
                raise ImputationError(
                    f"column {spec.name!r} has no nonzero entries to take a median of"
                )
            fill = float(np.median(nonzero))
            col[zero] = fill
            log.append(
                {"column": spec.name, "count": int(zero.sum()), "fill": fill}
            )

    digest = hashlib.sha256()
    digest.update(text.encode())
    digest.update(json.dumps(schema.to_dict(), sort_keys=True).encode())
    return Dataset(
        schema=schema,
        feature_names=[f.name for f in numeric_specs],
        X=X,
        y=y,
        categorical=categorical,
        imputation_log=log,
        content_hash=digest.hexdigest()[:12],
    )


def train_test_split(
    dataset: Dataset, ratio: float = 0.8, seed: int = 0, stratify: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded index split; stratified keeps class shares equal across sides."""
    rng = np.random.default_rng(seed)
    n = dataset.n
    if not stratify or dataset.y is None:
        order = rng.permutation(n)
        cut = int(round(n * ratio))
        return np.sort(order[:cut]), np.sort(order[cut:])
    train_parts, test_parts = [], []
    for cls in (0, 1):
        idx = np.flatnonzero(dataset.y == cls)
        order = rng.permutation(idx.size)
        cut = int(round(idx.size * ratio))
        train_parts.append(idx[order[:cut]])
        test_parts.append(idx[order[cut:]])
    return (
        np.sort(np.concatenate(train_parts)),
        np.sort(np.concatenate(test_parts)),
    )


# -- logistic regression ------------------------------------------------------


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss_grad(
    w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float = 0.0
) -> tuple[float, np.ndarray, float]:
    """Mean log-loss and its analytic gradient (weights and bias)."""
    z = X @ w + b
    p = _sigmoid(z)
    eps = 1e-12
    loss = float(-np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps)))
    loss += 0.5 * l2 * float(w @ w)
    r = p - y
    gw = X.T @ r / X.shape[0] + l2 * w
    gb = float(np.mean(r))
    return loss, gw, gb


def gradient_check(
    X: np.ndarray, y: np.ndarray, w: np.ndarray, b: float,
    l2: float = 0.0, eps: float = 1e-5,
) -> float:
    """Relative error of the analytic gradient vs central finite differences."""
    _, gw, gb = logistic_loss_grad(w, b, X, y, l2)
    num = np.empty(w.size + 1)
    for i in range(w.size):
        wp, wm = w.copy(), w.copy()
        wp[i] += eps
        wm[i] -= eps
        lp, _, _ = logistic_loss_grad(wp, b, X, y, l2)
        lm, _, _ = logistic_loss_grad(wm, b, X, y, l2)
        num[i] = (lp - lm) / (2 * eps)
    lp, _, _ = logistic_loss_grad(w, b + eps, X, y, l2)
    lm, _, _ = logistic_loss_grad(w, b - eps, X, y, l2)
    num[-1] = (lp - lm) / (2 * eps)
    ana = np.append(gw, gb)
    return float(
        np.linalg.norm(ana - num) / max(np.linalg.norm(ana) + np.linalg.norm(num), 1e-12)
    )


class LogisticModel:
    """Binary logistic regression, standardized internally, trained by
    Nesterov-accelerated gradient descent to a gradient-norm tolerance."""

    kind = "logistic"

    def __init__(self):
        self.w: np.ndarray | None = None
        self.b: float = 0.0
        self.mu: np.ndarray | None = None
        self.sigma: np.ndarray | None = None
        self.l2 = 0.0
        self.warnings: list[str] = []
        self.n_iter = 0

    def fit(
        self,
        X: np.ndarray,
        y: np.ndarray,
        max_iter: int = 20000,
        tol: float = 1e-6,
        l2: float = 0.0,
    ) -> "LogisticModel":
        self.mu = X.mean(axis=0)
        self.sigma = X.std(axis=0)
        self.sigma[self.sigma == 0] = 1.0
        Xs = (X - self.mu) / self.sigma
        self.l2 = l2

        n, d = Xs.shape
        # Lipschitz bound of the mean log-loss gradient: lambda_max(X'X)/(4n).
        sq = Xs.T @ Xs / n
        lam = float(np.linalg.eigvalsh(sq).max())
        step = 1.0 / (lam / 4.0 + l2 + 1e-12)

        w = np.zeros(d)
        b = 0.0
        vw, vb = w.copy(), b
        t_prev = 1.0
        loss_prev = math.inf
        for it in range(1, max_iter + 1):
            loss, gw, gb = logistic_loss_grad(vw, vb, Xs, y, l2)
            grad_norm = math.sqrt(float(gw @ gw) + gb * gb)
            if grad_norm < tol:
                w, b = vw - step * gw, vb - step * gb
                self.n_iter = it
                break
            w_next = vw - step * gw
            b_next = vb - step * gb
            t_next = (1.0 + math.sqrt(1.0 + 4.0 * t_prev**2)) / 2.0
            beta = (t_prev - 1.0) / t_next
            vw = w_next + beta * (w_next - w)
            vb = b_next + beta * (b_next - b)
            if loss > loss_prev:  # restart momentum when it overshoots
                vw, vb = w_next, b_next
                t_next = 1.0
            w, b = w_next, b_next
            t_prev = t_next
            loss_prev = loss
            self.n_iter = it
        else:
            _, gw, gb = logistic_loss_grad(w, b, Xs, y, l2)
            grad_norm = math.sqrt(float(gw @ gw) + gb * gb)
            if grad_norm >= tol:
                self.warnings.append(
                    f"did not converge: gradient norm {grad_norm:.3e} after "
                    f"{max_iter} iterations"
                )
        self.w, self.b = w, float(b)
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        Xs = (X - self.mu) / self.sigma
        return _sigmoid(Xs @ self.w + self.b)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(int)

    @property
    def coefficients(self) -> tuple[np.ndarray, float]:
        """Weights and intercept mapped back to original feature units."""
        w = self.w / self.sigma
        b = self.b - float((self.w * self.mu / self.sigma).sum())
        return w, b

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "w": self.w.tolist(),
            "b": self.b,
            "mu": self.mu.tolist(),
            "sigma": self.sigma.tolist(),
            "l2": self.l2,
            "n_iter": self.n_iter,
            "warnings": self.warnings,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LogisticModel":
        m = cls()
        m.w = np.array(doc["w"], dtype=float)
        m.b = float(doc["b"])
        m.mu = np.array(doc["mu"], dtype=float)
        m.sigma = np.array(doc["sigma"], dtype=float)
        m.l2 = float(doc.get("l2", 0.0))
        m.n_iter = int(doc.get("n_iter", 0))
        m.warnings = list(doc.get("warnings", ()))
        return m


# -- decision tree ------------------------------------------------------------


def _gini(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - (p * p).sum())


def _grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    depth: int,
    max_depth: int,
    min_leaf: int,
    rng: np.random.Generator | None,
    max_features: int | None,
) -> dict:
    counts = np.array([(y == 0).sum(), (y == 1).sum()], dtype=float)
    node = {"n": int(y.size)}
    if (
        depth >= max_depth
        or y.size < 2 * min_leaf
        or counts[0] == 0
        or counts[1] == 0
    ):
        node["leaf"] = [int(counts[0]), int(counts[1])]
        return node

    d = X.shape[1]
    if max_features is not None and max_features < d:
        feats = np.sort(rng.choice(d, size=max_features, replace=False))
    else:
        feats = np.arange(d)

    parent = _gini(counts)
    best = None  # (gain, feature, threshold)
    for j in feats:
        order = np.argsort(X[:, j], kind="stable")
        xs, ys = X[order, j], y[order]
        ones = np.cumsum(ys)
        total_ones = ones[-1]
        n = ys.size
        # candidate split after position i (1-based left size); thresholds
        # are midpoints of adjacent distinct sorted values
        for i in range(min_leaf, n - min_leaf + 1):
            if i < n and xs[i - 1] == xs[i]:
                continue
            if i == n:
                continue
            nl, nr = i, n - i
            ones_l = ones[i - 1]
            ones_r = total_ones - ones_l
            gl = _gini(np.array([nl - ones_l, ones_l], dtype=float))
            gr = _gini(np.array([nr - ones_r, ones_r], dtype=float))
            gain = parent - (nl / n) * gl - (nr / n) * gr
            if gain > 1e-12 and (best is None or gain > best[0] + 1e-15):
                thr = (xs[i - 1] + xs[i]) / 2.0
                best = (gain, int(j), float(thr))

    if best is None:
        node["leaf"] = [int(counts[0]), int(counts[1])]
        return node

    _, j, thr = best
    left_mask = X[:, j] < thr
    node["feature"] = j
    node["threshold"] = thr
    node["left"] = _grow_tree(
        X[left_mask], y[left_mask], depth + 1, max_depth, min_leaf, rng, max_features
    )
    node["right"] = _grow_tree(
        X[~left_mask], y[~left_mask], depth + 1, max_depth, min_leaf, rng, max_features
    )
    return node


def _tree_proba_one(node: dict, x: np.ndarray) -> float:
    while "leaf" not in node:
        node = node["left"] if x[node["feature"]] < node["threshold"] else node["right"]
    neg, pos = node["leaf"]
    total = neg + pos
    return pos / total if total else 0.5


class DecisionTreeModel:
    """CART-style binary classification tree using Gini impurity.

    Split predicate is ``x < threshold`` (left) vs ``x >= threshold``
    (right); thresholds sit at midpoints of adjacent distinct sorted values,
    so every root-to-leaf path induces half-open feature intervals.
    """

    kind = "tree"

    def __init__(self):
        self.root: dict | None = None
        self.max_depth = 0
        self.min_leaf = 0
        self.warnings: list[str] = []

    def fit(
        self,
        X: np.ndarray,
        y: np.ndarray,
        max_depth: int = 4,
        min_leaf: int = 5,
        rng: np.random.Generator | None = None,
        max_features: int | None = None,
    ) -> "DecisionTreeModel":
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.root = _grow_tree(X, y, 0, max_depth, min_leaf, rng, max_features)
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.array([_tree_proba_one(self.root, x) for x in X])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(int)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "root": self.root,
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "warnings": self.warnings,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DecisionTreeModel":
        m = cls()
        m.root = doc["root"]
        m.max_depth = int(doc.get("max_depth", 0))
        m.min_leaf = int(doc.get("min_leaf", 0))
        m.warnings = list(doc.get("warnings", ()))
        return m


class RandomForestModel:
    """Bootstrap ensemble of Gini trees, sqrt(d) features per split."""

    kind = "forest"

    def __init__(self):
        self.trees: list[DecisionTreeModel] = []
        self.seed = 0
        self.warnings: list[str] = []

    def fit(
        self,
        X: np.ndarray,
        y: np.ndarray,
        n_trees: int = 50,
        max_depth: int = 8,
        min_leaf: int = 2,
        seed: int = 0,
    ) -> "RandomForestModel":
        self.seed = seed
        self.trees = []
        n, d = X.shape
        max_features = max(1, int(round(math.sqrt(d))))
        rng = np.random.default_rng(seed)
        for _ in range(n_trees):
            idx = rng.integers(0, n, size=n)
            tree = DecisionTreeModel().fit(
                X[idx],
                y[idx],
                max_depth=max_depth,
                min_leaf=min_leaf,
                rng=rng,
                max_features=max_features,
            )
            self.trees.append(tree)
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.mean([t.predict_proba(X) for t in self.trees], axis=0)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(int)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "trees": [t.to_dict() for t in self.trees],
            "warnings": self.warnings,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RandomForestModel":
        m = cls()
        m.seed = int(doc.get("seed", 0))
        m.trees = [DecisionTreeModel.from_dict(t) for t in doc["trees"]]
        m.warnings = list(doc.get("warnings", ()))
        return m


# -- evaluation ---------------------------------------------------------------


@dataclass
class ModelReport:
    """Quality numbers derived from one held-out confusion matrix.

    precision/recall/f1 are support-weighted averages over both classes;
    sensitivity is the positive-class recall and specificity the
    negative-class recall.
    """

    precision: float
    recall: float
    f1: float
    sensitivity: float
    specificity: float
    accuracy: float
    confusion: dict
    support: dict
    train_seconds: float = 0.0

    def to_dict(self) -> dict:
        # train_seconds is deliberately left out: persisted artifacts and the
        # ids hashed from them must not vary run to run on identical inputs.
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "accuracy": self.accuracy,
            "confusion": self.confusion,
            "support": self.support,
        }


def train_tree_on_labels(
    X: np.ndarray, labels: np.ndarray, max_depth: int = 3, min_leaf: int = 5
) -> DecisionTreeModel:
    """Fit a tree straight to given labels, e.g. to distill another model."""
    return DecisionTreeModel().fit(
        np.atleast_2d(X), np.asarray(labels, dtype=int), max_depth, min_leaf
    )


def evaluate(y_true: np.ndarray, y_pred: np.ndarray) -> ModelReport:
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    tp = int(((y_true == 1) & (y_pred == 1)).sum())
    fn = int(((y_true == 1) & (y_pred == 0)).sum())
    tn = int(((y_true == 0) & (y_pred == 0)).sum())
    fp = int(((y_true == 0) & (y_pred == 1)).sum())
    n_pos, n_neg = tp + fn, tn + fp
    n = n_pos + n_neg

    def safe(a: float, b: float) -> float:
        return a / b if b else 0.0

    prec_pos = safe(tp, tp + fp)
    prec_neg = safe(tn, tn + fn)
    rec_pos = safe(tp, n_pos)
    rec_neg = safe(tn, n_neg)
    f1_pos = safe(2 * prec_pos * rec_pos, prec_pos + rec_pos)
    f1_neg = safe(2 * prec_neg * rec_neg, prec_neg + rec_neg)

    def weighted(pos: float, neg: float) -> float:
        return safe(n_pos * pos + n_neg * neg, n)

    return ModelReport(
        precision=weighted(prec_pos, prec_neg),
        recall=weighted(rec_pos, rec_neg),
        f1=weighted(f1_pos, f1_neg),
        sensitivity=rec_pos,
        specificity=rec_neg,
        accuracy=safe(tp + tn, n),
        confusion={"tp": tp, "fp": fp, "tn": tn, "fn": fn},
        support={"positive": n_pos, "negative": n_neg},
    )


# -- training entry point -----------------------------------------------------

MODEL_KINDS = ("logistic", "tree", "forest")

DEFAULT_TRAIN_CONFIG = {
    "split_ratio": 0.8,
    "seed": 8,
    "stratify": True,
    # logistic
    "max_iter": 20000,
    "tol": 1e-6,
    "l2": 0.0,
    # tree
    "max_depth": 4,
    "min_leaf": 5,
    # forest
    "n_trees": 50,
    "forest_max_depth": 8,
    "forest_min_leaf": 2,
}


@dataclass
class TrainedModel:
    kind: str
    model: LogisticModel | DecisionTreeModel | RandomForestModel
    report: ModelReport
    config: dict
    feature_names: list[str]
    dataset_hash: str
    model_id: str = ""

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.model.predict_proba(X)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.model.predict(X)

    @property
    def warnings(self) -> list[str]:
        return self.model.warnings

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "model": self.model.to_dict(),
            "report": self.report.to_dict(),
            "config": self.config,
            "feature_names": self.feature_names,
            "dataset_hash": self.dataset_hash,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainedModel":
        kind = doc["kind"]
        model_cls = {
            "logistic": LogisticModel,
            "tree": DecisionTreeModel,
            "forest": RandomForestModel,
        }[kind]
        rep = doc["report"]
        report = ModelReport(
            precision=rep["precision"],
            recall=rep["recall"],
            f1=rep["f1"],
            sensitivity=rep["sensitivity"],
            specificity=rep["specificity"],
            accuracy=rep["accuracy"],
            confusion=rep["confusion"],
            support=rep["support"],
            train_seconds=rep.get("train_seconds", 0.0),
        )
        obj = cls(
            kind=kind,
            model=model_cls.from_dict(doc["model"]),
            report=report,
            config=doc.get("config", {}),
            feature_names=list(doc["feature_names"]),
            dataset_hash=doc.get("dataset_hash", ""),
        )
        obj.model_id = _model_hash(obj.to_dict())
        return obj


def _model_hash(doc: dict) -> str:
    blob = json.dumps(doc, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def train(dataset: Dataset, kind: str, config: dict | None = None) -> TrainedModel:
    """Train one model kind on a seeded split and evaluate the held-out side."""
    if kind not in MODEL_KINDS:
        raise UnknownModelKind(
            f"unknown model kind {kind!r}", {"known": list(MODEL_KINDS)}
        )
    if dataset.y is None:
        raise SchemaMismatch("dataset has no outcome column; nothing to train on")
    cfg = dict(DEFAULT_TRAIN_CONFIG)
    cfg.update(config or {})

    train_idx, test_idx = train_test_split(
        dataset, ratio=cfg["split_ratio"], seed=cfg["seed"], stratify=cfg["stratify"]
    )
    Xtr, ytr = dataset.X[train_idx], dataset.y[train_idx]
    Xte, yte = dataset.X[test_idx], dataset.y[test_idx]
    if np.unique(ytr).size < 2:
        raise SingleClassData("training split contains a single outcome class")

    t0 = time.perf_counter()
    if kind == "logistic":
        model = LogisticModel().fit(
            Xtr, ytr, max_iter=cfg["max_iter"], tol=cfg["tol"], l2=cfg["l2"]
        )
    elif kind == "tree":
        model = DecisionTreeModel().fit(
            Xtr, ytr, max_depth=cfg["max_depth"], min_leaf=cfg["min_leaf"]
        )
    else:
        model = RandomForestModel().fit(
            Xtr,
            ytr,
            n_trees=cfg["n_trees"],
            max_depth=cfg["forest_max_depth"],
            min_leaf=cfg["forest_min_leaf"],
            seed=cfg["seed"],
        )
    elapsed = time.perf_counter() - t0

    report = evaluate(yte, model.predict(Xte)) if yte.size else evaluate(ytr, model.predict(Xtr))
    report.train_seconds = round(elapsed, 4)
    trained = TrainedModel(
        kind=kind,
        model=model,
        report=report,
        config=cfg,
        feature_names=list(dataset.feature_names),
        dataset_hash=dataset.content_hash,
    )
    trained.model_id = _model_hash(trained.to_dict())
    return trained


def save_model(trained: TrainedModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(trained.to_dict(), sort_keys=True, indent=1) + "\n")


def load_model(path: str | Path) -> TrainedModel:
    with open(path) as fh:
        return TrainedModel.from_dict(json.load(fh))


# -- record filtering ---------------------------------------------------------


@dataclass
class RecordSet:
    """Rows selected for a feature group, exactly or by closest match."""

    indices: np.ndarray
    exact: bool
    distances: np.ndarray | None = None
    deviations: list[dict] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return int(self.indices.size)


HARD_OPS = ("lt", "gt", "le", "ge", "range")


def filter_records(
    dataset: Dataset,
    group: FeatureGroup,
    k: int = 5,
    eq_tol: float = 1e-9,
) -> RecordSet:
    """Select records satisfying a group's constraints.

    All constraints satisfied exactly -> the exact rows, in dataset order.
    Otherwise inequality/interval/categorical constraints stay hard and
    numeric equalities soften into a per-feature normalized absolute
    deviation; the k closest feasible rows are returned flagged approximate.
    Constraints on mention-only features cannot restrict rows and are
    skipped (recorded). Raises NoFeasibleRecord when the hard constraints
    alone exclude every record.
    """
    n = dataset.n
    applicable = []
    skipped = []
    for c in group:
        spec = dataset.schema.resolve(c.feature)
        if spec.mention_only:
            skipped.append(c.render())
        else:
            applicable.append(c)

    if not applicable:
        return RecordSet(indices=np.arange(n), exact=True, skipped=skipped)

    def mask_of(c) -> np.ndarray:
        col = dataset.column(c.feature)
        if isinstance(c.value, str) or (
            c.op == "eq" and dataset.schema.resolve(c.feature).type == "categorical"
        ):
            want = str(c.value).casefold()
            return np.array([str(v).casefold() == want for v in col])
        if c.op == "range":
            return (col >= c.low) & (col < c.high)
        if c.op == "eq":
            return np.abs(col - c.value) <= eq_tol
        if c.op == "lt":
            return col < c.value
        if c.op == "gt":
            return col > c.value
        if c.op == "le":
            return col <= c.value
        return col >= c.value

    exact_mask = np.ones(n, dtype=bool)
    for c in applicable:
        exact_mask &= mask_of(c)
    if exact_mask.any():
        return RecordSet(
            indices=np.flatnonzero(exact_mask), exact=True, skipped=skipped
        )

    hard = [c for c in applicable if c.op in HARD_OPS or isinstance(c.value, str)]
    soft = [c for c in applicable if c not in hard]
    feasible_mask = np.ones(n, dtype=bool)
    for c in hard:
        feasible_mask &= mask_of(c)
    feasible = np.flatnonzero(feasible_mask)
    if feasible.size == 0:
        raise NoFeasibleRecord(
            "no record satisfies the hard constraints",
            {"constraints": [c.render() for c in hard]},
        )
    if not soft:
        raise NoFeasibleRecord(
            "constraints admit no record and none can be softened",
            {"constraints": [c.render() for c in applicable]},
        )

    lo, hi = dataset.feature_ranges()
    span = {
        name: float(hi[j] - lo[j]) or 1.0
        for j, name in enumerate(dataset.feature_names)
    }
    dist = np.zeros(feasible.size)
    for c in soft:
        col = dataset.column(c.feature)[feasible]
        dist += np.abs(col - c.value) / span[c.feature]
    dist /= len(soft)

    order = np.lexsort((feasible, dist))[: max(1, k)]
    chosen = feasible[order]
    deviations = []
    for i in chosen:
        deviations.append(
            {
                c.feature: abs(float(dataset.column(c.feature)[i]) - float(c.value))
                for c in soft
            }
        )
    return RecordSet(
        indices=chosen,
        exact=False,
        distances=dist[order],
        deviations=deviations,
        skipped=skipped,
    )
