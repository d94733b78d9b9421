"""Delegate engine: route a reframed question to the registered explainers.

The flow per run: parse the machine interpretation, look the explanation
type up in the registry, select matching dataset records per constraint
group, execute every registered explainer for the type, score each output
with the metrics bound to its modality, and persist the whole run under a
unique directory.

A type with no registered explainers produces a run record carrying a
warning instead of a failure.  Explainer and metric errors are isolated:
one failing explainer does not abort the others, and a failing metric is
recorded as null with a note.

Run layout on disk::

    <runs_root>/<run_id>/
        run.json                          whole run record
        tuple.json                        final explanation (added by callers)
        <type>_<explainer>_<utc ts>-<n>/  one directory per executed explainer
            output.csv                    primary artifact rows
            config.json                   explainer parameters
            metrics.json                  metric values and notes
            provenance.json               question, model, dataset lineage

Run ids embed a process-wide counter, so concurrent runs never collide.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import metrics as metrics_mod
from .decompose import BankEntry, ReframedQuestion
from .errors import (
    NoCounterfactualFound,
    NoFeasibleRecord,
    UnknownExplanationType,
    UnknownRun,
    WhykitError,
)
from .explainers import (
    EXACT_FEATURE_CAP,
    exact_shapley,
    extract_rules,
    sampled_shapley,
    search_counterfactuals,
    select_prototypes,
    summarize,
)
from .interp import ParsedInterpretation, parse_interpretation
from .registry import METRICS_FOR_MODALITY, Registry
from .tabular import Dataset, RecordSet, TrainedModel, filter_records, train_tree_on_labels

_RUN_COUNTER = itertools.count(1)
_COUNTER_LOCK = threading.Lock()


def _json_bound(v: float | None) -> float | str | None:
    """Interval bounds in JSON payloads: infinities become 'inf' strings."""
    if v is None:
        return None
    v = float(v)
    if v == float("inf"):
        return "inf"
    if v == float("-inf"):
        return "-inf"
    return v


def bound_from_json(v: float | str | None) -> float | None:
    if v is None or isinstance(v, (int, float)):
        return None if v is None else float(v)
    return float(v)  # 'inf' / '-inf' strings parse directly


def _next_suffix() -> int:
    with _COUNTER_LOCK:
        return next(_RUN_COUNTER)


def _utc_stamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")


@dataclass
class DelegateConfig:
    k_records: int = 5
    n_prototypes: int = 5
    n_counterfactuals: int = 4
    immutable_features: tuple[str, ...] = ()
    seed: int = 0
    sampled_permutations: int = 200

    def to_dict(self) -> dict:
        return {
            "k_records": self.k_records,
            "n_prototypes": self.n_prototypes,
            "n_counterfactuals": self.n_counterfactuals,
            "immutable_features": list(self.immutable_features),
            "seed": self.seed,
            "sampled_permutations": self.sampled_permutations,
        }


@dataclass
class ExplainerRun:
    explainer_id: str
    modality: str
    directory: str  # relative to runs_root
    outputs: dict
    metrics: dict[str, float | None] = field(default_factory=dict)
    metric_notes: dict[str, str] = field(default_factory=dict)
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "explainer_id": self.explainer_id,
            "modality": self.modality,
            "directory": self.directory,
            "outputs": self.outputs,
            "metrics": self.metrics,
            "metric_notes": self.metric_notes,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExplainerRun":
        return cls(**doc)


@dataclass
class GroupMatch:
    indices: list[int]
    exact: bool
    skipped: list[str] = field(default_factory=list)
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "indices": self.indices,
            "exact": self.exact,
            "skipped": self.skipped,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GroupMatch":
        return cls(**doc)


@dataclass
class DelegateRun:
    run_id: str
    rq: ReframedQuestion
    explanation_type: str
    interpretation: str  # canonical reserialization
    matches: list[GroupMatch]
    explainer_runs: list[ExplainerRun]
    warnings: list[str]
    dataset_hash: str
    model_id: str
    model_kind: str
    created_utc: str
    duration_s: float

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "rq": self.rq.to_dict(),
            "explanation_type": self.explanation_type,
            "interpretation": self.interpretation,
            "matches": [m.to_dict() for m in self.matches],
            "explainer_runs": [e.to_dict() for e in self.explainer_runs],
            "warnings": self.warnings,
            "dataset_hash": self.dataset_hash,
            "model_id": self.model_id,
            "model_kind": self.model_kind,
            "created_utc": self.created_utc,
            "duration_s": self.duration_s,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DelegateRun":
        return cls(
            run_id=doc["run_id"],
            rq=ReframedQuestion.from_dict(doc["rq"]),
            explanation_type=doc["explanation_type"],
            interpretation=doc["interpretation"],
            matches=[GroupMatch.from_dict(m) for m in doc["matches"]],
            explainer_runs=[ExplainerRun.from_dict(e) for e in doc["explainer_runs"]],
            warnings=doc["warnings"],
            dataset_hash=doc["dataset_hash"],
            model_id=doc["model_id"],
            model_kind=doc["model_kind"],
            created_utc=doc["created_utc"],
            duration_s=doc["duration_s"],
        )


def delegate(
    rq: ReframedQuestion,
    registry: Registry,
    dataset: Dataset,
    model: TrainedModel,
    runs_root: str | Path,
    config: DelegateConfig | None = None,
) -> DelegateRun:
    """Execute every explainer registered for the question's type."""
    config = config or DelegateConfig()
    t0 = time.time()
    parsed = parse_interpretation(rq.machine_interpretation, dataset.schema)

    if rq.explanation_type not in registry.type_ids:
        raise UnknownExplanationType(
            f"unknown explanation type '{rq.explanation_type}'",
            detail={"known": list(registry.type_ids)},
        )

    warnings: list[str] = []
    matches = _match_groups(parsed, dataset, config, warnings)

    registrations = registry.explainers_for_type(rq.explanation_type)
    if not registrations:
        warnings.append(
            f"explanation type '{rq.explanation_type}' has no registered "
            "explainers; no explanation was produced"
        )

    stamp = _utc_stamp()
    suffix = _next_suffix()
    run_id = f"{rq.explanation_type}_{stamp}-{suffix}"
    runs_root = Path(runs_root)
    run_dir = runs_root / run_id
    run_dir.mkdir(parents=True, exist_ok=True)

    explainer_runs: list[ExplainerRun] = []
    for reg in registrations:
        sub = f"{rq.explanation_type}_{reg.id}_{stamp}-{_next_suffix()}"
        directory = f"{run_id}/{sub}"
        try:
            outputs = _dispatch(
                reg.id, parsed, matches, dataset, model, config
            )
            values, notes = _score(reg.modality, outputs, dataset, model)
            er = ExplainerRun(
                explainer_id=reg.id,
                modality=reg.modality,
                directory=directory,
                outputs=outputs,
                metrics=values,
                metric_notes=notes,
            )
        except WhykitError as exc:
            er = ExplainerRun(
                explainer_id=reg.id,
                modality=reg.modality,
                directory=directory,
                outputs={},
                error=f"{type(exc).__name__}: {exc}",
            )
            warnings.append(f"explainer '{reg.id}' failed: {er.error}")
        _persist_explainer(run_dir / sub, er, rq, config, dataset, model)
        explainer_runs.append(er)

    run = DelegateRun(
        run_id=run_id,
        rq=rq,
        explanation_type=rq.explanation_type,
        interpretation=parsed.serialize(),
        matches=matches,
        explainer_runs=explainer_runs,
        warnings=warnings,
        dataset_hash=dataset.content_hash,
        model_id=model.model_id,
        model_kind=model.kind,
        created_utc=stamp,
        duration_s=round(time.time() - t0, 6),
    )
    (run_dir / "run.json").write_text(json.dumps(run.to_dict(), indent=2, allow_nan=False))
    return run


def _match_groups(
    parsed: ParsedInterpretation,
    dataset: Dataset,
    config: DelegateConfig,
    warnings: list[str],
) -> list[GroupMatch]:
    out: list[GroupMatch] = []
    for i, group in enumerate(parsed.groups):
        try:
            rs: RecordSet = filter_records(dataset, group, k=config.k_records)
            out.append(
                GroupMatch(
                    indices=[int(j) for j in rs.indices],
                    exact=rs.exact,
                    skipped=list(rs.skipped),
                )
            )
        except NoFeasibleRecord as exc:
            out.append(GroupMatch(indices=[], exact=False, error=str(exc)))
            warnings.append(f"group {i + 1}: {exc}")
    return out


def _instance_index(matches: list[GroupMatch]) -> int:
    for m in matches:
        if m.indices:
            return m.indices[0]
    return 0


# -- dispatch -----------------------------------------------------------------


def _dispatch(
    explainer_id: str,
    parsed: ParsedInterpretation,
    matches: list[GroupMatch],
    dataset: Dataset,
    model: TrainedModel,
    config: DelegateConfig,
) -> dict:
    if explainer_id == "shapley_attribution":
        return _run_attribution(matches, dataset, model, config)
    if explainer_id == "prototype_selection":
        return _run_prototypes(matches, dataset, config)
    if explainer_id == "counterfactual_search":
        return _run_counterfactuals(matches, dataset, model, config)
    if explainer_id == "rule_extraction":
        return _run_rules(dataset, model)
    if explainer_id == "data_summary":
        return _run_summary(matches, dataset)
    raise UnknownExplanationType(f"no dispatcher for explainer '{explainer_id}'")


def _run_attribution(matches, dataset, model, config) -> dict:
    idx = _instance_index(matches)
    x = dataset.X[idx]
    d = x.size
    if d <= EXACT_FEATURE_CAP:
        res = exact_shapley(model.predict_proba, x, dataset.X, feature_names=dataset.feature_names)
    else:
        res = sampled_shapley(
            model.predict_proba,
            x,
            dataset.X,
            n_permutations=config.sampled_permutations,
            seed=config.seed,
            feature_names=dataset.feature_names,
        )
    return {
        "kind": "attribution",
        "instance_index": idx,
        "instance": [float(v) for v in x],
        "features": list(dataset.feature_names),
        "phi": [float(v) for v in res.phi],
        "baseline": res.baseline,
        "fx": res.fx,
        "predicted_label": int(res.fx >= 0.5),
        "mode": res.mode,
    }


def _run_prototypes(matches, dataset, config) -> dict:
    target_idx = np.asarray(
        matches[0].indices if matches and matches[0].indices else np.arange(dataset.n)
    )
    Y = dataset.X[target_idx]
    res = select_prototypes(dataset.X, Y, m=config.n_prototypes)
    return {
        "kind": "prototypes",
        "target_indices": [int(i) for i in target_idx],
        "indices": [int(i) for i in res.indices],
        "weights": [float(w) for w in res.weights],
        "rows": [[float(v) for v in dataset.X[i]] for i in res.indices],
        "outcomes": [dataset.outcome_label(int(dataset.y[i])) for i in res.indices],
        "feature_names": list(dataset.feature_names),
        "bandwidth": res.bandwidth,
        "objective": [float(v) for v in res.objective],
    }


def _run_counterfactuals(matches, dataset, model, config) -> dict:
    idx = _instance_index(matches)
    x = dataset.X[idx]
    lo = dataset.X.min(axis=0)
    hi = dataset.X.max(axis=0)
    immutable = tuple(
        dataset.feature_names.index(f)
        for f in config.immutable_features
        if f in dataset.feature_names
    )
    res = search_counterfactuals(
        model.predict_proba,
        x,
        lo,
        hi,
        k=config.n_counterfactuals,
        immutable=immutable,
        seed=config.seed,
    )
    return {
        "kind": "counterfactuals",
        "instance_index": idx,
        "original": [float(v) for v in res.original],
        "original_prob": res.original_prob,
        "original_label": res.original_label,
        "feature_names": list(dataset.feature_names),
        "immutable_features": [dataset.feature_names[i] for i in immutable],
        "candidates": [
            {
                "x": [float(v) for v in c.x],
                "prob": c.prob,
                "proximity": c.proximity,
                "changed": {
                    dataset.feature_names[i]: [float(a), float(b)]
                    for i, (a, b) in c.changed.items()
                },
            }
            for c in res.candidates
        ],
        "evals": res.evals,
    }


def _run_rules(dataset, model) -> dict:
    if model.kind == "tree":
        ruleset = extract_rules(
            model.model, dataset.feature_names, dataset.X, dataset.y
        )
    else:
        # opaque model: distill its labels into a shallow surrogate tree
        labels = model.predict(dataset.X)
        surrogate = train_tree_on_labels(dataset.X, labels, max_depth=3, min_leaf=5)
        ruleset = extract_rules(
            surrogate,
            dataset.feature_names,
            dataset.X,
            labels,
            source="surrogate",
            surrogate=True,
        )
    return {
        "kind": "rules",
        "surrogate": ruleset.surrogate,
        "source": ruleset.source,
        "feature_names": list(dataset.feature_names),
        "rules": [
            {
                "text": r.render(),
                "label": r.label,
                "outcome": dataset.outcome_label(r.label),
                "coverage": r.coverage,
                "support": list(r.support),
                "length": len(r.conditions),
                "conditions": [
                    {
                        "feature": c.feature,
                        "op": c.op,
                        "value": c.value,
                        "low": _json_bound(c.low),
                        "high": _json_bound(c.high),
                    }
                    for c in r.conditions
                ],
            }
            for r in ruleset.by_coverage()
        ],
    }


def _run_summary(matches, dataset) -> dict:
    if matches and matches[0].indices:
        idx = np.asarray(matches[0].indices)
    else:
        idx = np.arange(dataset.n)
    res = summarize(dataset, idx)
    return {
        "kind": "summary",
        "indices": [int(i) for i in idx] if idx.size < dataset.n else "all",
        "n": res.n,
        "n_total": dataset.n,
        "stats": [
            {
                "feature": s.name,
                "count": s.count,
                "mean": s.mean,
                "sd": s.sd,
                "min": s.min,
                "max": s.max,
            }
            for s in res.stats
        ],
        "class_balance": res.class_balance,
        "imputation_log": dataset.imputation_log,
    }


# -- metric scoring -----------------------------------------------------------


def _score(
    modality: str, outputs: dict, dataset: Dataset, model: TrainedModel
) -> tuple[dict[str, float | None], dict[str, str]]:
    values: dict[str, float | None] = {}
    notes: dict[str, str] = {}

    def attempt(metric_id: str, fn):
        try:
            values[metric_id] = float(fn())
        except WhykitError as exc:
            values[metric_id] = None
            notes[metric_id] = f"{type(exc).__name__}: {exc}"

    if modality == "Features":
        phi = np.asarray(outputs["phi"])
        x = np.asarray(outputs["instance"])
        attempt(
            "faithfulness",
            lambda: metrics_mod.faithfulness(model.predict_proba, phi, x, dataset.X),
        )
        attempt(
            "monotonicity",
            lambda: metrics_mod.monotonicity(
                phi, metrics_mod.expectation_vector(model.predict_proba, x, dataset.X)
            ),
        )
    elif modality == "Rules":
        ruleset = _ruleset_from_outputs(outputs)
        attempt(
            "fidelity",
            lambda: metrics_mod.fidelity(ruleset, model.predict_proba, dataset.X),
        )
        attempt(
            "average_rule_length",
            lambda: metrics_mod.average_rule_length(ruleset),
        )
    elif modality in ("Instances", "Counterfactuals", "DataSummary"):
        selected, reference = _instance_sets(modality, outputs, dataset)
        attempt("diversity", lambda: metrics_mod.diversity(selected))
        attempt(
            "non_representativeness",
            lambda: metrics_mod.non_representativeness(selected, reference),
        )
    return values, notes


def _ruleset_from_outputs(outputs: dict):
    from .explainers.rules import Rule, RuleSet
    from .interp import FeatureConstraint

    rules = []
    for r in outputs["rules"]:
        conds = tuple(
            FeatureConstraint(
                c["feature"],
                c["op"],
                value=c["value"],
                low=bound_from_json(c["low"]),
                high=bound_from_json(c["high"]),
            )
            for c in r["conditions"]
        )
        rules.append(
            Rule(
                conditions=conds,
                label=r["label"],
                coverage=r["coverage"],
                support=tuple(r["support"]),
            )
        )
    return RuleSet(
        rules=rules,
        feature_names=list(outputs["feature_names"]),
        source=outputs["source"],
        surrogate=outputs["surrogate"],
    )


def _instance_sets(modality: str, outputs: dict, dataset: Dataset):
    if modality == "Counterfactuals":
        selected = np.array([c["x"] for c in outputs["candidates"]], dtype=float)
        reference = dataset.X
    elif modality == "Instances":
        selected = np.array(outputs["rows"], dtype=float)
        reference = dataset.X[np.asarray(outputs["target_indices"], dtype=int)]
    else:  # DataSummary: the summarized subset against the full data
        idx = outputs["indices"]
        if idx == "all":
            selected = dataset.X
        else:
            selected = dataset.X[np.asarray(idx, dtype=int)]
        reference = dataset.X
    return selected, reference


# -- persistence --------------------------------------------------------------


def _persist_explainer(
    directory: Path,
    er: ExplainerRun,
    rq: ReframedQuestion,
    config: DelegateConfig,
    dataset: Dataset,
    model: TrainedModel,
) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "output.csv").write_text(_outputs_csv(er.outputs))
    (directory / "config.json").write_text(json.dumps(config.to_dict(), indent=2, allow_nan=False))
    (directory / "metrics.json").write_text(
        json.dumps({"values": er.metrics, "notes": er.metric_notes}, indent=2, allow_nan=False)
    )
    (directory / "provenance.json").write_text(
        json.dumps(
            allow_nan=False,
            indent=2,
            obj={
                "explainer_id": er.explainer_id,
                "modality": er.modality,
                "question": rq.question,
                "machine_interpretation": rq.machine_interpretation,
                "explanation_type": rq.explanation_type,
                "decompose_provenance": rq.provenance,
                "dataset_hash": dataset.content_hash,
                "model_id": model.model_id,
                "model_kind": model.kind,
                "error": er.error,
            },
        )
    )


def _outputs_csv(outputs: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    kind = outputs.get("kind")
    if kind == "attribution":
        w.writerow(["feature", "value", "phi"])
        for name, val, phi in zip(
            outputs["features"], outputs["instance"], outputs["phi"]
        ):
            w.writerow([name, val, phi])
        w.writerow(["baseline", "", outputs["baseline"]])
        w.writerow(["prediction", "", outputs["fx"]])
    elif kind == "prototypes":
        w.writerow(["rank", "row_index", "weight", "outcome", *outputs["feature_names"]])
        for rank, (i, wt, out, row) in enumerate(
            zip(outputs["indices"], outputs["weights"], outputs["outcomes"], outputs["rows"]),
            1,
        ):
            w.writerow([rank, i, wt, out, *row])
    elif kind == "counterfactuals":
        w.writerow(["candidate", "prob", "proximity", *outputs["feature_names"]])
        w.writerow(["original", outputs["original_prob"], 0.0, *outputs["original"]])
        for n, c in enumerate(outputs["candidates"], 1):
            w.writerow([n, c["prob"], c["proximity"], *c["x"]])
    elif kind == "rules":
        w.writerow(["rule", "outcome", "coverage", "length", "text"])
        for n, r in enumerate(outputs["rules"], 1):
            w.writerow([n, r["outcome"], r["coverage"], r["length"], r["text"]])
    elif kind == "summary":
        w.writerow(["feature", "count", "mean", "sd", "min", "max"])
        for s in outputs["stats"]:
            w.writerow([s["feature"], s["count"], s["mean"], s["sd"], s["min"], s["max"]])
        for label, count in outputs["class_balance"].items():
            w.writerow(["class_balance", label, count, "", "", ""])
    else:
        w.writerow(["empty"])
    return buf.getvalue()


# -- retrieval ----------------------------------------------------------------


def load_run(runs_root: str | Path, run_id: str) -> DelegateRun:
    path = Path(runs_root) / run_id / "run.json"
    if not path.is_file():
        raise UnknownRun(f"no run named '{run_id}'")
    return DelegateRun.from_dict(json.loads(path.read_text()))


def list_runs(runs_root: str | Path) -> list[str]:
    root = Path(runs_root)
    if not root.is_dir():
        return []
    return sorted(p.name for p in root.iterdir() if (p / "run.json").is_file())


# -- bank statistics ----------------------------------------------------------


def parse_stats(bank: list[BankEntry], schema) -> dict:
    """How many bank interpretations the grammar accepts, per type."""
    per_type: dict[str, dict[str, int]] = {}
    usable = 0
    for e in bank:
        slot = per_type.setdefault(e.explanation_type, {"usable": 0, "unusable": 0})
        try:
            parse_interpretation(e.interpretation, schema)
            slot["usable"] += 1
            usable += 1
        except WhykitError:
            slot["unusable"] += 1
    return {
        "total": len(bank),
        "usable": usable,
        "unusable": len(bank) - usable,
        "per_type": per_type,
    }
