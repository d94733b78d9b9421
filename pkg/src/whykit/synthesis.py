"""Synthesis: turn a delegate run's raw outputs into one explanation tuple.

Each explanation type owns a template whose literal text contains no
digits; every number in the final text therefore comes from a slot fill,
and slot fills only quote values present in the run's persisted outputs.
The lexical grounding score makes that checkable: it is the fraction of
numeric tokens in the text that match a numeric token in the run's
output tables, compared at the precision the text displays.

Ranking before the top-C cut is modality-specific: attributions by
absolute weight, rules by coverage, prototypes by weight, counterfactuals
by proximity (closest first).  All sorts are stable.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .delegate import DelegateRun, ExplainerRun, _outputs_csv, bound_from_json, load_run
from .errors import NoOutputs, TemplateSlotUnfillable
from .registry import Registry, SynthesisTemplate
from .schema import DatasetSchema

TOP_C = 3

# A grounding-relevant number stands alone: digits glued to a word or an
# exponent caret (unit strings like kg/m^2, names like A1C) are not values.
_NUM_RE = re.compile(r"(?<![\w^])-?\d+(?:\.\d+)?")


@dataclass
class ExplanationTuple:
    text: str
    explanation_type: str
    explainer_ids: list[str]
    question: str
    machine_interpretation: str
    mode: str  # template | llm | llm-fallback
    grounding: float
    slots: dict[str, str] = field(default_factory=dict)
    metrics: dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "explanation_type": self.explanation_type,
            "explainer_ids": self.explainer_ids,
            "question": self.question,
            "machine_interpretation": self.machine_interpretation,
            "mode": self.mode,
            "grounding": self.grounding,
            "slots": self.slots,
            "metrics": self.metrics,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExplanationTuple":
        return cls(**doc)


def _fmt(v: float) -> str:
    """Numbers are shown to 2 decimals with trailing zeros stripped."""
    if v is None:
        return ""
    r = round(float(v), 2)
    if r == int(r):
        return str(int(r))
    return f"{r:.2f}".rstrip("0").rstrip(".")


def _with_unit(v: float, unit: str | None) -> str:
    return f"{_fmt(v)} {unit}" if unit else _fmt(v)


def synthesize(
    run: DelegateRun,
    registry: Registry,
    schema: DatasetSchema,
    top_c: int = TOP_C,
) -> ExplanationTuple:
    """Fill the type's template from the run outputs and score grounding."""
    usable = [er for er in run.explainer_runs if er.outputs and er.error is None]
    if not usable:
        raise NoOutputs(
            f"run '{run.run_id}' produced no explainer outputs to synthesize",
            detail={"warnings": run.warnings},
        )

    template = registry.template_for_type(run.explanation_type)

    by_modality: dict[str, ExplainerRun] = {}
    for er in usable:
        by_modality.setdefault(er.modality, er)

    slot_texts: dict[str, str] = {}
    used_ids: list[str] = []
    for slot in template.slots:
        er = by_modality.get(slot.modality)
        if er is None:
            raise TemplateSlotUnfillable(
                f"slot '{slot.name}' needs {slot.modality} outputs, none available",
                detail={"have": sorted(by_modality)},
            )
        slot_texts[slot.name] = _fill_slot(slot.name, er.outputs, schema, top_c)
        if er.explainer_id not in used_ids:
            used_ids.append(er.explainer_id)

    text = template.text.format(**slot_texts)
    grounding = lexical_grounding_score(text, [er.outputs for er in usable])
    return ExplanationTuple(
        text=text,
        explanation_type=run.explanation_type,
        explainer_ids=used_ids,
        question=run.rq.question,
        machine_interpretation=run.interpretation,
        mode="template",
        grounding=grounding,
        slots=slot_texts,
        metrics={er.explainer_id: er.metrics for er in usable},
    )


# -- slot renderers -----------------------------------------------------------


def _fill_slot(name: str, outputs: dict, schema: DatasetSchema, top_c: int) -> str:
    kind = outputs.get("kind")
    if kind == "attribution":
        return _fill_attribution(name, outputs, schema, top_c)
    if kind == "rules":
        return _fill_rules(outputs, schema, top_c)
    if kind == "prototypes":
        return _fill_prototypes(outputs, schema, top_c)
    if kind == "counterfactuals":
        return _fill_counterfactuals(name, outputs, schema, top_c)
    if kind == "summary":
        return _fill_summary(outputs, schema, top_c)
    raise TemplateSlotUnfillable(f"slot '{name}' cannot be filled from '{kind}' outputs")


def _fill_attribution(name, outputs, schema, top_c) -> str:
    phi = np.asarray(outputs["phi"], dtype=float)
    sign = 1.0 if outputs["predicted_label"] == 1 else -1.0
    order = np.argsort(-np.abs(phi), kind="stable")
    wanted = (lambda v: v * sign > 0) if name == "facts" else (lambda v: v * sign < 0)
    items = []
    for j in order:
        if not wanted(phi[j]):
            continue
        feat = outputs["features"][j]
        unit = schema.unit_of(feat)
        items.append(
            f"{feat} = {_with_unit(outputs['instance'][j], unit)} "
            f"(contribution {_fmt(phi[j])})"
        )
        if len(items) == top_c:
            break
    return "; ".join(items) if items else "none that stood out"


def _phrase_condition(cond: dict, schema: DatasetSchema) -> str:
    feat = cond["feature"]
    unit = schema.unit_of(feat)
    if cond["op"] == "range":
        lo = bound_from_json(cond["low"])
        hi = bound_from_json(cond["high"])
        if lo is None or lo == -np.inf:
            return f"{feat} below {_with_unit(hi, unit)}"
        if hi is None or hi == np.inf:
            return f"{feat} at least {_with_unit(lo, unit)}"
        return f"{feat} between {_with_unit(lo, unit)} and {_fmt(hi)}"
    if cond["op"] == "lt":
        return f"{feat} below {_with_unit(cond['value'], unit)}"
    if cond["op"] in ("ge", "gt"):
        word = "at least" if cond["op"] == "ge" else "above"
        return f"{feat} {word} {_with_unit(cond['value'], unit)}"
    if cond["op"] == "le":
        return f"{feat} at most {_with_unit(cond['value'], unit)}"
    return f"{feat} = {cond['value']}"


def _fill_rules(outputs, schema, top_c) -> str:
    items = []
    for r in outputs["rules"][:top_c]:
        conds = " and ".join(_phrase_condition(c, schema) for c in r["conditions"])
        conds = conds or "any record"
        items.append(f"when {conds}, the model answers {r['outcome']} "
                     f"(covers {r['coverage']} records)")
    return "; ".join(items)


def _fill_prototypes(outputs, schema, top_c) -> str:
    order = np.argsort(-np.asarray(outputs["weights"], dtype=float), kind="stable")
    show = [f.name for f in schema.numeric_features][:3]
    names = outputs["feature_names"]
    items = []
    for j in order[:top_c]:
        row = outputs["rows"][j]
        vals = ", ".join(
            f"{f} = {_with_unit(row[names.index(f)], schema.unit_of(f))}" for f in show
        )
        items.append(
            f"record {outputs['indices'][j]} ({outputs['outcomes'][j]}; "
            f"weight {_fmt(outputs['weights'][j])}): {vals}"
        )
    return "; ".join(items)


def _changed_entries(candidate: dict) -> list[tuple[str, float, float]]:
    entries = [
        (feat, a, b)
        for feat, (a, b) in candidate["changed"].items()
        if _fmt(a) != _fmt(b)  # hide sub-display-precision drift
    ]
    if not entries and candidate["changed"]:
        feat, (a, b) = max(
            candidate["changed"].items(), key=lambda kv: abs(kv[1][1] - kv[1][0])
        )
        entries = [(feat, a, b)]
    return entries


def _fill_counterfactuals(name, outputs, schema, top_c) -> str:
    cands = sorted(outputs["candidates"], key=lambda c: c["proximity"])
    if not cands:
        raise TemplateSlotUnfillable("no counterfactual candidates to describe")
    best = cands[0]
    changed_union: list[str] = []
    for c in cands[:top_c]:
        for feat, _, _ in _changed_entries(c):
            if feat not in changed_union:
                changed_union.append(feat)

    if name == "original_instance":
        names = outputs["feature_names"]
        vals = ", ".join(
            f"{f} = {_with_unit(outputs['original'][names.index(f)], schema.unit_of(f))}"
            for f in changed_union
        )
        return f"this case ({vals})" if vals else "this case"

    if name == "changed_features":
        items = [
            f"{feat} moved from {_fmt(a)} to {_with_unit(b, schema.unit_of(feat))}"
            for feat, a, b in _changed_entries(best)
        ]
        return " and ".join(items)

    # counterfactual_instances
    items = []
    for c in cands[:top_c]:
        vals = ", ".join(
            f"{feat} = {_with_unit(b, schema.unit_of(feat))}"
            for feat, _, b in _changed_entries(c)
        )
        items.append(f"{vals} (model probability {_fmt(c['prob'])})")
    return "; ".join(items)


def _fill_summary(outputs, schema, top_c) -> str:
    balance = ", ".join(
        f"{count} labeled {label}" for label, count in outputs["class_balance"].items()
    )
    parts = [f"{outputs['n']} records ({balance})"]
    stats = {s["feature"]: s for s in outputs["stats"]}
    for f in [f.name for f in schema.numeric_features][:top_c]:
        s = stats.get(f)
        if s is None or s["count"] == 0:
            continue
        unit = schema.unit_of(f)
        parts.append(
            f"{f} averages {_with_unit(s['mean'], unit)} "
            f"(from {_fmt(s['min'])} to {_fmt(s['max'])})"
        )
    return "; ".join(parts)


# -- grounding ----------------------------------------------------------------


def _numeric_tokens(text: str) -> list[str]:
    return _NUM_RE.findall(text)


def lexical_grounding_score(text: str, outputs_list: list[dict]) -> float:
    """Fraction of numbers in the text that appear in the output tables,
    matched at the precision the text displays."""
    source: list[float] = []
    for outputs in outputs_list:
        source.extend(float(t) for t in _numeric_tokens(_outputs_csv(outputs)))
    tokens = _numeric_tokens(text)
    if not tokens:
        return 1.0
    src = np.asarray(source, dtype=float)
    hits = 0
    for tok in tokens:
        decimals = len(tok.partition(".")[2])
        tol = 0.5 * 10.0 ** (-decimals)
        if src.size and np.min(np.abs(src - float(tok))) <= tol + 1e-12:
            hits += 1
    return hits / len(tokens)


# -- persistence and replay ---------------------------------------------------


def save_tuple(runs_root: str | Path, run_id: str, tup: ExplanationTuple) -> Path:
    path = Path(runs_root) / run_id / "tuple.json"
    path.write_text(json.dumps(tup.to_dict(), indent=2, allow_nan=False))
    return path


def load_tuple(runs_root: str | Path, run_id: str) -> ExplanationTuple | None:
    path = Path(runs_root) / run_id / "tuple.json"
    if not path.is_file():
        return None
    return ExplanationTuple.from_dict(json.loads(path.read_text()))


def replay(
    runs_root: str | Path,
    run_id: str,
    registry: Registry,
    schema: DatasetSchema,
    top_c: int = TOP_C,
) -> ExplanationTuple:
    """Rebuild the explanation for a stored run purely from its artifacts."""
    run = load_run(runs_root, run_id)
    return synthesize(run, registry, schema, top_c=top_c)
