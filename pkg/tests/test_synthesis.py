"""Explanation assembly: slot fills, ranking, grounding, replay."""

import numpy as np
import pytest

from whykit.decompose import ReframedQuestion
from whykit.delegate import DelegateConfig, delegate
from whykit.errors import NoOutputs, TemplateSlotUnfillable
from whykit.registry import Registry, SynthesisTemplate, TemplateSlot
from whykit.synthesis import (
    TOP_C,
    ExplanationTuple,
    _changed_entries,
    _fmt,
    lexical_grounding_score,
    load_tuple,
    replay,
    save_tuple,
    synthesize,
)


def _rq(explanation_type: str, interpretation: str) -> ReframedQuestion:
    return ReframedQuestion(
        question=f"({explanation_type})?",
        explanation_type=explanation_type,
        machine_interpretation=interpretation,
        action="Explain",
        likelihood=None,
    )


@pytest.fixture(scope="module")
def runs(tmp_path_factory, registry, dataset, tree_model, logistic_model):
    """One delegate run per supported explanation type, shared read-only."""
    root = tmp_path_factory.mktemp("runs")
    jobs = {
        "rationale": (_rq("rationale", "Explain(Glucose > 150)"), tree_model),
        "contrastive": (_rq("contrastive", "Explain(Glucose > 150)"), logistic_model),
        "counterfactual": (_rq("counterfactual", "Explain(Glucose > 150)"), logistic_model),
        "case_based": (_rq("case_based", "Filter(Glucose > 150)"), tree_model),
        "data": (_rq("data", "Filter(Glucose > 150)"), tree_model),
    }
    out = {}
    for name, (rq, model) in jobs.items():
        out[name] = (root, delegate(rq, registry, dataset, model, root, DelegateConfig(seed=1)))
    return out


# -- formatting ------------------------------------------------------------------


def test_number_formatting():
    assert _fmt(1.0) == "1"
    assert _fmt(1.25) == "1.25"
    assert _fmt(1.204) == "1.2"
    assert _fmt(-0.5) == "-0.5"
    assert _fmt(120.0) == "120"
    assert _fmt(0.004) == "0"
    assert _fmt(None) == ""


def test_changed_entries_hide_display_noise():
    # A sub-display-precision change is hidden when anything visible moved.
    cand = {"changed": {"A": (1.0, 1.004), "B": (2.0, 2.4)}}
    assert _changed_entries(cand) == [("B", 2.0, 2.4)]
    # If every change is invisible at display precision, keep the largest
    # so the explanation never claims nothing changed.
    cand = {"changed": {"A": (1.0, 1.001), "B": (2.0, 2.004)}}
    assert _changed_entries(cand) == [("B", 2.0, 2.004)]
    assert _changed_entries({"changed": {}}) == []


# -- grounding scorer --------------------------------------------------------------


def _attr_outputs(**overrides):
    outputs = {
        "kind": "attribution",
        "instance_index": 0,
        "instance": [148.0, 33.6],
        "features": ["Glucose", "BMI"],
        "phi": [0.12, -0.05],
        "baseline": 0.3,
        "fx": 0.8,
        "predicted_label": 1,
        "mode": "exact",
    }
    outputs.update(overrides)
    return outputs


def test_grounding_counts_matching_numbers():
    outputs = [_attr_outputs()]
    assert lexical_grounding_score("Glucose = 148 (contribution 0.12)", outputs) == 1.0
    assert lexical_grounding_score("values 148 and 999", outputs) == 0.5
    assert lexical_grounding_score("no numbers here", outputs) == 1.0


def test_grounding_tolerance_follows_displayed_precision():
    outputs = [_attr_outputs(fx=0.456)]
    # "0.5" displays one decimal: tolerance 0.05 covers 0.456.
    assert lexical_grounding_score("the score 0.5", outputs) == 1.0
    # "0.50" displays two: tolerance 0.005 does not.
    assert lexical_grounding_score("the score 0.50", outputs) == 0.0


# -- per-type synthesis -------------------------------------------------------------


@pytest.mark.parametrize(
    "name",
    ["rationale", "contrastive", "counterfactual", "case_based", "data"],
)
def test_each_type_grounds_perfectly(runs, registry, schema, name):
    root, run = runs[name]
    tup = synthesize(run, registry, schema)
    assert tup.explanation_type == name
    assert tup.mode == "template"
    assert tup.grounding == 1.0
    assert tup.text.strip()
    assert tup.explainer_ids
    assert tup.machine_interpretation == run.interpretation
    for slot_name in tup.slots:
        assert tup.slots[slot_name] in tup.text


def test_rationale_text_reads_as_rules(runs, registry, schema):
    root, run = runs["rationale"]
    tup = synthesize(run, registry, schema)
    assert tup.explainer_ids == ["rule_extraction"]
    assert "when " in tup.text
    assert "covers" in tup.text


def test_attribution_slots_rank_by_magnitude(runs, registry, schema):
    root, run = runs["contrastive"]
    tup = synthesize(run, registry, schema)
    outputs = run.explainer_runs[0].outputs
    phi = np.asarray(outputs["phi"])
    sign = 1.0 if outputs["predicted_label"] == 1 else -1.0
    supporting = [
        outputs["features"][j]
        for j in np.argsort(-np.abs(phi), kind="stable")
        if phi[j] * sign > 0
    ]
    first_fact = tup.slots["facts"].split(" = ")[0]
    assert first_fact == supporting[0]
    assert "contribution" in tup.slots["facts"]


def test_counterfactual_slots_use_closest_candidate(runs, registry, schema):
    root, run = runs["counterfactual"]
    tup = synthesize(run, registry, schema)
    outputs = run.explainer_runs[0].outputs
    proxs = [c["proximity"] for c in outputs["candidates"]]
    assert proxs == sorted(proxs)
    assert "moved from" in tup.slots["changed_features"]
    assert "model probability" in tup.slots["counterfactual_instances"]


def test_data_summary_mentions_cohort_size(runs, registry, schema):
    root, run = runs["data"]
    tup = synthesize(run, registry, schema)
    outputs = run.explainer_runs[-1].outputs
    # every matched record count shows up verbatim
    assert str(outputs["n"]) in tup.text


def test_top_c_limits_listed_items(runs, registry, schema):
    root, run = runs["contrastive"]
    wide = synthesize(run, registry, schema, top_c=TOP_C)
    narrow = synthesize(run, registry, schema, top_c=1)
    assert narrow.slots["facts"].count(";") == 0
    assert wide.slots["facts"].count(";") <= TOP_C - 1
    assert narrow.grounding == 1.0


# -- failure modes -------------------------------------------------------------------


def test_no_outputs_raises(runs, registry, dataset, tree_model, schema, tmp_path):
    run = delegate(
        _rq("contextual", "Explain(Glucose > 150)"), registry, dataset, tree_model, tmp_path
    )
    with pytest.raises(NoOutputs) as exc:
        synthesize(run, registry, schema)
    assert exc.value.detail["warnings"] == run.warnings


def test_unfillable_slot_raises(runs, registry, schema):
    root, run = runs["rationale"]
    mismatched = Registry(
        types=registry.types,
        explainers=registry.explainers,
        templates=[
            SynthesisTemplate(
                type_id="rationale",
                text="The model leans on {rules}.",
                slots=(TemplateSlot(name="rules", modality="Features"),),
            )
        ],
    )
    with pytest.raises(TemplateSlotUnfillable) as exc:
        synthesize(run, mismatched, schema)
    assert exc.value.detail == {"have": ["Rules"]}


# -- persistence and replay ------------------------------------------------------------


def test_tuple_round_trip(runs, registry, schema):
    root, run = runs["rationale"]
    tup = synthesize(run, registry, schema)
    save_tuple(root, run.run_id, tup)
    back = load_tuple(root, run.run_id)
    assert back.to_dict() == tup.to_dict()
    assert load_tuple(root, "no_such_run") is None
    assert ExplanationTuple.from_dict(tup.to_dict()).to_dict() == tup.to_dict()


@pytest.mark.parametrize(
    "name",
    ["rationale", "contrastive", "counterfactual", "case_based", "data"],
)
def test_replay_reproduces_the_tuple(runs, registry, schema, name):
    root, run = runs[name]
    live = synthesize(run, registry, schema)
    replayed = replay(root, run.run_id, registry, schema)
    assert replayed.to_dict() == live.to_dict()
