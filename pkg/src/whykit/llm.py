"""Optional language-model endpoint for decomposition and narrative polish.

Talks to any chat-completions-style HTTP endpoint.  Every LLM route has a
deterministic fallback: a malformed or incomplete reply falls back to the
pattern decomposer (provenance "llm-fallback"); network or auth failures
raise EndpointError for the caller to surface.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import httpx

from .decompose import PatternDecomposer, ReframedQuestion
from .errors import EndpointError
from .registry import Registry
from .schema import DatasetSchema


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model: str
    api_key_env: str = "WHYKIT_API_KEY"
    timeout: float = 30.0

    @property
    def api_key(self) -> str | None:
        return os.environ.get(self.api_key_env)


def chat(config: EndpointConfig, system: str, user: str) -> str:
    headers = {"Content-Type": "application/json"}
    if config.api_key:
        headers["Authorization"] = f"Bearer {config.api_key}"
    payload = {
        "model": config.model,
        "messages": [
            {"role": "system", "content": system},
            {"role": "user", "content": user},
        ],
        "temperature": 0.0,
    }
    url = config.base_url.rstrip("/") + "/chat/completions"
    try:
        resp = httpx.post(url, json=payload, headers=headers, timeout=config.timeout)
        resp.raise_for_status()
        doc = resp.json()
        return doc["choices"][0]["message"]["content"]
    except httpx.HTTPError as exc:
        raise EndpointError(f"endpoint request failed: {exc}") from exc
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise EndpointError(f"endpoint returned malformed payload: {exc}") from exc


_DECOMPOSE_SYSTEM = """You rewrite a user's question about a tabular classifier \
into a typed, machine-readable form.  Reply with exactly four lines:
ExplanationType: <one of {type_ids}>
Action: <Predict, Explain, or Filter>
MachineInterpretation: <Action(Target, Feature = value, ...)>
Likelihood: <phrase or none>"""


def _few_shot(registry: Registry, decomposer: PatternDecomposer) -> str:
    lines = []
    for t in registry.types:
        if not t.questions:
            continue
        q = t.questions[0].format(
            feature="Glucose",
            value="148",
            feature2="BMI",
            value2="33",
            target=decomposer.schema.outcome.positive_label,
        )
        rq = decomposer.decompose(q)
        lines.append(
            f"Q: {q}\nExplanationType: {t.id}\nAction: {rq.action}\n"
            f"MachineInterpretation: {rq.machine_interpretation}\n"
            f"Likelihood: {rq.likelihood or 'none'}"
        )
    return "\n\n".join(lines)


def llm_decompose(
    question: str,
    registry: Registry,
    schema: DatasetSchema,
    config: EndpointConfig,
) -> ReframedQuestion:
    """Decompose via the endpoint; incomplete replies fall back to patterns."""
    decomposer = PatternDecomposer(registry, schema)
    system = _DECOMPOSE_SYSTEM.format(type_ids=", ".join(registry.type_ids))
    user = _few_shot(registry, decomposer) + f"\n\nQ: {question}"
    text = chat(config, system, user)

    fields: dict[str, str] = {}
    for line in text.splitlines():
        if ":" not in line:
            continue
        key, _, value = line.partition(":")
        fields[key.strip().lower()] = value.strip()

    type_id = fields.get("explanationtype", "")
    interp = fields.get("machineinterpretation", "")
    if type_id not in registry.type_ids or not interp:
        out = decomposer.decompose(question)
        out.provenance = "llm-fallback"
        return out

    likelihood = fields.get("likelihood", "") or None
    if likelihood and likelihood.lower() == "none":
        likelihood = None
    return ReframedQuestion(
        question=question,
        explanation_type=type_id,
        machine_interpretation=interp,
        action=fields.get("action", "Explain") or "Explain",
        likelihood=likelihood,
        provenance="llm",
    )


_SYNTH_SYSTEM = (
    "Rewrite the draft explanation below as one short, plain paragraph. "
    "Keep every number and feature name exactly as written; add nothing "
    "that is not in the draft."
)


def llm_synthesize(run, registry, schema, config: EndpointConfig):
    """Polish the template text via the endpoint, keeping its numbers.

    The template tuple is always built first; if the endpoint fails or its
    rewrite drops below full lexical grounding, the template text stands
    and the mode records the fallback.
    """
    from .synthesis import lexical_grounding_score, synthesize

    tup = synthesize(run, registry, schema)
    try:
        rewritten = chat(config, _SYNTH_SYSTEM, tup.text).strip()
    except EndpointError:
        tup.mode = "llm-fallback"
        return tup
    outputs = [er.outputs for er in run.explainer_runs if er.outputs and not er.error]
    grounding = lexical_grounding_score(rewritten, outputs)
    if rewritten and grounding >= tup.grounding:
        tup.text = rewritten
        tup.grounding = grounding
        tup.mode = "llm"
    else:
        tup.mode = "llm-fallback"
    return tup
