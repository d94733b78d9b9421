"""Explanation-type registry.

Declares which explanation types exist, which explainers serve each type,
what output modality each explainer produces, which metrics score each
modality, and which synthesis template renders each type.  Two renderings of
the same document load interchangeably: a line-oriented text format (see the
bundled ``data/registry.txt`` for the grammar by example) and a JSON
rendering with the same fields.  ``serialize_registry`` writes both and
round-trips: parsing its output yields an equal registry.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import RegistryFormatError, UnknownExplanationType
from .schema import bundled_path

MODALITIES = ("Features", "Instances", "Rules", "DataSummary", "Counterfactuals")

# Which metrics score which output modality.  Every registration's metric
# list must match its modality's row exactly.
METRICS_FOR_MODALITY: dict[str, tuple[str, ...]] = {
    "Features": ("faithfulness", "monotonicity"),
    "Rules": ("fidelity", "average_rule_length"),
    "Instances": ("diversity", "non_representativeness"),
    "Counterfactuals": ("diversity", "non_representativeness"),
    "DataSummary": ("diversity", "non_representativeness"),
}

# Placeholders a question pattern may carry; the bank generator fills them.
QUESTION_PLACEHOLDERS = {"feature", "value", "feature2", "value2", "target"}

_PLACEHOLDER_RE = re.compile(r"\{([a-zA-Z0-9_]+)\}")


@dataclass(frozen=True)
class ExplanationType:
    id: str
    label: str
    description: str
    questions: tuple[str, ...] = ()


@dataclass(frozen=True)
class ExplainerRegistration:
    id: str
    label: str
    for_types: tuple[str, ...]
    modality: str
    metric_ids: tuple[str, ...]


@dataclass(frozen=True)
class TemplateSlot:
    name: str
    modality: str
    cardinality: str = "many"  # one | many


@dataclass(frozen=True)
class SynthesisTemplate:
    type_id: str
    text: str
    slots: tuple[TemplateSlot, ...]

    @property
    def required_modalities(self) -> tuple[str, ...]:
        seen: list[str] = []
        for slot in self.slots:
            if slot.modality not in seen:
                seen.append(slot.modality)
        return tuple(seen)

    @property
    def slot_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.slots)


@dataclass
class Registry:
    types: list[ExplanationType] = field(default_factory=list)
    explainers: list[ExplainerRegistration] = field(default_factory=list)
    templates: list[SynthesisTemplate] = field(default_factory=list)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Registry)
            and self.types == other.types
            and self.explainers == other.explainers
            and self.templates == other.templates
        )

    # -- lookups ----------------------------------------------------------

    @property
    def type_ids(self) -> list[str]:
        return [t.id for t in self.types]

    def type_by_id(self, type_id: str) -> ExplanationType:
        for t in self.types:
            if t.id == type_id:
                return t
        raise UnknownExplanationType(
            f"unknown explanation type {type_id!r}", {"known": self.type_ids}
        )

    def explainers_for_type(self, type_id: str) -> list[ExplainerRegistration]:
        self.type_by_id(type_id)
        return [e for e in self.explainers if type_id in e.for_types]

    def explainer_by_id(self, explainer_id: str) -> ExplainerRegistration:
        for e in self.explainers:
            if e.id == explainer_id:
                return e
        raise UnknownExplanationType(
            f"unknown explainer {explainer_id!r}",
            {"known": [e.id for e in self.explainers]},
        )

    def template_for_type(self, type_id: str) -> SynthesisTemplate:
        self.type_by_id(type_id)
        for t in self.templates:
            if t.type_id == type_id:
                return t
        raise UnknownExplanationType(f"no template for type {type_id!r}")

    # -- validation ---------------------------------------------------------

    def validate(self) -> None:
        """Check structural invariants; raise RegistryFormatError on violation."""
        seen: set[str] = set()
        for t in self.types:
            if t.id in seen:
                raise RegistryFormatError(f"duplicate type id {t.id!r}")
            seen.add(t.id)
            for q in t.questions:
                bad = set(_PLACEHOLDER_RE.findall(q)) - QUESTION_PLACEHOLDERS
                if bad:
                    raise RegistryFormatError(
                        f"type {t.id!r}: unknown question placeholder(s) {sorted(bad)}"
                    )
        type_ids = set(seen)

        seen = set()
        for e in self.explainers:
            if e.id in seen:
                raise RegistryFormatError(f"duplicate explainer id {e.id!r}")
            seen.add(e.id)
            if e.modality not in MODALITIES:
                raise RegistryFormatError(
                    f"explainer {e.id!r}: unknown modality {e.modality!r}"
                )
            for tid in e.for_types:
                if tid not in type_ids:
                    raise RegistryFormatError(
                        f"explainer {e.id!r}: unregistered type {tid!r}"
                    )
            expected = METRICS_FOR_MODALITY[e.modality]
            if tuple(e.metric_ids) != expected:
                raise RegistryFormatError(
                    f"explainer {e.id!r}: metrics {list(e.metric_ids)} do not match "
                    f"modality {e.modality} binding {list(expected)}"
                )

        seen = set()
        for tpl in self.templates:
            if tpl.type_id in seen:
                raise RegistryFormatError(f"duplicate template for type {tpl.type_id!r}")
            seen.add(tpl.type_id)
            if tpl.type_id not in type_ids:
                raise RegistryFormatError(
                    f"template for unregistered type {tpl.type_id!r}"
                )
            names = set(tpl.slot_names)
            if len(names) != len(tpl.slots):
                raise RegistryFormatError(
                    f"template {tpl.type_id!r}: duplicate slot names"
                )
            for slot in tpl.slots:
                if slot.modality not in MODALITIES:
                    raise RegistryFormatError(
                        f"template {tpl.type_id!r}: unknown modality {slot.modality!r}"
                    )
                if slot.cardinality not in ("one", "many"):
                    raise RegistryFormatError(
                        f"template {tpl.type_id!r}: bad cardinality {slot.cardinality!r}"
                    )
            referenced = set(_PLACEHOLDER_RE.findall(tpl.text))
            if not referenced <= names:
                raise RegistryFormatError(
                    f"template {tpl.type_id!r}: placeholders {sorted(referenced - names)} "
                    "are not declared slots"
                )

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "types": [
                {
                    "id": t.id,
                    "label": t.label,
                    "description": t.description,
                    "questions": list(t.questions),
                }
                for t in self.types
            ],
            "explainers": [
                {
                    "id": e.id,
                    "label": e.label,
                    "for": list(e.for_types),
                    "modality": e.modality,
                    "metrics": list(e.metric_ids),
                }
                for e in self.explainers
            ],
            "templates": [
                {
                    "type": t.type_id,
                    "text": t.text,
                    "slots": [
                        {"name": s.name, "modality": s.modality, "cardinality": s.cardinality}
                        for s in t.slots
                    ],
                }
                for t in self.templates
            ],
        }


# -- text format ------------------------------------------------------------

def _parse_text(text: str) -> Registry:
    reg = Registry()
    section = None
    entry: dict | None = None

    def close_entry():
        nonlocal entry
        if entry is None:
            return
        try:
            if entry["_kind"] == "type":
                reg.types.append(
                    ExplanationType(
                        id=entry["type"],
                        label=entry.get("label", entry["type"]),
                        description=entry.get("description", ""),
                        questions=tuple(entry.get("question", ())),
                    )
                )
            elif entry["_kind"] == "explainer":
                reg.explainers.append(
                    ExplainerRegistration(
                        id=entry["explainer"],
                        label=entry.get("label", entry["explainer"]),
                        for_types=_split(entry.get("for", "")),
                        modality=entry.get("modality", ""),
                        metric_ids=_split(entry.get("metrics", "")),
                    )
                )
            elif entry["_kind"] == "template":
                slots = []
                for raw in entry.get("slot", ()):
                    parts = [p.strip() for p in raw.split(",")]
                    if len(parts) != 3:
                        raise RegistryFormatError(
                            f"slot line needs 'name, Modality, one|many': {raw!r}"
                        )
                    slots.append(TemplateSlot(parts[0], parts[1], parts[2]))
                reg.templates.append(
                    SynthesisTemplate(
                        type_id=entry["template"],
                        text=entry.get("text", ""),
                        slots=tuple(slots),
                    )
                )
        except KeyError as exc:
            raise RegistryFormatError(f"entry missing key {exc}") from exc
        entry = None

    starters = {"type": "types", "explainer": "explainers", "template": "templates"}
    repeated = {"question", "slot"}

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.rstrip()
        if not line.strip():
            close_entry()
            continue
        if line.lstrip().startswith("#"):
            continue
        m = re.fullmatch(r"\[([a-z]+)\]", line.strip())
        if m:
            close_entry()
            section = m.group(1)
            if section not in ("types", "explainers", "templates"):
                raise RegistryFormatError(f"line {lineno}: unknown section {section!r}")
            continue
        if section is None:
            raise RegistryFormatError(f"line {lineno}: content before any [section]")
        if ":" not in line:
            raise RegistryFormatError(f"line {lineno}: expected 'key: value'")
        key, value = line.split(":", 1)
        key, value = key.strip(), value.strip()
        if key in starters:
            if starters[key] != section:
                raise RegistryFormatError(
                    f"line {lineno}: {key!r} entry inside [{section}]"
                )
            close_entry()
            entry = {"_kind": key, key: value}
            if key == "type":
                entry["question"] = []
            if key == "template":
                entry["slot"] = []
            continue
        if entry is None:
            raise RegistryFormatError(f"line {lineno}: {key!r} before an entry start")
        if key in repeated:
            entry.setdefault(key, []).append(value)
        else:
            entry[key] = value
    close_entry()
    return reg


def _split(value: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in value.split(",") if p.strip())


def _serialize_text(reg: Registry) -> str:
    out: list[str] = ["[types]", ""]
    for t in reg.types:
        out.append(f"type: {t.id}")
        out.append(f"label: {t.label}")
        out.append(f"description: {t.description}")
        for q in t.questions:
            out.append(f"question: {q}")
        out.append("")
    out += ["[explainers]", ""]
    for e in reg.explainers:
        out.append(f"explainer: {e.id}")
        out.append(f"label: {e.label}")
        out.append(f"for: {', '.join(e.for_types)}")
        out.append(f"modality: {e.modality}")
        out.append(f"metrics: {', '.join(e.metric_ids)}")
        out.append("")
    out += ["[templates]", ""]
    for tpl in reg.templates:
        out.append(f"template: {tpl.type_id}")
        for s in tpl.slots:
            out.append(f"slot: {s.name}, {s.modality}, {s.cardinality}")
        out.append(f"text: {tpl.text}")
        out.append("")
    return "\n".join(out)


# -- JSON format --------------------------------------------------------------

def _parse_json(doc: dict) -> Registry:
    try:
        reg = Registry(
            types=[
                ExplanationType(
                    id=t["id"],
                    label=t.get("label", t["id"]),
                    description=t.get("description", ""),
                    questions=tuple(t.get("questions", ())),
                )
                for t in doc.get("types", ())
            ],
            explainers=[
                ExplainerRegistration(
                    id=e["id"],
                    label=e.get("label", e["id"]),
                    for_types=tuple(e.get("for", ())),
                    modality=e.get("modality", ""),
                    metric_ids=tuple(e.get("metrics", ())),
                )
                for e in doc.get("explainers", ())
            ],
            templates=[
                SynthesisTemplate(
                    type_id=t["type"],
                    text=t.get("text", ""),
                    slots=tuple(
                        TemplateSlot(
                            s["name"], s["modality"], s.get("cardinality", "many")
                        )
                        for s in t.get("slots", ())
                    ),
                )
                for t in doc.get("templates", ())
            ],
        )
    except (KeyError, TypeError) as exc:
        raise RegistryFormatError(f"malformed registry JSON: {exc}") from exc
    return reg


# -- public API ---------------------------------------------------------------

def parse_registry(text: str) -> Registry:
    """Parse either rendering; validated before returning."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise RegistryFormatError(f"invalid JSON: {exc}") from exc
        reg = _parse_json(doc)
    else:
        reg = _parse_text(text)
    reg.validate()
    return reg


def load_registry(path: str | Path) -> Registry:
    return parse_registry(Path(path).read_text())


def serialize_registry(reg: Registry, format: str = "text") -> str:
    if format == "text":
        return _serialize_text(reg)
    if format == "json":
        return json.dumps(reg.to_dict(), indent=2) + "\n"
    raise ValueError(f"unknown format {format!r}")


def default_registry() -> Registry:
    return load_registry(bundled_path("registry.txt"))
