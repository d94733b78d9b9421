"""Question decomposition: reframe a plain-language question into a typed,
machine-readable form.

The pattern decomposer scores each registered explanation type by a
weighted cue-phrase lexicon (presence-based, so adding a cue for a type
never lowers that type's score), breaking ties by registry order.  Feature
mentions are pulled from the text via the dataset schema's names and
aliases, bound to nearby values and comparators, and assembled into a
machine interpretation that always parses.  Questions with an explicit
alternative ("instead of", "rather than") split into a fact group and a
foil group; a bare number on the foil side attaches to the nearest
preceding feature mention.

A question bank generated from the registry's own question patterns serves
as gold data: the type is the owning pattern's type and the remaining
fields are built by the same extraction vocabulary, so the bank is correct
by construction.  The evaluator reports per-field match rates, a per-type
confusion matrix, and micro/macro/weighted averages.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .interp import FeatureConstraint, FeatureGroup, ParsedInterpretation
from .registry import Registry
from .schema import DatasetSchema

# -- reframed question --------------------------------------------------------


@dataclass
class ReframedQuestion:
    question: str
    explanation_type: str
    machine_interpretation: str
    action: str
    likelihood: str | None = None
    provenance: str = "pattern"  # pattern | llm | llm-fallback
    scores: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "explanation_type": self.explanation_type,
            "machine_interpretation": self.machine_interpretation,
            "action": self.action,
            "likelihood": self.likelihood,
            "provenance": self.provenance,
            "scores": self.scores,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ReframedQuestion":
        return cls(
            question=doc["question"],
            explanation_type=doc["explanation_type"],
            machine_interpretation=doc["machine_interpretation"],
            action=doc.get("action", "Explain"),
            likelihood=doc.get("likelihood"),
            provenance=doc.get("provenance", "pattern"),
            scores=doc.get("scores", {}),
        )


# -- cue lexicon --------------------------------------------------------------

# Distinctive phrases score 3, supporting phrases 2, weak hints 1.
BASE_CUES: dict[str, list[tuple[str, int]]] = {
    "counterfactual": [
        ("what if", 3),
        ("instead of", 3),
        ("would the prediction change", 3),
        ("would the outcome change", 3),
        ("what would happen", 3),
        ("dropped below", 2),
        ("were changed", 2),
    ],
    "case_based": [
        ("similar", 3),
        ("other situations", 3),
        ("other cases", 3),
        ("other patients", 3),
        ("been applied", 3),
        ("same circumstances", 2),
    ],
    "data": [
        ("what does the data", 3),
        ("data look like", 3),
        ("how has the data been used", 3),
        ("distribution", 3),
        ("what data", 3),
        ("the data", 2),
        ("the records", 2),
        ("dataset", 2),
        ("train the model", 2),
    ],
    "contrastive": [
        ("rather than", 3),
        ("and not", 3),
        ("why choose", 2),
        ("favor", 2),
        ("why not", 2),
    ],
    "rationale": [
        ("justify", 3),
        ("reasons", 3),
        ("why was this decision", 3),
        ("on what grounds", 2),
        ("what led", 2),
        ("why", 1),
    ],
    "contextual": [
        ("broader information", 3),
        ("context", 3),
        ("current situation", 2),
        ("beyond", 2),
        ("environment", 2),
        ("prompted", 2),
    ],
}

_SPLIT_PHRASES = ("instead of", "rather than", "and not")
_LIKELIHOOD_PHRASES = (
    "more likely",
    "less likely",
    "most likely",
    "least likely",
    "likely",
    "high",
    "low",
)
_NUM_RE = re.compile(r"-?\d+(?:\.\d+)?")

# linking words between a feature mention and its value
_LINK = r"(?:of|is|are|was|were|equals|equal\s+to|stays?|stayed|drops?|dropped|reaches|at|[=:])"
_CMP = {
    "gt": r"(?:over|above|greater\s+than|more\s+than|exceeds|exceeded)",
    "lt": r"(?:under|below|less\s+than)",
    "ge": r"(?:at\s+least|no\s+less\s+than)",
    "le": r"(?:at\s+most|no\s+more\s+than)",
}


def _normalize(text: str) -> str:
    """Lowercase, hyphens to spaces; length-preserving for span math."""
    return text.lower().replace("-", " ").replace("_", " ")


def _cue_text(text: str) -> str:
    out = re.sub(r"[^a-z0-9 ]", " ", _normalize(text))
    return " " + " ".join(out.split()) + " "


def _phrase_in(phrase: str, cue_text: str) -> bool:
    return f" {phrase} " in cue_text or cue_text.strip() == phrase


def extract_action(question: str) -> str:
    """Leading-verb action: prediction words win, then filtering words."""
    t = _cue_text(question)
    if re.search(r"\bpredict(s|ed|ing|ion|ions)?\b", t):
        return "Predict"
    if re.search(r"\b(filter|list|show)\b", t):
        return "Filter"
    return "Explain"


def extract_likelihood(question: str) -> str | None:
    t = _cue_text(question)
    for phrase in _LIKELIHOOD_PHRASES:
        if _phrase_in(phrase, t):
            return phrase
    return None


@dataclass
class _Mention:
    start: int
    end: int
    constraint: FeatureConstraint


class _MentionExtractor:
    """Finds feature mentions with bound values in question text."""

    def __init__(self, schema: DatasetSchema):
        self.schema = schema
        keys: list[tuple[str, str]] = []  # (alias text, feature name)
        for spec in schema.features:
            for key in (spec.name, *spec.aliases):
                keys.append((_normalize(key).strip(), spec.name))
        # longest alias first so 'diabetes pedigree function' beats 'diabetes'
        self.keys = sorted(set(keys), key=lambda kv: -len(kv[0]))
        self.category_patterns: list[tuple[re.Pattern, str, str]] = []
        for spec in schema.features:
            for cat in spec.categories:
                pat = re.compile(rf"\b{re.escape(_normalize(cat).strip())}\b")
                self.category_patterns.append((pat, spec.name, cat))

    def extract(self, text: str) -> tuple[list[_Mention], np.ndarray]:
        norm = _normalize(text)
        consumed = np.zeros(len(norm), dtype=bool)
        mentions: list[_Mention] = []

        for alias, feature in self.keys:
            spec = self.schema.resolve(feature)
            if not spec.is_numeric:
                continue
            for m in re.finditer(rf"\b{re.escape(alias)}\b", norm):
                if consumed[m.start() : m.end()].any():
                    continue
                bound = self._bind_value(norm, consumed, m.end(), m.start(), feature)
                if bound is None:
                    continue
                constraint, vstart, vend = bound
                consumed[m.start() : m.end()] = True
                consumed[vstart:vend] = True
                mentions.append(_Mention(m.start(), vend, constraint))

        for pat, feature, cat in self.category_patterns:
            for m in pat.finditer(norm):
                if consumed[m.start() : m.end()].any():
                    continue
                consumed[m.start() : m.end()] = True
                mentions.append(
                    _Mention(
                        m.start(),
                        m.end(),
                        FeatureConstraint(feature, "eq", value=cat),
                    )
                )

        mentions.sort(key=lambda mn: mn.start)
        return mentions, consumed

    def _bind_value(
        self, norm: str, consumed: np.ndarray, after: int, before: int, feature: str
    ) -> tuple[FeatureConstraint, int, int] | None:
        window = norm[after : after + 60]
        m = re.match(
            rf"\s*(?:the\s+)?{_LINK}?\s*between\s+(-?\d+(?:\.\d+)?)\s+and\s+(-?\d+(?:\.\d+)?)",
            window,
        )
        if m:
            lo, hi = float(m.group(1)), float(m.group(2))
            if lo < hi:
                return (
                    FeatureConstraint(feature, "range", low=lo, high=hi),
                    after + m.start(1),
                    after + m.end(2),
                )
        for op, cmp_pat in _CMP.items():
            m = re.match(
                rf"\s*{_LINK}?\s*{cmp_pat}\s+(-?\d+(?:\.\d+)?)", window
            )
            if m:
                return (
                    FeatureConstraint(feature, op, value=float(m.group(1))),
                    after + m.start(1),
                    after + m.end(1),
                )
        m = re.match(rf"\s*{_LINK}\s*(-?\d+(?:\.\d+)?)", window)
        if m:
            return (
                FeatureConstraint(feature, "eq", value=float(m.group(1))),
                after + m.start(1),
                after + m.end(1),
            )
        # value immediately before the mention, e.g. '45 year old'
        m = re.search(r"(-?\d+(?:\.\d+)?)\s*$", norm[:before])
        if m and not consumed[m.start(1) : m.end(1)].any():
            return (
                FeatureConstraint(feature, "eq", value=float(m.group(1))),
                m.start(1),
                m.end(1),
            )
        return None


class PatternDecomposer:
    """Deterministic question decomposer driven by a cue-phrase lexicon."""

    def __init__(self, registry: Registry, schema: DatasetSchema):
        self.registry = registry
        self.schema = schema
        self.extractor = _MentionExtractor(schema)
        self.cues: dict[str, list[tuple[str, int]]] = {}
        for t in registry.types:
            if t.id in BASE_CUES:
                self.cues[t.id] = BASE_CUES[t.id]
            else:
                self.cues[t.id] = _skeleton_cues(t.questions)

    # -- scoring ------------------------------------------------------------

    def score_types(self, question: str) -> dict[str, float]:
        cue_text = _cue_text(question)
        scores: dict[str, float] = {}
        for t in self.registry.types:
            total = 0.0
            for phrase, weight in self.cues[t.id]:
                if _phrase_in(phrase, cue_text):
                    total += weight
            scores[t.id] = total
        # 'why ... important' asks what mattered against the alternative
        if (
            "contrastive" in scores
            and _phrase_in("why", cue_text)
            and _phrase_in("important", cue_text)
        ):
            scores["contrastive"] += 4
        return scores

    def classify(self, question: str) -> tuple[str, dict[str, float]]:
        scores = self.score_types(question)
        best_id, best_score = None, -1.0
        for t in self.registry.types:  # registry order breaks ties
            if scores[t.id] > best_score:
                best_id, best_score = t.id, scores[t.id]
        if best_score <= 0:
            best_id = (
                "rationale" if "rationale" in scores else self.registry.types[0].id
            )
        return best_id, scores

    # -- full decomposition ---------------------------------------------------

    def interpret(self, question: str) -> ParsedInterpretation:
        mentions, consumed = self.extractor.extract(question)
        norm = _normalize(question)

        split_at = None
        for phrase in _SPLIT_PHRASES:
            pos = norm.find(phrase)
            if pos >= 0 and (split_at is None or pos < split_at):
                split_at = pos

        fact = [m.constraint for m in mentions if split_at is None or m.start < split_at]
        foil = [m.constraint for m in mentions if split_at is not None and m.start >= split_at]

        if split_at is not None and fact:
            # a bare number on the foil side varies the last fact feature
            anchor = next(
                (c for c in reversed(fact) if not isinstance(c.value, str)), None
            )
            if anchor is not None:
                for m in _NUM_RE.finditer(norm[split_at:]):
                    s, e = split_at + m.start(), split_at + m.end()
                    if consumed[s:e].any():
                        continue
                    consumed[s:e] = True
                    foil.append(
                        FeatureConstraint(anchor.feature, anchor.op, value=float(m.group()))
                    )

        target = self._find_target(norm, consumed)
        groups = [FeatureGroup(tuple(_dedup(fact)))]
        if foil:
            groups.append(FeatureGroup(tuple(_dedup(foil))))
        return ParsedInterpretation(
            action=extract_action(question),
            target=target,
            groups=tuple(groups),
        )

    def _find_target(self, norm: str, consumed: np.ndarray) -> str | None:
        o = self.schema.outcome
        labels = sorted(
            {o.positive_label, o.negative_label, *o.aliases},
            key=lambda s: -len(s),
        )
        for label in labels:
            pat = rf"\b{re.escape(_normalize(label).strip())}\b"
            for m in re.finditer(pat, norm):
                if consumed[m.start() : m.end()].any():
                    continue
                if _normalize(label).strip() == _normalize(o.negative_label).strip():
                    return o.negative_label
                return o.positive_label
        return None

    def decompose(self, question: str) -> ReframedQuestion:
        type_id, scores = self.classify(question)
        parsed = self.interpret(question)
        return ReframedQuestion(
            question=question,
            explanation_type=type_id,
            machine_interpretation=parsed.serialize(),
            action=parsed.action,
            likelihood=extract_likelihood(question),
            provenance="pattern",
            scores=scores,
        )


def _dedup(constraints: list[FeatureConstraint]) -> list[FeatureConstraint]:
    out: list[FeatureConstraint] = []
    for c in constraints:
        if c not in out:
            out.append(c)
    return out


def _skeleton_cues(questions: tuple[str, ...]) -> list[tuple[str, int]]:
    """Fallback cues for custom types: pattern text chunks sans placeholders."""
    cues: list[tuple[str, int]] = []
    for q in questions:
        for chunk in re.split(r"\{[a-zA-Z0-9_]+\}", q):
            words = _cue_text(chunk).split()
            if len(words) >= 2:
                cues.append((" ".join(words), 3 if len(words) >= 4 else 2))
    return cues


# -- question bank ------------------------------------------------------------


@dataclass
class BankEntry:
    question: str
    explanation_type: str
    action: str
    interpretation: str
    likelihood: str | None = None
    source: str = "generated"


def generate_question_bank(
    schema: DatasetSchema,
    registry: Registry,
    counts: dict[str, int] | int,
    seed: int = 0,
) -> list[BankEntry]:
    """Instantiate each type's question patterns with schema-sampled values.

    The gold fields are correct by construction: the type is the pattern's
    owner and the other fields come from the same extraction vocabulary the
    decomposer uses.
    """
    rng = np.random.default_rng(seed)
    if isinstance(counts, int):
        counts = {t.id: counts for t in registry.types}

    decomposer = PatternDecomposer(registry, schema)
    numeric = [f for f in schema.features if f.is_numeric and not f.mention_only]
    entries: list[BankEntry] = []
    for type_id, n in counts.items():
        t = registry.type_by_id(type_id)
        if not t.questions:
            continue
        for i in range(n):
            pattern = t.questions[i % len(t.questions)]
            question = _fill_pattern(pattern, schema, numeric, rng)
            parsed = decomposer.interpret(question)
            entries.append(
                BankEntry(
                    question=question,
                    explanation_type=type_id,
                    action=parsed.action,
                    interpretation=parsed.serialize(),
                    likelihood=extract_likelihood(question),
                    source="generated",
                )
            )
    return entries


def _fill_pattern(pattern, schema, numeric, rng) -> str:
    f1, f2 = (
        rng.choice(len(numeric), size=2, replace=False)
        if len(numeric) >= 2
        else (0, 0)
    )
    s1, s2 = numeric[int(f1)], numeric[int(f2)]
    v1 = _sample_value(s1, rng)
    v2 = _sample_value(s1, rng)  # value2 contrasts with value on one feature
    if v2 == v1:
        v2 = v1 + 10 ** -s1.precision
    return pattern.format(
        feature=s1.name,
        value=_render_value(v1, s1.precision),
        feature2=s2.name,
        value2=_render_value(v2, s1.precision),
        target=schema.outcome.positive_label,
    )


def _sample_value(spec, rng) -> float:
    lo, hi = spec.sample_range or (0.0, 100.0)
    return round(float(rng.uniform(lo, hi)), spec.precision)


def _render_value(v: float, precision: int) -> str:
    if precision <= 0 or float(v).is_integer():
        return str(int(round(v)))
    s = f"{v:.{precision}f}".rstrip("0").rstrip(".")
    return s


BANK_COLUMNS = ("uq", "type", "action", "interpretation", "likelihood", "source")


def save_bank(entries: list[BankEntry], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t")
        w.writerow(BANK_COLUMNS)
        for e in entries:
            w.writerow(
                [
                    e.question,
                    e.explanation_type,
                    e.action,
                    e.interpretation,
                    e.likelihood or "",
                    e.source,
                ]
            )


def load_bank(source: str | Path) -> list[BankEntry]:
    text = Path(source).read_text() if "\n" not in str(source) else str(source)
    rows = list(csv.reader(io.StringIO(text), delimiter="\t"))
    if not rows or tuple(rows[0]) != BANK_COLUMNS:
        raise ValueError(f"bank file must start with header {BANK_COLUMNS}")
    out = []
    for r in rows[1:]:
        if not r:
            continue
        out.append(
            BankEntry(
                question=r[0],
                explanation_type=r[1],
                action=r[2],
                interpretation=r[3],
                likelihood=r[4] or None,
                source=r[5] if len(r) > 5 else "",
            )
        )
    return out


# -- evaluation ---------------------------------------------------------------


@dataclass
class FieldReport:
    exact_rate: float
    edit_match_rate: float  # normalized similarity >= 0.9
    token_precision: float
    token_recall: float
    token_f1: float

    def to_dict(self) -> dict:
        return {
            "exact_rate": self.exact_rate,
            "edit_match_rate": self.edit_match_rate,
            "token_precision": self.token_precision,
            "token_recall": self.token_recall,
            "token_f1": self.token_f1,
        }


@dataclass
class TypeScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class DecomposeReport:
    n: int
    type_accuracy: float
    confusion: dict[str, dict[str, int]]  # gold type -> predicted type -> count
    per_type: dict[str, TypeScores]
    micro: TypeScores
    macro: TypeScores
    weighted: TypeScores
    fields: dict[str, FieldReport]

    def to_dict(self) -> dict:
        def ts(s: TypeScores) -> dict:
            return {
                "precision": s.precision,
                "recall": s.recall,
                "f1": s.f1,
                "support": s.support,
            }

        return {
            "n": self.n,
            "type_accuracy": self.type_accuracy,
            "confusion": self.confusion,
            "per_type": {k: ts(v) for k, v in self.per_type.items()},
            "micro": ts(self.micro),
            "macro": ts(self.macro),
            "weighted": ts(self.weighted),
            "fields": {k: v.to_dict() for k, v in self.fields.items()},
        }


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def edit_similarity(a: str, b: str) -> float:
    if not a and not b:
        return 1.0
    return 1.0 - levenshtein(a, b) / max(len(a), len(b))


def _token_prf(pred: str, gold: str) -> tuple[float, float, float]:
    pt, gt = pred.split(), gold.split()
    if not pt and not gt:
        return 1.0, 1.0, 1.0
    common = 0
    remaining = list(gt)
    for tok in pt:
        if tok in remaining:
            remaining.remove(tok)
            common += 1
    p = common / len(pt) if pt else 0.0
    r = common / len(gt) if gt else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def evaluate_decomposition(
    bank: list[BankEntry], decomposer: PatternDecomposer
) -> DecomposeReport:
    preds = [decomposer.decompose(e.question) for e in bank]
    golds = bank

    type_ids = list(dict.fromkeys([e.explanation_type for e in bank]))
    for rq in preds:
        if rq.explanation_type not in type_ids:
            type_ids.append(rq.explanation_type)
    confusion = {g: {p: 0 for p in type_ids} for g in type_ids}
    for e, rq in zip(golds, preds):
        confusion[e.explanation_type][rq.explanation_type] += 1

    per_type: dict[str, TypeScores] = {}
    for t in type_ids:
        tp = confusion[t][t]
        support = sum(confusion[t].values())
        predicted = sum(confusion[g][t] for g in type_ids)
        prec = tp / predicted if predicted else 0.0
        rec = tp / support if support else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        per_type[t] = TypeScores(prec, rec, f1, support)

    n = len(bank)
    correct = sum(confusion[t][t] for t in type_ids)
    micro_val = correct / n if n else 0.0
    micro = TypeScores(micro_val, micro_val, micro_val, n)
    present = [t for t in type_ids if per_type[t].support > 0]
    macro = TypeScores(
        float(np.mean([per_type[t].precision for t in present])) if present else 0.0,
        float(np.mean([per_type[t].recall for t in present])) if present else 0.0,
        float(np.mean([per_type[t].f1 for t in present])) if present else 0.0,
        n,
    )
    weighted = TypeScores(
        sum(per_type[t].precision * per_type[t].support for t in present) / n if n else 0.0,
        sum(per_type[t].recall * per_type[t].support for t in present) / n if n else 0.0,
        sum(per_type[t].f1 * per_type[t].support for t in present) / n if n else 0.0,
        n,
    )

    fields: dict[str, FieldReport] = {}
    field_getters = {
        "machine_interpretation": (
            lambda rq: rq.machine_interpretation,
            lambda e: e.interpretation,
        ),
        "action": (lambda rq: rq.action, lambda e: e.action),
        "likelihood": (
            lambda rq: rq.likelihood or "",
            lambda e: e.likelihood or "",
        ),
    }
    for name, (get_pred, get_gold) in field_getters.items():
        exact, editm, ps, rs, fs = 0, 0, [], [], []
        for e, rq in zip(golds, preds):
            pv, gv = get_pred(rq), get_gold(e)
            exact += pv == gv
            editm += edit_similarity(pv, gv) >= 0.9
            p, r, f = _token_prf(pv, gv)
            ps.append(p)
            rs.append(r)
            fs.append(f)
        fields[name] = FieldReport(
            exact_rate=exact / n if n else 0.0,
            edit_match_rate=editm / n if n else 0.0,
            token_precision=float(np.mean(ps)) if ps else 0.0,
            token_recall=float(np.mean(rs)) if rs else 0.0,
            token_f1=float(np.mean(fs)) if fs else 0.0,
        )

    return DecomposeReport(
        n=n,
        type_accuracy=micro_val,
        confusion=confusion,
        per_type=per_type,
        micro=micro,
        macro=macro,
        weighted=weighted,
        fields=fields,
    )
