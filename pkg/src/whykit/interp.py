"""Machine-interpretation grammar: parse and serialize structured readings
of user questions.

Grammar (EBNF):

    interp     := action group {[','] group}
                | cond_list
    group      := '(' [args] ')'
    args       := term {',' term}
    term       := cond | label
    cond       := feature op value
                | feature '=' '(' bound ',' bound ')'
    cond_list  := cond {(',' | 'AND') cond}
    op         := '=' | '<' | '>' | '<=' | '>='
    bound      := ['<' | '>'] (number | '-inf' | 'inf' | '+inf')
    value      := number | word
    action     := word
    label      := word {word}

Interval conditions are half-open: lower bound inclusive, upper exclusive.
A stray comparator inside an interval bound (as printed in some rule tables,
e.g. ``(<168.5, inf)``) is typographic noise and is dropped.  Parsing is
insensitive to case and surrounding whitespace.  The leading non-feature
label of the first group becomes the target; feature names resolve through
the dataset schema (aliases included) and tokens that resolve to nothing are
recorded in ``residue`` rather than failing the parse.  Only structural
violations raise :class:`~whykit.errors.UnusableParse`.

``serialize`` emits the canonical form ``Action(Target, f1 = v1, ...)`` with
one trailing ``, (...)`` block per additional group; re-parsing a serialized
interpretation is the identity on the parse result.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .errors import UnusableParse
from .schema import DatasetSchema

OPS = ("eq", "lt", "gt", "le", "ge", "range")

_OP_TOKENS = {"=": "eq", "<": "lt", ">": "gt", "<=": "le", ">=": "ge"}
_OP_TEXT = {v: k for k, v in _OP_TOKENS.items()}

_TOKEN_RE = re.compile(
    r"""
    (?P<num>-?\d+\.\d+|-?\.\d+|-?\d+)
  | (?P<op><=|>=|=|<|>)
  | (?P<punct>[(),])
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<inf>[+-]inf)
  | (?P<skip>[?.!;:'"]+)
  | (?P<ws>\s+)
  | (?P<bad>.)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class FeatureConstraint:
    """One condition on one feature."""

    feature: str
    op: str  # one of OPS
    value: float | str | None = None
    low: float | None = None  # range only, inclusive
    high: float | None = None  # range only, exclusive

    def __post_init__(self):
        if self.op not in OPS:
            raise ValueError(f"unknown op {self.op!r}")

    def satisfied(self, v, eq_tol: float = 1e-9) -> bool:
        """Does a record value satisfy this constraint?"""
        if self.op == "range":
            return self.low <= v < self.high
        if isinstance(self.value, str):
            return self.op == "eq" and str(v).casefold() == self.value.casefold()
        if self.op == "eq":
            return abs(v - self.value) <= eq_tol
        if self.op == "lt":
            return v < self.value
        if self.op == "gt":
            return v > self.value
        if self.op == "le":
            return v <= self.value
        return v >= self.value

    def render(self) -> str:
        if self.op == "range":
            return f"{self.feature} = ({_fmt_num(self.low)}, {_fmt_num(self.high)})"
        val = self.value if isinstance(self.value, str) else _fmt_num(self.value)
        return f"{self.feature} {_OP_TEXT[self.op]} {val}"


@dataclass(frozen=True)
class FeatureGroup:
    """One parenthesized tuple of conditions (e.g. a fact or a foil side)."""

    constraints: tuple[FeatureConstraint, ...] = ()

    def __iter__(self):
        return iter(self.constraints)

    def __len__(self):
        return len(self.constraints)


@dataclass(frozen=True)
class ParsedInterpretation:
    action: str = "Explain"
    target: str | None = None
    groups: tuple[FeatureGroup, ...] = (FeatureGroup(),)
    residue: tuple[str, ...] = ()

    def serialize(self) -> str:
        groups = self.groups or (FeatureGroup(),)
        rendered: list[list[str]] = []
        for i, group in enumerate(groups):
            parts: list[str] = []
            if i == 0 and self.target:
                parts.append(self.target)
            parts.extend(c.render() for c in group)
            rendered.append(parts)
        # Residue goes into the last group: there it can never be mistaken
        # for a leading target label when the serialization is re-parsed.
        rendered[-1].extend(self.residue)
        out = f"{self.action}({', '.join(rendered[0])})"
        for parts in rendered[1:]:
            out += f", ({', '.join(parts)})"
        return out


def _fmt_num(x: float) -> str:
    if x == math.inf:
        return "inf"
    if x == -math.inf:
        return "-inf"
    if float(x).is_integer():
        return str(int(x))
    return repr(float(x))


# -- tokenizer ----------------------------------------------------------------

@dataclass
class _Tok:
    kind: str  # num | op | punct | word
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        if kind in ("ws", "skip"):
            continue
        if kind == "bad":
            raise UnusableParse(
                f"unexpected character {m.group()!r}", {"position": m.start()}
            )
        if kind == "inf":
            kind = "num"
        toks.append(_Tok(kind, m.group(), m.start()))
    return toks


def _term_text(term: list[_Tok]) -> str:
    """Raw lowercased text of a term, re-tokenizable to the same tokens."""
    out = ""
    for t in term:
        piece = t.text.lower()
        if piece in (",", ")"):
            out += piece
        elif out.endswith("("):
            out += piece
        else:
            out += (" " if out else "") + piece
    return out


# -- parser -------------------------------------------------------------------

class _Parser:
    def __init__(self, toks: list[_Tok], schema: DatasetSchema):
        self.toks = toks
        self.i = 0
        self.schema = schema
        self.residue: list[str] = []

    def peek(self, ahead: int = 0) -> _Tok | None:
        j = self.i + ahead
        return self.toks[j] if j < len(self.toks) else None

    def next(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            raise UnusableParse("unexpected end of input")
        self.i += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.text != text:
            raise UnusableParse(
                f"expected {text!r}, found {tok.text!r}", {"position": tok.pos}
            )
        return tok

    # interp := action group {[','] group} | cond_list
    def parse(self) -> ParsedInterpretation:
        if not self.toks:
            raise UnusableParse("empty interpretation")
        first, second = self.peek(), self.peek(1)
        if first.kind == "word" and second is not None and second.text == "(":
            action = self.next().text.capitalize()
            target, groups = None, []
            while True:
                grp_target = self.parse_group(first_group=not groups)
                if not groups:
                    target = grp_target
                groups.append(self.current_group)
                nxt = self.peek()
                if nxt is not None and nxt.text == ",":
                    after = self.peek(1)
                    if after is not None and after.text == "(":
                        self.next()
                        continue
                if nxt is not None and nxt.text == "(":
                    continue
                break
            if self.peek() is not None:
                tok = self.peek()
                raise UnusableParse(
                    f"trailing content {tok.text!r}", {"position": tok.pos}
                )
            return ParsedInterpretation(
                action=action,
                target=target,
                groups=tuple(groups),
                residue=tuple(self.residue),
            )
        constraints = self.parse_cond_list()
        return ParsedInterpretation(
            action="Explain",
            target=None,
            groups=(FeatureGroup(tuple(constraints)),),
            residue=tuple(self.residue),
        )

    # group := '(' [args] ')'
    def parse_group(self, first_group: bool) -> str | None:
        self.expect("(")
        target: str | None = None
        constraints: list[FeatureConstraint] = []
        saw_cond = False
        if self.peek() is not None and self.peek().text == ")":
            self.next()
            self.current_group = FeatureGroup()
            return None
        while True:
            term = self.collect_term(stop_and=True)
            if self.term_is_cond(term):
                cons = self.build_cond(term)
                if cons is not None:
                    constraints.append(cons)
                saw_cond = True
            else:
                name = " ".join(t.text for t in term)
                if first_group and target is None and not saw_cond and not _is_feature(
                    self.schema, name
                ):
                    target = _canon_label(self.schema, name)
                else:
                    self.residue.append(_term_text(term))
            tok = self.next()
            if tok.text == ")":
                break
            if tok.text != "," and tok.text.lower() != "and":
                raise UnusableParse(
                    f"expected ',', 'AND' or ')', found {tok.text!r}",
                    {"position": tok.pos},
                )
        self.current_group = FeatureGroup(tuple(constraints))
        return target

    # cond_list := cond {(',' | 'AND') cond}
    def parse_cond_list(self) -> list[FeatureConstraint]:
        constraints: list[FeatureConstraint] = []
        while True:
            term = self.collect_term(stop_and=True)
            if not self.term_is_cond(term):
                name = " ".join(t.text for t in term) if term else "<empty>"
                raise UnusableParse(
                    f"bare label {name!r} outside parentheses",
                    {"position": term[0].pos if term else 0},
                )
            cons = self.build_cond(term)
            if cons is not None:
                constraints.append(cons)
            tok = self.peek()
            if tok is None:
                break
            if tok.text == "," or tok.text.lower() == "and":
                self.next()
                continue
            raise UnusableParse(
                f"expected ',' or 'AND', found {tok.text!r}", {"position": tok.pos}
            )
        return constraints

    # -- term handling ---------------------------------------------------

    def collect_term(self, stop_and: bool = False) -> list[_Tok]:
        """Tokens up to the next top-level ',' / ')' / 'AND' boundary."""
        term: list[_Tok] = []
        depth = 0
        while True:
            tok = self.peek()
            if tok is None:
                if depth:
                    raise UnusableParse("unclosed '('")
                break
            if tok.text == "(":
                depth += 1
            elif tok.text == ")":
                if depth == 0:
                    break
                depth -= 1
            elif depth == 0 and tok.text == ",":
                break
            elif depth == 0 and stop_and and tok.text.lower() == "and":
                break
            term.append(self.next())
        if not term:
            raise UnusableParse("empty term")
        return term

    @staticmethod
    def term_is_cond(term: list[_Tok]) -> bool:
        return any(t.kind == "op" for t in term)

    def build_cond(self, term: list[_Tok]) -> FeatureConstraint | None:
        """Assemble a constraint; unresolvable features go to residue."""
        op_at = next(i for i, t in enumerate(term) if t.kind == "op")
        name_toks, op_tok, value_toks = term[:op_at], term[op_at], term[op_at + 1:]
        if not name_toks or any(t.kind != "word" for t in name_toks):
            raise UnusableParse(
                f"expected a feature name before {op_tok.text!r}",
                {"position": op_tok.pos},
            )
        name = " ".join(t.text for t in name_toks)
        op = _OP_TOKENS[op_tok.text]
        if not value_toks:
            raise UnusableParse(
                f"missing value after {op_tok.text!r}", {"position": op_tok.pos}
            )

        spec = self.schema.try_resolve(name)
        if value_toks[0].text == "(":
            if op != "eq":
                raise UnusableParse(
                    "interval bounds are only valid with '='",
                    {"position": op_tok.pos},
                )
            low, high = self.parse_bounds(value_toks)
            if not low < high:
                raise UnusableParse(
                    f"interval requires lower < upper, got ({low}, {high})",
                    {"position": value_toks[0].pos},
                )
            if spec is None:
                self.residue.append(_term_text(term))
                return None
            return FeatureConstraint(spec.name, "range", low=low, high=high)

        if len(value_toks) != 1:
            raise UnusableParse(
                "a condition takes a single value",
                {"position": value_toks[1].pos},
            )
        vtok = value_toks[0]
        if spec is None:
            self.residue.append(_term_text(term))
            return None
        if vtok.kind == "num" and not vtok.text.endswith("inf"):
            return FeatureConstraint(spec.name, op, value=float(vtok.text))
        if vtok.kind == "word":
            if spec.is_numeric:
                # A word value cannot constrain a numeric column.
                self.residue.append(_term_text(term))
                return None
            if op != "eq":
                raise UnusableParse(
                    f"categorical values only support '=', got {op_tok.text!r}",
                    {"position": op_tok.pos},
                )
            value = _canon_category(spec.categories, vtok.text)
            return FeatureConstraint(spec.name, "eq", value=value)
        raise UnusableParse(
            f"bad condition value {vtok.text!r}", {"position": vtok.pos}
        )

    @staticmethod
    def parse_bounds(toks: list[_Tok]) -> tuple[float, float]:
        """Parse '(' bound ',' bound ')' from a term's value tokens."""
        if toks[-1].text != ")":
            raise UnusableParse("unclosed interval", {"position": toks[0].pos})
        inner = toks[1:-1]
        sides: list[list[_Tok]] = [[]]
        for t in inner:
            if t.text == ",":
                sides.append([])
            else:
                sides[-1].append(t)
        if len(sides) != 2:
            raise UnusableParse(
                "an interval needs exactly two bounds", {"position": toks[0].pos}
            )
        return (_parse_bound(sides[0]), _parse_bound(sides[1]))


def _parse_bound(toks: list[_Tok]) -> float:
    # Tolerate one stray comparator glued to a bound, e.g. '(<168.5, inf)'.
    toks = [t for t in toks if t.kind != "op"]
    if len(toks) != 1:
        raise UnusableParse("bad interval bound")
    text = toks[0].text.lower()
    if text in ("inf", "+inf"):
        return math.inf
    if text == "-inf":
        return -math.inf
    if toks[0].kind == "num":
        return float(text)
    raise UnusableParse(f"bad interval bound {toks[0].text!r}")


def _is_feature(schema: DatasetSchema, name: str) -> bool:
    return schema.try_resolve(name) is not None


def _canon_label(schema: DatasetSchema, token: str) -> str:
    """Canonical casing for a target label (outcome labels via the schema)."""
    t = token.casefold()
    for label in (schema.outcome.positive_label, schema.outcome.negative_label):
        if t == label.casefold():
            return label
    if t in {a.casefold() for a in schema.outcome.aliases}:
        return schema.outcome.positive_label
    return " ".join(w.capitalize() for w in token.split())


def _canon_category(categories: tuple[str, ...], token: str) -> str:
    for cat in categories:
        if token.casefold() == cat.casefold():
            return cat
    return token.capitalize()


# -- public API ---------------------------------------------------------------

def parse_interpretation(text: str, schema: DatasetSchema) -> ParsedInterpretation:
    """Parse interpretation text against a schema.

    Raises UnusableParse for structural violations; unresolvable feature
    tokens are recorded in ``residue`` instead.
    """
    if not isinstance(text, str) or not text.strip():
        raise UnusableParse("empty interpretation")
    return _Parser(_tokenize(text), schema).parse()


def serialize_interpretation(parsed: ParsedInterpretation) -> str:
    return parsed.serialize()
