"""Textual clause engine: the nine diagram-annotation templates.

Structural clauses (points on lines and circles) and semantic clauses
(segment/arc/angle measures, parallel and perpendicular relations) are
rendered from structured facts and parsed back.  The canonical form uses
the glyphs o-dot, angle, perp and parallel; an ASCII mode substitutes
"circle", "angle(...)", "perp" and "para".  Arc hats are always written
"arc(..)" in text.

assign_problem_vars numbers the measurement values (Nk) in reading order
across the semantic clauses and then the problem text, which is the
contract the executor's declarations rely on.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

from .errors import KindError, TemplateMismatch, TooManyVariables

GLYPH_CIRCLE = "⊙"   # ⊙
GLYPH_ANGLE = "∠"    # ∠
GLYPH_PERP = "⊥"     # ⊥
GLYPH_PARA = "∥"     # ∥

_POINT_RE = re.compile(r"[A-Z]$")
_SEGMENT_RE = re.compile(r"[A-Z]{2}$")
_ARC_RE = re.compile(r"[A-Z]{2,3}$")
_ANGLE_REF_RE = re.compile(r"([A-Z]{3}|[A-Z]|\d+)$")
_LINE_NAME_RE = re.compile(r"[a-z]$")
_NUMBER_TOKEN_RE = re.compile(r"\d+(\.\d+)?$")
_ANNOTATION_RE = re.compile(r"\(N\d+\)")


class ClauseCategory(Enum):
    STRUCTURAL = "structural"
    SEMANTIC = "semantic"


@dataclass(frozen=True)
class LineRef:
    """Either a two-point segment name or a named line ('line k')."""

    text: str

    @property
    def is_named(self) -> bool:
        return _LINE_NAME_RE.match(self.text) is not None

    def render(self) -> str:
        return f"line {self.text}" if self.is_named else self.text

    def validate(self) -> None:
        if not (self.is_named or _SEGMENT_RE.match(self.text)):
            raise KindError(f"bad line reference {self.text!r}")


@dataclass(frozen=True)
class PointsOnLine:
    points: tuple[str, ...]


@dataclass(frozen=True)
class NamedLinePoints:
    name: str
    points: tuple[str, ...]


@dataclass(frozen=True)
class PointsOnCircle:
    center: str
    points: tuple[str, ...]


@dataclass(frozen=True)
class SegEq:
    members: tuple[str, ...]  # two-letter segment names
    value: Optional[str] = None


@dataclass(frozen=True)
class ArcLenEq:
    members: tuple[str, ...]  # arc point lists, 2-3 letters
    value: Optional[str] = None


@dataclass(frozen=True)
class AngleEq:
    members: tuple[str, ...]  # 'ABC' | 'A' | '1'
    value: Optional[str] = None


@dataclass(frozen=True)
class ArcDegEq:
    members: tuple[str, ...]
    value: Optional[str] = None


@dataclass(frozen=True)
class Parallel:
    members: tuple[LineRef, ...]


@dataclass(frozen=True)
class Perpendicular:
    first: LineRef
    second: LineRef
    foot: str


AnnotationFact = Union[PointsOnLine, NamedLinePoints, PointsOnCircle, SegEq,
                       ArcLenEq, AngleEq, ArcDegEq, Parallel, Perpendicular]

_STRUCTURAL_KINDS = (PointsOnLine, NamedLinePoints, PointsOnCircle)

KIND_NAMES = {
    PointsOnLine: "points_on_line",
    NamedLinePoints: "named_line_points",
    PointsOnCircle: "points_on_circle",
    SegEq: "seg_eq",
    ArcLenEq: "arc_len_eq",
    AngleEq: "angle_eq",
    ArcDegEq: "arc_deg_eq",
    Parallel: "parallel",
    Perpendicular: "perpendicular",
}
KINDS_BY_NAME = {name: cls for cls, name in KIND_NAMES.items()}


@dataclass(frozen=True)
class Clause:
    category: ClauseCategory
    kind: str
    text: str
    fact: AnnotationFact


@dataclass(frozen=True)
class TaggedToken:
    token: str
    tag: str  # General | VarNum | Arg | Point | AngleId


def _require(cond: bool, fact, what: str) -> None:
    if not cond:
        raise KindError(f"{type(fact).__name__}: {what}")


def _validate(fact: AnnotationFact) -> None:
    if isinstance(fact, PointsOnLine):
        _require(len(fact.points) >= 2, fact, "needs at least two points")
        _require(all(_POINT_RE.match(p) for p in fact.points), fact, "points are uppercase letters")
    elif isinstance(fact, NamedLinePoints):
        _require(bool(_LINE_NAME_RE.match(fact.name)), fact, "line name is a lowercase letter")
        _require(len(fact.points) >= 1, fact, "needs points")
        _require(all(_POINT_RE.match(p) for p in fact.points), fact, "points are uppercase letters")
    elif isinstance(fact, PointsOnCircle):
        _require(bool(_POINT_RE.match(fact.center)), fact, "center is an uppercase letter")
        _require(len(fact.points) >= 1, fact, "needs points")
        _require(all(_POINT_RE.match(p) for p in fact.points), fact, "points are uppercase letters")
    elif isinstance(fact, SegEq):
        _require(len(fact.members) >= 1, fact, "needs a segment")
        _require(all(_SEGMENT_RE.match(s) for s in fact.members), fact, "segments are two letters")
        _require(fact.value is not None or len(fact.members) >= 2, fact, "needs a value or two members")
    elif isinstance(fact, (ArcLenEq, ArcDegEq)):
        _require(len(fact.members) >= 1, fact, "needs an arc")
        _require(all(_ARC_RE.match(s) for s in fact.members), fact, "arcs are 2-3 letters")
        _require(fact.value is not None or len(fact.members) >= 2, fact, "needs a value or two members")
    elif isinstance(fact, AngleEq):
        _require(len(fact.members) >= 1, fact, "needs an angle")
        _require(all(_ANGLE_REF_RE.match(s) for s in fact.members), fact,
                 "angle refs are 3 points, a vertex, or an ID")
        _require(fact.value is not None or len(fact.members) >= 2, fact, "needs a value or two members")
    elif isinstance(fact, Parallel):
        _require(len(fact.members) >= 2, fact, "needs two line references")
        for ref in fact.members:
            ref.validate()
    elif isinstance(fact, Perpendicular):
        fact.first.validate()
        fact.second.validate()
        _require(bool(_POINT_RE.match(fact.foot)), fact, "foot is an uppercase letter")
    else:
        raise KindError(f"not an annotation fact: {fact!r}")


def _angle_text(ref: str, ascii_mode: bool) -> str:
    return f"angle({ref})" if ascii_mode else f"{GLYPH_ANGLE}{ref}"


def render_fact(fact: AnnotationFact, ascii_mode: bool = False) -> str:
    """Render one fact through its template."""
    _validate(fact)
    if isinstance(fact, PointsOnLine):
        return "line " + " ".join(fact.points)
    if isinstance(fact, NamedLinePoints):
        return f"line {fact.name} lieson " + " ".join(fact.points)
    if isinstance(fact, PointsOnCircle):
        prefix = f"circle {fact.center}" if ascii_mode else f"{GLYPH_CIRCLE}{fact.center}"
        return f"{prefix} lieson " + " ".join(fact.points)
    if isinstance(fact, SegEq):
        parts = list(fact.members)
        if fact.value is not None:
            parts.append(fact.value)
        return " = ".join(parts)
    if isinstance(fact, ArcLenEq):
        parts = [f"l arc({m})" for m in fact.members]
        if fact.value is not None:
            parts.append(fact.value)
        return " = ".join(parts)
    if isinstance(fact, AngleEq):
        parts = [f"m {_angle_text(m, ascii_mode)}" for m in fact.members]
        if fact.value is not None:
            parts.append(fact.value)
        return " = ".join(parts)
    if isinstance(fact, ArcDegEq):
        parts = [f"m arc({m})" for m in fact.members]
        if fact.value is not None:
            parts.append(fact.value)
        return " = ".join(parts)
    if isinstance(fact, Parallel):
        joiner = " para " if ascii_mode else f" {GLYPH_PARA} "
        return joiner.join(ref.render() for ref in fact.members)
    if isinstance(fact, Perpendicular):
        joiner = " perp " if ascii_mode else f" {GLYPH_PERP} "
        return f"{fact.first.render()}{joiner}{fact.second.render()} on {fact.foot}"
    raise KindError(f"not an annotation fact: {fact!r}")


def fact_category(fact: AnnotationFact) -> ClauseCategory:
    if isinstance(fact, _STRUCTURAL_KINDS):
        return ClauseCategory.STRUCTURAL
    return ClauseCategory.SEMANTIC


def make_clause(fact: AnnotationFact, ascii_mode: bool = False) -> Clause:
    return Clause(fact_category(fact), KIND_NAMES[type(fact)],
                  render_fact(fact, ascii_mode), fact)


def render_clauses(facts: list[AnnotationFact], ascii_mode: bool = False) -> list[Clause]:
    """One clause per fact, order preserved."""
    return [make_clause(fact, ascii_mode) for fact in facts]


def strip_annotations(text: str) -> str:
    """Remove problem-variable markers like '(N0)'."""
    return _ANNOTATION_RE.sub("", text)


def _norm(text: str) -> str:
    return re.sub(r"\s+", " ", text.strip())


def _parse_line_ref(text: str) -> LineRef:
    text = text.strip()
    if text.startswith("line "):
        name = text[len("line "):].strip()
        ref = LineRef(name)
    else:
        ref = LineRef(text)
    ref.validate()
    return ref


def _split_eq(text: str) -> list[str]:
    return [part.strip() for part in text.split("=")]


_NEAREST = {
    "line": 'structural "line A B C" / "line k lieson A B C"',
    GLYPH_CIRCLE: f'structural "{GLYPH_CIRCLE}O lieson E F G"',
    "circle": f'structural "{GLYPH_CIRCLE}O lieson E F G"',
    "m " + GLYPH_ANGLE: f'semantic "m {GLYPH_ANGLE}A = m {GLYPH_ANGLE}1 = 30"',
    "m angle": f'semantic "m {GLYPH_ANGLE}A = m {GLYPH_ANGLE}1 = 30"',
    "m arc": 'semantic "m arc(EFG) = 270"',
    "l arc": 'semantic "l arc(EF) = 5pi"',
}


def _nearest_template(text: str) -> str:
    for prefix, template in _NEAREST.items():
        if text.startswith(prefix):
            return template
    if GLYPH_PERP in text or " perp " in text:
        return f'semantic "EF {GLYPH_PERP} GH on C"'
    if GLYPH_PARA in text or " para " in text:
        return f'semantic "line k {GLYPH_PARA} line m {GLYPH_PARA} EF"'
    if "=" in text:
        return 'semantic "AB = CD = 3x+y"'
    return 'structural "line A B C"'


def parse_clause(text: str) -> Clause:
    """Parse clause text (canonical or ASCII) back into a fact."""
    original = text
    text = _norm(strip_annotations(text))
    if not text:
        raise TemplateMismatch(original, _nearest_template(""))
    try:
        fact = _parse_fact(text)
    except (KindError, TemplateMismatch):
        raise TemplateMismatch(original, _nearest_template(text)) from None
    return make_clause(fact)


def _parse_fact(text: str) -> AnnotationFact:
    perp_split = re.split(rf" {GLYPH_PERP} | perp ", text)
    if len(perp_split) == 2:
        right = perp_split[1]
        if " on " not in right:
            raise TemplateMismatch(text, _nearest_template(text))
        second_text, foot = right.rsplit(" on ", 1)
        return Perpendicular(_parse_line_ref(perp_split[0]),
                             _parse_line_ref(second_text), foot.strip())
    para_split = re.split(rf" {GLYPH_PARA} | para ", text)
    if len(para_split) >= 2:
        return Parallel(tuple(_parse_line_ref(part) for part in para_split))
    if text.startswith("line "):
        tokens = text.split()[1:]
        if len(tokens) >= 2 and tokens[1] == "lieson":
            return NamedLinePoints(tokens[0], tuple(tokens[2:]))
        return PointsOnLine(tuple(tokens))
    if text.startswith(GLYPH_CIRCLE) or text.startswith("circle "):
        if text.startswith(GLYPH_CIRCLE):
            rest = text[1:]
        else:
            rest = text[len("circle "):]
        tokens = rest.split()
        if len(tokens) >= 2 and tokens[1] == "lieson":
            return PointsOnCircle(tokens[0], tuple(tokens[2:]))
        raise TemplateMismatch(text, _nearest_template(text))
    if "=" in text:
        parts = _split_eq(text)
        if all(p.startswith(("m " + GLYPH_ANGLE, "m angle")) for p in parts[:-1]) and parts[:-1]:
            members, value = _parse_measure_members(parts, "angle")
            return AngleEq(tuple(members), value)
        if all(p.startswith("m arc") for p in parts[:-1]) and parts[:-1]:
            members, value = _parse_measure_members(parts, "arc_m")
            return ArcDegEq(tuple(members), value)
        if all(p.startswith("l arc") for p in parts[:-1]) and parts[:-1]:
            members, value = _parse_measure_members(parts, "arc_l")
            return ArcLenEq(tuple(members), value)
        members: list[str] = []
        value: Optional[str] = None
        for i, part in enumerate(parts):
            if _SEGMENT_RE.match(part):
                members.append(part)
            elif i == len(parts) - 1 and part:
                value = part
            else:
                raise TemplateMismatch(text, _nearest_template(text))
        return SegEq(tuple(members), value)
    raise TemplateMismatch(text, _nearest_template(text))


def _parse_measure_members(parts: list[str], shape: str) -> tuple[list[str], Optional[str]]:
    def member_of(part: str) -> Optional[str]:
        if shape == "angle":
            m = re.match(rf"m (?:{GLYPH_ANGLE}|angle\()\s*([A-Z]{{3}}|[A-Z]|\d+)\)?$", part)
        elif shape == "arc_m":
            m = re.match(r"m arc\(([A-Z]{2,3})\)$", part)
        else:
            m = re.match(r"l arc\(([A-Z]{2,3})\)$", part)
        return m.group(1) if m else None

    members: list[str] = []
    value: Optional[str] = None
    for i, part in enumerate(parts):
        ref = member_of(part)
        if ref is not None:
            members.append(ref)
        elif i == len(parts) - 1 and part:
            value = part
        else:
            raise TemplateMismatch(part, _NEAREST["m arc"])
    return members, value


# --- token tagging ---------------------------------------------------------

_SPLIT_PUNCT = set("()=+-*/^,")
_GLYPH_PREFIXES = (GLYPH_ANGLE, GLYPH_CIRCLE)


def _split_tokens(text: str) -> list[tuple[str, int, int]]:
    """Tokens with character spans: glyph-prefixed refs stay whole, letter
    runs stay whole, digits/punctuation split off."""
    tokens: list[tuple[str, int, int]] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in _SPLIT_PUNCT or c in (GLYPH_PERP, GLYPH_PARA):
            tokens.append((c, i, i + 1))
            i += 1
            continue
        if c in _GLYPH_PREFIXES:
            j = i + 1
            while j < n and text[j].isalnum():
                j += 1
            tokens.append((text[i:j], i, j))
            i = j
            continue
        if c.isdigit():
            j = i
            seen_dot = False
            while j < n and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                if text[j] == ".":
                    seen_dot = True
                j += 1
            tokens.append((text[i:j], i, j))
            i = j
            continue
        if c.isalpha() or c == "π":
            j = i
            while j < n and (text[j].isalpha() or text[j] == "π"):
                j += 1
            tokens.append((text[i:j], i, j))
            i = j
            continue
        tokens.append((c, i, i + 1))
        i += 1
    return tokens


def _tag_of(tok: str, nxt: str) -> str:
    if tok.startswith(GLYPH_ANGLE):
        return "AngleId" if tok[1:].isdigit() else "Point"
    if tok.startswith(GLYPH_CIRCLE):
        return "Point"
    if tok.isalpha() and tok.isupper():
        return "Point"
    if _NUMBER_TOKEN_RE.match(tok):
        return "VarNum"
    if len(tok) == 1 and tok.islower():
        if tok in ("m", "l") and (nxt.startswith(_GLYPH_PREFIXES) or
                                  nxt in ("arc", "angle", "widehat")):
            return "General"
        return "Arg"
    return "General"


def tag_tokens(text: str) -> list[TaggedToken]:
    """Whitespace/punctuation tokenization with deterministic tags."""
    spans = _split_tokens(text)
    tagged: list[TaggedToken] = []
    for i, (tok, _, _) in enumerate(spans):
        nxt = spans[i + 1][0] if i + 1 < len(spans) else ""
        tagged.append(TaggedToken(tok, _tag_of(tok, nxt)))
    return tagged


def tagged_spans(text: str) -> list[tuple[str, str, int, int]]:
    """(token, tag, start, end) — used by augmentation for in-place edits."""
    spans = _split_tokens(text)
    out: list[tuple[str, str, int, int]] = []
    for i, (tok, start, end) in enumerate(spans):
        nxt = spans[i + 1][0] if i + 1 < len(spans) else ""
        out.append((tok, _tag_of(tok, nxt), start, end))
    return out


# --- fact (de)serialization --------------------------------------------------


def fact_to_json(fact: AnnotationFact) -> dict:
    """JSON object form of a fact; named lines render as 'line k'."""
    kind = KIND_NAMES[type(fact)]
    if isinstance(fact, PointsOnLine):
        return {"kind": kind, "points": list(fact.points)}
    if isinstance(fact, NamedLinePoints):
        return {"kind": kind, "name": fact.name, "points": list(fact.points)}
    if isinstance(fact, PointsOnCircle):
        return {"kind": kind, "center": fact.center, "points": list(fact.points)}
    if isinstance(fact, (SegEq, ArcLenEq, AngleEq, ArcDegEq)):
        out = {"kind": kind, "members": list(fact.members)}
        if fact.value is not None:
            out["value"] = fact.value
        return out
    if isinstance(fact, Parallel):
        return {"kind": kind, "members": [ref.render() for ref in fact.members]}
    if isinstance(fact, Perpendicular):
        return {"kind": kind, "first": fact.first.render(),
                "second": fact.second.render(), "foot": fact.foot}
    raise KindError(f"not an annotation fact: {fact!r}")


def fact_from_json(data: dict) -> AnnotationFact:
    kind = data.get("kind")
    cls = KINDS_BY_NAME.get(kind)
    if cls is None:
        raise KindError(f"unknown fact kind {kind!r}")
    try:
        if cls is PointsOnLine:
            fact = PointsOnLine(tuple(data["points"]))
        elif cls is NamedLinePoints:
            fact = NamedLinePoints(data["name"], tuple(data["points"]))
        elif cls is PointsOnCircle:
            fact = PointsOnCircle(data["center"], tuple(data["points"]))
        elif cls in (SegEq, ArcLenEq, AngleEq, ArcDegEq):
            fact = cls(tuple(data["members"]), data.get("value"))
        elif cls is Parallel:
            fact = Parallel(tuple(_parse_line_ref(m) for m in data["members"]))
        else:
            fact = Perpendicular(_parse_line_ref(data["first"]),
                                 _parse_line_ref(data["second"]), data["foot"])
    except KeyError as exc:
        raise KindError(f"fact {kind!r} missing field {exc}") from None
    _validate(fact)
    return fact


# --- problem-variable assignment -------------------------------------------

_VALUE_KINDS = (SegEq, ArcLenEq, AngleEq, ArcDegEq)


@dataclass
class AssignResult:
    clauses: list[str]          # annotated semantic clause texts
    problem_text: str           # annotated problem text
    declarations: dict[str, str]


def assign_problem_vars(semantic_clauses: list[str], problem_text: str = "") -> AssignResult:
    """Number values (Nk) in reading order: clauses first, then text."""
    declarations: dict[str, str] = {}
    annotated: list[str] = []
    counter = 0

    def next_label(value: str) -> str:
        nonlocal counter
        if counter > 10:
            raise TooManyVariables(f"more than 11 values; first overflow on {value!r}")
        label = f"N{counter}"
        declarations[label] = value
        counter += 1
        return label

    for text in semantic_clauses:
        clause = parse_clause(text)
        fact = clause.fact
        if isinstance(fact, _VALUE_KINDS) and fact.value is not None:
            label = next_label(fact.value)
            annotated.append(f"{clause.text}({label})")
        else:
            annotated.append(clause.text)

    out_text = problem_text
    if problem_text:
        pieces: list[str] = []
        i = 0
        for tok, tag, _, end in tagged_spans(problem_text):
            if tag != "VarNum":
                continue
            pieces.append(problem_text[i:end])
            pieces.append(f"({next_label(tok)})")
            i = end
        pieces.append(problem_text[i:])
        out_text = "".join(pieces)
    return AssignResult(annotated, out_text, declarations)
