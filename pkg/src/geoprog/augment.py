"""Equivalence-preserving problem augmentation.

Four text-level transforms, each rewriting clauses, problem text, variable
declarations and the record's programs consistently so that executing the
rewritten solution yields the same answer:

  token_replacement          rename points / angle IDs / arguments
  connection_rotation        reverse lines, rotate or reflect circle orders
  representation_transposition  flip segment/angle/arc name direction
  clauses_shuffle            permute semantic clauses and renumber Nk

compose applies them in that fixed order, each gated by its probability
under one seeded generator.
"""

from __future__ import annotations

import random
import re
import string
from dataclasses import dataclass, field, replace

from .clauses import (
    AngleEq,
    ArcDegEq,
    ArcLenEq,
    AnnotationFact,
    GLYPH_ANGLE,
    LineRef,
    NamedLinePoints,
    Parallel,
    Perpendicular,
    PointsOnCircle,
    PointsOnLine,
    SegEq,
    assign_problem_vars,
    render_fact,
    tagged_spans,
)
from .errors import SymbolExhausted
from .expr import tokenize_expr
from .program import (
    Candidate,
    OperandTok,
    SolutionProgram,
    SolutionStep,
    VarTok,
)
from .expr import VarId, VarKind
from .records import ProblemRecord

TOKEN_REPLACEMENT = "token_replacement"
CONNECTION_ROTATION = "connection_rotation"
REPRESENTATION_TRANSPOSITION = "representation_transposition"
CLAUSES_SHUFFLE = "clauses_shuffle"
ALL_STRATEGIES = (TOKEN_REPLACEMENT, CONNECTION_ROTATION,
                  REPRESENTATION_TRANSPOSITION, CLAUSES_SHUFFLE)


@dataclass(frozen=True)
class AugmentSpec:
    probabilities: dict[str, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        for name, p in self.probabilities.items():
            if name not in ALL_STRATEGIES:
                raise ValueError(f"unknown strategy {name!r}")
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability for {name} outside [0,1]: {p}")

    @staticmethod
    def all(probability: float = 1.0, seed: int = 0) -> "AugmentSpec":
        return AugmentSpec({s: probability for s in ALL_STRATEGIES}, seed)


# --- shared rebuild machinery ------------------------------------------------


def _rebuild(record: ProblemRecord, structural_facts: list[AnnotationFact],
             semantic_facts: list[AnnotationFact], problem_text_raw: str,
             program_rewrite) -> ProblemRecord:
    """Re-render clauses, re-assign Nk, and rewrite every program."""
    structural_texts = [render_fact(f) for f in structural_facts]
    semantic_texts = [render_fact(f) for f in semantic_facts]
    rewritten_candidates = [
        Candidate(program_rewrite(c.program), c.confidence) for c in record.candidates
    ]
    gt = program_rewrite(record.gt_program) if record.gt_program is not None else None
    return ProblemRecord.build(
        record.id,
        structural_texts,
        semantic_texts,
        problem_text_raw,
        candidates=rewritten_candidates,
        gt_program=gt,
        gt_answer=record.gt_answer,
        choices=list(record.choices) if record.choices is not None else None,
    )


def _identity_program(p: SolutionProgram) -> SolutionProgram:
    return p


def _map_program_vars(program: SolutionProgram, var_map: dict[VarId, VarId]) -> SolutionProgram:
    steps = []
    for step in program.steps:
        operands: list[OperandTok] = []
        for tok in step.operands:
            if isinstance(tok, VarTok) and tok.var in var_map:
                operands.append(VarTok(var_map[tok.var]))
            else:
                operands.append(tok)
        steps.append(SolutionStep(step.op, tuple(operands)))
    return SolutionProgram(tuple(steps))


# --- token replacement -------------------------------------------------------


def _used_symbols(record: ProblemRecord) -> tuple[set[str], set[str], set[str]]:
    """(points, angle IDs, argument letters) referenced by the record."""
    points: set[str] = set()
    angle_ids: set[str] = set()
    args: set[str] = set()

    def note_line_ref(ref: LineRef) -> None:
        if not ref.is_named:
            points.update(ref.text)

    for fact in record.structural_facts + record.semantic_facts:
        if isinstance(fact, (PointsOnLine, NamedLinePoints)):
            points.update(fact.points)
        elif isinstance(fact, PointsOnCircle):
            points.add(fact.center)
            points.update(fact.points)
        elif isinstance(fact, SegEq):
            for member in fact.members:
                points.update(member)
        elif isinstance(fact, (ArcLenEq, ArcDegEq)):
            for member in fact.members:
                points.update(member)
        elif isinstance(fact, AngleEq):
            for member in fact.members:
                if member.isdigit():
                    angle_ids.add(member)
                else:
                    points.update(member)
        elif isinstance(fact, Parallel):
            for ref in fact.members:
                note_line_ref(ref)
        elif isinstance(fact, Perpendicular):
            note_line_ref(fact.first)
            note_line_ref(fact.second)
            points.add(fact.foot)
        if isinstance(fact, (SegEq, ArcLenEq, AngleEq, ArcDegEq)) and fact.value:
            for tok in tokenize_expr(fact.value):
                if tok.kind == "IDENT" and len(tok.text) == 1 and tok.text.islower():
                    args.add(tok.text)

    for tok, tag, _, _ in tagged_spans(record.problem_text_raw):
        if tag == "Point":
            points.update(c for c in tok if c.isupper())
        elif tag == "AngleId":
            angle_ids.add(tok.lstrip(GLYPH_ANGLE))
        elif tag == "Arg":
            args.add(tok)

    for candidate in record.candidates + (
            [Candidate(record.gt_program, 1.0)] if record.gt_program else []):
        for step in candidate.program.steps:
            for tok in step.operands:
                if isinstance(tok, VarTok) and tok.var.kind is VarKind.ARG:
                    args.add(tok.var.label)
    return points, angle_ids, args


def _class_of(symbol: str) -> str:
    if symbol.isupper():
        return "point"
    if symbol.isdigit():
        return "angle_id"
    return "arg"


def _rename_value(value: str, arg_map: dict[str, str]) -> str:
    """Rename argument letters inside a value expression, span-exact."""
    out = []
    i = 0
    for tok in tokenize_expr(value):
        if tok.kind == "IDENT" and tok.text in arg_map:
            out.append(value[i:tok.start])
            out.append(arg_map[tok.text])
            i = tok.end
    out.append(value[i:])
    return "".join(out)


def _rename_points(text: str, point_map: dict[str, str]) -> str:
    return "".join(point_map.get(c, c) for c in text)


def _rename_fact(fact: AnnotationFact, point_map: dict[str, str],
                 id_map: dict[str, str], arg_map: dict[str, str]) -> AnnotationFact:
    def pmap(s: str) -> str:
        return _rename_points(s, point_map)

    def ref_map(ref: LineRef) -> LineRef:
        return ref if ref.is_named else LineRef(pmap(ref.text))

    if isinstance(fact, PointsOnLine):
        return PointsOnLine(tuple(pmap(p) for p in fact.points))
    if isinstance(fact, NamedLinePoints):
        return NamedLinePoints(fact.name, tuple(pmap(p) for p in fact.points))
    if isinstance(fact, PointsOnCircle):
        return PointsOnCircle(pmap(fact.center), tuple(pmap(p) for p in fact.points))
    if isinstance(fact, SegEq):
        value = _rename_value(fact.value, arg_map) if fact.value else fact.value
        return SegEq(tuple(pmap(m) for m in fact.members), value)
    if isinstance(fact, (ArcLenEq, ArcDegEq)):
        value = _rename_value(fact.value, arg_map) if fact.value else fact.value
        return type(fact)(tuple(pmap(m) for m in fact.members), value)
    if isinstance(fact, AngleEq):
        members = tuple(id_map.get(m, m) if m.isdigit() else pmap(m) for m in fact.members)
        value = _rename_value(fact.value, arg_map) if fact.value else fact.value
        return AngleEq(members, value)
    if isinstance(fact, Parallel):
        return Parallel(tuple(ref_map(r) for r in fact.members))
    if isinstance(fact, Perpendicular):
        return Perpendicular(ref_map(fact.first), ref_map(fact.second), pmap(fact.foot))
    return fact


def _rename_text(text: str, point_map: dict[str, str], id_map: dict[str, str],
                 arg_map: dict[str, str]) -> str:
    out = []
    i = 0
    for tok, tag, start, end in tagged_spans(text):
        new = None
        if tag == "Point":
            new = _rename_points(tok, point_map)
        elif tag == "AngleId":
            body = tok.lstrip(GLYPH_ANGLE)
            if body in id_map:
                new = tok[: len(tok) - len(body)] + id_map[body]
        elif tag == "Arg" and tok in arg_map:
            new = arg_map[tok]
        if new is not None and new != tok:
            out.append(text[i:start])
            out.append(new)
            i = end
    out.append(text[i:])
    return "".join(out)


def token_replacement(record: ProblemRecord, seed: int = 0,
                      mapping: dict[str, str] | None = None) -> ProblemRecord:
    """Consistently rename points, angle IDs, and argument letters.

    With an explicit mapping (e.g. {"B": "V"}) exactly those renames are
    applied; otherwise a seeded random subset of used symbols is renamed
    to unused ones of the same class.  Renaming is always a bijection.
    """
    points, angle_ids, args = _used_symbols(record)
    used = {"point": points, "angle_id": angle_ids, "arg": args}
    alphabet = {
        "point": list(string.ascii_uppercase),
        "angle_id": [str(d) for d in range(1, 10)],
        "arg": list(string.ascii_lowercase),
    }
    if mapping is None:
        rng = random.Random(seed)
        mapping = {}
        for cls in ("point", "angle_id", "arg"):
            available = sorted(set(alphabet[cls]) - used[cls])
            for symbol in sorted(used[cls]):
                if not available:
                    break
                if rng.random() < 0.5:
                    pick = available.pop(rng.randrange(len(available)))
                    mapping[symbol] = pick
    else:
        taken: dict[str, set[str]] = {cls: set(used[cls]) for cls in used}
        for src, dst in mapping.items():
            cls = _class_of(src)
            if _class_of(dst) != cls:
                raise SymbolExhausted(f"replacement {src!r}->{dst!r} crosses symbol classes")
            if dst in taken[cls]:
                raise SymbolExhausted(f"replacement target {dst!r} already in use")
            taken[cls].add(dst)

    point_map = {k: v for k, v in mapping.items() if _class_of(k) == "point"}
    id_map = {k: v for k, v in mapping.items() if _class_of(k) == "angle_id"}
    arg_map = {k: v for k, v in mapping.items() if _class_of(k) == "arg"}

    new_structural = [_rename_fact(f, point_map, id_map, arg_map)
                      for f in record.structural_facts]
    new_semantic = [_rename_fact(f, point_map, id_map, arg_map)
                    for f in record.semantic_facts]
    new_text = _rename_text(record.problem_text_raw, point_map, id_map, arg_map)
    var_map = {VarId.arg(src): VarId.arg(dst) for src, dst in arg_map.items()}

    def rewrite(p: SolutionProgram) -> SolutionProgram:
        return _map_program_vars(p, var_map)

    return _rebuild(record, new_structural, new_semantic, new_text, rewrite)


# --- connection rotation -----------------------------------------------------


def reverse_line(fact: AnnotationFact) -> AnnotationFact:
    """Flip the left-right order of points on a line."""
    if isinstance(fact, PointsOnLine):
        return PointsOnLine(tuple(reversed(fact.points)))
    if isinstance(fact, NamedLinePoints):
        return NamedLinePoints(fact.name, tuple(reversed(fact.points)))
    return fact


def rotate_circle(fact: PointsOnCircle, shift: int = 0, reflect: bool = False) -> PointsOnCircle:
    """One element of the dihedral orbit of the circle's point order."""
    points = tuple(reversed(fact.points)) if reflect else fact.points
    if points:
        shift %= len(points)
        points = points[shift:] + points[:shift]
    return PointsOnCircle(fact.center, points)


def connection_rotation(record: ProblemRecord, seed: int = 0) -> ProblemRecord:
    """Reverse lines by coin flip; circles get a uniform dihedral relabel."""
    rng = random.Random(seed)
    new_structural: list[AnnotationFact] = []
    for fact in record.structural_facts:
        if isinstance(fact, (PointsOnLine, NamedLinePoints)):
            new_structural.append(reverse_line(fact) if rng.random() < 0.5 else fact)
        elif isinstance(fact, PointsOnCircle):
            n = max(1, len(fact.points))
            new_structural.append(rotate_circle(fact, rng.randrange(n),
                                                rng.random() < 0.5))
        else:
            new_structural.append(fact)
    return _rebuild(record, new_structural, record.semantic_facts,
                    record.problem_text_raw, _identity_program)


# --- representation transposition --------------------------------------------


def transpose_segment(name: str) -> str:
    return name[::-1]


def transpose_angle(ref: str) -> str:
    """Reverse a three-point angle about its vertex; IDs/vertices are fixed."""
    return ref[::-1] if len(ref) == 3 and ref.isalpha() else ref


def transpose_arc(points: str) -> str:
    return points[::-1]


def representation_transposition(record: ProblemRecord, seed: int = 0) -> ProblemRecord:
    """Independently flip each segment/angle/arc name occurrence."""
    rng = random.Random(seed)

    def coin() -> bool:
        return rng.random() < 0.5

    def flip_ref(ref: LineRef) -> LineRef:
        if not ref.is_named and coin():
            return LineRef(transpose_segment(ref.text))
        return ref

    def flip_fact(fact: AnnotationFact) -> AnnotationFact:
        if isinstance(fact, SegEq):
            return SegEq(tuple(transpose_segment(m) if coin() else m
                               for m in fact.members), fact.value)
        if isinstance(fact, (ArcLenEq, ArcDegEq)):
            return type(fact)(tuple(transpose_arc(m) if coin() else m
                                    for m in fact.members), fact.value)
        if isinstance(fact, AngleEq):
            return AngleEq(tuple(transpose_angle(m) if coin() else m
                                 for m in fact.members), fact.value)
        if isinstance(fact, Parallel):
            return Parallel(tuple(flip_ref(r) for r in fact.members))
        if isinstance(fact, Perpendicular):
            return Perpendicular(flip_ref(fact.first), flip_ref(fact.second), fact.foot)
        return fact

    new_semantic = [flip_fact(f) for f in record.semantic_facts]

    text = record.problem_text_raw
    out, i = [], 0
    for tok, tag, start, end in tagged_spans(text):
        new = None
        if tag == "Point" and len(tok) >= 2 and coin():
            new = transpose_segment(tok)
        elif tok.startswith(GLYPH_ANGLE) and len(tok) == 4 and tok[1:].isalpha() and coin():
            new = GLYPH_ANGLE + transpose_angle(tok[1:])
        if new is not None and new != tok:
            out.append(text[i:start])
            out.append(new)
            i = end
    out.append(text[i:])

    return _rebuild(record, record.structural_facts, new_semantic,
                    "".join(out), _identity_program)


# --- clauses shuffle ----------------------------------------------------------


def clauses_shuffle(record: ProblemRecord, seed: int = 0,
                    order: list[int] | None = None) -> ProblemRecord:
    """Permute semantic clauses and renumber problem variables to match.

    The induced index permutation is applied to every program's N tokens
    and to the declarations, so execution is unchanged.
    """
    n = len(record.semantic_clauses)
    if order is None:
        rng = random.Random(seed)
        order = list(range(n))
        rng.shuffle(order)
    if sorted(order) != list(range(n)):
        raise ValueError(f"order must be a permutation of range({n})")

    # Old label per clause position (value-bearing clauses only).
    old_label_at: dict[int, int] = {}
    counter = 0
    for i, clause in enumerate(record.semantic_clauses):
        value = getattr(clause.fact, "value", None)
        if value is not None:
            old_label_at[i] = counter
            counter += 1

    var_map: dict[VarId, VarId] = {}
    new_counter = 0
    for new_pos, old_pos in enumerate(order):
        if old_pos in old_label_at:
            var_map[VarId.problem(old_label_at[old_pos])] = VarId.problem(new_counter)
            new_counter += 1
    # values in the problem text keep their labels (the count is unchanged)

    new_semantic = [record.semantic_facts[i] for i in order]

    def rewrite(p: SolutionProgram) -> SolutionProgram:
        return _map_program_vars(p, var_map)

    return _rebuild(record, record.structural_facts, new_semantic,
                    record.problem_text_raw, rewrite)


# --- composition --------------------------------------------------------------


_STRATEGY_FN = {
    TOKEN_REPLACEMENT: token_replacement,
    CONNECTION_ROTATION: connection_rotation,
    REPRESENTATION_TRANSPOSITION: representation_transposition,
    CLAUSES_SHUFFLE: clauses_shuffle,
}


def compose(record: ProblemRecord, spec: AugmentSpec) -> ProblemRecord:
    """Apply the enabled strategies in fixed order under one seeded stream."""
    rng = random.Random(spec.seed)
    out = record
    for strategy in ALL_STRATEGIES:
        p = spec.probabilities.get(strategy, 0.0)
        fire = rng.random() < p
        child_seed = rng.randrange(2**32)
        if fire:
            out = _STRATEGY_FN[strategy](out, child_seed)
    return out
