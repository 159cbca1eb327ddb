"""The solution-program DSL: tokens, parsing, rendering, normalization.

A program is whitespace-separated tokens; every operator token starts a
new step and the following non-operator tokens are its operands.  Arity
is never checked here — malformed steps must stay representable so the
verifier can observe and reject them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

from .errors import LeadingOperand, UnknownToken
from .expr import VarId, VarKind, format_number

# The eleven constant labels of the operand vocabulary.
CONST_LABELS = ("C0.5", "C2", "C3", "C4", "C5", "C6", "C8", "C60", "C90", "C180", "C360")
CONST_VALUES = {label: float(label[1:]) for label in CONST_LABELS}

_OPERAND_RE = re.compile(r"(N\d+|V\d+|[a-z])$")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")


@dataclass(frozen=True)
class OperatorTok:
    name: str


@dataclass(frozen=True)
class VarTok:
    var: VarId

    @property
    def label(self) -> str:
        return self.var.label


@dataclass(frozen=True)
class ConstTok:
    value: float
    label: str

    @staticmethod
    def from_label(label: str) -> "ConstTok":
        return ConstTok(CONST_VALUES[label], label)


OperandTok = Union[VarTok, ConstTok]
ProgramToken = Union[OperatorTok, VarTok, ConstTok]


def operand_label(tok: OperandTok) -> str:
    return tok.label


def operand_sort_key(tok: OperandTok):
    """Normalization order: Arg > InterVar > ProblemVar > Const, then index."""
    if isinstance(tok, VarTok):
        return tok.var.sort_key()
    return (3, tok.value)


@dataclass(frozen=True)
class SolutionStep:
    op: str
    operands: tuple[OperandTok, ...]

    def render(self) -> str:
        return " ".join([self.op] + [operand_label(t) for t in self.operands])


@dataclass(frozen=True)
class SolutionProgram:
    steps: tuple[SolutionStep, ...]

    def render(self) -> str:
        return " ".join(step.render() for step in self.steps)

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class Candidate:
    program: SolutionProgram
    confidence: float


def classify_operand(token: str) -> OperandTok | None:
    """Operand token or None when the text is not operand-shaped."""
    if token in CONST_VALUES:
        return ConstTok.from_label(token)
    m = _OPERAND_RE.match(token)
    if not m:
        return None
    text = m.group(1)
    if text[0] == "N" and text[1:].isdigit():
        index = int(text[1:])
        if index > 10:
            raise UnknownToken(token)
        return VarTok(VarId.problem(index))
    if text[0] == "V" and text[1:].isdigit():
        index = int(text[1:])
        if index > 6:
            raise UnknownToken(token)
        return VarTok(VarId.inter(index))
    return VarTok(VarId.arg(text))


def parse_program(text: str, kb=None) -> SolutionProgram:
    """Parse whitespace-separated program text.

    Operator names are matched case-sensitively against the knowledge
    base (builtin by default), including declared aliases, which are
    canonicalized.  Identifier-shaped tokens outside the operand classes
    are kept as (unknown) operators so that form-level verification can
    reject them later rather than failing the parse.
    """
    if kb is None:
        from .kb import builtin_kb

        kb = builtin_kb()
    steps: list[tuple[str, list[OperandTok]]] = []
    for token in text.split():
        canonical = kb.canonical_name(token)
        operand = None
        if canonical is None:
            operand = classify_operand(token)
        if canonical is None and operand is None:
            if _IDENT_RE.match(token):
                canonical = token  # unknown operator: verifier's problem
            else:
                raise UnknownToken(token)
        if canonical is not None:
            steps.append((canonical, []))
        else:
            if not steps:
                raise LeadingOperand(f"program starts with operand {token!r}")
            steps[-1][1].append(operand)
    if not steps:
        raise LeadingOperand("empty program text")
    return SolutionProgram(tuple(SolutionStep(op, tuple(ops)) for op, ops in steps))


def render_program(p: SolutionProgram) -> str:
    return p.render()


def normalize_program(p: SolutionProgram, kb=None) -> SolutionProgram:
    """Sort operands inside each commutative group of the matched variant.

    Ordering is type priority Arg > InterVar > ProblemVar > Const, then
    ascending index/letter/value.  Steps with unknown operators or
    unmatched arity pass through unchanged; step order is preserved.
    """
    if kb is None:
        from .kb import builtin_kb

        kb = builtin_kb()
    out: list[SolutionStep] = []
    for step in p.steps:
        tup = kb.base_search(step.op)
        variant = tup.match_variant(len(step.operands)) if tup is not None else None
        if variant is None:
            out.append(step)
            continue
        operands = list(step.operands)
        for group in variant.commutative_groups:
            positions = sorted(group)
            chosen = sorted((operands[i] for i in positions), key=operand_sort_key)
            for pos, tok in zip(positions, chosen):
                operands[pos] = tok
        out.append(SolutionStep(step.op, tuple(operands)))
    return SolutionProgram(tuple(out))


def program_equal(a: SolutionProgram, b: SolutionProgram, kb=None) -> bool:
    return normalize_program(a, kb) == normalize_program(b, kb)
