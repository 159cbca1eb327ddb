"""Symbolic expression AST for theorem formulas and clause values.

Variables come in three kinds: problem variables N0..N10, intermediate
variables V0..V6, and single-letter arguments a..z.  Trigonometric
functions take their arguments in degrees throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Union

from ..errors import MathDomain, UnboundVariable

MAX_PROBLEM_VAR = 10
MAX_INTER_VAR = 6


class VarKind(Enum):
    PROBLEM = "problem"
    INTER = "inter"
    ARG = "arg"


# Operand type priority used by program normalization: Arg > InterVar >
# ProblemVar (constants rank below all three at the token level).
_KIND_RANK = {VarKind.ARG: 0, VarKind.INTER: 1, VarKind.PROBLEM: 2}


@dataclass(frozen=True)
class VarId:
    kind: VarKind
    key: Union[int, str]  # index for N/V, lowercase letter for args

    def __post_init__(self):
        if self.kind is VarKind.PROBLEM:
            if not isinstance(self.key, int) or not 0 <= self.key <= MAX_PROBLEM_VAR:
                raise ValueError(f"problem variable index out of range: {self.key}")
        elif self.kind is VarKind.INTER:
            if not isinstance(self.key, int) or not 0 <= self.key <= MAX_INTER_VAR:
                raise ValueError(f"intermediate variable index out of range: {self.key}")
        else:
            if not (isinstance(self.key, str) and len(self.key) == 1 and self.key.islower()):
                raise ValueError(f"argument must be a single lowercase letter: {self.key}")

    @staticmethod
    def problem(index: int) -> "VarId":
        return VarId(VarKind.PROBLEM, index)

    @staticmethod
    def inter(index: int) -> "VarId":
        return VarId(VarKind.INTER, index)

    @staticmethod
    def arg(letter: str) -> "VarId":
        return VarId(VarKind.ARG, letter)

    @property
    def label(self) -> str:
        if self.kind is VarKind.PROBLEM:
            return f"N{self.key}"
        if self.kind is VarKind.INTER:
            return f"V{self.key}"
        return str(self.key)

    def sort_key(self):
        return (_KIND_RANK[self.kind], self.key)

    def __str__(self) -> str:
        return self.label

    def __repr__(self) -> str:
        return f"VarId({self.label})"


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Pi:
    pass


@dataclass(frozen=True)
class Var:
    var: VarId


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Sub:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Mul:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Div:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: "Expr"


@dataclass(frozen=True)
class Sin:
    operand: "Expr"


@dataclass(frozen=True)
class Cos:
    operand: "Expr"


@dataclass(frozen=True)
class Tan:
    operand: "Expr"


Expr = Union[Num, Pi, Var, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Tan]

Assignment = dict[VarId, float]

_BINOPS = {Add: "+", Sub: "-", Mul: "*", Div: "/", Pow: "^"}
_TRIG = {Sin: math.sin, Cos: math.cos, Tan: math.tan}
_TRIG_NAME = {Sin: "sin", Cos: "cos", Tan: "tan"}


def free_vars(e: Expr) -> set[VarId]:
    """All VarIds referenced anywhere in the tree."""
    out: set[VarId] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            out.add(node.var)
        elif isinstance(node, (Neg, Sin, Cos, Tan)):
            stack.append(node.operand)
        elif isinstance(node, (Add, Sub, Mul, Div)):
            stack.append(node.left)
            stack.append(node.right)
        elif isinstance(node, Pow):
            stack.append(node.base)
            stack.append(node.exponent)
    return out


def _is_integer(x: float) -> bool:
    return abs(x - round(x)) < 1e-9


def eval_expr(e: Expr, env: Assignment | None = None) -> float:
    """Evaluate a fully-bound expression. Trig arguments are degrees."""
    env = env or {}

    def go(node: Expr) -> float:
        if isinstance(node, Num):
            return node.value
        if isinstance(node, Pi):
            return math.pi
        if isinstance(node, Var):
            try:
                return env[node.var]
            except KeyError:
                raise UnboundVariable(node.var) from None
        if isinstance(node, Neg):
            return -go(node.operand)
        if isinstance(node, Add):
            return go(node.left) + go(node.right)
        if isinstance(node, Sub):
            return go(node.left) - go(node.right)
        if isinstance(node, Mul):
            return go(node.left) * go(node.right)
        if isinstance(node, Div):
            denom = go(node.right)
            if denom == 0.0:
                raise MathDomain("division by zero")
            return go(node.left) / denom
        if isinstance(node, Pow):
            base, exp = go(node.base), go(node.exponent)
            if base == 0.0 and exp < 0:
                raise MathDomain("zero raised to a negative power")
            if base < 0 and not _is_integer(exp):
                raise MathDomain(f"negative base {base} to non-integer exponent {exp}")
            try:
                return math.pow(base, round(exp) if base < 0 else exp)
            except (ValueError, OverflowError) as exc:
                raise MathDomain(str(exc)) from None
        if isinstance(node, (Sin, Cos, Tan)):
            return _TRIG[type(node)](math.radians(go(node.operand)))
        raise TypeError(f"not an Expr node: {node!r}")

    result = go(e)
    if isinstance(result, complex) or math.isnan(result):
        raise MathDomain("evaluation produced a non-real result")
    return result


def substitute(e: Expr, env: Assignment) -> Expr:
    """Replace bound variables by literals, folding all-literal subtrees.

    Unbound references stay as they are; pi is kept symbolic so rendering
    stays exact.  Subtrees that would fail to evaluate (e.g. 1/0) are left
    unfolded for eval_expr to report later.
    """

    def fold(node: Expr) -> Expr:
        if isinstance(node, (Num, Pi)):
            return node
        if isinstance(node, Var):
            if node.var in env:
                return Num(env[node.var])
            return node
        if isinstance(node, Neg):
            inner = fold(node.operand)
            return _maybe_fold(Neg(inner), (inner,))
        if isinstance(node, (Sin, Cos, Tan)):
            inner = fold(node.operand)
            return _maybe_fold(type(node)(inner), (inner,))
        if isinstance(node, (Add, Sub, Mul, Div)):
            left, right = fold(node.left), fold(node.right)
            return _maybe_fold(type(node)(left, right), (left, right))
        if isinstance(node, Pow):
            base, exp = fold(node.base), fold(node.exponent)
            return _maybe_fold(Pow(base, exp), (base, exp))
        raise TypeError(f"not an Expr node: {node!r}")

    def _maybe_fold(rebuilt: Expr, children: tuple) -> Expr:
        if all(isinstance(c, Num) for c in children):
            try:
                return Num(eval_expr(rebuilt))
            except MathDomain:
                return rebuilt
        return rebuilt

    return fold(e)


# Rendering precedence levels; higher binds tighter.
_PREC_ADD = 1
_PREC_MUL = 2
_PREC_NEG = 3
_PREC_POW = 4
_PREC_ATOM = 5


def format_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def render(e: Expr) -> str:
    """Canonical text form; parse_expr(render(e)) is structurally e."""

    def go(node: Expr, parent_prec: int, is_right: bool = False) -> str:
        if isinstance(node, Num):
            return format_number(node.value)
        if isinstance(node, Pi):
            return "pi"
        if isinstance(node, Var):
            return node.var.label
        if isinstance(node, (Sin, Cos, Tan)):
            return f"{_TRIG_NAME[type(node)]}({go(node.operand, 0)})"
        if isinstance(node, Neg):
            text = "-" + go(node.operand, _PREC_NEG)
            return f"({text})" if parent_prec > _PREC_NEG else text
        if isinstance(node, (Add, Sub)):
            prec = _PREC_ADD
        elif isinstance(node, (Mul, Div)):
            prec = _PREC_MUL
        else:
            prec = _PREC_POW
        if isinstance(node, Pow):
            left, right = node.base, node.exponent
            # right-associative: the base needs parens at equal precedence
            text = go(left, prec + 1) + " ^ " + go(right, prec)
        else:
            left, right = node.left, node.right
            # left-associative: the right child needs parens at equal precedence
            text = go(left, prec) + f" {_BINOPS[type(node)]} " + go(right, prec + 1)
        if prec < parent_prec:
            return f"({text})"
        return text

    return go(e, 0)


@dataclass(frozen=True)
class Equation:
    lhs: Expr
    rhs: Expr

    def residual(self, env: Assignment | None = None) -> float:
        return eval_expr(self.lhs, env) - eval_expr(self.rhs, env)

    def free_vars(self) -> set[VarId]:
        return free_vars(self.lhs) | free_vars(self.rhs)

    def substitute(self, env: Assignment) -> "Equation":
        return Equation(substitute(self.lhs, env), substitute(self.rhs, env))

    def __str__(self) -> str:
        return f"{render(self.lhs)} = {render(self.rhs)}"
