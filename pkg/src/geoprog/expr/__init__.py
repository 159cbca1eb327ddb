"""Symbolic expression core: AST, parser, evaluation, root finding."""

from .ast import (
    Add,
    Assignment,
    Cos,
    Div,
    Equation,
    Expr,
    Mul,
    Neg,
    Num,
    Pi,
    Pow,
    Sin,
    Sub,
    Tan,
    Var,
    VarId,
    VarKind,
    eval_expr,
    format_number,
    free_vars,
    render,
    substitute,
)
from .parser import classify_var, parse_expr, tokenize_expr
from .solve import (
    DEFAULT_BUDGET,
    DEGREES_TURN,
    FULL_LINE,
    POSITIVE,
    EvalCounter,
    Interval,
    SystemResult,
    SystemStatus,
    solve_single,
    solve_system,
)

__all__ = [
    "Add", "Assignment", "Cos", "Div", "Equation", "Expr", "Mul", "Neg",
    "Num", "Pi", "Pow", "Sin", "Sub", "Tan", "Var", "VarId", "VarKind",
    "eval_expr", "format_number", "free_vars", "render", "substitute",
    "classify_var", "parse_expr", "tokenize_expr",
    "DEFAULT_BUDGET", "DEGREES_TURN", "FULL_LINE", "POSITIVE",
    "EvalCounter", "Interval", "SystemResult", "SystemStatus",
    "solve_single", "solve_system",
]
