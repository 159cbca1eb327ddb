"""Program executor: bind problem variables, run steps, track the answer.

Each step resolves its operator and arity against the knowledge base,
instantiates the theorem formula over its operands, and then dispatches
on how many operands are still unknown: zero means a consistency check,
one is solved directly (roots filtered by the variant's semantic rules),
and two or more defers the equation.  After every new binding the pending
set is re-swept to a fixed point; a Get step may additionally trigger a
full multi-unknown solve of whatever is still pending.

Failures never raise: they are recorded in the step and mapped to the
outcome's terminal status, which is what the verifier consumes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Union

from .errors import BudgetExceeded, DuplicateDeclaration, IndexOutOfRange, MathDomain
from .expr import (
    Assignment,
    Equation,
    EvalCounter,
    Expr,
    Interval,
    Num,
    SystemStatus,
    Var,
    VarId,
    VarKind,
    eval_expr,
    format_number,
    free_vars,
    parse_expr,
    render,
    solve_single,
    solve_system,
)
from .kb import KnowledgeBase, TupleVariant, builtin_kb
from .program import ConstTok, SolutionProgram, SolutionStep, VarTok

DEFAULT_STEP_BUDGET = 10**6
_CONSISTENCY_RTOL = 1e-8
_REBIND_RTOL = 1e-8

# Search windows for unknowns that come from declarations rather than a
# theorem variant: problem quantities are positive at textbook scale,
# while letter arguments are plain algebra unknowns and may be negative.
_PROBLEM_VAR_DOMAIN = Interval(0.0, 1e6)
_ARG_DOMAIN = Interval(-1e6, 1e6)

_DECL_RE = re.compile(r"N(\d+)$")


class StepStatus(Enum):
    SOLVED = "solved"
    DEFERRED = "deferred"
    FAILED = "failed"


class FailReason(Enum):
    UNKNOWN_OPERATOR = "unknown-operator"
    FORM_MISMATCH = "form-mismatch"
    NO_ROOT = "no-root"
    NO_VALUE = "no-value"
    INDETERMINATE = "indeterminate"
    BUDGET_EXCEEDED = "budget-exceeded"
    CONTRADICTION = "contradiction"


class TerminalStatus(Enum):
    COMPLETED = "completed"
    FORM_ERROR = "form-error"
    INCALCULABLE = "incalculable"
    CONTRADICTION_ERROR = "contradiction-error"
    BUDGET_EXCEEDED = "budget-exceeded"


_TERMINAL_FOR = {
    FailReason.UNKNOWN_OPERATOR: TerminalStatus.FORM_ERROR,
    FailReason.FORM_MISMATCH: TerminalStatus.FORM_ERROR,
    FailReason.NO_ROOT: TerminalStatus.INCALCULABLE,
    FailReason.NO_VALUE: TerminalStatus.INCALCULABLE,
    FailReason.INDETERMINATE: TerminalStatus.INCALCULABLE,
    FailReason.BUDGET_EXCEEDED: TerminalStatus.BUDGET_EXCEEDED,
    FailReason.CONTRADICTION: TerminalStatus.CONTRADICTION_ERROR,
}


@dataclass
class StepRecord:
    index: int
    operator: Optional[str]
    variant_arity: Optional[int]
    equation: Optional[Equation]
    new_bindings: dict[VarId, float]
    status: StepStatus
    reason: Optional[FailReason] = None
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "index": self.index,
            "operator": self.operator,
            "variant_arity": self.variant_arity,
            "equation": str(self.equation) if self.equation else None,
            "new_bindings": {v.label: x for v, x in self.new_bindings.items()},
            "status": self.status.value,
            "reason": self.reason.value if self.reason else None,
            "detail": self.detail,
        }


@dataclass
class ExecOutcome:
    status: TerminalStatus
    answer: Optional[float]
    trace: list[StepRecord]

    def as_dict(self) -> dict:
        return {
            "status": self.status.value,
            "answer": self.answer,
            "trace": [rec.as_dict() for rec in self.trace],
        }


@dataclass
class PendingEquation:
    equation: Equation  # over operand variables, constants already inlined
    origin_step: int
    variant: Optional[TupleVariant] = None
    letter_map: dict[str, VarId] = field(default_factory=dict)  # placeholder -> operand var


class _StepFailure(Exception):
    def __init__(self, reason: FailReason, detail: str = ""):
        super().__init__(detail)
        self.reason = reason
        self.detail = detail


@dataclass
class ExecutionSession:
    env: Assignment = field(default_factory=dict)
    pending: list[PendingEquation] = field(default_factory=list)
    trace: list[StepRecord] = field(default_factory=list)
    budget: int = DEFAULT_STEP_BUDGET
    rng_seed: int = 0
    answer: Optional[float] = None
    answer_var: Optional[VarId] = None

    def copy(self) -> "ExecutionSession":
        return ExecutionSession(
            env=dict(self.env),
            pending=list(self.pending),
            trace=list(self.trace),
            budget=self.budget,
            rng_seed=self.rng_seed,
            answer=self.answer,
            answer_var=self.answer_var,
        )

    def bind(self, var: VarId, value: float, sink: dict[VarId, float]) -> None:
        old = self.env.get(var)
        if old is not None:
            if abs(old - value) > _REBIND_RTOL * max(1.0, abs(old)):
                raise _StepFailure(
                    FailReason.CONTRADICTION,
                    f"{var.label} already {format_number(old)}, now {format_number(value)}",
                )
            return
        self.env[var] = value
        sink[var] = value


def bind_problem_vars(declarations) -> tuple[Assignment, list[PendingEquation]]:
    """Initial environment from Nk declarations.

    Accepts a mapping or (label, expression) pairs; a ProblemRecord works
    too.  Numeric values bind directly; expression values (e.g. "3x+y")
    become pending equations with their arguments left unknown.
    """
    if hasattr(declarations, "declarations"):
        declarations = declarations.declarations
    items = declarations.items() if isinstance(declarations, Mapping) else list(declarations)
    env: Assignment = {}
    pending: list[PendingEquation] = []
    seen: set[str] = set()
    for label, source in items:
        m = _DECL_RE.match(label)
        if not m:
            raise IndexOutOfRange(f"bad problem-variable label {label!r}")
        index = int(m.group(1))
        if index > 10:
            raise IndexOutOfRange(f"problem variable index {index} exceeds 10")
        if label in seen:
            raise DuplicateDeclaration(f"{label} declared twice")
        seen.add(label)
        var = VarId.problem(index)
        expr = parse_expr(str(source))
        if free_vars(expr):
            pending.append(PendingEquation(Equation(Var(var), expr), origin_step=-1))
        else:
            env[var] = eval_expr(expr)
    return env, pending


def _default_domain(var: VarId) -> Interval:
    if var.kind is VarKind.ARG:
        return _ARG_DOMAIN
    return _PROBLEM_VAR_DOMAIN


def _replace_vars(e: Expr, mapping: dict[VarId, Expr]) -> Expr:
    from .expr.ast import Add, Cos, Div, Mul, Neg, Pow, Sin, Sub, Tan

    if isinstance(e, Var):
        return mapping.get(e.var, e)
    if isinstance(e, (Neg, Sin, Cos, Tan)):
        return type(e)(_replace_vars(e.operand, mapping))
    if isinstance(e, (Add, Sub, Mul, Div)):
        return type(e)(_replace_vars(e.left, mapping), _replace_vars(e.right, mapping))
    if isinstance(e, Pow):
        return Pow(_replace_vars(e.base, mapping), _replace_vars(e.exponent, mapping))
    return e


def _pending_domain(session: ExecutionSession, var: VarId) -> Interval:
    """Intersection of what every pending context implies for var."""
    domain = _default_domain(var)
    for pe in session.pending:
        if pe.variant is None:
            continue
        placeholder_env = {
            VarId.arg(letter): session.env[operand]
            for letter, operand in pe.letter_map.items()
            if operand in session.env
        }
        for letter, operand in pe.letter_map.items():
            if operand == var:
                domain = domain.intersect(pe.variant.domain_for(letter, placeholder_env))
    return domain


def _admissible_roots(roots: list[float], var: VarId, variant: Optional[TupleVariant],
                      letter_map: dict[str, VarId], env: Assignment) -> list[float]:
    """Filter solver roots through the variant's value rules."""
    if variant is None:
        return roots
    kept = []
    for root in roots:
        probe = dict(env)
        probe[var] = root
        placeholder_env = {
            VarId.arg(letter): probe[operand]
            for letter, operand in letter_map.items()
            if operand in probe
        }
        ok = True
        for rule in variant.value_rules():
            if rule.evaluate(placeholder_env) is False:
                ok = False
                break
        if ok:
            kept.append(root)
    return kept


def _sweep_pending(session: ExecutionSession, counter: EvalCounter,
                   sink: dict[VarId, float]) -> None:
    """Resolve pending equations to a fixed point after new bindings."""
    progress = True
    while progress:
        progress = False
        remaining: list[PendingEquation] = []
        for pe in session.pending:
            sub = pe.equation.substitute(session.env)
            free = sorted(sub.free_vars(), key=lambda v: v.sort_key())
            if not free:
                try:
                    residual = sub.residual()
                    scale = max(1.0, abs(eval_expr(sub.rhs)))
                except MathDomain as exc:
                    raise _StepFailure(FailReason.NO_VALUE, str(exc)) from None
                if abs(residual) >= _CONSISTENCY_RTOL * scale:
                    raise _StepFailure(
                        FailReason.CONTRADICTION,
                        f"deferred equation off by {residual:.3e}: {pe.equation}",
                    )
                progress = True
                continue
            if len(free) == 1:
                var = free[0]
                domain = _variant_domain(session, pe, var)
                roots = solve_single(sub, var, domain, session.rng_seed, counter)
                roots = _admissible_roots(roots, var, pe.variant, pe.letter_map, session.env)
                if len(roots) == 1:
                    session.bind(var, roots[0], sink)
                    progress = True
                    continue
                # zero or ambiguous: keep deferring, a Get may settle it
            remaining.append(pe)
        session.pending = remaining


def _variant_domain(session: ExecutionSession, pe: PendingEquation, var: VarId) -> Interval:
    domain = _default_domain(var)
    if pe.variant is not None:
        placeholder_env = {
            VarId.arg(letter): session.env[operand]
            for letter, operand in pe.letter_map.items()
            if operand in session.env
        }
        for letter, operand in pe.letter_map.items():
            if operand == var:
                domain = domain.intersect(pe.variant.domain_for(letter, placeholder_env))
    return domain


def _solve_all_pending(session: ExecutionSession, counter: EvalCounter,
                       sink: dict[VarId, float]) -> None:
    """Full multi-unknown attempt over the pending set (used by Get)."""
    if not session.pending:
        return
    eqs = [pe.equation.substitute(session.env) for pe in session.pending]
    unknowns: set[VarId] = set()
    for eq in eqs:
        unknowns |= eq.free_vars()
    if not unknowns:
        _sweep_pending(session, counter, sink)
        return
    if len(unknowns) > 3:
        return  # out of scope for the system solver; Get will report no value
    domains = {}
    for var in unknowns:
        domains[var] = _pending_domain(session, var)
    remaining_budget = None
    if counter.limit is not None:
        remaining_budget = max(1, counter.limit - counter.count)
    try:
        result = solve_system(eqs, unknowns, budget=remaining_budget or 10**6,
                              rng_seed=session.rng_seed, domains=domains)
    except BudgetExceeded:
        raise _StepFailure(FailReason.BUDGET_EXCEEDED, "pending-system solve") from None
    if result.status is SystemStatus.SOLVED:
        for var, value in result.assignment.items():
            session.bind(var, value, sink)
        session.pending = []
    elif result.status is SystemStatus.INDETERMINATE:
        raise _StepFailure(FailReason.INDETERMINATE,
                           "multiple solutions survive the pending system")


def _operand_expr(tok) -> Expr:
    if isinstance(tok, ConstTok):
        return Num(tok.value)
    return Var(tok.var)


def execute_step(session: ExecutionSession, step: SolutionStep,
                 kb: Optional[KnowledgeBase] = None) -> StepRecord:
    """Run one step against the session; failures land in the record."""
    kb = kb or builtin_kb()
    index = len(session.trace)
    record = StepRecord(index, None, None, None, {}, StepStatus.SOLVED)
    counter = EvalCounter(session.budget)
    try:
        tup = kb.base_search(step.op)
        if tup is None:
            raise _StepFailure(FailReason.UNKNOWN_OPERATOR, f"operator {step.op!r} not in base")
        record.operator = tup.operator
        variant = tup.match_variant(len(step.operands))
        if variant is None:
            raise _StepFailure(
                FailReason.FORM_MISMATCH,
                f"{tup.operator} does not take {len(step.operands)} operands",
            )
        record.variant_arity = variant.min_arity

        if tup.operator == "Get":
            _run_get(session, step, counter, record)
        elif variant.formula is None:
            pass  # bookkeeping operator with no equation
        else:
            _run_formula_step(session, step, variant, counter, record)
    except _StepFailure as failure:
        record.status = StepStatus.FAILED
        record.reason = failure.reason
        record.detail = failure.detail
    except BudgetExceeded as exc:
        record.status = StepStatus.FAILED
        record.reason = FailReason.BUDGET_EXCEEDED
        record.detail = str(exc)
    session.trace.append(record)
    return record


def _run_get(session: ExecutionSession, step: SolutionStep,
             counter: EvalCounter, record: StepRecord) -> None:
    tok = step.operands[0]
    if isinstance(tok, ConstTok):
        session.answer = tok.value
        session.answer_var = None
        record.detail = f"answer {format_number(tok.value)}"
        return
    var = tok.var
    if var not in session.env and session.pending:
        _solve_all_pending(session, counter, record.new_bindings)
    if var not in session.env:
        raise _StepFailure(FailReason.NO_VALUE, f"no value for {var.label}")
    session.answer = session.env[var]
    session.answer_var = var
    record.detail = f"answer {format_number(session.answer)}"


def _run_formula_step(session: ExecutionSession, step: SolutionStep,
                      variant: TupleVariant, counter: EvalCounter,
                      record: StepRecord) -> None:
    letters = variant.placeholders
    mapping = {VarId.arg(letter): _operand_expr(tok)
               for letter, tok in zip(letters, step.operands)}
    inst = Equation(_replace_vars(variant.formula.lhs, mapping),
                    _replace_vars(variant.formula.rhs, mapping))
    record.equation = inst
    letter_map = {letter: tok.var for letter, tok in zip(letters, step.operands)
                  if isinstance(tok, VarTok)}
    placeholder_env = {
        VarId.arg(letter): (tok.value if isinstance(tok, ConstTok) else session.env[tok.var])
        for letter, tok in zip(letters, step.operands)
        if isinstance(tok, ConstTok) or tok.var in session.env
    }

    sub = inst.substitute(session.env)
    free = sorted(sub.free_vars(), key=lambda v: v.sort_key())
    if not free:
        try:
            residual = sub.residual()
            scale = max(1.0, abs(eval_expr(sub.rhs)))
        except MathDomain as exc:
            raise _StepFailure(FailReason.NO_VALUE, str(exc)) from None
        if abs(residual) >= _CONSISTENCY_RTOL * scale:
            raise _StepFailure(FailReason.CONTRADICTION,
                               f"residual {residual:.3e} in {inst}")
        return
    if len(free) == 1:
        var = free[0]
        domain = _default_domain(var)
        for letter, operand in letter_map.items():
            if operand == var:
                domain = domain.intersect(variant.domain_for(letter, placeholder_env))
        roots = solve_single(sub, var, domain, session.rng_seed, counter)
        roots = _admissible_roots(roots, var, variant, letter_map, session.env)
        if not roots:
            raise _StepFailure(FailReason.NO_ROOT, f"no admissible root for {var.label} in {inst}")
        if len(roots) > 1:
            raise _StepFailure(
                FailReason.INDETERMINATE,
                f"{var.label} admits {len(roots)} values in {inst}: "
                + ", ".join(format_number(r) for r in roots),
            )
        session.bind(var, roots[0], record.new_bindings)
        _sweep_pending(session, counter, record.new_bindings)
        return
    session.pending.append(PendingEquation(inst, record.index, variant, letter_map))
    record.status = StepStatus.DEFERRED
    record.detail = f"{len(free)} unknowns: " + ", ".join(v.label for v in free)


def execute_program(record_or_declarations, program: SolutionProgram,
                    kb: Optional[KnowledgeBase] = None,
                    budget: int = DEFAULT_STEP_BUDGET,
                    seed: int = 0) -> ExecOutcome:
    """Execute all steps in order; the last Get's value is the answer."""
    kb = kb or builtin_kb()
    env, pending = bind_problem_vars(record_or_declarations)
    session = ExecutionSession(env=env, pending=pending, budget=budget, rng_seed=seed)
    for step in program.steps:
        rec = execute_step(session, step, kb)
        if rec.status is StepStatus.FAILED:
            return ExecOutcome(_TERMINAL_FOR[rec.reason], None, session.trace)
    if session.answer is None:
        return ExecOutcome(TerminalStatus.INCALCULABLE, None, session.trace)
    return ExecOutcome(TerminalStatus.COMPLETED, session.answer, session.trace)


def get_answer(outcome: ExecOutcome) -> Optional[float]:
    """The numerical answer, absent unless the run completed."""
    return outcome.answer if outcome.status is TerminalStatus.COMPLETED else None
