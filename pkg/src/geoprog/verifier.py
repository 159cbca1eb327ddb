"""Multi-level theorem verification and candidate selection.

Each step is validated at three nested levels: form (the operator exists
and the operand count matches a tuple variant), calculability (the step
executes to a value), and semantic (the variant's rules hold on the bound
operand values, the step is residual-consistent, and any registered
relational hooks agree).  A step that fails form necessarily fails the
deeper levels, mirroring the containment of the three checks.

Candidates are verified in descending confidence order and the first
fully-passing one is selected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Optional

from .executor import (
    DEFAULT_STEP_BUDGET,
    ExecutionSession,
    FailReason,
    StepRecord,
    StepStatus,
    bind_problem_vars,
    execute_step,
)
from .expr import VarId
from .kb import KnowledgeBase, RelationalRule, TupleVariant, builtin_kb
from .program import Candidate, ConstTok, SolutionProgram, SolutionStep, VarTok


class VerificationLevel(IntEnum):
    FORM = 1
    CALCULABILITY = 2
    SEMANTIC = 3


_LEVEL_FOR_REASON = {
    FailReason.UNKNOWN_OPERATOR: VerificationLevel.FORM,
    FailReason.FORM_MISMATCH: VerificationLevel.FORM,
    FailReason.NO_ROOT: VerificationLevel.CALCULABILITY,
    FailReason.NO_VALUE: VerificationLevel.CALCULABILITY,
    FailReason.INDETERMINATE: VerificationLevel.CALCULABILITY,
    FailReason.BUDGET_EXCEEDED: VerificationLevel.CALCULABILITY,
    FailReason.CONTRADICTION: VerificationLevel.SEMANTIC,
}

# hook(rule, step, session) -> bool; consulted for relational rules
RelationalHook = Callable[[RelationalRule, SolutionStep, ExecutionSession], bool]


@dataclass
class StepVerdict:
    step_index: int
    passed: bool
    failed_level: Optional[VerificationLevel] = None
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "step_index": self.step_index,
            "passed": self.passed,
            "failed_level": self.failed_level.name.lower() if self.failed_level else None,
            "detail": self.detail,
        }


@dataclass
class VerificationReport:
    verdicts: list[StepVerdict] = field(default_factory=list)
    passed: bool = False
    answer: Optional[float] = None
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "answer": self.answer,
            "detail": self.detail,
            "verdicts": [v.as_dict() for v in self.verdicts],
        }


def _placeholder_env(variant: TupleVariant, step: SolutionStep,
                     session: ExecutionSession) -> dict[VarId, float]:
    env: dict[VarId, float] = {}
    for letter, tok in zip(variant.placeholders, step.operands):
        if isinstance(tok, ConstTok):
            env[VarId.arg(letter)] = tok.value
        elif isinstance(tok, VarTok) and tok.var in session.env:
            env[VarId.arg(letter)] = session.env[tok.var]
    return env


def _violated_rule(variant: TupleVariant, step: SolutionStep,
                   session: ExecutionSession) -> Optional[str]:
    env = _placeholder_env(variant, step, session)
    for rule in variant.value_rules():
        if rule.evaluate(env) is False:
            return rule.source
    return None


def verify_step(session: ExecutionSession, step: SolutionStep,
                kb: Optional[KnowledgeBase] = None,
                level: VerificationLevel = VerificationLevel.SEMANTIC,
                hooks: Optional[dict[str, RelationalHook]] = None) -> StepVerdict:
    """Check one step up to `level`, advancing the session via execution.

    Failures deeper than the requested level do not fail the verdict; the
    session still reflects whatever the executor could do.
    """
    kb = kb or builtin_kb()
    index = len(session.trace)

    tup = kb.base_search(step.op)
    variant = tup.match_variant(len(step.operands)) if tup is not None else None
    if tup is None or variant is None:
        detail = (f"operator {step.op!r} not in base" if tup is None
                  else f"{tup.operator} does not take {len(step.operands)} operands")
        session.trace.append(StepRecord(index, step.op, None, None, {},
                                        StepStatus.FAILED,
                                        FailReason.UNKNOWN_OPERATOR if tup is None
                                        else FailReason.FORM_MISMATCH, detail))
        return StepVerdict(index, False, VerificationLevel.FORM, detail)

    record = execute_step(session, step, kb)

    if record.status is StepStatus.FAILED:
        failed_level = _LEVEL_FOR_REASON[record.reason]
        detail = record.detail
        if failed_level is VerificationLevel.SEMANTIC:
            # report the violated rule when one explains the contradiction
            broken = _violated_rule(variant, step, session)
            if broken is not None:
                detail = f"rule violated: {broken}"
        if failed_level <= level:
            return StepVerdict(index, False, failed_level, detail)
        return StepVerdict(index, True, detail=f"unchecked beyond {level.name.lower()}: {detail}")

    if level >= VerificationLevel.SEMANTIC:
        broken = _violated_rule(variant, step, session)
        if broken is not None:
            return StepVerdict(index, False, VerificationLevel.SEMANTIC,
                               f"rule violated: {broken}")
        if hooks:
            for rule in variant.relational_rules():
                hook = hooks.get(rule.tag)
                if hook is not None and not hook(rule, step, session):
                    return StepVerdict(index, False, VerificationLevel.SEMANTIC,
                                       f"relational rule failed: {rule.source}")
    return StepVerdict(index, True)


def verify_program(record_or_declarations, candidate,
                   kb: Optional[KnowledgeBase] = None,
                   level: VerificationLevel = VerificationLevel.SEMANTIC,
                   budget: int = DEFAULT_STEP_BUDGET, seed: int = 0,
                   hooks: Optional[dict[str, RelationalHook]] = None) -> VerificationReport:
    """Verify every step in order, stopping at the first failure."""
    kb = kb or builtin_kb()
    program = candidate.program if isinstance(candidate, Candidate) else candidate
    env, pending = bind_problem_vars(record_or_declarations)
    session = ExecutionSession(env=env, pending=pending, budget=budget, rng_seed=seed)
    report = VerificationReport()
    for step in program.steps:
        verdict = verify_step(session, step, kb, level, hooks)
        report.verdicts.append(verdict)
        if not verdict.passed:
            report.detail = verdict.detail
            return report
    if session.answer is None:
        report.detail = "no Get step produced an answer"
        return report
    report.passed = True
    report.answer = session.answer
    return report


@dataclass
class SelectionResult:
    chosen: Optional[Candidate]
    chosen_index: Optional[int]  # index into the original candidate list
    reports: list[tuple[int, VerificationReport]] = field(default_factory=list)

    @property
    def answer(self) -> Optional[float]:
        if self.chosen_index is None:
            return None
        for index, report in self.reports:
            if index == self.chosen_index:
                return report.answer
        return None


def select_solution(record_or_declarations, candidates: list[Candidate],
                    kb: Optional[KnowledgeBase] = None,
                    level: VerificationLevel = VerificationLevel.SEMANTIC,
                    budget: int = DEFAULT_STEP_BUDGET, seed: int = 0,
                    hooks: Optional[dict[str, RelationalHook]] = None) -> SelectionResult:
    """Verify candidates by descending confidence; first pass wins.

    Ties keep the original (decoder-rank) order.  When nothing passes the
    result's chosen field is None and the caller applies its fallback.
    """
    kb = kb or builtin_kb()
    order = sorted(range(len(candidates)), key=lambda i: (-candidates[i].confidence, i))
    result = SelectionResult(None, None)
    for index in order:
        report = verify_program(record_or_declarations, candidates[index], kb,
                                level, budget, seed, hooks)
        result.reports.append((index, report))
        if report.passed:
            result.chosen = candidates[index]
            result.chosen_index = index
            break
    return result
