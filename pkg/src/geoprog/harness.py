"""Evaluation harness: the three scoring modes over dataset records.

Completion scores the selected candidate's answer and program against the
ground truth.  Choice maps the answer to the nearest of four options,
falling back to a seeded uniform pick when nothing is close enough.
Top-3 accepts a record if any of the first three candidates (after
verification-based reordering when the verifier is on) is correct.

Per-record seeds are derived as global_seed XOR crc32(record id), so
records can be evaluated in any order, or in parallel, with identical
results.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from enum import Enum
from random import Random
from typing import Optional

from .errors import MissingChoices
from .executor import DEFAULT_STEP_BUDGET, execute_program, get_answer
from .kb import KnowledgeBase, builtin_kb
from .program import Candidate, program_equal, render_program
from .records import (
    DEFAULT_BEAM_SIZE,
    ProblemRecord,
    load_dataset,
    load_dataset_text,
    save_dataset,
)
from .verifier import VerificationLevel, select_solution, verify_program

__all__ = [
    "EvalMode", "EvalConfig", "ProblemOutcome", "EvalReport",
    "evaluate", "evaluate_completion", "evaluate_choice", "evaluate_top3",
    "ProblemRecord", "load_dataset", "load_dataset_text", "save_dataset",
    "DEFAULT_BEAM_SIZE",
]


class EvalMode(Enum):
    COMPLETION = "completion"
    CHOICE = "choice"
    TOP3 = "top3"


class FallbackPolicy(Enum):
    TOP_CONFIDENCE = "top_confidence"  # unverified best guess
    NONE = "none"


@dataclass
class EvalConfig:
    mode: EvalMode = EvalMode.COMPLETION
    answer_rtol: float = 1e-3
    answer_atol: float = 5e-3
    choice_window: float = 0.05  # relative window for nearest-option match
    fallback: FallbackPolicy = FallbackPolicy.TOP_CONFIDENCE
    rng_seed: int = 0
    beam_size: int = DEFAULT_BEAM_SIZE
    verify: bool = True
    verify_level: VerificationLevel = VerificationLevel.SEMANTIC
    top3_programs: bool = False
    budget: int = DEFAULT_STEP_BUDGET

    def __post_init__(self):
        if self.answer_rtol <= 0 or self.answer_atol <= 0 or self.choice_window <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class ProblemOutcome:
    record_id: str
    chosen_index: Optional[int]
    verified: bool
    answer: Optional[float]
    answer_correct: bool
    program_correct: bool
    picked_option: Optional[int] = None
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "chosen_index": self.chosen_index,
            "verified": self.verified,
            "answer": self.answer,
            "answer_correct": self.answer_correct,
            "program_correct": self.program_correct,
            "picked_option": self.picked_option,
            "detail": self.detail,
        }


@dataclass
class EvalReport:
    mode: EvalMode
    outcomes: list[ProblemOutcome] = field(default_factory=list)

    @property
    def answer_accuracy(self) -> float:
        if not self.outcomes:
            return 0.0
        return sum(o.answer_correct for o in self.outcomes) / len(self.outcomes)

    @property
    def program_accuracy(self) -> float:
        if not self.outcomes:
            return 0.0
        return sum(o.program_correct for o in self.outcomes) / len(self.outcomes)

    def as_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "answer_accuracy": self.answer_accuracy,
            "program_accuracy": self.program_accuracy,
            "count": len(self.outcomes),
            "outcomes": [o.as_dict() for o in self.outcomes],
        }


def record_seed(global_seed: int, record_id: str) -> int:
    return global_seed ^ zlib.crc32(record_id.encode("utf-8"))


def _answer_matches(answer: Optional[float], truth: Optional[float],
                    config: EvalConfig) -> bool:
    if answer is None or truth is None:
        return False
    return abs(answer - truth) <= max(config.answer_rtol * abs(truth), config.answer_atol)


def _execute_candidate(record: ProblemRecord, candidate: Candidate,
                       kb: KnowledgeBase, config: EvalConfig, seed: int) -> Optional[float]:
    outcome = execute_program(record, candidate.program, kb,
                              budget=config.budget, seed=seed)
    return get_answer(outcome)


def _top_confidence_index(candidates: list[Candidate]) -> int:
    return min(range(len(candidates)), key=lambda i: (-candidates[i].confidence, i))


def _select(record: ProblemRecord, kb: KnowledgeBase,
            config: EvalConfig) -> tuple[Optional[int], Optional[float], bool]:
    """(chosen index, answer, verified flag) under the configured policy."""
    if not record.candidates:
        return None, None, False
    seed = record_seed(config.rng_seed, record.id)
    if config.verify:
        selection = select_solution(record, record.candidates, kb,
                                    level=config.verify_level,
                                    budget=config.budget, seed=seed)
        if selection.chosen_index is not None:
            return selection.chosen_index, selection.answer, True
        if config.fallback is FallbackPolicy.NONE:
            return None, None, False
    index = _top_confidence_index(record.candidates)
    answer = _execute_candidate(record, record.candidates[index], kb, config, seed)
    return index, answer, False


def _program_matches(record: ProblemRecord, index: Optional[int],
                     kb: KnowledgeBase) -> bool:
    if index is None or record.gt_program is None:
        return False
    return program_equal(record.candidates[index].program, record.gt_program, kb)


def evaluate_completion(records: list[ProblemRecord],
                        kb: Optional[KnowledgeBase] = None,
                        config: Optional[EvalConfig] = None) -> EvalReport:
    kb = kb or builtin_kb()
    config = config or EvalConfig(mode=EvalMode.COMPLETION)
    report = EvalReport(EvalMode.COMPLETION)
    for record in records:
        index, answer, verified = _select(record, kb, config)
        report.outcomes.append(ProblemOutcome(
            record_id=record.id,
            chosen_index=index,
            verified=verified,
            answer=answer,
            answer_correct=_answer_matches(answer, record.gt_answer, config),
            program_correct=_program_matches(record, index, kb),
        ))
    return report


def evaluate_choice(records: list[ProblemRecord],
                    kb: Optional[KnowledgeBase] = None,
                    config: Optional[EvalConfig] = None) -> EvalReport:
    kb = kb or builtin_kb()
    config = config or EvalConfig(mode=EvalMode.CHOICE)
    report = EvalReport(EvalMode.CHOICE)
    for record in records:
        if not record.choices or len(record.choices) != 4:
            raise MissingChoices(record.id)
        index, answer, verified = _select(record, kb, config)
        picked: Optional[int] = None
        detail = ""
        if answer is not None:
            nearest = min(range(4), key=lambda i: abs(record.choices[i] - answer))
            window = max(config.choice_window * abs(record.choices[nearest]),
                         config.answer_atol)
            if abs(record.choices[nearest] - answer) <= window:
                picked = nearest
        if picked is None:
            rng = Random(record_seed(config.rng_seed, record.id))
            picked = rng.randrange(4)
            detail = "random fallback"
        gt_index = None
        if record.gt_answer is not None:
            gt_index = min(range(4), key=lambda i: abs(record.choices[i] - record.gt_answer))
        report.outcomes.append(ProblemOutcome(
            record_id=record.id,
            chosen_index=index,
            verified=verified,
            answer=answer,
            answer_correct=(gt_index is not None and picked == gt_index),
            program_correct=_program_matches(record, index, kb),
            picked_option=picked,
            detail=detail,
        ))
    return report


def _top3_order(record: ProblemRecord, kb: KnowledgeBase,
                config: EvalConfig) -> list[int]:
    """Candidate indices, best-first, verified-passing candidates ahead."""
    order = sorted(range(len(record.candidates)),
                   key=lambda i: (-record.candidates[i].confidence, i))
    if not config.verify:
        return order
    seed = record_seed(config.rng_seed, record.id)
    passing, failing = [], []
    for i in order:
        report = verify_program(record, record.candidates[i], kb,
                                level=config.verify_level,
                                budget=config.budget, seed=seed)
        (passing if report.passed else failing).append(i)
    return passing + failing


def evaluate_top3(records: list[ProblemRecord],
                  kb: Optional[KnowledgeBase] = None,
                  config: Optional[EvalConfig] = None) -> EvalReport:
    kb = kb or builtin_kb()
    config = config or EvalConfig(mode=EvalMode.TOP3)
    report = EvalReport(EvalMode.TOP3)
    for record in records:
        seed = record_seed(config.rng_seed, record.id)
        order = _top3_order(record, kb, config)[:3]
        answer_hit = False
        program_hit = False
        first_answer = None
        for index in order:
            candidate = record.candidates[index]
            answer = _execute_candidate(record, candidate, kb, config, seed)
            if first_answer is None and answer is not None:
                first_answer = answer
            if _answer_matches(answer, record.gt_answer, config):
                answer_hit = True
            if _program_matches(record, index, kb):
                program_hit = True
        report.outcomes.append(ProblemOutcome(
            record_id=record.id,
            chosen_index=order[0] if order else None,
            verified=config.verify,
            answer=first_answer,
            answer_correct=answer_hit,
            program_correct=program_hit,
        ))
    return report


_MODE_FN = {
    EvalMode.COMPLETION: evaluate_completion,
    EvalMode.CHOICE: evaluate_choice,
    EvalMode.TOP3: evaluate_top3,
}


def evaluate(records: list[ProblemRecord], kb: Optional[KnowledgeBase] = None,
             config: Optional[EvalConfig] = None) -> EvalReport:
    config = config or EvalConfig()
    return _MODE_FN[config.mode](records, kb, config)
