"""Problem records: the dataset unit binding clauses, text, and programs.

A record stores semantic clauses and problem text in annotated form (with
"(Nk)" markers) plus the matching declarations; the parsed facts are kept
alongside.  Records are exchanged as one JSON object per line (UTF-8).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .clauses import (
    AssignResult,
    Clause,
    assign_problem_vars,
    parse_clause,
    strip_annotations,
)
from .errors import DatasetFormatError, GeoprogError
from .kb import KnowledgeBase, builtin_kb
from .program import Candidate, SolutionProgram, parse_program, render_program

DEFAULT_BEAM_SIZE = 10


@dataclass
class ProblemRecord:
    id: str
    structural_clauses: list[Clause] = field(default_factory=list)
    semantic_clauses: list[Clause] = field(default_factory=list)  # unannotated
    semantic_annotated: list[str] = field(default_factory=list)
    problem_text: str = ""  # annotated
    declarations: dict[str, str] = field(default_factory=dict)
    candidates: list[Candidate] = field(default_factory=list)
    gt_program: Optional[SolutionProgram] = None
    gt_answer: Optional[float] = None
    choices: Optional[list[float]] = None

    @property
    def structural_facts(self):
        return [c.fact for c in self.structural_clauses]

    @property
    def semantic_facts(self):
        return [c.fact for c in self.semantic_clauses]

    @property
    def problem_text_raw(self) -> str:
        return strip_annotations(self.problem_text)

    @staticmethod
    def build(record_id: str, structural_texts: list[str], semantic_texts: list[str],
              problem_text: str = "", candidates: Optional[list[Candidate]] = None,
              gt_program: Optional[SolutionProgram] = None,
              gt_answer: Optional[float] = None,
              choices: Optional[list[float]] = None) -> "ProblemRecord":
        """Assemble a record from raw (unannotated) clause and text parts."""
        structural = [parse_clause(t) for t in structural_texts]
        semantic = [parse_clause(t) for t in semantic_texts]
        assigned = assign_problem_vars([c.text for c in semantic], problem_text)
        return ProblemRecord(
            id=record_id,
            structural_clauses=structural,
            semantic_clauses=semantic,
            semantic_annotated=assigned.clauses,
            problem_text=assigned.problem_text,
            declarations=assigned.declarations,
            candidates=candidates or [],
            gt_program=gt_program,
            gt_answer=gt_answer,
            choices=choices,
        )

    def to_json(self) -> dict:
        out = {
            "id": self.id,
            "structural_clauses": [c.text for c in self.structural_clauses],
            "semantic_clauses": list(self.semantic_annotated),
            "problem_text": self.problem_text,
            "declarations": dict(self.declarations),
            "candidates": [
                {"program": render_program(c.program), "confidence": c.confidence}
                for c in self.candidates
            ],
        }
        if self.gt_program is not None:
            out["gt_program"] = render_program(self.gt_program)
        if self.gt_answer is not None:
            out["gt_answer"] = self.gt_answer
        if self.choices is not None:
            out["choices"] = list(self.choices)
        return out


def record_from_json(data: dict, kb: Optional[KnowledgeBase] = None,
                     beam_size: int = DEFAULT_BEAM_SIZE,
                     answer_rtol: float = 1e-3, answer_atol: float = 5e-3) -> ProblemRecord:
    """Validate and parse one record object."""
    kb = kb or builtin_kb()
    record_id = str(data.get("id", ""))
    if not record_id:
        raise DatasetFormatError("<missing>", "id", "record needs an id")

    def fail(fld: str, message: str):
        raise DatasetFormatError(record_id, fld, message)

    def parse_clause_list(fld: str) -> list[Clause]:
        texts = data.get(fld, [])
        if not isinstance(texts, list):
            fail(fld, "expected a list of clause strings")
        out = []
        for text in texts:
            try:
                out.append(parse_clause(strip_annotations(str(text))))
            except GeoprogError as exc:
                fail(fld, str(exc))
        return out

    structural = parse_clause_list("structural_clauses")
    semantic = parse_clause_list("semantic_clauses")

    problem_text = str(data.get("problem_text", ""))
    annotated_sem = [str(t) for t in data.get("semantic_clauses", [])]
    declared = {str(k): str(v) for k, v in data.get("declarations", {}).items()}

    # Re-derive the variable assignment and check it matches what is stored.
    # Records without clauses or text may declare variables directly; they
    # are the minimal form used by exec-style calls.
    if semantic or problem_text:
        try:
            assigned = assign_problem_vars([c.text for c in semantic],
                                           strip_annotations(problem_text))
        except GeoprogError as exc:
            fail("semantic_clauses", str(exc))
        if assigned.declarations != declared:
            fail("declarations",
                 f"stored {declared} but clauses/text imply {assigned.declarations}")
        if assigned.clauses != annotated_sem:
            fail("semantic_clauses",
                 f"stored annotations {annotated_sem} but expected {assigned.clauses}")
        if assigned.problem_text != problem_text:
            fail("problem_text",
                 f"stored {problem_text!r} but expected {assigned.problem_text!r}")

    candidates = []
    raw_candidates = data.get("candidates", [])
    if len(raw_candidates) > beam_size:
        fail("candidates", f"{len(raw_candidates)} exceeds beam size {beam_size}")
    for i, item in enumerate(raw_candidates):
        try:
            program = parse_program(str(item["program"]), kb)
            confidence = float(item["confidence"])
        except (KeyError, ValueError, GeoprogError) as exc:
            fail("candidates", f"candidate {i}: {exc}")
        candidates.append(Candidate(program, confidence))

    gt_program = None
    if data.get("gt_program"):
        try:
            gt_program = parse_program(str(data["gt_program"]), kb)
        except GeoprogError as exc:
            fail("gt_program", str(exc))

    gt_answer = data.get("gt_answer")
    if gt_answer is not None:
        gt_answer = float(gt_answer)

    choices = data.get("choices")
    if choices is not None:
        if not isinstance(choices, list) or len(choices) != 4:
            fail("choices", "exactly four options required")
        choices = [float(c) for c in choices]
        if gt_answer is not None:
            tol = max(answer_rtol * abs(gt_answer), answer_atol)
            if not any(abs(c - gt_answer) <= tol for c in choices):
                fail("choices", f"ground-truth answer {gt_answer} not among options")

    return ProblemRecord(
        id=record_id,
        structural_clauses=structural,
        semantic_clauses=semantic,
        semantic_annotated=annotated_sem,
        problem_text=problem_text,
        declarations=declared,
        candidates=candidates,
        gt_program=gt_program,
        gt_answer=gt_answer,
        choices=choices,
    )


def _reject_duplicate_keys(pairs):
    seen = {}
    for key, value in pairs:
        if key in seen:
            raise ValueError(f"duplicate key {key!r}")
        seen[key] = value
    return seen


def load_dataset_text(text: str, kb: Optional[KnowledgeBase] = None,
                      beam_size: int = DEFAULT_BEAM_SIZE,
                      lenient: bool = False) -> tuple[list[ProblemRecord], list[str]]:
    """Parse JSONL text; returns (records, error messages for skipped ones)."""
    kb = kb or builtin_kb()
    records: list[ProblemRecord] = []
    errors: list[str] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            data = json.loads(line, object_pairs_hook=_reject_duplicate_keys)
        except ValueError as exc:
            problem = DatasetFormatError(f"line {line_no}", "json", str(exc))
            if lenient:
                errors.append(str(problem))
                continue
            raise problem from None
        try:
            records.append(record_from_json(data, kb, beam_size))
        except DatasetFormatError as exc:
            if lenient:
                errors.append(str(exc))
                continue
            raise
    return records, errors


def load_dataset(path: str | Path, kb: Optional[KnowledgeBase] = None,
                 beam_size: int = DEFAULT_BEAM_SIZE,
                 lenient: bool = False) -> list[ProblemRecord]:
    """Load a JSONL dataset file; malformed records raise, or are skipped
    (and reported on the returned records' behalf) under lenient."""
    text = Path(path).read_text(encoding="utf-8")
    records, _ = load_dataset_text(text, kb, beam_size, lenient)
    return records


def save_dataset(records: list[ProblemRecord], path: str | Path) -> None:
    lines = [json.dumps(r.to_json(), ensure_ascii=False) for r in records]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
