"""Pydantic request/response models for the HTTP API."""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field


class CandidateModel(BaseModel):
    program: str
    confidence: float = 1.0


class RecordModel(BaseModel):
    id: str
    structural_clauses: list[str] = Field(default_factory=list)
    semantic_clauses: list[str] = Field(default_factory=list)
    problem_text: str = ""
    declarations: dict[str, str] = Field(default_factory=dict)
    candidates: list[CandidateModel] = Field(default_factory=list)
    gt_program: Optional[str] = None
    gt_answer: Optional[float] = None
    choices: Optional[list[float]] = None

    def to_json_obj(self) -> dict:
        data = self.model_dump()
        if data.get("gt_program") is None:
            data.pop("gt_program", None)
        if data.get("gt_answer") is None:
            data.pop("gt_answer", None)
        if data.get("choices") is None:
            data.pop("choices", None)
        return data


class KbAware(BaseModel):
    kb_text: Optional[str] = None  # full KB file content; builtin when absent


class ExecRequest(KbAware):
    record: RecordModel
    program: str
    budget: Optional[int] = None
    seed: int = 0
    trace: bool = True


class StepModel(BaseModel):
    index: int
    operator: Optional[str]
    variant_arity: Optional[int]
    equation: Optional[str]
    new_bindings: dict[str, float]
    status: str
    reason: Optional[str]
    detail: str


class ExecResponse(BaseModel):
    status: str
    answer: Optional[float]
    trace: list[StepModel] = Field(default_factory=list)


class VerifyRequest(KbAware):
    record: RecordModel
    program: str
    confidence: float = 1.0
    budget: Optional[int] = None
    seed: int = 0


class VerdictModel(BaseModel):
    step_index: int
    passed: bool
    failed_level: Optional[str]
    detail: str


class VerifyResponse(BaseModel):
    passed: bool
    answer: Optional[float]
    detail: str
    verdicts: list[VerdictModel]


class SelectRequest(KbAware):
    record: RecordModel
    candidates: list[CandidateModel]
    budget: Optional[int] = None
    seed: int = 0


class SelectResponse(BaseModel):
    chosen_index: Optional[int]
    chosen: Optional[CandidateModel]
    answer: Optional[float]
    reports: list[dict]


class ClausesRenderRequest(BaseModel):
    facts: list[dict]
    ascii_mode: bool = False


class ClausesRenderResponse(BaseModel):
    clauses: list[str]


class ClausesParseRequest(BaseModel):
    texts: list[str]


class ParsedClauseModel(BaseModel):
    category: str
    kind: str
    text: str
    fact: dict


class ClausesParseResponse(BaseModel):
    clauses: list[ParsedClauseModel]


class AugmentRequest(KbAware):
    record: RecordModel
    strategies: list[str]
    probability: float = 1.0
    seed: int = 0
    count: int = 1


class AugmentResponse(BaseModel):
    records: list[dict]


class EvalConfigModel(BaseModel):
    mode: str = "completion"
    answer_rtol: float = 1e-3
    answer_atol: float = 5e-3
    choice_window: float = 0.05
    fallback: str = "top_confidence"
    rng_seed: int = 0
    beam_size: int = 10
    verify: bool = True
    top3_programs: bool = False
    budget: Optional[int] = None


class EvalRequest(KbAware):
    records_jsonl: str
    config: EvalConfigModel = Field(default_factory=EvalConfigModel)
    lenient: bool = False


class EvalResponse(BaseModel):
    report: dict
    skipped: list[str] = Field(default_factory=list)


class KbCheckResponse(BaseModel):
    operators: int
    witnesses: int
    ok: bool
    summary: str
    failures: list[dict] = Field(default_factory=list)


class KbInfoResponse(BaseModel):
    operators: list[str]
    aliases: dict[str, str]
    variant_counts: dict[str, int]


class HealthResponse(BaseModel):
    status: str
    version: str
    operators: int
