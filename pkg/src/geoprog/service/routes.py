"""HTTP endpoints wrapping the core package.

The knowledge base ships with the service and loads once; requests may
override it by sending the full KB file text, which is parsed and cached
by content.  Domain errors surface as 422 responses with the error text.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Optional

from fastapi import APIRouter, HTTPException

from .. import __version__
from ..augment import ALL_STRATEGIES, AugmentSpec, compose
from ..clauses import fact_from_json, fact_to_json, parse_clause, render_fact
from ..errors import GeoprogError
from ..executor import DEFAULT_STEP_BUDGET, execute_program
from ..harness import (
    EvalConfig,
    EvalMode,
    FallbackPolicy,
    evaluate,
    load_dataset_text,
)
from ..kb import KnowledgeBase, builtin_kb, check_kb, loads_kb
from ..program import Candidate, parse_program, render_program
from ..records import record_from_json
from ..verifier import select_solution, verify_program
from .models import (
    AugmentRequest,
    AugmentResponse,
    CandidateModel,
    ClausesParseRequest,
    ClausesParseResponse,
    ClausesRenderRequest,
    ClausesRenderResponse,
    EvalRequest,
    EvalResponse,
    ExecRequest,
    ExecResponse,
    HealthResponse,
    KbCheckResponse,
    KbInfoResponse,
    ParsedClauseModel,
    RecordModel,
    SelectRequest,
    SelectResponse,
    StepModel,
    VerdictModel,
    VerifyRequest,
    VerifyResponse,
)

router = APIRouter()


@lru_cache(maxsize=8)
def _kb_from_text(text: str) -> KnowledgeBase:
    return loads_kb(text)


def _resolve_kb(kb_text: Optional[str]) -> KnowledgeBase:
    if kb_text is None:
        return builtin_kb()
    try:
        return _kb_from_text(kb_text)
    except GeoprogError as exc:
        raise HTTPException(status_code=422, detail=f"knowledge base: {exc}") from None


def _record(model: RecordModel, kb: KnowledgeBase):
    try:
        return record_from_json(model.to_json_obj(), kb)
    except GeoprogError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from None


def _parse_program(text: str, kb: KnowledgeBase):
    try:
        return parse_program(text, kb)
    except GeoprogError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from None


@router.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__, operators=len(builtin_kb()))


@router.get("/kb", response_model=KbInfoResponse)
def kb_info() -> KbInfoResponse:
    kb = builtin_kb()
    aliases = {}
    for name, tup in kb.tuples.items():
        for alias in tup.aliases:
            aliases[alias] = name
    return KbInfoResponse(
        operators=kb.operators(),
        aliases=aliases,
        variant_counts={name: len(tup.variants) for name, tup in kb.tuples.items()},
    )


@router.post("/kb/check", response_model=KbCheckResponse)
def kb_check(payload: dict | None = None) -> KbCheckResponse:
    kb_text = (payload or {}).get("kb_text")
    kb = _resolve_kb(kb_text)
    report = check_kb(kb)
    return KbCheckResponse(
        operators=report.operator_count,
        witnesses=len(report.results),
        ok=report.ok,
        summary=report.summary(),
        failures=[
            {"operator": r.operator, "arity": r.arity, "detail": r.detail}
            for r in report.results if not r.ok
        ],
    )


@router.post("/exec", response_model=ExecResponse)
def exec_program(req: ExecRequest) -> ExecResponse:
    kb = _resolve_kb(req.kb_text)
    record = _record(req.record, kb)
    program = _parse_program(req.program, kb)
    outcome = execute_program(record, program, kb,
                              budget=req.budget or DEFAULT_STEP_BUDGET, seed=req.seed)
    trace = [StepModel(**rec.as_dict()) for rec in outcome.trace] if req.trace else []
    return ExecResponse(status=outcome.status.value, answer=outcome.answer, trace=trace)


@router.post("/verify", response_model=VerifyResponse)
def verify(req: VerifyRequest) -> VerifyResponse:
    kb = _resolve_kb(req.kb_text)
    record = _record(req.record, kb)
    program = _parse_program(req.program, kb)
    report = verify_program(record, Candidate(program, req.confidence), kb,
                            budget=req.budget or DEFAULT_STEP_BUDGET, seed=req.seed)
    return VerifyResponse(
        passed=report.passed,
        answer=report.answer,
        detail=report.detail,
        verdicts=[VerdictModel(**v.as_dict()) for v in report.verdicts],
    )


@router.post("/select", response_model=SelectResponse)
def select(req: SelectRequest) -> SelectResponse:
    kb = _resolve_kb(req.kb_text)
    record = _record(req.record, kb)
    candidates = [Candidate(_parse_program(c.program, kb), c.confidence)
                  for c in req.candidates]
    result = select_solution(record, candidates, kb,
                             budget=req.budget or DEFAULT_STEP_BUDGET, seed=req.seed)
    chosen = None
    if result.chosen is not None:
        chosen = CandidateModel(program=render_program(result.chosen.program),
                                confidence=result.chosen.confidence)
    return SelectResponse(
        chosen_index=result.chosen_index,
        chosen=chosen,
        answer=result.answer,
        reports=[{"candidate_index": i, **r.as_dict()} for i, r in result.reports],
    )


@router.post("/clauses/render", response_model=ClausesRenderResponse)
def clauses_render(req: ClausesRenderRequest) -> ClausesRenderResponse:
    try:
        facts = [fact_from_json(f) for f in req.facts]
        return ClausesRenderResponse(
            clauses=[render_fact(f, req.ascii_mode) for f in facts])
    except GeoprogError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from None


@router.post("/clauses/parse", response_model=ClausesParseResponse)
def clauses_parse(req: ClausesParseRequest) -> ClausesParseResponse:
    out = []
    for text in req.texts:
        try:
            clause = parse_clause(text)
        except GeoprogError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        out.append(ParsedClauseModel(
            category=clause.category.value,
            kind=clause.kind,
            text=clause.text,
            fact=fact_to_json(clause.fact),
        ))
    return ClausesParseResponse(clauses=out)


@router.post("/augment", response_model=AugmentResponse)
def augment(req: AugmentRequest) -> AugmentResponse:
    kb = _resolve_kb(req.kb_text)
    record = _record(req.record, kb)
    unknown = [s for s in req.strategies if s not in ALL_STRATEGIES]
    if unknown:
        raise HTTPException(status_code=422,
                            detail=f"unknown strategies: {', '.join(unknown)}")
    out = []
    for i in range(req.count):
        spec = AugmentSpec({s: req.probability for s in req.strategies},
                           seed=req.seed + i)
        try:
            augmented = compose(record, spec)
        except GeoprogError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        data = augmented.to_json()
        data["id"] = f"{record.id}-aug{i}"
        out.append(data)
    return AugmentResponse(records=out)


@router.post("/eval", response_model=EvalResponse)
def eval_dataset(req: EvalRequest) -> EvalResponse:
    kb = _resolve_kb(req.kb_text)
    cfg_model = req.config
    try:
        mode = EvalMode(cfg_model.mode)
        config = EvalConfig(
            mode=mode,
            answer_rtol=cfg_model.answer_rtol,
            answer_atol=cfg_model.answer_atol,
            choice_window=cfg_model.choice_window,
            fallback=FallbackPolicy(cfg_model.fallback),
            rng_seed=cfg_model.rng_seed,
            beam_size=cfg_model.beam_size,
            verify=cfg_model.verify,
            top3_programs=cfg_model.top3_programs,
            budget=cfg_model.budget or DEFAULT_STEP_BUDGET,
        )
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from None
    try:
        records, skipped = load_dataset_text(req.records_jsonl, kb,
                                             config.beam_size, req.lenient)
        report = evaluate(records, kb, config)
    except GeoprogError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from None
    return EvalResponse(report=report.as_dict(), skipped=skipped)
