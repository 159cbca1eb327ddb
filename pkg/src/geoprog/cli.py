"""Command-line client for the geoprog service.

All commands speak the HTTP API: against a remote server when --server is
given, otherwise against an in-process instance of the same app over an
ASGI transport, so both paths exercise identical request handling.

Exit codes: 0 success, 2 input error, 3 internal/transport failure.
`exec` additionally maps non-completed terminal statuses to dedicated
codes: 4 form-error, 5 incalculable, 6 contradiction-error,
7 budget-exceeded.
"""

from __future__ import annotations

import asyncio
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import click
import httpx

_EXEC_EXIT = {
    "completed": 0,
    "form-error": 4,
    "incalculable": 5,
    "contradiction-error": 6,
    "budget-exceeded": 7,
}


@dataclass
class CliContext:
    server: Optional[str]
    kb_text: Optional[str]
    seed: int
    budget: Optional[int]
    answer_rtol: float
    answer_atol: float
    verify: bool
    format: str


def _parse_tolerance(text: str) -> tuple[float, float]:
    if ":" in text:
        rel, abs_ = text.split(":", 1)
        return float(rel), float(abs_)
    return float(text), 5e-3


def _request(ctx: CliContext, method: str, path: str,
             payload: Optional[dict] = None) -> httpx.Response:
    if ctx.server:
        try:
            with httpx.Client(base_url=ctx.server, timeout=120.0) as client:
                return client.request(method, path, json=payload)
        except httpx.HTTPError as exc:
            click.echo(f"transport error: {exc}", err=True)
            sys.exit(3)

    from .service import create_app

    async def go() -> httpx.Response:
        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(transport=transport,
                                     base_url="http://geoprog.internal") as client:
            return await client.request(method, path, json=payload)

    return asyncio.run(go())


def _call(ctx: CliContext, method: str, path: str,
          payload: Optional[dict] = None) -> dict:
    response = _request(ctx, method, path, payload)
    if response.status_code >= 500:
        click.echo(f"internal failure: {response.text}", err=True)
        sys.exit(3)
    if response.status_code >= 400:
        detail = response.json().get("detail", response.text)
        click.echo(f"input error: {detail}", err=True)
        sys.exit(2)
    return response.json()


def _read_json(path: str) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        click.echo(f"input error: cannot read {path}: {exc}", err=True)
        sys.exit(2)


def _emit(ctx: CliContext, data: dict, text_lines: list[str]) -> None:
    if ctx.format == "structured":
        click.echo(json.dumps(data, indent=2, ensure_ascii=False))
    else:
        for line in text_lines:
            click.echo(line)


@click.group()
@click.option("--server", default=None, metavar="URL",
              help="Remote service URL; default runs the service in-process.")
@click.option("--kb", "kb_path", default=None, type=click.Path(exists=True),
              help="Knowledge-base file (default: builtin 34-operator base).")
@click.option("--seed", default=0, show_default=True, help="Random seed.")
@click.option("--budget", default=None, type=int,
              help="Per-step evaluation budget (default 10^6).")
@click.option("--tolerance", default="1e-3:5e-3", show_default=True,
              metavar="REL[:ABS]", help="Answer tolerance, relative[:absolute].")
@click.option("--no-verify", is_flag=True, help="Disable candidate verification.")
@click.option("--format", "output_format", type=click.Choice(["text", "structured"]),
              default="text", show_default=True)
@click.pass_context
def main(ctx, server, kb_path, seed, budget, tolerance, no_verify, output_format):
    """Geometry solution-program toolkit (thin client over the HTTP API)."""
    try:
        rtol, atol = _parse_tolerance(tolerance)
    except ValueError:
        click.echo("input error: --tolerance expects REL[:ABS] numbers", err=True)
        sys.exit(2)
    kb_text = None
    if kb_path:
        kb_text = Path(kb_path).read_text(encoding="utf-8")
    ctx.obj = CliContext(server=server, kb_text=kb_text, seed=seed, budget=budget,
                         answer_rtol=rtol, answer_atol=atol,
                         verify=not no_verify, format=output_format)


@main.command("exec")
@click.option("--record", "record_path", required=True, type=click.Path(exists=True),
              help="Record JSON file (a single dataset record).")
@click.option("--program", required=True, help="Solution program text.")
@click.option("--trace/--no-trace", default=True, show_default=True)
@click.pass_obj
def exec_cmd(ctx: CliContext, record_path, program, trace):
    """Execute a program against a record; exit code mirrors the status."""
    payload = {
        "record": _read_json(record_path),
        "program": program,
        "seed": ctx.seed,
        "budget": ctx.budget,
        "trace": trace,
        "kb_text": ctx.kb_text,
    }
    data = _call(ctx, "POST", "/exec", payload)
    lines = [f"status: {data['status']}", f"answer: {data['answer']}"]
    if trace:
        for step in data["trace"]:
            state = step["status"] if not step["reason"] else f"{step['status']} ({step['reason']})"
            extras = []
            if step["equation"]:
                extras.append(step["equation"])
            if step["new_bindings"]:
                extras.append("binds " + ", ".join(
                    f"{k}={v:g}" for k, v in step["new_bindings"].items()))
            if step["detail"]:
                extras.append(step["detail"])
            lines.append(f"  step {step['index']} {step['operator'] or '?'}: "
                         f"{state}" + (" - " + "; ".join(extras) if extras else ""))
    _emit(ctx, data, lines)
    sys.exit(_EXEC_EXIT.get(data["status"], 3))


@main.command()
@click.option("--record", "record_path", required=True, type=click.Path(exists=True))
@click.option("--program", required=True)
@click.option("--confidence", default=1.0, show_default=True)
@click.pass_obj
def verify(ctx: CliContext, record_path, program, confidence):
    """Run multi-level verification on one candidate program."""
    payload = {
        "record": _read_json(record_path),
        "program": program,
        "confidence": confidence,
        "seed": ctx.seed,
        "budget": ctx.budget,
        "kb_text": ctx.kb_text,
    }
    data = _call(ctx, "POST", "/verify", payload)
    lines = [f"passed: {data['passed']}"]
    if data["answer"] is not None:
        lines.append(f"answer: {data['answer']}")
    if data["detail"]:
        lines.append(f"detail: {data['detail']}")
    for verdict in data["verdicts"]:
        status = "pass" if verdict["passed"] else f"FAIL at {verdict['failed_level']}"
        suffix = f" - {verdict['detail']}" if verdict["detail"] else ""
        lines.append(f"  step {verdict['step_index']}: {status}{suffix}")
    _emit(ctx, data, lines)


@main.command()
@click.option("--record", "record_path", required=True, type=click.Path(exists=True))
@click.option("--candidates", "candidates_path", required=True,
              type=click.Path(exists=True),
              help='JSON list of {"program": ..., "confidence": ...}.')
@click.pass_obj
def select(ctx: CliContext, record_path, candidates_path):
    """Pick the highest-confidence candidate that survives verification."""
    payload = {
        "record": _read_json(record_path),
        "candidates": _read_json(candidates_path),
        "seed": ctx.seed,
        "budget": ctx.budget,
        "kb_text": ctx.kb_text,
    }
    data = _call(ctx, "POST", "/select", payload)
    if data["chosen_index"] is None:
        lines = ["no candidate passed verification"]
    else:
        lines = [
            f"chosen: #{data['chosen_index']} "
            f"(confidence {data['chosen']['confidence']})",
            f"program: {data['chosen']['program']}",
            f"answer: {data['answer']}",
        ]
    _emit(ctx, data, lines)


@main.group()
def clauses():
    """Render facts to clause text, or parse clause text to facts."""


@clauses.command("render")
@click.option("--facts", "facts_path", required=True, type=click.Path(exists=True),
              help="JSON list of annotation facts.")
@click.option("--ascii", "ascii_mode", is_flag=True, help="ASCII rendering.")
@click.pass_obj
def clauses_render(ctx: CliContext, facts_path, ascii_mode):
    payload = {"facts": _read_json(facts_path), "ascii_mode": ascii_mode}
    data = _call(ctx, "POST", "/clauses/render", payload)
    _emit(ctx, data, data["clauses"])


@clauses.command("parse")
@click.argument("texts", nargs=-1, required=True)
@click.pass_obj
def clauses_parse(ctx: CliContext, texts):
    data = _call(ctx, "POST", "/clauses/parse", {"texts": list(texts)})
    lines = []
    for clause in data["clauses"]:
        lines.append(f"{clause['category']}/{clause['kind']}: "
                     + json.dumps(clause["fact"], ensure_ascii=False))
    _emit(ctx, data, lines)


@main.command()
@click.option("--record", "record_path", required=True, type=click.Path(exists=True))
@click.option("--strategies", default="token_replacement,connection_rotation,"
              "representation_transposition,clauses_shuffle", show_default=False,
              help="Comma list (default: all four strategies).")
@click.option("--prob", default=1.0, show_default=True, help="Firing probability.")
@click.option("--count", default=1, show_default=True, help="Variants to emit.")
@click.option("--output", default=None, type=click.Path(),
              help="Write JSONL here instead of stdout.")
@click.pass_obj
def augment(ctx: CliContext, record_path, strategies, prob, count, output):
    """Emit equivalence-preserving rewrites of a record."""
    payload = {
        "record": _read_json(record_path),
        "strategies": [s.strip() for s in strategies.split(",") if s.strip()],
        "probability": prob,
        "seed": ctx.seed,
        "count": count,
        "kb_text": ctx.kb_text,
    }
    data = _call(ctx, "POST", "/augment", payload)
    lines = [json.dumps(rec, ensure_ascii=False) for rec in data["records"]]
    if output:
        Path(output).write_text("\n".join(lines) + "\n", encoding="utf-8")
        click.echo(f"wrote {len(lines)} records to {output}")
    else:
        for line in lines:
            click.echo(line)


@main.command("eval")
@click.argument("dataset", type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["completion", "choice", "top3"]),
              default="completion", show_default=True)
@click.option("--lenient", is_flag=True, help="Skip malformed records.")
@click.option("--top3-programs", is_flag=True,
              help="Report program-level accuracy as the Top-3 headline.")
@click.pass_obj
def eval_cmd(ctx: CliContext, dataset, mode, lenient, top3_programs):
    """Score a JSONL dataset in one of the three evaluation modes."""
    payload = {
        "records_jsonl": Path(dataset).read_text(encoding="utf-8"),
        "lenient": lenient,
        "kb_text": ctx.kb_text,
        "config": {
            "mode": mode,
            "answer_rtol": ctx.answer_rtol,
            "answer_atol": ctx.answer_atol,
            "rng_seed": ctx.seed,
            "verify": ctx.verify,
            "top3_programs": top3_programs,
            "budget": ctx.budget,
        },
    }
    data = _call(ctx, "POST", "/eval", payload)
    report = data["report"]
    headline = ("program_accuracy" if (mode == "top3" and top3_programs)
                else "answer_accuracy")
    lines = [
        f"mode: {report['mode']}",
        f"records: {report['count']}",
        f"answer accuracy: {report['answer_accuracy']:.4f}",
        f"program accuracy: {report['program_accuracy']:.4f}",
        f"headline: {report[headline]:.4f} ({headline})",
    ]
    for skipped in data["skipped"]:
        lines.append(f"skipped: {skipped}")
    _emit(ctx, data, lines)


@main.group()
def kb():
    """Knowledge-base utilities."""


@kb.command("check")
@click.pass_obj
def kb_check(ctx: CliContext):
    """Verify operator count and every shipped witness."""
    data = _call(ctx, "POST", "/kb/check", {"kb_text": ctx.kb_text})
    _emit(ctx, data, [data["summary"]])
    if not data["ok"]:
        sys.exit(2)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
