"""HTTP API: every platform capability under /v1, JSON in/out, SSE streaming.

Handlers stay thin; they parse the request, call the Platform facade, and map
domain errors onto status codes.
"""
from __future__ import annotations

import json
import queue
import threading
from pathlib import Path

from fastapi import Body, FastAPI, File, Form, Request, UploadFile
from fastapi.responses import JSONResponse, PlainTextResponse, Response, StreamingResponse
from fastapi.staticfiles import StaticFiles

from . import errors
from .jobs import JOB_KINDS
from .service import Platform

_STATUS = {
    errors.NoTextColumn: 400,
    errors.ParseError: 400,
    errors.WrongLayout: 400,
    errors.ValidationError: 400,
    errors.SchemaMismatch: 400,
    errors.MissingMember: 400,
    errors.KOutOfRange: 400,
    errors.LengthMismatch: 400,
    errors.UnknownLabel: 400,
    errors.MissingBinding: 400,
    errors.MissingPlaceholder: 400,
    errors.UnknownTemplate: 400,
    errors.EmptySummary: 400,
    errors.EmptyConversation: 400,
    errors.EmptyScores: 400,
    errors.CapabilityMissing: 400,
    errors.NotFound: 404,
    errors.BuiltinProtected: 403,
    errors.AlreadyTerminal: 409,
    errors.QueueFull: 429,
    errors.BackendUnavailable: 502,
    errors.LmUnavailable: 502,
    errors.ContextTooLong: 502,
    errors.UnparseableVerdict: 502,
    errors.ParseFailure: 502,
    errors.StreamInterrupted: 502,
}


def _status_for(exc: Exception) -> int:
    for klass in type(exc).__mro__:
        if klass in _STATUS:
            return _STATUS[klass]
    return 500


def create_app(platform: Platform) -> FastAPI:
    app = FastAPI(title="toxiscope", version="0.1.0")
    app.state.platform = platform

    @app.exception_handler(errors.ToxiscopeError)
    async def domain_error(request: Request, exc: errors.ToxiscopeError):
        return JSONResponse(
            status_code=_status_for(exc),
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.exception_handler(ValueError)
    async def value_error(request: Request, exc: ValueError):
        return JSONResponse(
            status_code=400, content={"error": "ValueError", "detail": str(exc)}
        )

    # --- health & config -------------------------------------------------

    @app.get("/v1/health")
    def health():
        return {"status": "ok"}

    @app.get("/v1/config")
    def config():
        return platform.config.public_json()

    @app.get("/v1/templates")
    def templates():
        return {"templates": platform.templates.ids()}

    @app.get("/v1/schemas")
    def schemas():
        return {"schemas": platform.schemas.ids()}

    # --- datasets -----------------------------------------------------------

    @app.post("/v1/datasets")
    def upload_dataset(
        file: UploadFile = File(...),
        name: str = Form(""),
        format: str = Form(""),
    ):
        raw = file.file.read()
        filename = file.filename or "upload"
        fmt = format or ("jsonl" if filename.endswith((".jsonl", ".json")) else "csv")
        descriptor, report = platform.store.ingest_dataset(
            name or filename, raw, fmt
        )
        return {"dataset": descriptor.to_json(), "report": report.to_json()}

    @app.get("/v1/datasets")
    def list_datasets():
        return {"datasets": [d.to_json() for d in platform.store.list_datasets()]}

    @app.get("/v1/datasets/{dataset_id}")
    def get_dataset(dataset_id: str):
        return platform.store.get_dataset(dataset_id).to_json()

    @app.delete("/v1/datasets/{dataset_id}")
    def delete_dataset(dataset_id: str):
        platform.store.delete_dataset(dataset_id)
        return {"deleted": dataset_id}

    @app.get("/v1/datasets/{dataset_id}/export")
    def export_dataset(dataset_id: str, format: str = "jsonl"):
        payload = platform.store.export_dataset(dataset_id, format)
        media = "application/jsonl" if format == "jsonl" else "text/csv"
        return Response(content=payload, media_type=media)

    @app.get("/v1/datasets/{dataset_id}/records")
    def get_records(dataset_id: str, offset: int = 0, limit: int = 200):
        records = platform.store.get_records(dataset_id)
        return {
            "total": len(records),
            "records": [r.to_canonical() for r in records[offset: offset + limit]],
        }

    @app.get("/v1/datasets/{dataset_id}/conversations")
    def list_conversations(dataset_id: str):
        return {"conversations": platform.store.list_conversations(dataset_id)}

    @app.get("/v1/datasets/{dataset_id}/conversations/{key}")
    def get_conversation(dataset_id: str, key: str):
        conversation = platform.store.get_conversation(dataset_id, key)
        return {
            "key": conversation.key,
            "participants": sorted(conversation.participants),
            "turns": [t.to_canonical() for t in conversation.turns],
        }

    @app.get("/v1/datasets/{dataset_id}/results")
    def list_results(dataset_id: str, kind: str | None = None):
        return {"results": platform.store.list_results(dataset_id, kind)}

    @app.get("/v1/datasets/{dataset_id}/results/{kind}/latest")
    def latest_result(dataset_id: str, kind: str):
        payload = platform.store.latest_result(dataset_id, kind)
        if payload is None:
            raise errors.NotFound(f"no {kind} result for dataset {dataset_id!r}")
        return payload

    # --- classification ---------------------------------------------------------

    @app.post("/v1/classify")
    def classify(body: dict = Body(...)):
        return platform.classify_dataset(
            body["dataset_id"],
            body["classifier_id"],
            body["schema_id"],
            body.get("message_ids"),
        )

    @app.post("/v1/classify/report")
    def classify_report(body: dict = Body(...), format: str = "json"):
        if format == "csv":
            return PlainTextResponse(
                platform.report_csv(body["gold"], body["pred"], body["schema_id"]),
                media_type="text/csv",
            )
        return platform.report_from_labels(
            body["gold"], body["pred"], body["schema_id"]
        )

    @app.post("/v1/classify/verify")
    def classify_verify(body: dict = Body(...)):
        return {
            "verdicts": platform.verify_predictions(
                body["dataset_id"],
                body["predictions"],
                body["provider_id"],
                body.get("template_id", "verify_prediction"),
            )
        }

    # --- jobs ----------------------------------------------------------------------

    @app.post("/v1/jobs/{kind}")
    def submit_job(kind: str, body: dict = Body(default={})):
        if kind not in JOB_KINDS:
            raise errors.ValidationError(f"unknown job kind {kind!r}")
        return platform.submit_job(kind, body).to_json()

    @app.get("/v1/jobs/{job_id}")
    def poll_job(job_id: str):
        handle = platform.jobs.poll(job_id)
        payload = handle.to_json()
        if handle.state == "done":
            payload["result"] = platform.jobs.result(job_id)
        return payload

    @app.delete("/v1/jobs/{job_id}")
    def cancel_job(job_id: str):
        return platform.jobs.cancel(job_id).to_json()

    # --- attribution -------------------------------------------------------------------

    @app.post("/v1/ppl-gain")
    def ppl_gain(body: dict = Body(...)):
        return platform.run_ppl_gain(
            body["dataset_id"],
            body["conversation_key"],
            body["provider_id"],
            body.get("granularity", "message"),
            body.get("output_text"),
            body.get("detect_template", "vawg_detect"),
        )

    # --- persona -----------------------------------------------------------------------

    @app.post("/v1/persona/{speaker}")
    def persona(speaker: str, body: dict = Body(...)):
        return platform.run_persona(
            body["dataset_id"], speaker, body["provider_id"], body.get("summaries")
        )

    @app.get("/v1/persona/{speaker}")
    def get_persona(speaker: str, dataset_id: str):
        payload = platform.store.get_persona(dataset_id, speaker)
        if payload is None:
            raise errors.NotFound(f"no persona stored for {speaker!r}")
        return payload

    # --- assistant ----------------------------------------------------------------------

    @app.post("/v1/assistant/sessions")
    def create_session(body: dict = Body(default={})):
        session = platform.assistant.create_session(body.get("context"))
        return {"session_id": session.session_id}

    @app.post("/v1/assistant/sessions/{session_id}/messages")
    def send_message(session_id: str, body: dict = Body(...)):
        platform.assistant.get_session(session_id)  # 404 before stream starts
        provider_id = body.get("provider_id", "default")

        def event_stream():
            deltas: queue.Queue = queue.Queue()

            def sink(delta: str) -> None:
                deltas.put(("delta", delta))

            def run() -> None:
                try:
                    reply = platform.assistant.send_message(
                        session_id,
                        text=body.get("text"),
                        template_id=body.get("template_id"),
                        bindings=body.get("bindings"),
                        provider_id=provider_id,
                        sink=sink,
                    )
                    deltas.put(("done", reply))
                except Exception as exc:
                    deltas.put(("error", f"{type(exc).__name__}: {exc}"))

            threading.Thread(target=run, daemon=True).start()
            while True:
                kind, payload = deltas.get()
                if kind == "delta":
                    yield f"data: {json.dumps({'delta': payload})}\n\n"
                    continue
                if kind == "done":
                    yield f"data: {json.dumps({'done': True, 'text': payload})}\n\n"
                else:
                    yield f"data: {json.dumps({'error': payload})}\n\n"
                return

        return StreamingResponse(event_stream(), media_type="text/event-stream")

    @app.get("/v1/assistant/sessions/{session_id}/export")
    def export_session(session_id: str, format: str = "json"):
        document = platform.assistant.export_history(session_id, format)
        if format == "txt":
            return PlainTextResponse(document)
        return Response(content=document, media_type="application/json")

    # Serve the built web UI when present.
    ui_dist = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if ui_dist.is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dist), html=True), name="ui")

    return app
