"""Session-oriented HTTP interface over the steering engine.

All payloads ride a versioned JSON envelope: ``{"version": 1, "data": ...}``
on success, ``{"version": 1, "error": {"code", "message", ...}}`` on failure.
Datasets are registered once at startup from a manifest; sessions are held in
memory with per-session mutual exclusion.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from querysteer.dataset import AttributeSpec, Dataset, DatasetError, load_dataset
from querysteer.engine import (
    EngineError,
    Feedback,
    FeedbackItem,
    NoModelError,
    STATUS_COMPLETED,
    UnknownTupleError,
    current_prediction,
    evaluate,
    next_samples,
    start_session,
    submit_feedback,
)
from querysteer.phases import PhaseConfig, PhaseError
from querysteer.simuser import TargetQuery, generate_target, synth_dataset

WIRE_VERSION = 1

SESSION_READY = "ready"
SESSION_AWAITING = "awaiting-feedback"
SESSION_COMPLETED = "completed"


def _ok(data, status_code=200) -> JSONResponse:
    return JSONResponse({"version": WIRE_VERSION, "data": data}, status_code=status_code)


def _err(status_code: int, code: str, message: str, fld: str | None = None) -> JSONResponse:
    body = {"code": code, "message": message}
    if fld:
        body["field"] = fld
    return JSONResponse({"version": WIRE_VERSION, "error": body}, status_code=status_code)


@dataclass
class RegisteredDataset:
    dataset: Dataset
    truth: TargetQuery | None = None


@dataclass
class SessionBox:
    session: object
    dataset_id: str
    truth: TargetQuery | None
    lock: threading.Lock = field(default_factory=threading.Lock)


def load_manifest(path) -> dict:
    """Dataset registry from a manifest document.

    Entries either point at a delimited file ("file" + "attributes") or ask
    for a synthetic space ("synthetic": {kind, n, d, seed}); an optional
    "target" block attaches a ground-truth oracle for scripted clients.
    """
    doc = json.loads(Path(path).read_text())
    registry = {}
    for entry in doc.get("datasets", []):
        ds_id = entry["id"]
        if "synthetic" in entry:
            s = entry["synthetic"]
            ds = synth_dataset(s["kind"], int(s["n"]), int(s["d"]), int(s.get("seed", 0)))
        elif "file" in entry:
            schema = None
            if "attributes" in entry:
                schema = [
                    AttributeSpec(a["name"], float(a["raw_min"]), float(a["raw_max"]))
                    for a in entry["attributes"]
                ]
            ds = load_dataset(entry["file"], schema=schema)
        else:
            raise DatasetError(f"dataset {ds_id!r}: need 'file' or 'synthetic'")
        truth = None
        if "target" in entry:
            t = entry["target"]
            truth = generate_target(
                ds.d,
                int(t.get("count", 1)),
                t.get("size_class", "large"),
                int(t.get("seed", 0)),
                ds=ds,
                placement=t.get("placement", "any"),
            )
        registry[ds_id] = RegisteredDataset(dataset=ds, truth=truth)
    if not registry:
        raise DatasetError(f"manifest {path} registers no datasets")
    return registry


def _session_status(session) -> str:
    if session.status == STATUS_COMPLETED:
        return SESSION_COMPLETED
    return SESSION_AWAITING if session.pending else SESSION_READY


def _links(sid: str) -> dict:
    base = f"/v1/sessions/{sid}"
    return {
        "self": base,
        "batch": f"{base}/batch",
        "feedback": f"{base}/feedback",
        "prediction": f"{base}/prediction",
        "metrics": f"{base}/metrics",
        "terminate": f"{base}/terminate",
    }


def _session_resource(sid: str, box: SessionBox) -> dict:
    return {
        "session_id": sid,
        "dataset_id": box.dataset_id,
        "status": _session_status(box.session),
        "iteration": box.session.iteration,
        "attributes": [
            {"name": a.name, "raw_min": a.raw_min, "raw_max": a.raw_max}
            for a in box.session.ds.schema
        ],
        "has_truth": box.truth is not None,
        "links": _links(sid),
    }


def _config_from_overrides(defaults: dict, overrides: dict) -> PhaseConfig:
    merged = dict(defaults)
    merged.update(overrides or {})
    for key in ("betas", "cluster_ks"):
        if merged.get(key) is not None:
            merged[key] = tuple(merged[key])
    try:
        config = PhaseConfig(**merged)
    except TypeError as exc:
        bad = str(exc).split("'")[-2] if "'" in str(exc) else str(exc)
        raise PhaseError(f"unknown config field {bad!r}") from None
    config.validate()
    return config


def _prediction_doc(session) -> dict:
    try:
        region_set, query = current_prediction(session)
    except NoModelError:
        return {"model": None, "grid": session.grid_state.snapshot()}
    schema = session.ds.schema
    regions = []
    for r in region_set.relevant:
        regions.append(
            {
                "normalized": r.to_dict(),
                "raw": {
                    "lows": [float(a.denormalize(lo)) for a, lo in zip(schema, r.lows)],
                    "highs": [float(a.denormalize(hi)) for a, hi in zip(schema, r.highs)],
                    "lo_strict": r.lo_strict.tolist(),
                    "hi_strict": r.hi_strict.tolist(),
                },
            }
        )
    return {
        "model": {
            "attributes": [a.name for a in schema],
            "relevant_regions": regions,
            "query_text": query.text,
            "query": query.to_dict(),
        },
        "grid": session.grid_state.snapshot(),
    }


def create_app(registry: dict, defaults: dict | None = None) -> FastAPI:
    app = FastAPI(title="querysteer", version="0.1.0")
    # the labeling UI is served as static files from a different origin
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    defaults = defaults or {}
    sessions: dict[str, SessionBox] = {}
    app.state.sessions = sessions

    def _box(sid: str) -> SessionBox | None:
        return sessions.get(sid)

    async def _json_body(request: Request) -> dict:
        try:
            body = await request.json()
        except Exception:
            raise ValueError("request body must be a JSON object") from None
        if not isinstance(body, dict):
            raise ValueError("request body must be a JSON object")
        return body

    @app.post("/v1/sessions")
    async def create_session(request: Request):
        try:
            body = await _json_body(request)
        except ValueError as exc:
            return _err(400, "bad-request", str(exc))
        ds_id = body.get("dataset_id")
        if ds_id not in registry:
            return _err(404, "unknown-dataset", f"dataset {ds_id!r} is not registered",
                        fld="dataset_id")
        try:
            config = _config_from_overrides(defaults, body.get("config") or {})
        except PhaseError as exc:
            return _err(400, "invalid-config", str(exc), fld="config")
        entry = registry[ds_id]
        seed = int(body.get("seed", 0))
        session = start_session(entry.dataset, config, seed=seed)
        sid = uuid.uuid4().hex
        truth = entry.truth if body.get("attach_truth", True) else None
        sessions[sid] = SessionBox(session=session, dataset_id=ds_id, truth=truth)
        return _ok(_session_resource(sid, sessions[sid]), status_code=201)

    @app.get("/v1/sessions/{sid}")
    async def get_session(sid: str):
        box = _box(sid)
        if box is None:
            return _err(404, "unknown-session", f"no session {sid!r}")
        with box.lock:
            doc = _session_resource(sid, box)
            doc["state"] = box.session.snapshot()
        return _ok(doc)

    @app.get("/v1/sessions/{sid}/batch")
    async def get_batch(sid: str):
        box = _box(sid)
        if box is None:
            return _err(404, "unknown-session", f"no session {sid!r}")
        if not box.lock.acquire(blocking=False):
            return _err(409, "busy", "another call holds this session")
        try:
            status = _session_status(box.session)
            if status == SESSION_AWAITING:
                return _err(409, "awaiting-feedback",
                            "current batch must be labeled before a new one")
            if status == SESSION_COMPLETED:
                return _ok({"session_id": sid, "status": SESSION_COMPLETED, "samples": []})
            batch = next_samples(box.session)
            if not batch:
                return _ok({"session_id": sid, "status": SESSION_COMPLETED, "samples": []})
            names = box.session.ds.attribute_names
            samples = [
                {
                    "tuple_id": int(tid),
                    "values": {n: float(v) for n, v in zip(names, raw)},
                    "phase": phase,
                }
                for tid, raw, phase in batch
            ]
            return _ok(
                {
                    "session_id": sid,
                    "status": _session_status(box.session),
                    "iteration": box.session.iteration,
                    "samples": samples,
                }
            )
        finally:
            box.lock.release()

    @app.post("/v1/sessions/{sid}/feedback")
    async def post_feedback(sid: str, request: Request):
        box = _box(sid)
        if box is None:
            return _err(404, "unknown-session", f"no session {sid!r}")
        try:
            body = await _json_body(request)
        except ValueError as exc:
            return _err(400, "bad-request", str(exc))
        if not box.lock.acquire(blocking=False):
            return _err(409, "busy", "another call holds this session")
        try:
            if _session_status(box.session) != SESSION_AWAITING:
                return _err(409, "no-pending-batch", "no batch awaits feedback")
            names = {n: j for j, n in enumerate(box.session.ds.attribute_names)}
            items = []
            for row in body.get("labels", []):
                dims = row.get("dimensions")
                if dims is not None:
                    try:
                        dims = tuple(
                            names[d] if isinstance(d, str) else int(d) for d in dims
                        )
                    except KeyError as exc:
                        return _err(400, "unknown-attribute",
                                    f"unknown attribute {exc.args[0]!r}", fld="dimensions")
                items.append(
                    FeedbackItem(int(row["tuple_id"]), row.get("label"), dims)
                )
            try:
                summary = submit_feedback(box.session, Feedback(items))
            except UnknownTupleError as exc:
                return _err(400, "unknown-tuple", str(exc), fld="labels")
            except EngineError as exc:
                return _err(400, "invalid-feedback", str(exc), fld="labels")
            summary["session_status"] = _session_status(box.session)
            if box.truth is not None:
                summary["metrics"] = evaluate(box.session, box.truth).to_dict()
            dims_echo = {
                str(int(row["tuple_id"])): row.get("dimensions")
                for row in body.get("labels", [])
                if row.get("label") == "similar"
            }
            if dims_echo:
                summary["similar_dimensions"] = dims_echo
            return _ok(summary)
        finally:
            box.lock.release()

    @app.get("/v1/sessions/{sid}/prediction")
    async def get_prediction(sid: str):
        box = _box(sid)
        if box is None:
            return _err(404, "unknown-session", f"no session {sid!r}")
        with box.lock:
            return _ok(_prediction_doc(box.session))

    @app.get("/v1/sessions/{sid}/metrics")
    async def get_metrics(sid: str):
        box = _box(sid)
        if box is None:
            return _err(404, "unknown-session", f"no session {sid!r}")
        if box.truth is None:
            return _err(409, "no-truth", "session has no ground-truth oracle attached")
        with box.lock:
            return _ok(evaluate(box.session, box.truth).to_dict())

    @app.post("/v1/sessions/{sid}/terminate")
    async def terminate(sid: str):
        box = _box(sid)
        if box is None:
            return _err(404, "unknown-session", f"no session {sid!r}")
        with box.lock:
            box.session.status = STATUS_COMPLETED
            box.session.pending.clear()
            return _ok(_session_resource(sid, box))

    return app
