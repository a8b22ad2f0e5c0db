"""HTTP front end of the data processor.

Endpoints (bearer token required on all of them):

    POST /datasets                 body: transmission record frame -> 201 {"dataset_id"}
    GET  /datasets?owner=          -> [{id, dataset_name, owner, submitted_at, received_at, ciphertext_count}]
    POST /inferences               {"dataset_id", "model_id"} -> 202 {"job_id", "status"}
    GET  /inferences/{job_id}      -> {"job_id", "status", "error", "result": base64 frame | null}
    GET  /models                   -> {model_id: {"depth_budget", ...}}
"""
from __future__ import annotations

import base64
import json
import logging
import time
from contextlib import asynccontextmanager

from fastapi import Depends, FastAPI, Header, HTTPException, Query, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from ..errors import SecretKeyPolicyError, WireError
from ..wire import deserialize_ciphertext, deserialize_record, unpack_frame
from .jobs import InferenceWorker, QueueFull
from .registry import ModelRegistry
from .store import Store

log = logging.getLogger("edlaas.service")

DEFAULT_MAX_BODY = 256 * 1024 * 1024


class InferenceRequest(BaseModel):
    dataset_id: str
    model_id: str


def create_app(store: Store, registry: ModelRegistry, token: str, *,
               max_body: int = DEFAULT_MAX_BODY, workers: int = 1, max_queue: int = 64,
               resume: bool = True) -> FastAPI:
    worker = InferenceWorker(store, registry, workers=workers, max_queue=max_queue)

    @asynccontextmanager
    async def lifespan(app):
        if resume:
            n = worker.resume()
            if n:
                log.info("resumed %d unfinished jobs", n)
        yield
        worker.shutdown(wait=False)

    app = FastAPI(title="edlaas data processor", lifespan=lifespan)
    app.state.store = store
    app.state.registry = registry
    app.state.worker = worker

    @app.middleware("http")
    async def request_log(request: Request, call_next):
        start = time.perf_counter()
        response = await call_next(request)
        log.info(json.dumps({
            "method": request.method, "path": request.url.path,
            "status": response.status_code, "ms": round(1000 * (time.perf_counter() - start), 2),
        }))
        return response

    def auth(authorization: str | None = Header(default=None)):
        if authorization != f"Bearer {token}":
            raise HTTPException(401, "missing or invalid bearer token",
                                headers={"WWW-Authenticate": "Bearer"})

    @app.post("/datasets", status_code=201, dependencies=[Depends(auth)])
    async def post_dataset(request: Request):
        declared = request.headers.get("content-length")
        if declared is not None and int(declared) > max_body:
            raise HTTPException(413, f"body exceeds {max_body} bytes")
        body = await request.body()
        if len(body) > max_body:
            raise HTTPException(413, f"body exceeds {max_body} bytes")
        try:
            record = deserialize_record(body, "transmission")
            if record.public_key is None or record.relin_key is None:
                raise WireError("record lacks evaluation keys")
            record.load_keys()
            first = deserialize_ciphertext(record.ciphertexts[0], record.params)
        except SecretKeyPolicyError as exc:
            raise HTTPException(400, f"policy violation: {exc}") from exc
        except (WireError, ValueError) as exc:
            raise HTTPException(400, f"malformed record: {exc}") from exc
        meta = record.metadata()
        meta.update(level=first.level, param_id=record.params.param_id,
                    window_length=record.extra.get("window_length"))
        return {"dataset_id": store.add_dataset(body, meta)}

    @app.get("/datasets", dependencies=[Depends(auth)])
    def list_datasets(owner: str | None = Query(default=None)):
        return store.list_datasets(owner)

    @app.post("/inferences", status_code=202, dependencies=[Depends(auth)])
    def post_inference(req: InferenceRequest):
        meta = store.dataset_meta(req.dataset_id)
        if meta is None:
            raise HTTPException(404, f"unknown dataset {req.dataset_id!r}")
        graph = registry.get(req.model_id)
        if graph is None:
            raise HTTPException(404, f"unknown model {req.model_id!r}")
        if graph.depth_budget > meta["level"]:
            raise HTTPException(409, f"model {req.model_id!r} needs {graph.depth_budget} levels, "
                                     f"dataset offers {meta['level']}")
        if meta["window_length"] is not None and meta["window_length"] != graph.window:
            raise HTTPException(409, f"dataset windows have {meta['window_length']} timesteps, "
                                     f"model expects {graph.window}")
        job_id = store.add_job(req.dataset_id, req.model_id)
        try:
            worker.submit(job_id)
        except QueueFull as exc:
            store.set_job(job_id, "failed", error=str(exc))
            raise HTTPException(503, str(exc)) from exc
        return {"job_id": job_id, "status": "queued"}

    @app.get("/inferences/{job_id}", dependencies=[Depends(auth)])
    def get_inference(job_id: str):
        job = store.job(job_id)
        if job is None:
            raise HTTPException(404, f"unknown job {job_id!r}")
        result = job["result"]
        return {
            "job_id": job["id"],
            "dataset_id": job["dataset_id"],
            "model_id": job["model_id"],
            "status": job["status"],
            "error": job["error"],
            "result": base64.b64encode(result).decode() if result is not None else None,
        }

    @app.get("/models", dependencies=[Depends(auth)])
    def list_models():
        return registry.table()

    @app.exception_handler(WireError)
    async def wire_error(request, exc):
        return JSONResponse({"detail": str(exc)}, status_code=400)

    return app


def audit_store(store: Store) -> list[int]:
    """Indices of stored blobs that carry secret-key material (should be empty)."""
    from ..wire import contains_secret

    return [i for i, blob in enumerate(store.iter_blobs()) if contains_secret(blob)]


__all__ = ["create_app", "audit_store", "unpack_frame"]
