"""Inference worker: runs encrypted forward passes with evaluation keys only."""
from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..ckks.backend import CKKSBackend
from ..errors import EdlaasError
from ..nn.graph import forward
from ..wire import EncryptedRecord, deserialize_record, serialize_ciphertext, serialize_record, utcnow
from .registry import ModelRegistry
from .store import Store

log = logging.getLogger("edlaas.service")


class QueueFull(RuntimeError):
    pass


def run_inference(record: EncryptedRecord, graph, model_id: str, job_id: str, dataset_id: str) -> bytes:
    """Forward every window, switch each output to level 0, return the result frame."""
    keys = record.load_keys()
    backend = CKKSBackend(record.params, keys, np.random.default_rng())
    cts = record.load_ciphertexts()
    width = int(record.extra.get("window_length", graph.window))
    if width != graph.window:
        raise EdlaasError(f"record windows have {width} timesteps, model expects {graph.window}")
    outputs = []
    for start in range(0, len(cts), width):
        out = forward(graph, cts[start:start + width], backend)
        outputs.append(serialize_ciphertext(backend.mod_switch_to(out, 0)))
    result = EncryptedRecord(
        dataset_name=record.dataset_name,
        owner=record.owner,
        submitted_at=utcnow(),
        params=record.params,
        ciphertexts=outputs,
        extra={
            "job_id": job_id,
            "dataset_id": dataset_id,
            "model_id": model_id,
            "n_features": graph.n_features,
            "expected_sentinel": graph.expected_sentinel(),
            "n_windows": len(outputs),
        },
    )
    return serialize_record(result, "transmission")


class InferenceWorker:
    """Bounded pool; jobs and their state live in the store."""

    def __init__(self, store: Store, registry: ModelRegistry, workers: int = 1, max_queue: int = 64):
        self.store = store
        self.registry = registry
        self.max_queue = max_queue
        self._pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="edlaas-infer")
        self._pending = 0
        self._lock = threading.Lock()
        self.before_run = None  # test hook, called with job_id once the job is running

    def submit(self, job_id: str) -> None:
        with self._lock:
            if self._pending >= self.max_queue:
                raise QueueFull("inference queue is full")
            self._pending += 1
        self._pool.submit(self._run, job_id)

    def resume(self) -> int:
        """Re-enqueue jobs left unfinished by a previous process."""
        ids = self.store.unfinished_jobs()
        for job_id in ids:
            self.submit(job_id)
        return len(ids)

    def shutdown(self, wait: bool = True) -> None:
        self._pool.shutdown(wait=wait)

    def _run(self, job_id: str) -> None:
        try:
            job = self.store.job(job_id)
            if job is None or job["status"] in ("done", "failed"):
                return
            self.store.set_job(job_id, "running")
            if self.before_run is not None:
                self.before_run(job_id)
            graph = self.registry.get(job["model_id"])
            if graph is None:
                raise EdlaasError(f"model {job['model_id']!r} is no longer registered")
            record = deserialize_record(self.store.dataset_body(job["dataset_id"]), "transmission")
            result = run_inference(record, graph, job["model_id"], job_id, job["dataset_id"])
            self.store.set_job(job_id, "done", result=result)
            log.info("job done", extra={"job_id": job_id})
        except Exception as exc:  # recorded on the job, never lost
            log.warning("job failed", extra={"job_id": job_id, "error": str(exc)})
            try:
                self.store.set_job(job_id, "failed", error=f"{type(exc).__name__}: {exc}")
            except Exception:
                log.exception("could not record failure of job %s", job_id)
        finally:
            with self._lock:
                self._pending -= 1
