"""Durable sqlite store; values are wire frames in transmission form."""
from __future__ import annotations

import sqlite3
import threading
import uuid
from pathlib import Path

from ..wire import utcnow

STATUSES = ("queued", "running", "done", "failed")
_RANK = {s: i for i, s in enumerate(STATUSES)}

_SCHEMA = """
CREATE TABLE IF NOT EXISTS datasets (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    id TEXT UNIQUE NOT NULL,
    dataset_name TEXT NOT NULL,
    owner TEXT NOT NULL,
    submitted_at TEXT NOT NULL,
    received_at TEXT NOT NULL,
    ciphertext_count INTEGER NOT NULL,
    level INTEGER NOT NULL,
    window_length INTEGER,
    param_id TEXT NOT NULL,
    body BLOB NOT NULL
);
CREATE TABLE IF NOT EXISTS jobs (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    id TEXT UNIQUE NOT NULL,
    dataset_id TEXT NOT NULL REFERENCES datasets(id),
    model_id TEXT NOT NULL,
    status TEXT NOT NULL,
    error TEXT,
    result BLOB,
    created_at TEXT NOT NULL,
    updated_at TEXT NOT NULL
);
"""


class InvalidTransition(RuntimeError):
    pass


class Store:
    """Thread-safe wrapper; every write goes through one lock."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._db = sqlite3.connect(str(self.path), check_same_thread=False)
        self._db.row_factory = sqlite3.Row
        with self._lock, self._db:
            self._db.executescript(_SCHEMA)

    def close(self):
        with self._lock:
            self._db.close()

    def add_dataset(self, body: bytes, meta: dict) -> str:
        dataset_id = uuid.uuid4().hex
        with self._lock, self._db:
            self._db.execute(
                "INSERT INTO datasets (id, dataset_name, owner, submitted_at, received_at,"
                " ciphertext_count, level, window_length, param_id, body)"
                " VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                (dataset_id, meta["dataset_name"], meta["owner"], meta["submitted_at"],
                 utcnow().isoformat(), meta["ciphertext_count"], meta["level"],
                 meta.get("window_length"), meta["param_id"], body))
        return dataset_id

    def dataset_meta(self, dataset_id: str) -> dict | None:
        with self._lock:
            row = self._db.execute(
                "SELECT id, dataset_name, owner, submitted_at, received_at, ciphertext_count,"
                " level, window_length, param_id FROM datasets WHERE id = ?", (dataset_id,)).fetchone()
        return dict(row) if row else None

    def dataset_body(self, dataset_id: str) -> bytes | None:
        with self._lock:
            row = self._db.execute("SELECT body FROM datasets WHERE id = ?", (dataset_id,)).fetchone()
        return bytes(row["body"]) if row else None

    def list_datasets(self, owner: str | None = None) -> list[dict]:
        sql = ("SELECT id, dataset_name, owner, submitted_at, received_at, ciphertext_count"
               " FROM datasets")
        args = ()
        if owner is not None:
            sql += " WHERE owner = ?"
            args = (owner,)
        with self._lock:
            rows = self._db.execute(sql + " ORDER BY seq DESC", args).fetchall()
        return [dict(r) for r in rows]

    def add_job(self, dataset_id: str, model_id: str) -> str:
        job_id = uuid.uuid4().hex
        now = utcnow().isoformat()
        with self._lock, self._db:
            self._db.execute(
                "INSERT INTO jobs (id, dataset_id, model_id, status, created_at, updated_at)"
                " VALUES (?, ?, ?, 'queued', ?, ?)", (job_id, dataset_id, model_id, now, now))
        return job_id

    def job(self, job_id: str) -> dict | None:
        with self._lock:
            row = self._db.execute("SELECT * FROM jobs WHERE id = ?", (job_id,)).fetchone()
        if row is None:
            return None
        out = dict(row)
        if out["result"] is not None:
            out["result"] = bytes(out["result"])
        return out

    def set_job(self, job_id: str, status: str, *, result: bytes | None = None,
                error: str | None = None) -> None:
        """Move a job forward; result is stored iff the job is done."""
        if status not in STATUSES:
            raise ValueError(status)
        if (status == "done") != (result is not None):
            raise InvalidTransition("a result is present exactly when a job is done")
        with self._lock, self._db:
            row = self._db.execute("SELECT status FROM jobs WHERE id = ?", (job_id,)).fetchone()
            if row is None:
                raise KeyError(job_id)
            current = row["status"]
            if _RANK[status] < _RANK[current] or current in ("done", "failed"):
                raise InvalidTransition(f"job {job_id}: {current} -> {status}")
            self._db.execute("UPDATE jobs SET status = ?, result = ?, error = ?, updated_at = ? WHERE id = ?",
                             (status, result, error, utcnow().isoformat(), job_id))

    def unfinished_jobs(self) -> list[str]:
        with self._lock:
            rows = self._db.execute(
                "SELECT id FROM jobs WHERE status IN ('queued', 'running') ORDER BY seq").fetchall()
        return [r["id"] for r in rows]

    def iter_blobs(self):
        """Every stored frame, for audits."""
        with self._lock:
            rows = self._db.execute("SELECT body FROM datasets").fetchall()
            results = self._db.execute("SELECT result FROM jobs WHERE result IS NOT NULL").fetchall()
        for r in rows:
            yield bytes(r["body"])
        for r in results:
            yield bytes(r["result"])
