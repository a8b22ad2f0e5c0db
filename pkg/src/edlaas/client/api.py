"""Synchronous HTTP client for the data-processor service."""
from __future__ import annotations

import base64
import time

import httpx

from ..errors import ApiError
from ..wire import EncryptedRecord, deserialize_record, serialize_record


class ServerClient:
    """Thin wrapper over the service endpoints.

    ``http`` may be any httpx-compatible client (tests pass a Starlette
    TestClient); otherwise one is built for ``base_url``.
    """

    def __init__(self, base_url: str = "http://127.0.0.1:8000", token: str | None = None, *,
                 timeout: float = 60.0, retries: int = 2, http=None):
        self.token = token
        self.retries = retries
        self.http = http if http is not None else httpx.Client(base_url=base_url, timeout=timeout)

    def close(self):
        self.http.close()

    def _headers(self, extra=None) -> dict:
        h = dict(extra or {})
        if self.token:
            h["Authorization"] = f"Bearer {self.token}"
        return h

    def _request(self, method: str, url: str, **kw):
        for attempt in range(self.retries + 1):
            try:
                resp = self.http.request(method, url, **kw)
                break
            except httpx.TransportError:
                if attempt == self.retries:
                    raise
                time.sleep(0.2 * (attempt + 1))
        if resp.status_code >= 400:
            raise ApiError(resp.status_code, resp.text)
        return resp

    def submit(self, record: EncryptedRecord) -> str:
        """Send the transmission form of ``record``; returns the dataset id."""
        body = serialize_record(record, "transmission")
        resp = self._request("POST", "/datasets", content=body,
                             headers=self._headers({"Content-Type": "application/octet-stream"}))
        return resp.json()["dataset_id"]

    def submit_bytes(self, body: bytes) -> str:
        resp = self._request("POST", "/datasets", content=body,
                             headers=self._headers({"Content-Type": "application/octet-stream"}))
        return resp.json()["dataset_id"]

    def list_datasets(self, owner: str | None = None) -> list[dict]:
        params = {"owner": owner} if owner else None
        return self._request("GET", "/datasets", params=params, headers=self._headers()).json()

    def infer(self, dataset_id: str, model_id: str) -> str:
        resp = self._request("POST", "/inferences", json={"dataset_id": dataset_id, "model_id": model_id},
                             headers=self._headers())
        return resp.json()["job_id"]

    def status(self, job_id: str) -> dict:
        return self._request("GET", f"/inferences/{job_id}", headers=self._headers()).json()

    def fetch(self, job_id: str) -> tuple[dict, EncryptedRecord | None]:
        """Job status plus the decoded result record once the job is done."""
        info = self.status(job_id)
        result = None
        if info.get("result"):
            result = deserialize_record(base64.b64decode(info["result"]), "transmission")
        return info, result

    def wait(self, job_id: str, timeout: float = 600.0, poll: float = 0.05):
        deadline = time.monotonic() + timeout
        while True:
            info, result = self.fetch(job_id)
            if info["status"] in ("done", "failed"):
                return info, result
            if time.monotonic() > deadline:
                raise TimeoutError(f"job {job_id} still {info['status']} after {timeout}s")
            time.sleep(poll)
