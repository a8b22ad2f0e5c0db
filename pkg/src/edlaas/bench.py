"""Operation timings (local and remote) and plaintext vs ciphertext sizes.

Every number lands in the report rounded to six significant digits, so the
JSON and the text table print the same values.
"""
from __future__ import annotations

import gc
import io
import json
import socket
import tempfile
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .ckks import scheme
from .ckks.encoding import encode
from .ckks.params import HEParams
from .ckks.scheme import keygen
from .nn.graph import SENTINEL_VALUE, forward, reference_graph
from .ring.kernels import available
from .ring.ntt import RnsNttTable
from .wire import (
    EncryptedRecord,
    serialize_ciphertext,
    serialize_public_key,
    serialize_record,
    serialize_relin_key,
    utcnow,
)

OPERATIONS = ("encrypt", "decrypt", "inference", "ct+ct", "ct+pt", "ct*ct", "ct*pt")
REMOTE_OPERATIONS = ("encrypt", "decrypt", "inference")
BENCH_FEATURES = 5
BENCH_TOKEN = "bench-token"
BENCH_MODEL = "bench-reference"


def _sig(x: float) -> float:
    return float(f"{x:.6g}")


@dataclass
class OpRow:
    operation: str
    mode: str
    mean: float | None
    std: float | None
    trials: int


@dataclass
class SizeRow:
    vector_length: int
    poly_modulus_degree: int
    plaintext_bytes: int
    ciphertext_bytes: int
    top_level_bytes: int
    level0_bytes: int


@dataclass
class BenchReport:
    rows: list[OpRow] = field(default_factory=list)
    sizes: list[SizeRow] = field(default_factory=list)
    kernels: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def row(self, operation: str, mode: str = "local") -> OpRow | None:
        for r in self.rows:
            if r.operation == operation and r.mode == mode:
                return r
        return None

    def mean(self, operation: str, mode: str = "local") -> float | None:
        r = self.row(operation, mode)
        return r.mean if r else None

    def to_dict(self) -> dict:
        return {"rows": [asdict(r) for r in self.rows], "sizes": [asdict(s) for s in self.sizes],
                "kernels": self.kernels, "info": self.info}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "BenchReport":
        return cls([OpRow(**r) for r in d.get("rows", [])], [SizeRow(**s) for s in d.get("sizes", [])],
                   dict(d.get("kernels", {})), dict(d.get("info", {})))

    def to_text(self) -> str:
        out = []
        if self.rows:
            ops = [op for op in OPERATIONS if self.row(op) or self.row(op, "remote")]
            out.append(f"{'operation':<12}{'local mean s':>16}{'local std':>14}{'remote mean s':>16}{'remote std':>14}{'trials':>8}")
            for op in ops:
                loc, rem = self.row(op), self.row(op, "remote")
                cells = [_cell(loc.mean if loc else None, 16), _cell(loc.std if loc else None, 14),
                         _cell(rem.mean if rem else None, 16), _cell(rem.std if rem else None, 14)]
                trials = (loc or rem).trials
                out.append(f"{op:<12}" + "".join(cells) + f"{trials:>8}")
        if self.sizes:
            out.append("")
            out.append(f"{'length':>8}{'N':>8}{'plaintext B':>14}{'ciphertext B':>15}{'top level B':>14}{'level 0 B':>12}")
            for s in self.sizes:
                out.append(f"{s.vector_length:>8}{s.poly_modulus_degree:>8}{s.plaintext_bytes:>14}"
                           f"{s.ciphertext_bytes:>15}{s.top_level_bytes:>14}{s.level0_bytes:>12}")
        if self.kernels:
            out.append("")
            out.append(f"{'kernel':<10}{'ntt mean s':>14}{'ntt std':>14}")
            for name, (mean, std) in sorted(self.kernels.items()):
                out.append(f"{name:<10}{_cell(mean, 14)}{_cell(std, 14)}")
        return "\n".join(out) + "\n"

    def write(self, json_path, text_path=None) -> None:
        Path(json_path).write_text(self.to_json())
        if text_path is not None:
            Path(text_path).write_text(self.to_text())


def _cell(x, width):
    return f"{'-':>{width}}" if x is None else f"{x:>{width}.6g}"


def time_trials(fn, trials: int, warmup: int = 2) -> tuple[float, float, list[float]]:
    # cyclic gc off while timing, as timeit does
    for _ in range(warmup):
        fn()
    times = []
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        for _ in range(trials):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
    finally:
        if was_enabled:
            gc.enable()
    return _sig(float(np.mean(times))), _sig(float(np.std(times))), times


class LoopbackServer:
    """Service on 127.0.0.1 in a background thread, with a temporary store."""

    def __init__(self, registry=None, token: str = BENCH_TOKEN, store_path=None):
        import uvicorn

        from .service import ModelRegistry, Store, create_app

        self._tmp = None
        if store_path is None:
            self._tmp = tempfile.TemporaryDirectory(prefix="edlaas-bench-")
            store_path = Path(self._tmp.name) / "store.sqlite"
        if registry is None:
            registry = ModelRegistry()
            registry.add(BENCH_MODEL, reference_graph(BENCH_FEATURES))
        self.store = Store(store_path)
        self.token = token
        self.app = create_app(self.store, registry, token)
        sock = socket.socket()
        sock.bind(("127.0.0.1", 0))
        self.port = sock.getsockname()[1]
        sock.close()
        config = uvicorn.Config(self.app, host="127.0.0.1", port=self.port, log_level="warning")
        self.server = uvicorn.Server(config)
        self._thread = threading.Thread(target=self.server.run, daemon=True)

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self.port}"

    def __enter__(self):
        self._thread.start()
        deadline = time.monotonic() + 30
        while not self.server.started:
            if time.monotonic() > deadline or not self._thread.is_alive():
                raise RuntimeError("loopback server failed to start")
            time.sleep(0.01)
        return self

    def __exit__(self, *exc):
        self.server.should_exit = True
        self._thread.join(timeout=10)
        self.store.close()
        if self._tmp is not None:
            self._tmp.cleanup()


def _inputs(params: HEParams, rng):
    x = rng.uniform(0, 1, params.slot_count)
    y = rng.uniform(0, 1, params.slot_count)
    return x, y


def _local_rows(params, keys, rng, trials, ops) -> list[OpRow]:
    x, y = _inputs(params, rng)
    a = scheme.encrypt_values(x, keys, params, rng)
    b = scheme.encrypt_values(y, keys, params, rng)
    pt_add = encode(y, params, scale=a.scale, level=a.level)
    pt_mul = encode(y, params, level=a.level)
    graph = reference_graph(BENCH_FEATURES)
    from .ckks.backend import CKKSBackend
    backend = CKKSBackend(params, keys, rng)
    step = np.zeros(params.slot_count)
    step[:BENCH_FEATURES] = rng.uniform(0, 1, BENCH_FEATURES)
    step[-1] = SENTINEL_VALUE
    window = [backend.encrypt(step) for _ in range(graph.window)]

    funcs = {
        "encrypt": lambda: scheme.encrypt(encode(x, params), keys.public_key, params, rng),
        "decrypt": lambda: _decrypt_decode(a, keys, params),
        "inference": lambda: forward(graph, window, backend),
        "ct+ct": lambda: scheme.add_ct(a, b, params),
        "ct+pt": lambda: scheme.add_pt(a, pt_add, params),
        "ct*ct": lambda: scheme.mul_ct(a, b, keys.relin_key, params),
        "ct*pt": lambda: scheme.mul_pt(a, pt_mul, params),
    }
    rows = []
    for op in ops:
        mean, std, _ = time_trials(funcs[op], trials)
        rows.append(OpRow(op, "local", mean, std, trials))
    return rows


def _decrypt_decode(ct, keys, params):
    from .ckks.encoding import decode
    return decode(scheme.decrypt(ct, keys.secret_key, params), params)


def _record(params, keys, cts, window_length=None, with_keys=True) -> EncryptedRecord:
    extra = {"window_length": window_length} if window_length else {}
    return EncryptedRecord(
        "bench", "bench", utcnow(), params, [serialize_ciphertext(c) for c in cts],
        public_key=serialize_public_key(keys.public_key) if with_keys else None,
        relin_key=serialize_relin_key(keys.relin_key) if with_keys else None,
        extra=extra)


def _remote_rows(params, keys, rng, trials, ops, server_url, token) -> list[OpRow]:
    from .client.api import ServerClient
    from .wire import deserialize_ciphertext

    client = ServerClient(server_url, token, timeout=120.0)
    try:
        graph = reference_graph(BENCH_FEATURES)
        step = np.zeros(params.slot_count)
        step[:BENCH_FEATURES] = rng.uniform(0, 1, BENCH_FEATURES)
        step[-1] = SENTINEL_VALUE
        pk_bytes = serialize_public_key(keys.public_key)
        rk_bytes = serialize_relin_key(keys.relin_key)

        def remote_encrypt():
            ct = scheme.encrypt_values(step, keys, params, rng)
            rec = EncryptedRecord("bench", "bench", utcnow(), params, [serialize_ciphertext(ct)],
                                  public_key=pk_bytes, relin_key=rk_bytes, extra={"window_length": 1})
            return client.submit(rec)

        window = [scheme.encrypt_values(step, keys, params, rng) for _ in range(graph.window)]
        dataset_id = client.submit(_record(params, keys, window, graph.window))

        def remote_inference():
            job = client.infer(dataset_id, BENCH_MODEL)
            info, result = client.wait(job, poll=0.002)
            if info["status"] != "done":
                raise RuntimeError(f"bench job failed: {info['error']}")
            return job

        job_id = remote_inference()

        def remote_decrypt():
            _, result = client.fetch(job_id)
            ct = deserialize_ciphertext(result.ciphertexts[0], params)
            return _decrypt_decode(ct, keys, params)

        funcs = {"encrypt": remote_encrypt, "decrypt": remote_decrypt, "inference": remote_inference}
        rows = []
        for op in ops:
            if op not in REMOTE_OPERATIONS:
                continue
            mean, std, _ = time_trials(funcs[op], trials, warmup=1)
            rows.append(OpRow(op, "remote", mean, std, trials))
        return rows
    finally:
        client.close()


def _reachable(url: str, token: str | None) -> bool:
    import httpx
    try:
        httpx.get(f"{url}/models", headers={"Authorization": f"Bearer {token}"}, timeout=5.0)
        return True
    except httpx.HTTPError:
        return False


def bench_ops(params: HEParams, server_url: str | None = None, *, token: str | None = None,
              trials: int = 30, ops=OPERATIONS, remote: bool = True, seed: int = 0) -> BenchReport:
    """Table of mean/std wall-clock seconds per operation.

    With ``remote`` and no ``server_url`` a loopback server is started. An
    unreachable server leaves the remote cells empty.
    """
    if trials < 30:
        raise ValueError("at least 30 trials per row")
    rng = np.random.default_rng(seed)
    keys = keygen(params, rng)
    report = BenchReport(info={"poly_modulus_degree": params.poly_modulus_degree,
                               "levels": params.max_level, "kernel": _kernel_name(), "seed": seed})
    report.rows += _local_rows(params, keys, rng, trials, ops)
    remote_ops = [op for op in ops if op in REMOTE_OPERATIONS]
    if remote and remote_ops:
        if server_url is None:
            with LoopbackServer() as srv:
                report.rows += _remote_rows(params, keys, rng, trials, remote_ops, srv.url, srv.token)
            report.info["remote"] = "loopback"
        elif _reachable(server_url, token):
            report.rows += _remote_rows(params, keys, rng, trials, remote_ops, server_url, token)
            report.info["remote"] = server_url
        else:
            report.rows += [OpRow(op, "remote", None, None, 0) for op in remote_ops]
            report.info["remote"] = "unreachable"
    return report


def _kernel_name() -> str:
    from .ring import kernels
    return kernels.NAME


def plaintext_bytes(values) -> int:
    buf = io.BytesIO()
    np.save(buf, np.asarray(values, dtype=np.float64))
    return buf.getbuffer().nbytes


def bench_sizes(params_list, vector_length: int = 4096, seed: int = 0) -> list[SizeRow]:
    """Serialized plaintext vector vs fresh encrypted record, per parameter set."""
    rows = []
    for params in params_list:
        rng = np.random.default_rng(seed)
        keys = keygen(params, rng)
        length = min(vector_length, params.slot_count)
        values = rng.uniform(0, 1, length)
        ct = scheme.encrypt_values(values, keys, params, rng)
        record = _record(params, keys, [ct], with_keys=False)
        low = scheme.mod_switch_to(ct, 0, params)
        rows.append(SizeRow(length, params.poly_modulus_degree, plaintext_bytes(values),
                            len(serialize_record(record)), len(serialize_ciphertext(ct)),
                            len(serialize_ciphertext(low))))
    return rows


def bench_kernels(n: int = 8192, primes: int = 6, trials: int = 30, seed: int = 0) -> dict:
    """Forward NTT of a ``primes`` x ``n`` RNS block on each available kernel."""
    from .ckks.params import default_chain

    table = RnsNttTable(n, default_chain(n, primes - 1))
    rng = np.random.default_rng(seed)
    a = np.stack([rng.integers(0, q, n, dtype=np.uint64) for q in table.moduli])
    out = {}
    for name, impl in available().items():
        mean, std, _ = time_trials(lambda: table.forward(a, impl=impl), trials)
        out[name] = [mean, std]
    return out


def run_all(params: HEParams | None = None, *, sizes_params=None, server_url=None, token=None,
            trials: int = 30, remote: bool = True, kernels: bool = True) -> BenchReport:
    params = params or HEParams.desk()
    report = bench_ops(params, server_url, token=token, trials=trials, remote=remote)
    if sizes_params is None:
        sizes_params = [HEParams.desk(8192), HEParams.desk(16384)]
    report.sizes = bench_sizes(sizes_params)
    if kernels:
        report.kernels = bench_kernels(params.poly_modulus_degree, len(params.modulus_chain), trials)
    return report
