import base64
import threading
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from edlaas.ckks import encrypt_values
from edlaas.client import KeyStore, ServerClient, decrypt_result, encrypt_dataset, synth_spec, wrangle, write_synth
from edlaas.errors import ApiError, ModelFileError
from edlaas.nn import forward_plain, init_graph, reference_graph, save_model
from edlaas.service import ModelRegistry, Store, audit_store, create_app
from edlaas.service.store import InvalidTransition
from edlaas.wire import (
    EncryptedRecord,
    deserialize_record,
    pack_frame,
    serialize_ciphertext,
    serialize_public_key,
    serialize_record,
    serialize_relin_key,
    serialize_secret_key,
    unpack_frame,
    utcnow,
)

TOKEN = "s3cret-token"
AUTH = {"Authorization": f"Bearer {TOKEN}"}


@pytest.fixture
def registry():
    reg = ModelRegistry()
    reg.add("ref", reference_graph(5, seed=1))
    return reg


@pytest.fixture
def store(tmp_path):
    s = Store(tmp_path / "store.sqlite")
    yield s
    s.close()


@pytest.fixture
def app(store, registry):
    return create_app(store, registry, TOKEN, max_body=64 * 1024 * 1024)


@pytest.fixture
def http(app):
    with TestClient(app) as c:
        yield c


@pytest.fixture
def api(http):
    return ServerClient(token=TOKEN, http=http)


@pytest.fixture(scope="module")
def windows(tmp_path_factory):
    p = write_synth(tmp_path_factory.mktemp("data") / "d.csv", 0, 6)
    return wrangle(p, synth_spec())


@pytest.fixture
def keystore(tmp_path):
    return KeyStore(tmp_path / "keys")


@pytest.fixture
def record(windows, small_params, keystore):
    return encrypt_dataset(windows, "herd", "alice", small_params, keystore, np.random.default_rng(0))


def test_requires_token(http):
    assert http.get("/datasets").status_code == 401
    assert http.get("/datasets", headers={"Authorization": "Bearer nope"}).status_code == 401
    assert http.post("/inferences", json={"dataset_id": "x", "model_id": "y"}).status_code == 401


def test_empty_listing(api):
    assert api.list_datasets() == []


def test_submit_and_list(api, record):
    first = api.submit(record)
    second = api.submit(record)
    listing = api.list_datasets()
    assert [d["id"] for d in listing] == [second, first]
    assert set(listing[0]) == {"id", "dataset_name", "owner", "submitted_at", "received_at", "ciphertext_count"}
    assert listing[0]["ciphertext_count"] == len(record.ciphertexts)
    assert api.list_datasets(owner="bob") == []
    assert len(api.list_datasets(owner="alice")) == 2


def test_malformed_frame(http):
    r = http.post("/datasets", content=b"garbage" * 10, headers=AUTH)
    assert r.status_code == 400 and "malformed" in r.json()["detail"]


def test_secret_key_rejected(http, store, record, keystore):
    _, keys = keystore.load("herd")
    sections = unpack_frame(serialize_record(record))
    body = pack_frame(sections + [(b"SKEY", serialize_secret_key(keys.secret_key))])
    r = http.post("/datasets", content=body, headers=AUTH)
    assert r.status_code == 400 and "policy" in r.json()["detail"]
    assert store.list_datasets() == []


def test_record_without_keys_rejected(http, record):
    bare = EncryptedRecord(record.dataset_name, record.owner, record.submitted_at, record.params,
                           record.ciphertexts, extra=record.extra)
    assert http.post("/datasets", content=serialize_record(bare), headers=AUTH).status_code == 400


def test_oversize(store, registry, record):
    small = create_app(store, registry, TOKEN, max_body=1024)
    with TestClient(small) as c:
        r = c.post("/datasets", content=serialize_record(record), headers=AUTH)
    assert r.status_code == 413


def test_unknown_ids(api, record):
    with pytest.raises(ApiError) as err:
        api.infer("missing", "ref")
    assert err.value.status == 404
    ds = api.submit(record)
    with pytest.raises(ApiError) as err:
        api.infer(ds, "missing")
    assert err.value.status == 404
    with pytest.raises(ApiError) as err:
        api.status("nope")
    assert err.value.status == 404


def test_depth_mismatch_409(api, small_params, keystore):
    keys = keystore.get_or_create("herd", small_params)
    rng = np.random.default_rng(0)
    cts = [encrypt_values(0.1, keys, small_params, rng, level=4) for _ in range(3)]
    rec = EncryptedRecord("shallow", "alice", utcnow(), small_params, [serialize_ciphertext(c) for c in cts],
                          public_key=serialize_public_key(keys.public_key),
                          relin_key=serialize_relin_key(keys.relin_key), extra={"window_length": 3})
    ds = api.submit(rec)
    with pytest.raises(ApiError) as err:
        api.infer(ds, "ref")
    assert err.value.status == 409


def test_window_mismatch_409(api, record, registry):
    registry.add("wide", init_graph(4, 5))
    ds = api.submit(record)
    with pytest.raises(ApiError) as err:
        api.infer(ds, "wide")
    assert err.value.status == 409


def test_inference_end_to_end(api, store, record, keystore, windows, registry):
    ds = api.submit(record)
    job = api.infer(ds, "ref")
    info, result = api.wait(job, timeout=120)
    assert info["status"] == "done" and info["error"] is None
    assert all(c.level == 0 for c in result.load_ciphertexts())
    assert result.extra["job_id"] == job and result.extra["model_id"] == "ref"
    report = decrypt_result(result, keystore)
    want = forward_plain(registry.get("ref"), windows.features).y
    assert np.allclose(report["predictions"], want, atol=1e-2)
    assert audit_store(store) == []
    # polling does not change anything
    assert api.status(job) == api.status(job)


def test_status_while_running(app, http, api, record):
    gate, entered = threading.Event(), threading.Event()

    def hold(job_id):
        entered.set()
        gate.wait(10)

    app.state.worker.before_run = hold
    job = api.infer(api.submit(record), "ref")
    assert entered.wait(10)
    info, result = api.fetch(job)
    assert info["status"] == "running" and result is None and info["result"] is None
    gate.set()
    info, _ = api.wait(job, timeout=60)
    assert info["status"] == "done"


def test_failed_job_recorded(app, api, store, record):
    def boom(job_id):
        raise RuntimeError("worker exploded")

    app.state.worker.before_run = boom
    job = api.infer(api.submit(record), "ref")
    info, result = api.wait(job, timeout=30)
    assert info["status"] == "failed" and "exploded" in info["error"] and result is None


def test_resume_after_restart(tmp_path, registry, record):
    path = tmp_path / "durable.sqlite"
    s = Store(path)
    meta = record.metadata()
    meta.update(level=record.load_ciphertexts()[0].level, param_id=record.params.param_id, window_length=3)
    ds = s.add_dataset(serialize_record(record), meta)
    job = s.add_job(ds, "ref")
    s.close()
    s2 = Store(path)
    with TestClient(create_app(s2, registry, TOKEN)) as c:
        deadline = time.monotonic() + 120
        while c.get(f"/inferences/{job}", headers=AUTH).json()["status"] != "done":
            assert time.monotonic() < deadline
            time.sleep(0.05)
        blob = base64.b64decode(c.get(f"/inferences/{job}", headers=AUTH).json()["result"])
    assert deserialize_record(blob).extra["dataset_id"] == ds
    s2.close()


def test_queue_full(store, registry, record):
    app = create_app(store, registry, TOKEN, max_queue=1)
    with TestClient(app) as c:
        gate = threading.Event()
        app.state.worker.before_run = lambda job_id: gate.wait(10)
        api = ServerClient(token=TOKEN, http=c)
        ds = api.submit(record)
        api.infer(ds, "ref")
        with pytest.raises(ApiError) as err:
            api.infer(ds, "ref")
        assert err.value.status == 503
        gate.set()


def test_models_endpoint(http):
    assert http.get("/models", headers=AUTH).json() == {"ref": {"depth_budget": 5, "window": 3, "n_features": 5}}


class TestStore:
    def test_transitions(self, store):
        meta = {"dataset_name": "d", "owner": "o", "submitted_at": "t", "ciphertext_count": 1,
                "level": 5, "param_id": "p"}
        job = store.add_job(store.add_dataset(b"x", meta), "m")
        with pytest.raises(InvalidTransition):
            store.set_job(job, "done")  # no result
        store.set_job(job, "running")
        with pytest.raises(InvalidTransition):
            store.set_job(job, "queued")
        store.set_job(job, "done", result=b"r")
        with pytest.raises(InvalidTransition):
            store.set_job(job, "failed", error="late")
        assert store.job(job)["result"] == b"r"
        assert store.unfinished_jobs() == []


class TestRegistry:
    def test_load(self, tmp_path):
        save_model(reference_graph(5), tmp_path / "a.json", "ref")
        reg = ModelRegistry.load(tmp_path)
        assert reg.table()["ref"]["depth_budget"] == 5

    def test_duplicate(self, tmp_path):
        save_model(reference_graph(5), tmp_path / "a.json", "ref")
        save_model(reference_graph(5), tmp_path / "b.json", "ref")
        with pytest.raises(ModelFileError):
            ModelRegistry.load(tmp_path)

    def test_missing_dir(self, tmp_path):
        with pytest.raises(ModelFileError):
            ModelRegistry.load(tmp_path / "nope")
