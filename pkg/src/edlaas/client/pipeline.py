"""Client-side encryption of wrangled windows and decryption of results."""
from __future__ import annotations

import threading
from datetime import timedelta

import numpy as np

from ..ckks import decrypt_values
from ..ckks.params import HEParams
from ..ckks.scheme import KeyBundle, encrypt_values
from ..errors import DecryptionCheckError, ParameterMismatchError
from ..nn.graph import SENTINEL_VALUE
from ..wire import (
    EncryptedRecord,
    deserialize_ciphertext,
    serialize_ciphertext,
    serialize_public_key,
    serialize_relin_key,
    utcnow,
)
from .keystore import KeyStore
from .wrangle import Windows

SENTINEL_TOL = 1e-3

_clock_lock = threading.Lock()
_last_stamp = None


def monotonic_utcnow():
    """UTC now, nudged forward so successive calls strictly increase."""
    global _last_stamp
    with _clock_lock:
        now = utcnow()
        if _last_stamp is not None and now <= _last_stamp:
            now = _last_stamp + timedelta(microseconds=1)
        _last_stamp = now
        return now


def encrypt_dataset(windows: Windows, dataset_name: str, owner: str, params: HEParams,
                    keystore: KeyStore, rng: np.random.Generator | None = None,
                    keys: KeyBundle | None = None) -> EncryptedRecord:
    """One ciphertext per timestep per window, all at the top level.

    Keys come from the keystore (created on first use). The returned record
    carries public and relinearization keys but never the secret key.
    """
    rng = rng if rng is not None else np.random.default_rng()
    if keys is None:
        keys = keystore.get_or_create(dataset_name, params, rng)
    padded = windows.padded(params.slot_count)
    cts = [serialize_ciphertext(encrypt_values(step, keys, params, rng))
           for window in padded for step in window]
    extra = {
        "window_length": int(padded.shape[1]),
        "n_windows": int(padded.shape[0]),
        "n_features": windows.n_features,
        "feature_names": list(windows.feature_names),
        "sentinel": SENTINEL_VALUE,
    }
    return EncryptedRecord(dataset_name, owner, monotonic_utcnow(), params, cts,
                           public_key=serialize_public_key(keys.public_key),
                           relin_key=serialize_relin_key(keys.relin_key), extra=extra)


def decrypt_record_slots(record: EncryptedRecord, keys: KeyBundle) -> np.ndarray:
    if keys.param_id != record.params.param_id:
        raise ParameterMismatchError("keys and record use different parameters")
    return np.stack([decrypt_values(deserialize_ciphertext(b, record.params), keys.secret_key, record.params)
                     for b in record.ciphertexts])


def check_sentinel(slots: np.ndarray, expected: float, dataset_name: str, tol: float = SENTINEL_TOL):
    got = slots[:, -1]
    bad = np.abs(got - expected) > tol
    if np.any(bad):
        i = int(np.argmax(bad))
        raise DecryptionCheckError(
            f"sentinel slot of ciphertext {i} decrypted to {got[i]:.6g}, expected {expected:.6g}; "
            f"wrong key for {dataset_name!r} or corrupted data")


def decrypt_result(result: EncryptedRecord, keystore: KeyStore, key_name: str | None = None) -> dict:
    """Decrypt a job result and sum each output's feature slots into a prediction."""
    name = key_name or result.dataset_name
    _, keys = keystore.load(name)
    slots = decrypt_record_slots(result, keys)
    extra = result.extra
    check_sentinel(slots, float(extra["expected_sentinel"]), name)
    n_features = int(extra["n_features"])
    predictions = slots[:, :n_features].sum(axis=1)
    return {
        "dataset_name": result.dataset_name,
        "owner": result.owner,
        "job_id": extra.get("job_id"),
        "model_id": extra.get("model_id"),
        "dataset_id": extra.get("dataset_id"),
        "completed_at": result.submitted_at.isoformat(),
        "predictions": [float(p) for p in predictions],
    }
