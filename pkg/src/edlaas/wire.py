"""Tagged binary container for ciphertexts, keys and dataset records.

Frame layout (all integers little-endian)::

    0   magic        4s   b"EDLS"
    4   version      u16
    6   flags        u16  reserved, 0
    8   count        u32  number of sections
    12  payload_len  u64
    20  table        count x (tag 4s, offset u64, length u64); offsets from payload start
    ..  payload      payload_len bytes
    ..  crc32        u32  over every preceding byte

Polynomials are raw ``<u8`` residues, row-major (prime, coefficient).
Metadata and parameter descriptors are UTF-8 JSON sections. Readers skip
tags they do not know and reject versions they do not know.
"""
from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .ckks.params import HEParams
from .ckks.scheme import Ciphertext, KeyBundle, PublicKey, RelinKey, SecretKey
from .errors import (
    ChecksumError,
    FrameFormatError,
    ParameterMismatchError,
    SecretKeyPolicyError,
    VersionError,
    WireError,
)

MAGIC = b"EDLS"
VERSION = 1
_HEADER = struct.Struct("<4sHHIQ")
_ENTRY = struct.Struct("<4sQQ")
_CRC = struct.Struct("<I")
MAX_SECTIONS = 1 << 20

TAG_META = b"META"
TAG_PARAMS = b"PARM"
TAG_CT_HEADER = b"CHDR"
TAG_CT_PART = b"CPRT"
TAG_CIPHERTEXT = b"CTXT"
TAG_PUBLIC_KEY = b"PKEY"
TAG_RELIN_KEY = b"RKEY"
TAG_SECRET_KEY = b"SKEY"

# Secret-key payloads open with this marker so a raw byte scan can find them.
SECRET_MARKER = b"EDLS-SECRET-KEY\x00"

_CT_HEADER = struct.Struct("<HHId8s")
_POLY_HEADER = struct.Struct("<8sHHI")  # param_id, n_polys, rows, N


def pack_frame(sections) -> bytes:
    sections = [(bytes(tag), bytes(body)) for tag, body in sections]
    for tag, _ in sections:
        if len(tag) != 4:
            raise FrameFormatError(f"section tag {tag!r} must be four bytes")
    table, offset = [], 0
    for tag, body in sections:
        table.append(_ENTRY.pack(tag, offset, len(body)))
        offset += len(body)
    head = _HEADER.pack(MAGIC, VERSION, 0, len(sections), offset)
    frame = b"".join([head, *table, *(body for _, body in sections)])
    return frame + _CRC.pack(zlib.crc32(frame))


def unpack_frame(buf: bytes) -> list[tuple[bytes, bytes]]:
    """Validate a frame and return its (tag, body) sections in order."""
    buf = bytes(buf)
    if len(buf) < _HEADER.size + _CRC.size:
        raise FrameFormatError(f"truncated frame: {len(buf)} bytes")
    magic, version, _flags, count, payload_len = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FrameFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise VersionError(f"unsupported frame version {version}")
    if count > MAX_SECTIONS:
        raise FrameFormatError(f"implausible section count {count}")
    table_end = _HEADER.size + count * _ENTRY.size
    expected = table_end + payload_len + _CRC.size
    if len(buf) != expected:
        raise FrameFormatError(f"frame length {len(buf)} does not match declared {expected}")
    (crc,) = _CRC.unpack_from(buf, len(buf) - _CRC.size)
    if zlib.crc32(memoryview(buf)[: len(buf) - _CRC.size]) != crc:
        raise ChecksumError("frame checksum mismatch")
    sections = []
    for i in range(count):
        tag, off, length = _ENTRY.unpack_from(buf, _HEADER.size + i * _ENTRY.size)
        if off + length > payload_len:
            raise FrameFormatError(f"section {tag!r} runs past the payload")
        start = table_end + off
        sections.append((tag, buf[start:start + length]))
    return sections


def frame_tags(buf: bytes) -> list[bytes]:
    return [tag for tag, _ in unpack_frame(buf)]


def _one(sections, tag: bytes) -> bytes:
    found = [body for t, body in sections if t == tag]
    if len(found) != 1:
        raise FrameFormatError(f"expected exactly one {tag.decode()} section, found {len(found)}")
    return found[0]


def _pid(param_id: str) -> bytes:
    return bytes.fromhex(param_id)


def _residues(raw: bytes, rows: int, n: int, moduli) -> np.ndarray:
    if len(raw) != rows * n * 8:
        raise FrameFormatError("polynomial block has the wrong length")
    arr = np.frombuffer(raw, dtype="<u8").astype(np.uint64).reshape(rows, n)
    if np.any(arr >= np.asarray(moduli[:rows], dtype=np.uint64)[:, None]):
        raise FrameFormatError("residue not reduced under its modulus")
    return arr


def _le(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<u8").tobytes()


# ciphertexts

def serialize_ciphertext(ct: Ciphertext) -> bytes:
    n = ct.parts[0].shape[1]
    head = _CT_HEADER.pack(ct.level, ct.size, n, ct.scale, _pid(ct.param_id))
    return pack_frame([(TAG_CT_HEADER, head)] + [(TAG_CT_PART, _le(p)) for p in ct.parts])


def deserialize_ciphertext(buf: bytes, params: HEParams) -> Ciphertext:
    sections = unpack_frame(buf)
    head = _one(sections, TAG_CT_HEADER)
    if len(head) != _CT_HEADER.size:
        raise FrameFormatError("ciphertext header has the wrong length")
    level, size, n, scale, pid = _CT_HEADER.unpack(head)
    if pid.hex() != params.param_id:
        raise ParameterMismatchError(f"ciphertext param_id {pid.hex()} != {params.param_id}")
    if n != params.poly_modulus_degree or level > params.max_level:
        raise FrameFormatError("ciphertext shape does not fit the parameters")
    parts = [body for t, body in sections if t == TAG_CT_PART]
    if len(parts) != size or size not in (2, 3):
        raise FrameFormatError(f"header announces {size} parts, frame holds {len(parts)}")
    if not (scale > 0 and np.isfinite(scale)):
        raise FrameFormatError("ciphertext scale must be positive and finite")
    moduli = params.modulus_chain
    arrays = tuple(_residues(p, level + 1, n, moduli) for p in parts)
    return Ciphertext(arrays, level, scale, params.param_id)


# keys

def _poly_block(param_id: str, polys) -> bytes:
    polys = list(polys)
    rows, n = polys[0].shape
    return _POLY_HEADER.pack(_pid(param_id), len(polys), rows, n) + b"".join(_le(p) for p in polys)


def _read_poly_block(body: bytes, params: HEParams, expect: int | None = None) -> list[np.ndarray]:
    if len(body) < _POLY_HEADER.size:
        raise FrameFormatError("key block too short")
    pid, count, rows, n = _POLY_HEADER.unpack_from(body)
    if pid.hex() != params.param_id:
        raise ParameterMismatchError(f"key param_id {pid.hex()} != {params.param_id}")
    if n != params.poly_modulus_degree or rows != len(params.modulus_chain):
        raise FrameFormatError("key shape does not fit the parameters")
    if expect is not None and count != expect:
        raise FrameFormatError(f"key block holds {count} polynomials, expected {expect}")
    size = rows * n * 8
    data = body[_POLY_HEADER.size:]
    if len(data) != count * size:
        raise FrameFormatError("key block has the wrong length")
    return [_residues(data[i * size:(i + 1) * size], rows, n, params.modulus_chain) for i in range(count)]


def serialize_public_key(pk: PublicKey) -> bytes:
    return _poly_block(pk.param_id, [pk.b, pk.a])


def deserialize_public_key(body: bytes, params: HEParams) -> PublicKey:
    b, a = _read_poly_block(body, params, 2)
    return PublicKey(b, a, params.param_id)


def serialize_relin_key(rk: RelinKey) -> bytes:
    return _poly_block(rk.param_id, [p for pair in rk.keys for p in pair])


def deserialize_relin_key(body: bytes, params: HEParams) -> RelinKey:
    polys = _read_poly_block(body, params, 2 * len(params.modulus_chain))
    return RelinKey(tuple(zip(polys[0::2], polys[1::2])), params.param_id)


def serialize_secret_key(sk: SecretKey) -> bytes:
    return SECRET_MARKER + _poly_block(sk.param_id, [sk.data])


def deserialize_secret_key(body: bytes, params: HEParams) -> SecretKey:
    if not body.startswith(SECRET_MARKER):
        raise FrameFormatError("secret key block lacks its marker")
    (s,) = _read_poly_block(body[len(SECRET_MARKER):], params, 1)
    return SecretKey(s, params.param_id)


def _params_section(params: HEParams) -> bytes:
    return json.dumps(params.descriptor(), sort_keys=True).encode()


def _read_params(sections) -> HEParams:
    try:
        return HEParams.from_descriptor(json.loads(_one(sections, TAG_PARAMS)))
    except ValueError as exc:
        if isinstance(exc, WireError):
            raise
        raise FrameFormatError(f"bad parameter section: {exc}") from exc


def serialize_keys(keys: KeyBundle, params: HEParams, *, include_secret: bool = False) -> bytes:
    sections = [
        (TAG_PARAMS, _params_section(params)),
        (TAG_PUBLIC_KEY, serialize_public_key(keys.public_key)),
        (TAG_RELIN_KEY, serialize_relin_key(keys.relin_key)),
    ]
    if include_secret:
        if keys.secret_key is None:
            raise ValueError("bundle has no secret key to include")
        sections.append((TAG_SECRET_KEY, serialize_secret_key(keys.secret_key)))
    return pack_frame(sections)


def deserialize_keys(buf: bytes) -> tuple[HEParams, KeyBundle]:
    sections = unpack_frame(buf)
    params = _read_params(sections)
    pk = deserialize_public_key(_one(sections, TAG_PUBLIC_KEY), params)
    rk = deserialize_relin_key(_one(sections, TAG_RELIN_KEY), params)
    sk = None
    if any(t == TAG_SECRET_KEY for t, _ in sections):
        sk = deserialize_secret_key(_one(sections, TAG_SECRET_KEY), params)
    return params, KeyBundle(pk, rk, params.param_id, sk)


# records

def utcnow() -> datetime:
    return datetime.now(timezone.utc)


@dataclass(eq=True)
class EncryptedRecord:
    dataset_name: str
    owner: str
    submitted_at: datetime
    params: HEParams
    ciphertexts: list[bytes]
    public_key: bytes | None = None
    relin_key: bytes | None = None
    secret_key: bytes | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.dataset_name:
            raise ValueError("dataset_name must be non-empty")
        if not self.ciphertexts:
            raise ValueError("a record holds at least one ciphertext")
        if self.submitted_at.tzinfo is None:
            raise ValueError("submitted_at must be timezone-aware (UTC)")

    def metadata(self) -> dict:
        return {
            "dataset_name": self.dataset_name,
            "owner": self.owner,
            "submitted_at": self.submitted_at.isoformat(),
            "ciphertext_count": len(self.ciphertexts),
            "extra": self.extra,
        }

    def load_ciphertexts(self) -> list[Ciphertext]:
        return [deserialize_ciphertext(b, self.params) for b in self.ciphertexts]

    def load_keys(self) -> KeyBundle:
        if self.public_key is None or self.relin_key is None:
            raise ValueError("record carries no evaluation keys")
        pk = deserialize_public_key(self.public_key, self.params)
        rk = deserialize_relin_key(self.relin_key, self.params)
        return KeyBundle(pk, rk, self.params.param_id)


MODES = ("local", "transmission")


def serialize_record(record: EncryptedRecord, mode: str = "transmission") -> bytes:
    """``transmission`` strips the secret key; ``local`` keeps it."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    sections = [
        (TAG_META, json.dumps(record.metadata(), sort_keys=True).encode()),
        (TAG_PARAMS, _params_section(record.params)),
    ]
    if record.public_key is not None:
        sections.append((TAG_PUBLIC_KEY, record.public_key))
    if record.relin_key is not None:
        sections.append((TAG_RELIN_KEY, record.relin_key))
    sections += [(TAG_CIPHERTEXT, ct) for ct in record.ciphertexts]
    if mode == "local" and record.secret_key is not None:
        sections.append((TAG_SECRET_KEY, record.secret_key))
    return pack_frame(sections)


def deserialize_record(buf: bytes, mode: str = "transmission") -> EncryptedRecord:
    """Decode a record; ``transmission`` mode refuses any secret-key section."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    sections = unpack_frame(buf)
    tags = [t for t, _ in sections]
    if mode == "transmission" and (TAG_SECRET_KEY in tags or SECRET_MARKER in buf):
        raise SecretKeyPolicyError("secret key material is not accepted in transmission records")
    try:
        meta = json.loads(_one(sections, TAG_META))
        name, owner = str(meta["dataset_name"]), str(meta["owner"])
        submitted = datetime.fromisoformat(meta["submitted_at"])
        extra = dict(meta.get("extra") or {})
        declared = int(meta["ciphertext_count"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, WireError):
            raise
        raise FrameFormatError(f"bad record metadata: {exc}") from exc
    params = _read_params(sections)
    cts = [body for t, body in sections if t == TAG_CIPHERTEXT]
    if len(cts) != declared:
        raise FrameFormatError(f"metadata announces {declared} ciphertexts, frame holds {len(cts)}")
    for body in cts:
        if TAG_SECRET_KEY in frame_tags(body) and mode == "transmission":
            raise SecretKeyPolicyError("secret key section nested inside a ciphertext")
    optional = {}
    for tag, key in ((TAG_PUBLIC_KEY, "public_key"), (TAG_RELIN_KEY, "relin_key"),
                     (TAG_SECRET_KEY, "secret_key")):
        if tag in tags:
            optional[key] = _one(sections, tag)
    try:
        return EncryptedRecord(name, owner, submitted, params, cts, extra=extra, **optional)
    except ValueError as exc:
        raise FrameFormatError(str(exc)) from exc


def contains_secret(buf: bytes) -> bool:
    """True if the frame, or any nested frame, carries a secret-key section.

    Serialized secret keys always start with ``SECRET_MARKER``, so a key
    smuggled under another tag is caught as well.
    """
    if SECRET_MARKER in buf:
        return True
    try:
        sections = unpack_frame(buf)
    except WireError:
        return SECRET_MARKER in buf
    for tag, body in sections:
        if tag == TAG_SECRET_KEY:
            return True
        if body[:4] == MAGIC and contains_secret(body):
            return True
    return False
