"""Leveled CKKS: keys, encryption and the homomorphic evaluation operations.

Ring elements are held in RNS evaluation form: an array of shape
(level + 1, N), row ``j`` reduced modulo the j-th prime of the chain. Dropping
to a lower level keeps a row prefix; rescaling divides by the top prime.

Relinearization uses the RNS digit decomposition: digit ``i`` of ``c2`` is its
residue mod ``q_i``, and key ``i`` encrypts ``s^2`` times the CRT basis element
that is 1 mod ``q_i`` and 0 mod every other prime. No special prime is needed;
the key-switching noise (~sqrt(N) * q_i * sigma) lands under the squared scale
before the rescale that follows every multiplication.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import (
    InvalidSwitchError,
    LevelMismatchError,
    NeedsRelinearizationError,
    OutOfLevelsError,
    ParameterMismatchError,
    ScaleMismatchError,
)
from ..ring import kernels
from ..ring.sampling import gaussian_ints, ternary_ints, to_rns, uniform_rns
from .encoding import Plaintext, encode
from .params import HEParams, context

SCALE_RTOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.uint64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Ciphertext:
    parts: tuple[np.ndarray, ...]
    level: int
    scale: float
    param_id: str

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(_frozen(p) for p in self.parts))
        if len(self.parts) not in (2, 3):
            raise ValueError("a ciphertext has two parts, or three before relinearization")
        if not self.scale > 0:
            raise ValueError("ciphertext scale must be positive")

    @property
    def size(self) -> int:
        return len(self.parts)

    def __eq__(self, other):
        if not isinstance(other, Ciphertext):
            return NotImplemented
        return (self.level == other.level and self.scale == other.scale
                and self.param_id == other.param_id and self.size == other.size
                and all(np.array_equal(a, b) for a, b in zip(self.parts, other.parts)))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class SecretKey:
    data: np.ndarray  # evaluation form over the full chain
    param_id: str

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen(self.data))


@dataclass(frozen=True, eq=False)
class PublicKey:
    b: np.ndarray
    a: np.ndarray
    param_id: str

    def __post_init__(self):
        object.__setattr__(self, "b", _frozen(self.b))
        object.__setattr__(self, "a", _frozen(self.a))


@dataclass(frozen=True, eq=False)
class RelinKey:
    """``keys[i] = (-a_i s + e_i + g_i s^2, a_i)`` for every prime index i."""

    keys: tuple[tuple[np.ndarray, np.ndarray], ...]
    param_id: str

    def __post_init__(self):
        object.__setattr__(self, "keys", tuple((_frozen(k0), _frozen(k1)) for k0, k1 in self.keys))


@dataclass(frozen=True, eq=False)
class KeyBundle:
    public_key: PublicKey
    relin_key: RelinKey
    param_id: str
    secret_key: SecretKey | None = None

    def transmission(self) -> "KeyBundle":
        """Copy without the secret key, safe to send to the data processor."""
        return KeyBundle(self.public_key, self.relin_key, self.param_id, None)


def _check_params(params: HEParams, *objs) -> None:
    for o in objs:
        if o.param_id != params.param_id:
            raise ParameterMismatchError(
                f"{type(o).__name__} belongs to parameter set {o.param_id}, not {params.param_id}")


def keygen(params: HEParams, rng: np.random.Generator) -> KeyBundle:
    ctx = context(params)
    n, moduli, table = ctx.n, ctx.moduli, ctx.ntt
    k = kernels.active
    sigma = params.error_sigma

    def small(values):
        return table.forward(to_rns(values, moduli))

    s = small(ternary_ints(n, rng))
    a = uniform_rns(n, moduli, rng)
    b = k.sub(small(gaussian_ints(n, sigma, rng)), k.mul(a, s, moduli), moduli)
    s2 = k.mul(s, s, moduli)
    relin = []
    for i in range(len(moduli)):
        ai = uniform_rns(n, moduli, rng)
        k0 = k.sub(small(gaussian_ints(n, sigma, rng)), k.mul(ai, s, moduli), moduli)
        gadget = np.zeros_like(s2)
        gadget[i] = s2[i]
        relin.append((k.add(k0, gadget, moduli), ai))
    pid = params.param_id
    return KeyBundle(PublicKey(b, a, pid), RelinKey(tuple(relin), pid), pid, SecretKey(s, pid))


def encrypt(pt: Plaintext, public_key: PublicKey, params: HEParams,
            rng: np.random.Generator) -> Ciphertext:
    _check_params(params, pt, public_key)
    ctx = context(params)
    lvl = pt.level
    table = ctx.table(lvl)
    moduli = table.moduli
    k = kernels.active
    rows = lvl + 1
    u = table.forward(to_rns(ternary_ints(ctx.n, rng), moduli))
    e0 = table.forward(to_rns(gaussian_ints(ctx.n, params.error_sigma, rng), moduli))
    e1 = table.forward(to_rns(gaussian_ints(ctx.n, params.error_sigma, rng), moduli))
    b = np.ascontiguousarray(public_key.b[:rows])
    a = np.ascontiguousarray(public_key.a[:rows])
    c0 = k.add(k.add(k.mul(b, u, moduli), e0, moduli), pt.data, moduli)
    c1 = k.add(k.mul(a, u, moduli), e1, moduli)
    return Ciphertext((c0, c1), lvl, pt.scale, params.param_id)


def decrypt(ct: Ciphertext, secret_key: SecretKey, params: HEParams) -> Plaintext:
    _check_params(params, ct, secret_key)
    if ct.size != 2:
        raise NeedsRelinearizationError("decrypt expects a relinearized two-part ciphertext")
    moduli = context(params).table(ct.level).moduli
    s = np.ascontiguousarray(secret_key.data[: ct.level + 1])
    k = kernels.active
    m = k.add(ct.parts[0], k.mul(ct.parts[1], s, moduli), moduli)
    return Plaintext(m, ct.level, ct.scale, params.param_id)


def _same_level(a, b) -> None:
    if a.level != b.level:
        raise LevelMismatchError(
            f"operands at levels {a.level} and {b.level}; align them with mod_switch_to first")


def _same_scale(a, b) -> None:
    if abs(a.scale - b.scale) > SCALE_RTOL * max(a.scale, b.scale):
        raise ScaleMismatchError(f"scales {a.scale!r} and {b.scale!r} differ")


def _need_level(ct) -> None:
    if ct.level < 1:
        raise OutOfLevelsError("no level left to rescale into; the modulus chain is exhausted")


def add_ct(a: Ciphertext, b: Ciphertext, params: HEParams) -> Ciphertext:
    _check_params(params, a, b)
    _same_level(a, b)
    _same_scale(a, b)
    moduli = context(params).table(a.level).moduli
    size = max(a.size, b.size)
    parts = []
    for i in range(size):
        if i < a.size and i < b.size:
            parts.append(kernels.active.add(a.parts[i], b.parts[i], moduli))
        else:
            parts.append((a.parts if i < a.size else b.parts)[i])
    return Ciphertext(tuple(parts), a.level, a.scale, a.param_id)


def negate_ct(a: Ciphertext, params: HEParams) -> Ciphertext:
    _check_params(params, a)
    moduli = context(params).table(a.level).moduli
    zero = np.zeros_like(a.parts[0])
    return Ciphertext(tuple(kernels.active.sub(zero, p, moduli) for p in a.parts),
                      a.level, a.scale, a.param_id)


def sub_ct(a: Ciphertext, b: Ciphertext, params: HEParams) -> Ciphertext:
    return add_ct(a, negate_ct(b, params), params)


def add_pt(ct: Ciphertext, pt: Plaintext, params: HEParams) -> Ciphertext:
    _check_params(params, ct, pt)
    _same_level(ct, pt)
    _same_scale(ct, pt)
    moduli = context(params).table(ct.level).moduli
    c0 = kernels.active.add(ct.parts[0], pt.data, moduli)
    return Ciphertext((c0,) + ct.parts[1:], ct.level, ct.scale, ct.param_id)


def tensor(a: Ciphertext, b: Ciphertext, params: HEParams) -> Ciphertext:
    """Three-part product, neither relinearized nor rescaled."""
    _check_params(params, a, b)
    _same_level(a, b)
    if a.size != 2 or b.size != 2:
        raise NeedsRelinearizationError("relinearize operands before multiplying")
    moduli = context(params).table(a.level).moduli
    k = kernels.active
    (a0, a1), (b0, b1) = a.parts, b.parts
    d0 = k.mul(a0, b0, moduli)
    d1 = k.add(k.mul(a0, b1, moduli), k.mul(a1, b0, moduli), moduli)
    d2 = k.mul(a1, b1, moduli)
    return Ciphertext((d0, d1, d2), a.level, a.scale * b.scale, a.param_id)


def relinearize(ct: Ciphertext, relin_key: RelinKey, params: HEParams) -> Ciphertext:
    _check_params(params, ct, relin_key)
    if ct.size == 2:
        return ct
    ctx = context(params)
    table = ctx.table(ct.level)
    moduli = table.moduli
    rows = ct.level + 1
    k = kernels.active
    c2 = table.inverse(ct.parts[2])
    acc0 = np.zeros_like(c2)
    acc1 = np.zeros_like(c2)
    # rows * q < 2**64 for q < 2**50 and up to 2**13 primes, so sums can wait.
    for i in range(rows):
        qi = int(moduli[i])
        digit = c2[i].astype(np.int64)
        digit = np.where(digit > qi // 2, digit - qi, digit)
        d = table.forward(to_rns(digit, moduli))
        k0, k1 = relin_key.keys[i]
        acc0 += k.mul(d, np.ascontiguousarray(k0[:rows]), moduli)
        acc1 += k.mul(d, np.ascontiguousarray(k1[:rows]), moduli)
    q = moduli[:, None]
    c0 = k.add(ct.parts[0], acc0 % q, moduli)
    c1 = k.add(ct.parts[1], acc1 % q, moduli)
    return Ciphertext((c0, c1), ct.level, ct.scale, ct.param_id)


def _rescale_part(part: np.ndarray, level: int, ctx) -> np.ndarray:
    ql = ctx.chain[level]
    top = ctx.ntt.tables[level]
    last = part[level:level + 1].copy()
    kernels.active.inverse(last, top.inverse_roots.reshape(1, -1), top.inverse_shoup.reshape(1, -1),
                           np.array([ql], dtype=np.uint64),
                           np.array([top.n_inverse], dtype=np.uint64),
                           np.array([top.n_inverse_shoup], dtype=np.uint64))
    v = last[0].astype(np.int64)
    v = np.where(v > ql // 2, v - ql, v)
    lower = ctx.table(level - 1)
    lifted = lower.forward(to_rns(v, lower.moduli))
    diff = kernels.active.sub(np.ascontiguousarray(part[:level]), lifted, lower.moduli)
    return kernels.active.mul_scalar(diff, ctx.inv_last[level], lower.moduli)


def rescale(ct: Ciphertext, params: HEParams) -> Ciphertext:
    """Divide by the top prime of the current level and drop that level."""
    _check_params(params, ct)
    _need_level(ct)
    ctx = context(params)
    parts = tuple(_rescale_part(p, ct.level, ctx) for p in ct.parts)
    return Ciphertext(parts, ct.level - 1, ct.scale / ctx.chain[ct.level], ct.param_id)


def mod_switch_to(ct, target_level: int, params: HEParams):
    """Drop primes down to ``target_level`` without touching the scale.

    Accepts ciphertexts and plaintexts.
    """
    _check_params(params, ct)
    if target_level > ct.level or target_level < 0:
        raise InvalidSwitchError(f"cannot switch from level {ct.level} to {target_level}")
    if target_level == ct.level:
        return ct
    rows = target_level + 1
    if isinstance(ct, Plaintext):
        return Plaintext(np.ascontiguousarray(ct.data[:rows]), target_level, ct.scale, ct.param_id)
    return Ciphertext(tuple(p[:rows] for p in ct.parts), target_level, ct.scale, ct.param_id)


def mul_ct(a: Ciphertext, b: Ciphertext, relin_key: RelinKey, params: HEParams) -> Ciphertext:
    _check_params(params, a, b)
    _same_level(a, b)
    _need_level(a)
    return rescale(relinearize(tensor(a, b, params), relin_key, params), params)


def mul_pt(ct: Ciphertext, pt: Plaintext, params: HEParams) -> Ciphertext:
    _check_params(params, ct, pt)
    _same_level(ct, pt)
    _need_level(ct)
    moduli = context(params).table(ct.level).moduli
    parts = tuple(kernels.active.mul(p, pt.data, moduli) for p in ct.parts)
    return rescale(Ciphertext(parts, ct.level, ct.scale * pt.scale, ct.param_id), params)


def encrypt_values(values, keys: KeyBundle, params: HEParams, rng: np.random.Generator,
                   level: int | None = None) -> Ciphertext:
    return encrypt(encode(values, params, level=level), keys.public_key, params, rng)
