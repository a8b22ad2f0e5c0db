"""Evaluation backends sharing one interface.

``CKKSBackend`` runs the real scheme with evaluation keys only; it can encrypt
(public key) but never decrypt. ``ReferenceBackend`` does the same arithmetic
on clear slot vectors while tracking levels and scales exactly like the real
scheme, so it raises the same errors at the same places. Graph code is written
against this interface and runs unchanged on either.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParamsError, InvalidSwitchError, MissingKeyError
from . import scheme
from .encoding import Plaintext, _slot_vector, encode
from .params import HEParams, context
from .scheme import Ciphertext, KeyBundle


class CKKSBackend:
    name = "ckks"

    def __init__(self, params: HEParams, keys: KeyBundle, rng: np.random.Generator | None = None):
        scheme._check_params(params, keys)
        self.params = params
        self.public_key = keys.public_key
        self.relin_key = keys.relin_key
        self.rng = rng if rng is not None else np.random.default_rng()

    def encode(self, values, *, level: int | None = None, scale: float | None = None) -> Plaintext:
        return encode(values, self.params, level=level, scale=scale)

    def encrypt(self, values, *, level: int | None = None) -> Ciphertext:
        if self.public_key is None:
            raise MissingKeyError("no public key loaded")
        return scheme.encrypt(self.encode(values, level=level), self.public_key, self.params, self.rng)

    def add(self, a, b):
        return scheme.add_ct(a, b, self.params)

    def add_plain(self, a, p):
        return scheme.add_pt(a, p, self.params)

    def multiply(self, a, b):
        return scheme.mul_ct(a, b, self.relin_key, self.params)

    def multiply_plain(self, a, p):
        return scheme.mul_pt(a, p, self.params)

    def negate(self, a):
        return scheme.negate_ct(a, self.params)

    def rescale(self, a):
        return scheme.rescale(a, self.params)

    def mod_switch_to(self, a, level: int):
        return scheme.mod_switch_to(a, level, self.params)


@dataclass(frozen=True, eq=False)
class RefCiphertext:
    values: np.ndarray
    level: int
    scale: float
    param_id: str
    size: int = 2


@dataclass(frozen=True, eq=False)
class RefPlaintext:
    values: np.ndarray
    level: int
    scale: float
    param_id: str


class ReferenceBackend:
    """Plaintext oracle with the CKKS backend's level/scale bookkeeping."""

    name = "reference"

    def __init__(self, params: HEParams):
        self.params = params
        self._chain = context(params).chain

    def _slots(self, values) -> np.ndarray:
        return _slot_vector(values, self.params.slot_count).real.copy()

    def encode(self, values, *, level: int | None = None, scale: float | None = None) -> RefPlaintext:
        level = self.params.max_level if level is None else int(level)
        scale = self.params.scale if scale is None else float(scale)
        if not 0 <= level <= self.params.max_level:
            raise InvalidParamsError(f"level {level} outside 0..{self.params.max_level}")
        return RefPlaintext(self._slots(values), level, scale, self.params.param_id)

    def encrypt(self, values, *, level: int | None = None) -> RefCiphertext:
        pt = self.encode(values, level=level)
        return RefCiphertext(pt.values, pt.level, pt.scale, pt.param_id)

    def decrypt(self, ct: RefCiphertext) -> np.ndarray:
        return ct.values.copy()

    def add(self, a, b):
        scheme._check_params(self.params, a, b)
        scheme._same_level(a, b)
        scheme._same_scale(a, b)
        return RefCiphertext(a.values + b.values, a.level, a.scale, a.param_id)

    def add_plain(self, a, p):
        scheme._check_params(self.params, a, p)
        scheme._same_level(a, p)
        scheme._same_scale(a, p)
        return RefCiphertext(a.values + p.values, a.level, a.scale, a.param_id)

    def _product(self, a, values, other_scale):
        scheme._need_level(a)
        q = self._chain[a.level]
        return RefCiphertext(values, a.level - 1, a.scale * other_scale / q, a.param_id)

    def multiply(self, a, b):
        scheme._check_params(self.params, a, b)
        scheme._same_level(a, b)
        return self._product(a, a.values * b.values, b.scale)

    def multiply_plain(self, a, p):
        scheme._check_params(self.params, a, p)
        scheme._same_level(a, p)
        return self._product(a, a.values * p.values, p.scale)

    def negate(self, a):
        return RefCiphertext(-a.values, a.level, a.scale, a.param_id)

    def rescale(self, a):
        scheme._need_level(a)
        return RefCiphertext(a.values, a.level - 1, a.scale / self._chain[a.level], a.param_id)

    def mod_switch_to(self, a, level: int):
        if level > a.level or level < 0:
            raise InvalidSwitchError(f"cannot switch from level {a.level} to {level}")
        if level == a.level:
            return a
        cls = RefPlaintext if isinstance(a, RefPlaintext) else RefCiphertext
        return cls(a.values, level, a.scale, a.param_id)
