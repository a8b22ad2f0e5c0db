"""Canonical-embedding encoder between slot vectors and ring plaintexts."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EncodingOverflowError, InvalidParamsError, ParameterMismatchError
from ..ring import kernels
from ..ring.sampling import to_rns
from .params import HEParams, context

_INT64_LIMIT = 2 ** 62


@dataclass(frozen=True, eq=False)
class Plaintext:
    """Encoded polynomial in evaluation form, one row per prime up to ``level``."""

    data: np.ndarray
    level: int
    scale: float
    param_id: str

    def __post_init__(self):
        self.data.setflags(write=False)

    def __eq__(self, other):
        if not isinstance(other, Plaintext):
            return NotImplemented
        return (self.level == other.level and self.scale == other.scale
                and self.param_id == other.param_id and np.array_equal(self.data, other.data))


def _slot_vector(values, slots: int) -> np.ndarray:
    v = np.asarray(values)
    if v.ndim == 0:
        v = np.full(slots, v)
    if v.ndim != 1:
        raise ValueError("slot vector must be one-dimensional")
    if len(v) > slots:
        raise ValueError(f"{len(v)} values exceed the {slots} available slots")
    if not np.all(np.isfinite(v)):
        raise ValueError("slot values must be finite")
    out = np.zeros(slots, dtype=np.complex128)
    out[: len(v)] = v
    return out


def embed_inverse(values, params: HEParams) -> np.ndarray:
    """Real polynomial coefficients whose embedding equals ``values`` (zero padded).

    A scalar is broadcast to every slot.
    """
    ctx = context(params)
    z = _slot_vector(values, params.slot_count)
    evals = np.zeros(ctx.n, dtype=np.complex128)
    evals[ctx.slot_pos] = z
    evals[ctx.conj_pos] = np.conj(z)
    coeffs = np.fft.fft(evals) / ctx.n * np.conj(ctx.twist)
    return coeffs.real


def embed(coeffs: np.ndarray, params: HEParams) -> np.ndarray:
    """Slot values of a real coefficient vector."""
    ctx = context(params)
    evals = ctx.n * np.fft.ifft(np.asarray(coeffs, dtype=np.float64) * ctx.twist)
    return evals[ctx.slot_pos]


def encode(values, params: HEParams, *, scale: float | None = None,
           level: int | None = None) -> Plaintext:
    scale = params.scale if scale is None else float(scale)
    level = params.max_level if level is None else int(level)
    if not 0 <= level <= params.max_level:
        raise InvalidParamsError(f"level {level} outside 0..{params.max_level}")
    if not scale > 0:
        raise InvalidParamsError("scale must be positive")
    ctx = context(params)
    scaled = np.rint(embed_inverse(values, params) * scale)
    bound = min(_INT64_LIMIT, ctx.modulus_product(level) // 2)
    if scaled.size and np.max(np.abs(scaled)) >= bound:
        raise EncodingOverflowError(
            f"scaled coefficients reach {np.max(np.abs(scaled)):.3e}, level {level} allows {bound:.3e}")
    table = ctx.table(level)
    data = table.forward(to_rns(scaled.astype(np.int64), table.moduli))
    return Plaintext(data, level, scale, params.param_id)


def crt_centered(residues: np.ndarray, moduli: np.ndarray) -> np.ndarray:
    """Exact CRT of (k, n) residues to signed integers in (-Q/2, Q/2], as floats."""
    qs = [int(q) for q in moduli]
    if len(qs) == 1:
        q = qs[0]
        v = residues[0].astype(np.int64)
        return np.where(v > q // 2, v - q, v).astype(np.float64)
    big_q = 1
    for q in qs:
        big_q *= q
    acc = np.zeros(residues.shape[1], dtype=object)
    for i, q in enumerate(qs):
        rest = big_q // q
        y = kernels.active.mul_scalar(np.ascontiguousarray(residues[i:i + 1]),
                                      np.array([pow(rest % q, -1, q)], dtype=np.uint64),
                                      np.array([q], dtype=np.uint64))[0]
        acc += y.astype(object) * rest
    acc %= big_q
    half = big_q // 2
    return np.array([float(x - big_q) if x > half else float(x) for x in acc])


def decode(pt: Plaintext, params: HEParams, *, as_complex: bool = False) -> np.ndarray:
    if pt.param_id != params.param_id:
        raise ParameterMismatchError("plaintext was encoded under different parameters")
    table = context(params).table(pt.level)
    coeffs = crt_centered(table.inverse(pt.data), table.moduli) / pt.scale
    slots = embed(coeffs, params)
    return slots if as_complex else slots.real
