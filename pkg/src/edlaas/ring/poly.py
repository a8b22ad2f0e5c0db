"""Elements of the negacyclic ring Z_q[X]/(X^N + 1) over a single prime."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterMismatchError
from . import kernels
from .ntt import NttTable, is_power_of_two, ntt_table


@dataclass(frozen=True, eq=False)
class RingPoly:
    """Coefficient vector reduced into [0, q)."""

    coeffs: np.ndarray
    modulus: int

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.ndim != 1 or not is_power_of_two(len(c)):
            raise ParameterMismatchError(f"degree {c.shape} is not a power of two >= 2")
        if c.dtype != np.uint64:
            c = np.mod(c.astype(object), self.modulus).astype(np.uint64)
        elif c.size and int(c.max()) >= self.modulus:
            raise ValueError("coefficients must be reduced into [0, q)")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_ints(cls, values, modulus: int) -> "RingPoly":
        return cls(np.array([int(v) % modulus for v in values], dtype=np.uint64), modulus)

    @property
    def degree_n(self) -> int:
        return len(self.coeffs)

    def __eq__(self, other):
        if not isinstance(other, RingPoly):
            return NotImplemented
        return self.modulus == other.modulus and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash((self.modulus, self.coeffs.tobytes()))

    def tolist(self) -> list[int]:
        return [int(c) for c in self.coeffs]

    def __add__(self, other):
        return poly_add(self, other)

    def __neg__(self):
        return poly_negate(self)

    def __sub__(self, other):
        return poly_add(self, poly_negate(other))

    def __mul__(self, other):
        return poly_mul(self, other)

    def __repr__(self):
        head = self.tolist()[:8]
        more = ", ..." if self.degree_n > 8 else ""
        return f"RingPoly(q={self.modulus}, N={self.degree_n}, {head}{more})"


def zero_poly(n: int, q: int) -> RingPoly:
    return RingPoly(np.zeros(n, dtype=np.uint64), q)


def one_poly(n: int, q: int) -> RingPoly:
    c = np.zeros(n, dtype=np.uint64)
    c[0] = 1
    return RingPoly(c, q)


def _same_ring(a: RingPoly, b: RingPoly) -> None:
    if a.modulus != b.modulus or a.degree_n != b.degree_n:
        raise ParameterMismatchError(
            f"ring mismatch: (N={a.degree_n}, q={a.modulus}) vs (N={b.degree_n}, q={b.modulus})")


def _row(a: RingPoly) -> np.ndarray:
    return a.coeffs.reshape(1, -1)


def _q(a: RingPoly) -> np.ndarray:
    return np.array([a.modulus], dtype=np.uint64)


def poly_add(a: RingPoly, b: RingPoly) -> RingPoly:
    _same_ring(a, b)
    if a.modulus >= 1 << 63:
        raise ParameterMismatchError("modulus too large for word arithmetic")
    return RingPoly(kernels.active.add(_row(a), _row(b), _q(a))[0], a.modulus)


def poly_negate(a: RingPoly) -> RingPoly:
    c = a.coeffs
    out = np.where(c == 0, c, np.uint64(a.modulus) - c)
    return RingPoly(out, a.modulus)


def poly_sub(a: RingPoly, b: RingPoly) -> RingPoly:
    _same_ring(a, b)
    return RingPoly(kernels.active.sub(_row(a), _row(b), _q(a))[0], a.modulus)


def ntt_forward(a: RingPoly, table: NttTable, impl=None) -> np.ndarray:
    """Evaluations of ``a`` at the odd powers of psi, in bit-reversed order."""
    if table.degree_n != a.degree_n or table.modulus != a.modulus:
        raise ParameterMismatchError("NTT table does not match polynomial ring")
    out = np.array(_row(a), copy=True)
    (impl or kernels.active).forward(out, table.forward_roots.reshape(1, -1),
                                     table.forward_shoup.reshape(1, -1), _q(a))
    return out[0]


def ntt_inverse(evals: np.ndarray, table: NttTable, impl=None) -> RingPoly:
    evals = np.asarray(evals, dtype=np.uint64)
    if evals.shape != (table.degree_n,):
        raise ParameterMismatchError("evaluation vector does not match NTT table")
    out = np.array(evals.reshape(1, -1), copy=True)
    q = np.array([table.modulus], dtype=np.uint64)
    (impl or kernels.active).inverse(out, table.inverse_roots.reshape(1, -1),
                                     table.inverse_shoup.reshape(1, -1), q,
                                     np.array([table.n_inverse], dtype=np.uint64),
                                     np.array([table.n_inverse_shoup], dtype=np.uint64))
    return RingPoly(out[0], table.modulus)


def poly_mul(a: RingPoly, b: RingPoly, impl=None) -> RingPoly:
    """Negacyclic product through the NTT; the modulus must be NTT-friendly."""
    _same_ring(a, b)
    table = ntt_table(a.degree_n, a.modulus)
    k = impl or kernels.active
    fa = ntt_forward(a, table, k).reshape(1, -1)
    fb = ntt_forward(b, table, k).reshape(1, -1)
    return ntt_inverse(k.mul(fa, fb, _q(a))[0], table, k)


def schoolbook_mul(a: RingPoly, b: RingPoly) -> RingPoly:
    """Reference product: full convolution, then fold with X^N = -1."""
    _same_ring(a, b)
    n, q = a.degree_n, a.modulus
    x, y = a.tolist(), b.tolist()
    acc = [0] * (2 * n)
    for i, xi in enumerate(x):
        if xi:
            for j, yj in enumerate(y):
                acc[i + j] += xi * yj
    return RingPoly.from_ints([acc[i] - acc[i + n] for i in range(n)], q)
