"""NTT-friendly primes and precomputed twiddle tables."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from sympy import isprime

from ..errors import ParameterMismatchError, UnsupportedModulusError
from . import kernels


def is_power_of_two(n: int) -> bool:
    return n >= 2 and n & (n - 1) == 0


def check_ntt_friendly(q: int, n: int) -> None:
    if not is_power_of_two(n):
        raise UnsupportedModulusError(f"degree {n} is not a power of two >= 2")
    if q >= 1 << 62:
        raise UnsupportedModulusError(f"modulus {q} exceeds the word-size limit")
    if (q - 1) % (2 * n) or not isprime(q):
        raise UnsupportedModulusError(f"{q} is not a prime congruent to 1 mod {2 * n}")


def find_primes(n: int, bits: int, count: int, *, below: bool = True,
                exclude: tuple[int, ...] = ()) -> list[int]:
    """``count`` distinct primes q = 1 (mod 2n) nearest to 2**bits.

    ``below=True`` walks down from 2**bits, otherwise up from it.
    """
    step = 2 * n
    found = []
    k = (1 << bits) // step
    if not below:
        k += 1
    while len(found) < count:
        q = k * step + 1
        if q not in exclude and (not below or q < 1 << bits) and isprime(q):
            found.append(q)
        k = k - 1 if below else k + 1
        if k <= 0:
            raise UnsupportedModulusError(f"ran out of {bits}-bit primes for n={n}")
    return found


def _bitrev(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def _root_of_unity(q: int, n: int) -> int:
    """Smallest-base primitive 2n-th root of unity mod q."""
    e = (q - 1) // (2 * n)
    for x in range(2, q):
        psi = pow(x, e, q)
        if pow(psi, n, q) == q - 1:
            return psi
    raise UnsupportedModulusError(f"no primitive {2 * n}-th root of unity mod {q}")


def _powers(base: int, n: int, q: int) -> list[int]:
    out = [1] * n
    for i in range(1, n):
        out[i] = out[i - 1] * base % q
    return out


@dataclass(frozen=True, eq=False)
class NttTable:
    """Twiddles for one prime: powers of psi in bit-reversed order."""

    degree_n: int
    modulus: int
    psi: int
    forward_roots: np.ndarray
    forward_shoup: np.ndarray
    inverse_roots: np.ndarray
    inverse_shoup: np.ndarray
    n_inverse: int

    @property
    def n_inverse_shoup(self) -> int:
        return (self.n_inverse << 64) // self.modulus


@lru_cache(maxsize=None)
def ntt_table(n: int, q: int) -> NttTable:
    check_ntt_friendly(q, n)
    psi = _root_of_unity(q, n)
    psi_inv = pow(psi, -1, q)
    rev = _bitrev(n)
    fwd = _powers(psi, n, q)
    inv = _powers(psi_inv, n, q)
    fwd = [fwd[i] for i in rev]
    inv = [inv[i] for i in rev]

    def arr(vals):
        a = np.array(vals, dtype=np.uint64)
        a.setflags(write=False)
        return a

    return NttTable(
        degree_n=n,
        modulus=q,
        psi=psi,
        forward_roots=arr(fwd),
        forward_shoup=arr([(w << 64) // q for w in fwd]),
        inverse_roots=arr(inv),
        inverse_shoup=arr([(w << 64) // q for w in inv]),
        n_inverse=pow(n, -1, q),
    )


class RnsNttTable:
    """Stacked tables for a prime chain; row ``i`` belongs to ``moduli[i]``.

    Prefix views (``table.prefix(k)``) are what level-``k-1`` objects use.
    """

    def __init__(self, n: int, moduli):
        self.degree_n = n
        tables = [ntt_table(n, int(q)) for q in moduli]
        self.tables = tables
        self.moduli = np.array([t.modulus for t in tables], dtype=np.uint64)
        self.fwd = np.ascontiguousarray(np.stack([t.forward_roots for t in tables]))
        self.fwd_shoup = np.ascontiguousarray(np.stack([t.forward_shoup for t in tables]))
        self.inv = np.ascontiguousarray(np.stack([t.inverse_roots for t in tables]))
        self.inv_shoup = np.ascontiguousarray(np.stack([t.inverse_shoup for t in tables]))
        self.n_inv = np.array([t.n_inverse for t in tables], dtype=np.uint64)
        self.n_inv_shoup = np.array([t.n_inverse_shoup for t in tables], dtype=np.uint64)
        self._prefix = {}

    def __len__(self):
        return len(self.tables)

    def prefix(self, k: int) -> "RnsNttTable":
        if k == len(self):
            return self
        if k not in self._prefix:
            sub = object.__new__(RnsNttTable)
            sub.degree_n = self.degree_n
            sub.tables = self.tables[:k]
            for name in ("moduli", "fwd", "fwd_shoup", "inv", "inv_shoup", "n_inv", "n_inv_shoup"):
                setattr(sub, name, getattr(self, name)[:k])
            sub._prefix = {}
            self._prefix[k] = sub
        return self._prefix[k]

    def _check_shape(self, a):
        if a.shape != (len(self), self.degree_n):
            raise ParameterMismatchError(
                f"array of shape {a.shape} does not match table ({len(self)}, {self.degree_n})")

    def forward(self, a: np.ndarray, impl=None) -> np.ndarray:
        self._check_shape(a)
        out = np.array(a, dtype=np.uint64, order="C", copy=True)
        (impl or kernels.active).forward(out, self.fwd, self.fwd_shoup, self.moduli)
        return out

    def inverse(self, a: np.ndarray, impl=None) -> np.ndarray:
        self._check_shape(a)
        out = np.array(a, dtype=np.uint64, order="C", copy=True)
        (impl or kernels.active).inverse(out, self.inv, self.inv_shoup, self.moduli,
                                         self.n_inv, self.n_inv_shoup)
        return out
