"""Scheme parameters and the per-parameter precomputation context."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..errors import InvalidParamsError, UnsupportedModulusError
from ..ring.ntt import RnsNttTable, check_ntt_friendly, find_primes, is_power_of_two

PROFILES = ("insecure-test", "desk-secure")
DEFAULT_SCALE_BITS = 40
# Bottom prime leaves ~10 bits of headroom above the scale for decoded values.
BOTTOM_PRIME_BITS = 50


@lru_cache(maxsize=None)
def default_chain(n: int, levels: int, scale_bits: int = DEFAULT_SCALE_BITS) -> tuple[int, ...]:
    """One large bottom prime followed by ``levels`` primes just above the scale."""
    bottom = find_primes(n, BOTTOM_PRIME_BITS, 1)
    middle = find_primes(n, scale_bits, levels, below=False, exclude=tuple(bottom))
    return tuple(bottom + middle)


@dataclass(frozen=True)
class HEParams:
    poly_modulus_degree: int
    modulus_chain: tuple[int, ...]
    scale: float = float(2 ** DEFAULT_SCALE_BITS)
    error_sigma: float = 3.2
    security_profile: str = "desk-secure"
    param_id: str = field(init=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "modulus_chain", tuple(int(q) for q in self.modulus_chain))
        n = self.poly_modulus_degree
        if not is_power_of_two(n):
            raise InvalidParamsError(f"poly_modulus_degree {n} must be a power of two")
        if len(self.modulus_chain) < 2:
            raise InvalidParamsError("modulus chain needs at least two primes")
        if len(set(self.modulus_chain)) != len(self.modulus_chain):
            raise InvalidParamsError("modulus chain primes must be distinct")
        if self.security_profile not in PROFILES:
            raise InvalidParamsError(f"unknown security profile {self.security_profile!r}")
        if not self.scale > 1:
            raise InvalidParamsError("scale must exceed 1")
        if self.error_sigma <= 0:
            raise InvalidParamsError("error_sigma must be positive")
        for q in self.modulus_chain:
            try:
                check_ntt_friendly(q, n)
            except UnsupportedModulusError as exc:
                raise InvalidParamsError(str(exc)) from exc
            if self.scale >= q:
                raise InvalidParamsError(f"scale {self.scale} is not below prime {q}")
        digest = hashlib.sha256(json.dumps(self.descriptor(), sort_keys=True).encode()).hexdigest()
        object.__setattr__(self, "param_id", digest[:16])

    @property
    def slot_count(self) -> int:
        return self.poly_modulus_degree // 2

    @property
    def max_level(self) -> int:
        return len(self.modulus_chain) - 1

    def descriptor(self) -> dict:
        return {
            "poly_modulus_degree": self.poly_modulus_degree,
            "modulus_chain": list(self.modulus_chain),
            "scale": self.scale,
            "error_sigma": self.error_sigma,
            "security_profile": self.security_profile,
        }

    @classmethod
    def from_descriptor(cls, d: dict) -> "HEParams":
        try:
            return cls(
                poly_modulus_degree=int(d["poly_modulus_degree"]),
                modulus_chain=tuple(int(q) for q in d["modulus_chain"]),
                scale=float(d["scale"]),
                error_sigma=float(d["error_sigma"]),
                security_profile=str(d["security_profile"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidParamsError(f"malformed parameter descriptor: {exc}") from exc

    @classmethod
    def desk(cls, poly_modulus_degree: int = 8192, levels: int = 5) -> "HEParams":
        """Default desk parameters: depth-5 chain at scale 2**40."""
        return cls(poly_modulus_degree, default_chain(poly_modulus_degree, levels))

    @classmethod
    def insecure_test(cls, poly_modulus_degree: int = 1024, levels: int = 2) -> "HEParams":
        """Small ring for fast tests. Offers no meaningful security."""
        return cls(poly_modulus_degree, default_chain(poly_modulus_degree, levels),
                   security_profile="insecure-test")


class Context:
    """Tables and constants derived from one HEParams, shared by every op."""

    def __init__(self, params: HEParams):
        self.params = params
        n = params.poly_modulus_degree
        self.n = n
        self.chain = params.modulus_chain
        self.ntt = RnsNttTable(n, self.chain)
        self.moduli = self.ntt.moduli
        # inv_last[l][j] = q_l^{-1} mod q_j for j < l, used by rescale.
        self.inv_last = {
            lvl: np.array([pow(self.chain[lvl], -1, self.chain[j]) for j in range(lvl)],
                          dtype=np.uint64)
            for lvl in range(1, len(self.chain))
        }
        # Slot j lives at the root psi^(5^j mod 2N); positions index odd powers 2k+1.
        m = 2 * n
        five = np.array([pow(5, j, m) for j in range(n // 2)], dtype=np.int64)
        self.slot_pos = (five - 1) // 2
        self.conj_pos = (m - five - 1) // 2
        self.twist = np.exp(1j * np.pi * np.arange(n) / n)

    def table(self, level: int) -> RnsNttTable:
        return self.ntt.prefix(level + 1)

    def modulus_product(self, level: int) -> int:
        out = 1
        for q in self.chain[: level + 1]:
            out *= q
        return out


_CONTEXTS: dict[str, Context] = {}


def context(params: HEParams) -> Context:
    ctx = _CONTEXTS.get(params.param_id)
    if ctx is None:
        ctx = _CONTEXTS[params.param_id] = Context(params)
    return ctx
