"""Seeded samplers for RLWE secrets, masks and noise.

All samplers take an explicit ``numpy.random.Generator``. The RNS variants
return a (len(moduli), n) uint64 array holding one small integer polynomial
reduced under every modulus, which is what CRT consistency requires.
"""
from __future__ import annotations

import numpy as np

from .poly import RingPoly

TAIL_CUT = 6.0


def _moduli(moduli) -> np.ndarray:
    return np.asarray(moduli, dtype=np.uint64).reshape(-1)


def to_rns(values: np.ndarray, moduli) -> np.ndarray:
    """Reduce signed int64 coefficients under each modulus."""
    m = _moduli(moduli).astype(np.int64)
    return np.mod(values.astype(np.int64)[None, :], m[:, None]).astype(np.uint64)


def uniform_rns(n: int, moduli, rng: np.random.Generator) -> np.ndarray:
    return np.stack([rng.integers(0, int(q), size=n, dtype=np.uint64) for q in _moduli(moduli)])


def ternary_ints(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(-1, 2, size=n, dtype=np.int64)


def gaussian_ints(n: int, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Rounded normal samples, rejecting anything beyond 6 sigma."""
    out = np.rint(rng.normal(0.0, sigma, size=n))
    bound = TAIL_CUT * sigma
    bad = np.abs(out) > bound
    while bad.any():
        out[bad] = np.rint(rng.normal(0.0, sigma, size=int(bad.sum())))
        bad = np.abs(out) > bound
    return out.astype(np.int64)


def sample_uniform(n: int, q: int, rng: np.random.Generator) -> RingPoly:
    return RingPoly(uniform_rns(n, [q], rng)[0], q)


def sample_ternary(n: int, q: int, rng: np.random.Generator) -> RingPoly:
    return RingPoly(to_rns(ternary_ints(n, rng), [q])[0], q)


def sample_error(n: int, q: int, sigma: float, rng: np.random.Generator) -> RingPoly:
    return RingPoly(to_rns(gaussian_ints(n, sigma, rng), [q])[0], q)
