"""Exact arithmetic in Z_q[X]/(X^N + 1)."""
from . import kernels
from .ntt import NttTable, RnsNttTable, check_ntt_friendly, find_primes, ntt_table
from .poly import (
    RingPoly,
    ntt_forward,
    ntt_inverse,
    one_poly,
    poly_add,
    poly_mul,
    poly_negate,
    poly_sub,
    schoolbook_mul,
    zero_poly,
)
from .sampling import sample_error, sample_ternary, sample_uniform

__all__ = [
    "NttTable", "RnsNttTable", "RingPoly", "check_ntt_friendly", "find_primes", "kernels",
    "ntt_forward", "ntt_inverse", "ntt_table", "one_poly", "poly_add", "poly_mul",
    "poly_negate", "poly_sub", "sample_error", "sample_ternary", "sample_uniform",
    "schoolbook_mul", "zero_poly",
]
