"""Sigmoid and its cubic stand-in for encrypted evaluation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ckks.backend import RefCiphertext
from ..ckks.scheme import Ciphertext
from ..errors import UnsupportedOnEncryptedError

SIGMOID_APPROX_COEFFS = (0.5, 0.197, -0.004)
# Levels consumed on the encrypted path: x^2, x^3 and the coefficient products.
SIGMOID_APPROX_DEPTH = 3
KINDS = ("sigmoid_true", "sigmoid_approx")


@dataclass(frozen=True)
class ActivationSpec:
    kind: str = "sigmoid_approx"
    coefficients: tuple[float, float, float] = SIGMOID_APPROX_COEFFS

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown activation {self.kind!r}")
        if len(self.coefficients) != 3:
            raise ValueError("the approximation has exactly three coefficients")

    @property
    def depth(self) -> int:
        return SIGMOID_APPROX_DEPTH if self.kind == "sigmoid_approx" else 0

    def __call__(self, x):
        if self.kind == "sigmoid_true":
            return sigmoid_true(x)
        return sigmoid_approx_plain(x, self.coefficients)

    def derivative(self, pre_activation):
        """d(activation)/dx at the cached pre-activation values."""
        if self.kind == "sigmoid_true":
            return sigmoid_derivative(sigmoid_true(pre_activation), "sigmoid_true")
        return sigmoid_derivative(pre_activation, "sigmoid_approx", self.coefficients)


def _is_encrypted(x) -> bool:
    return isinstance(x, (Ciphertext, RefCiphertext))


def sigmoid_true(x):
    """1 / (1 + e^-x). Division has no homomorphic counterpart."""
    if _is_encrypted(x):
        raise UnsupportedOnEncryptedError("true sigmoid needs division; use sigmoid_approx")
    x = np.asarray(x, dtype=np.float64)
    # Split by sign so exp never overflows.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def sigmoid_approx_plain(x, coefficients=SIGMOID_APPROX_COEFFS):
    c0, c1, c3 = coefficients
    x = np.asarray(x, dtype=np.float64)
    out = c0 + c1 * x + c3 * x ** 3
    return out if out.ndim else float(out)


def sigmoid_approx(x, backend=None, coefficients=SIGMOID_APPROX_COEFFS):
    """Evaluate 0.5 + 0.197x - 0.004x^3 on plaintext or through ``backend``.

    The encrypted path consumes exactly three levels and lands at the
    parameter scale: the two coefficient products are encoded at whatever
    plaintext scale brings their rescaled output back to it.
    """
    if not _is_encrypted(x):
        return sigmoid_approx_plain(x, coefficients)
    if backend is None:
        raise ValueError("an encrypted input needs a backend")
    c0, c1, c3 = coefficients
    params = backend.params
    chain = params.modulus_chain
    target = params.scale

    x_sq = backend.multiply(x, x)
    x_cube = backend.multiply(x_sq, backend.mod_switch_to(x, x_sq.level))
    lvl = x_cube.level
    cubic = backend.multiply_plain(
        x_cube, backend.encode(c3, level=lvl, scale=target * chain[lvl] / x_cube.scale))
    x_low = backend.mod_switch_to(x, lvl)
    linear = backend.multiply_plain(
        x_low, backend.encode(c1, level=lvl, scale=target * chain[lvl] / x_low.scale))
    out = backend.add(cubic, linear)
    return backend.add_plain(out, backend.encode(c0, level=out.level, scale=out.scale))


def sigmoid_derivative(value, kind: str = "sigmoid_true", coefficients=SIGMOID_APPROX_COEFFS):
    """Derivative of the activation in use.

    ``sigmoid_true`` takes the activation value s and returns s(1 - s);
    ``sigmoid_approx`` takes the pre-activation x and returns c1 + 3 c3 x^2.
    """
    if _is_encrypted(value):
        raise UnsupportedOnEncryptedError("gradients are computed on plaintext only")
    v = np.asarray(value, dtype=np.float64)
    if kind == "sigmoid_true":
        out = (1.0 - v) * v
    elif kind == "sigmoid_approx":
        out = coefficients[1] + 3.0 * coefficients[2] * v ** 2
    else:
        raise ValueError(f"unknown activation {kind!r}")
    return out if out.ndim else float(out)


def approximation_bound(lo: float = -5.0, hi: float = 5.0, step: float = 0.01,
                        coefficients=SIGMOID_APPROX_COEFFS) -> tuple[float, float]:
    """Max |sigmoid - approximation| on a grid, and where it occurs."""
    count = int(round((hi - lo) / step)) + 1
    grid = lo + step * np.arange(count)
    dev = np.abs(sigmoid_true(grid) - sigmoid_approx_plain(grid, coefficients))
    i = int(np.argmax(dev))
    return float(dev[i]), float(grid[i])
