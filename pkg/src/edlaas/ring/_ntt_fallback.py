"""Pure numpy implementation of the kernels in ``_ntt_core``.

Same signatures and in-place semantics as the compiled module. The modular
product uses a float64 quotient estimate, which is exact while every modulus
stays below 2**50 (operands are then exactly representable and the estimate
is off by at most one).
"""
import numpy as np

from ..errors import UnsupportedModulusError

MAX_MODULUS_BITS = 50


def _check(moduli):
    if int(np.max(moduli)) >= 1 << MAX_MODULUS_BITS:
        raise UnsupportedModulusError(
            f"numpy kernels need moduli below 2**{MAX_MODULUS_BITS}")


def _mulmod(a, b, q):
    """Broadcasting ``a * b mod q`` for reduced uint64 operands."""
    qf = q.astype(np.float64)
    quot = np.floor(a.astype(np.float64) * b.astype(np.float64) / qf).astype(np.uint64)
    r = (a * b - quot * q).view(np.int64)
    qi = q.view(np.int64)
    r = np.where(r < 0, r + qi, r)
    r = np.where(r >= qi, r - qi, r)
    return r.view(np.uint64)


def forward(a, roots, roots_shoup, moduli):
    _check(moduli)
    k, n = a.shape
    q = moduli.reshape(k, 1, 1)
    m, t = 1, n
    while m < n:
        t //= 2
        v = a.reshape(k, m, 2, t)
        u = v[:, :, 0, :].copy()
        w = _mulmod(v[:, :, 1, :], roots[:, m:2 * m, None], q)
        x = u + w
        v[:, :, 0, :] = np.where(x >= q, x - q, x)
        v[:, :, 1, :] = np.where(u >= w, u - w, u + q - w)
        m *= 2


def inverse(a, roots, roots_shoup, moduli, n_inv, n_inv_shoup):
    _check(moduli)
    k, n = a.shape
    q = moduli.reshape(k, 1, 1)
    m, t = n, 1
    while m > 1:
        h = m // 2
        v = a.reshape(k, h, 2, t)
        u = v[:, :, 0, :].copy()
        w = v[:, :, 1, :].copy()
        x = u + w
        v[:, :, 0, :] = np.where(x >= q, x - q, x)
        d = np.where(u >= w, u - w, u + q - w)
        v[:, :, 1, :] = _mulmod(d, roots[:, h:m, None], q)
        t *= 2
        m = h
    a[:] = _mulmod(a, n_inv[:, None], moduli[:, None])


def mul(a, b, moduli):
    _check(moduli)
    return _mulmod(a, b, moduli[:, None])


def mul_scalar(a, scalars, moduli):
    _check(moduli)
    return _mulmod(a, scalars[:, None], moduli[:, None])


def add(a, b, moduli):
    q = moduli[:, None]
    x = a + b
    return np.where(x >= q, x - q, x)


def sub(a, b, moduli):
    q = moduli[:, None]
    return np.where(a >= b, a - b, a + q - b)
