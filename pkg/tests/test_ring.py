import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edlaas.errors import ParameterMismatchError, UnsupportedModulusError
from edlaas.ring import (
    RingPoly,
    RnsNttTable,
    check_ntt_friendly,
    find_primes,
    kernels,
    ntt_forward,
    ntt_inverse,
    ntt_table,
    one_poly,
    poly_add,
    poly_mul,
    poly_negate,
    poly_sub,
    sample_error,
    sample_ternary,
    sample_uniform,
    schoolbook_mul,
    zero_poly,
)
from edlaas.ring.sampling import gaussian_ints, to_rns

IMPLS = list(kernels.available().items())


def test_worked_product():
    a = RingPoly.from_ints([1, 2], 17)
    b = RingPoly.from_ints([3, 4], 17)
    assert poly_mul(a, b).tolist() == [12, 10]


def test_wraparound_sign():
    # X * X = X^2 = -1 in Z_17[X]/(X^2 + 1)
    x = RingPoly.from_ints([0, 1], 17)
    assert poly_mul(x, x).tolist() == [16, 0]


def test_multiplicative_identity():
    a = RingPoly.from_ints([5, 7, 11, 13], 97)
    assert poly_mul(a, one_poly(4, 97)) == a
    assert poly_mul(a, zero_poly(4, 97)) == zero_poly(4, 97)


@pytest.mark.parametrize("name,impl", IMPLS)
@pytest.mark.parametrize("n,q", [(2, 17), (4, 17), (8, 17), (16, 97), (64, 257)])
def test_ntt_matches_schoolbook(name, impl, n, q):
    rng = np.random.default_rng(n * q)
    for _ in range(50):
        a = RingPoly.from_ints(rng.integers(0, q, n), q)
        b = RingPoly.from_ints(rng.integers(0, q, n), q)
        assert poly_mul(a, b, impl) == schoolbook_mul(a, b)


@pytest.mark.parametrize("name,impl", IMPLS)
def test_ntt_roundtrip(name, impl):
    q = find_primes(1024, 40, 1)[0]
    table = ntt_table(1024, q)
    a = sample_uniform(1024, q, np.random.default_rng(0))
    assert ntt_inverse(ntt_forward(a, table, impl), table, impl) == a


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([2, 4, 8, 16]), st.data())
def test_ring_laws(n, data):
    q = 97
    coeffs = st.lists(st.integers(0, q - 1), min_size=n, max_size=n)
    a, b, c = (RingPoly.from_ints(data.draw(coeffs), q) for _ in range(3))
    assert poly_add(a, b) == poly_add(b, a)
    assert poly_mul(a, b) == poly_mul(b, a)
    assert poly_mul(a, poly_add(b, c)) == poly_add(poly_mul(a, b), poly_mul(a, c))
    assert poly_sub(a, a) == zero_poly(n, q)
    assert poly_add(a, poly_negate(a)) == zero_poly(n, q)
    assert poly_mul(poly_mul(a, b), c) == poly_mul(a, poly_mul(b, c))


def test_ring_mismatch():
    a = RingPoly.from_ints([1, 2], 17)
    b = RingPoly.from_ints([1, 2, 3, 4], 17)
    with pytest.raises(ParameterMismatchError):
        poly_add(a, b)
    with pytest.raises(ParameterMismatchError):
        poly_mul(a, RingPoly.from_ints([1, 2], 97))


@pytest.mark.parametrize("q,n", [(19, 4), (15, 4), (17, 3), (17, 1)])
def test_not_ntt_friendly(q, n):
    with pytest.raises(UnsupportedModulusError):
        check_ntt_friendly(q, n)


def test_modulus_word_limit():
    with pytest.raises(UnsupportedModulusError):
        check_ntt_friendly((1 << 62) + 1, 2)


def test_ntt_unfriendly_product_rejected():
    a = RingPoly.from_ints([1, 2, 3, 4], 19)
    with pytest.raises(UnsupportedModulusError):
        poly_mul(a, a)


def test_find_primes():
    n = 4096
    below = find_primes(n, 40, 3)
    above = find_primes(n, 40, 3, below=False)
    for q in below + above:
        check_ntt_friendly(q, n)
    assert all(q < 1 << 40 for q in below)
    assert all(q > 1 << 40 for q in above)
    assert len(set(below + above)) == 6
    assert find_primes(n, 40, 2, exclude=(below[0],))[0] == below[1]


def test_rns_table_prefix_and_shape():
    moduli = find_primes(64, 30, 3)
    t = RnsNttTable(64, moduli)
    assert len(t) == 3
    assert list(t.prefix(2).moduli) == moduli[:2]
    with pytest.raises(Exception):
        t.forward(np.zeros((2, 64), dtype=np.uint64))


def test_to_rns_negative_values():
    moduli = [17, 97]
    r = to_rns(np.array([-1, 0, 5], dtype=np.int64), moduli)
    assert r.tolist() == [[16, 0, 5], [96, 0, 5]]


def test_samplers():
    rng = np.random.default_rng(7)
    q = 97
    t = sample_ternary(4096, q, rng).tolist()
    assert set(t) <= {0, 1, q - 1}
    e = gaussian_ints(100_000, 3.2, rng)
    assert abs(e.std() - 3.2) < 0.05
    assert np.max(np.abs(e)) <= 6 * 3.2
    u = np.array(sample_uniform(4096, q, rng).tolist())
    assert u.min() >= 0 and u.max() < q
    assert abs(u.mean() - (q - 1) / 2) < 2
    err = sample_error(64, q, 3.2, rng)
    assert err.degree_n == 64


def test_ringpoly_rejects_unreduced():
    with pytest.raises(ValueError):
        RingPoly(np.array([17, 0], dtype=np.uint64), 17)
