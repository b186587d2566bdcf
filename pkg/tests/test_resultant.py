import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from specpoly.poly import BivariatePolynomial
from specpoly.resultant import (ResultantError, bezout_matrix, det_eval, expand_determinant,
                                poly_matrix_array, sylvester_matrix)
from specpoly.verify import bezout_sylvester_agreement, planted_system, random_22_system

U, V = sp.symbols("u v")


def _to_sympy(p: BivariatePolynomial):
    return sum(sp.Rational(c) * U**i * V**j for (i, j), c in p.monomials())


def _exact_resultant(a, b) -> np.ndarray:
    r = sp.Poly(sp.resultant(_to_sympy(a), _to_sympy(b), U), V)
    return np.array([float(c) for c in r.all_coeffs()[::-1]])


def _proportional(x: np.ndarray, y: np.ndarray) -> float:
    n = max(x.size, y.size)
    x, y = np.pad(x, (0, n - x.size)), np.pad(y, (0, n - y.size))
    x, y = x / np.max(np.abs(x)), y / np.max(np.abs(y))
    return min(np.max(np.abs(x - y)), np.max(np.abs(x + y)))


def _int_biv(rng, d):
    c = np.zeros((d + 1, d + 1))
    for i in range(d + 1):
        for j in range(d + 1 - i):
            c[i, j] = int(rng.integers(-5, 6))
    c[d, 0] = c[d, 0] or 1.0  # keep the u-degree equal to d
    return BivariatePolynomial(c)


@pytest.mark.parametrize("seed", range(8))
def test_bezout_determinant_matches_exact_resultant(seed):
    # with equal u-degree, det Bezout = +-Res_u(a, b); compare up to scale
    rng = np.random.default_rng(seed)
    d = 1 + seed % 3
    a, b = _int_biv(rng, d), _int_biv(rng, d)
    det = expand_determinant(bezout_matrix(a, b, condition=False)).coeffs
    assert _proportional(det, _exact_resultant(a, b)) < 1e-10


def test_bezout_matrix_is_symmetric_and_small_case():
    # a = u - v, b = u + v - 1 share the root (1/2, 1/2)
    a = BivariatePolynomial.from_monomials({(1, 0): 1.0, (0, 1): -1.0})
    b = BivariatePolynomial.from_monomials({(1, 0): 1.0, (0, 1): 1.0, (0, 0): -1.0})
    R = bezout_matrix(a, b, condition=False)
    assert R.n == 1 and R.is_symmetric()
    np.testing.assert_allclose(R.entry(0, 0).coeffs, [1.0, -2.0])
    assert det_eval(R, 0.5) == 0.0


def test_sylvester_layout():
    a = BivariatePolynomial.from_monomials({(2, 0): 1.0, (0, 1): 1.0})
    b = BivariatePolynomial.from_monomials({(1, 0): 1.0, (0, 0): -2.0})
    M = sylvester_matrix(a, b)
    assert len(M) == 3
    arr = poly_matrix_array(M)
    # det = a(2, v) = 4 + v
    np.testing.assert_allclose(abs(np.linalg.det(arr[:, :, 0])), 4.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_planted_root_annihilates_determinant(seed):
    a, b, _u, v = planted_system(np.random.default_rng(seed))
    assert abs(det_eval(bezout_matrix(a, b), v)) < 1e-8


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bezout_and_sylvester_roots_agree(seed):
    pair = random_22_system(np.random.default_rng(seed))
    if pair is None or pair[0].deg_u != pair[1].deg_u:
        return
    assert bezout_sylvester_agreement(*pair) < 1e-6


def test_det_eval_agrees_with_expansion():
    rng = np.random.default_rng(11)
    a, b = _int_biv(rng, 3), _int_biv(rng, 3)
    R = bezout_matrix(a, b)
    p = expand_determinant(R)
    for v in np.linspace(0, 1, 7):
        assert det_eval(R, v) == pytest.approx(p(v), rel=1e-9, abs=1e-12)


def test_u_free_system_rejected():
    a = BivariatePolynomial.from_monomials({(0, 1): 1.0})
    with pytest.raises(ResultantError):
        bezout_matrix(a, a)
