import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import polynomial as npoly

from specpoly.poly import (MAX_DEGREE, BivariatePolynomial, DegreeOverflowError, PolyVec3,
                           UnivariatePolynomial, coeff_slices, from_slices, uni_derivative)

coef = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@st.composite
def bivariates(draw, max_degree=4):
    d = draw(st.integers(0, max_degree))
    c = np.zeros((d + 1, d + 1))
    for i in range(d + 1):
        for j in range(d + 1 - i):
            c[i, j] = draw(coef)
    return BivariatePolynomial(c)


points = st.tuples(st.floats(-1, 1), st.floats(-1, 1))


def _ref(p, u, v):
    return npoly.polyval2d(u, v, p.coeffs)


@settings(max_examples=60, deadline=None)
@given(bivariates(), bivariates(), points)
def test_ring_operations_match_numpy(p, q, uv):
    u, v = uv
    pv, qv = _ref(p, u, v), _ref(q, u, v)
    scale = 1.0 + abs(pv) * abs(qv) + abs(pv) + abs(qv)
    assert abs((p * q)(u, v) - pv * qv) <= 1e-12 * scale * 100
    assert abs((p + q)(u, v) - (pv + qv)) <= 1e-12 * scale
    assert abs((p - q)(u, v) - (pv - qv)) <= 1e-12 * scale


@settings(max_examples=40, deadline=None)
@given(bivariates(), points)
def test_partials_and_slices(p, uv):
    u, v = uv
    du = _ref(BivariatePolynomial(npoly.polyder(p.coeffs, axis=0)), u, v)
    dv = _ref(BivariatePolynomial(npoly.polyder(p.coeffs, axis=1)), u, v)
    tol = 1e-10 * (1 + np.abs(p.coeffs).sum())
    assert abs(p.partial_u()(u, v) - du) <= tol
    assert abs(p.partial_v()(u, v) - dv) <= tol
    assert abs(p.slice_at_v(v)(u) - _ref(p, u, v)) <= tol
    assert abs(p.slice_at_u(u)(v) - _ref(p, u, v)) <= tol


@settings(max_examples=40, deadline=None)
@given(bivariates())
def test_coefficient_slices_roundtrip(p):
    assert from_slices(coeff_slices(p)) == p


def test_triangular_storage_trims_degree():
    p = BivariatePolynomial([[1.0, 2.0, 0.0], [3.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    assert p.degree == 1
    assert p.coeffs.shape == (2, 2)
    assert (p.deg_u, p.deg_v) == (1, 1)
    assert p.monomials() == [((0, 0), 1.0), ((1, 0), 3.0), ((0, 1), 2.0)]


def test_coefficients_are_immutable():
    p = BivariatePolynomial([[1.0, 2.0], [3.0, 0.0]])
    with pytest.raises(ValueError):
        p.coeffs[0, 0] = 5.0


def test_degree_cap():
    big = BivariatePolynomial.from_monomials({(MAX_DEGREE // 2 + 1, 0): 1.0})
    with pytest.raises(DegreeOverflowError):
        big * big
    with pytest.raises(DegreeOverflowError):
        UnivariatePolynomial(np.ones(MAX_DEGREE + 2))


def test_univariate_product_and_derivative():
    a = UnivariatePolynomial([1.0, -2.0, 0.5])
    b = UnivariatePolynomial([0.0, 3.0])
    np.testing.assert_allclose((a * b).coeffs, npoly.polymul(a.coeffs, b.coeffs))
    np.testing.assert_allclose(uni_derivative(a).coeffs, [-2.0, 1.0])
    assert UnivariatePolynomial([0.0, 0.0]).is_zero()


def test_vector_algebra_matches_numpy_cross():
    rng = np.random.default_rng(3)
    a = PolyVec3.linear(rng.normal(size=3), rng.normal(size=3), rng.normal(size=3))
    b = PolyVec3.linear(rng.normal(size=3), rng.normal(size=3), rng.normal(size=3))
    u, v = 0.3, -0.7

    def at(x):
        return np.array([c(u, v) for c in x.components()])

    np.testing.assert_allclose(at(a.cross(b)), np.cross(at(a), at(b)), atol=1e-12)
    assert abs(a.dot(b)(u, v) - at(a) @ at(b)) < 1e-12
    assert a.cross(b).degree == 2
