import numpy as np
import pytest

from specpoly.sqrtfit import (CERT_POINTS, MAX_ERROR, SqrtApprox, SqrtFitError, default_sqrt_approx,
                              fit_sqrt_pieces)


def test_packaged_table_certifies():
    approx = default_sqrt_approx()
    err = approx.certify()
    assert err < MAX_ERROR
    x = np.linspace(0.0, 1.0, CERT_POINTS)
    assert np.max(np.abs(approx(x) - np.sqrt(x))) == pytest.approx(err)


def test_refit_matches_packaged_table():
    fresh = fit_sqrt_pieces()
    np.testing.assert_allclose(fresh.breaks, default_sqrt_approx().breaks)
    assert fresh.max_error() < MAX_ERROR


def test_text_roundtrip(tmp_path):
    approx = default_sqrt_approx()
    p = tmp_path / "t.txt"
    approx.save(p)
    back = SqrtApprox.load(p)
    np.testing.assert_array_equal(back.coeffs, approx.coeffs)
    np.testing.assert_array_equal(back.breaks, approx.breaks)


def test_pieces_are_contiguous_and_denominators_nonvanishing():
    approx = default_sqrt_approx()
    assert approx.breaks[0] == 0.0 and approx.breaks[-1] == 1.0
    for k in range(approx.n_pieces):
        c0, c1, d0, d1 = approx.piece(k)
        lo, hi = approx.breaks[k], approx.breaks[k + 1]
        q = d0 + d1 * np.array([lo, hi])
        assert np.all(q > 0) or np.all(q < 0)


def test_invalid_tables_rejected():
    with pytest.raises(ValueError):
        SqrtApprox([0.0, 0.5], [[0.0, 1.0, 1.0, 0.0]])
    with pytest.raises(ValueError):
        SqrtApprox([0.0, 1.0], [[0.0, 1.0, 1.0, -2.0]])
    crude = SqrtApprox([0.0, 1.0], [[0.0, 1.0, 1.0, 0.0]])
    with pytest.raises(SqrtFitError):
        crude.certify()
