"""Hidden-variable elimination of u through Bezout and Sylvester resultant matrices.

A system ``a(u, v) = b(u, v) = 0`` is viewed as two polynomials in ``u``
whose coefficients are univariate polynomials in ``v`` (the hidden variable).
Common roots ``(u*, v*)`` make the resultant matrix ``R(v*)`` singular.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _polykern as K
from .poly import BivariatePolynomial, UnivariatePolynomial, coeff_slices

EXPAND_CAP = 8


class ResultantError(ValueError):
    pass


@njit(cache=True)
def bezout_kernel(a, b):
    """Bezout matrix of square coefficient grids ``a``, ``b`` as an (n, n, m) array.

    ``R[i, j, :]`` holds the ascending coefficients in v of entry (i, j).
    Built with the recurrence ``R[i, j] = M(i, j+1) + R[i-1, j+1]`` where
    ``M(p, q) = a_p b_q - b_p a_q``, which sums the same terms as the
    closed form ``sum_k M(i-k, j+1+k)``.
    """
    n = max(K.bdeg_u(a), K.bdeg_u(b))
    m = K.bdeg_v(a) + K.bdeg_v(b) + 1
    # pad slices to a common length
    la = a.shape[1]
    lb = b.shape[1]
    sa = np.zeros((n + 1, la))
    sb = np.zeros((n + 1, lb))
    for i in range(min(n + 1, a.shape[0])):
        sa[i] = a[i]
    for i in range(min(n + 1, b.shape[0])):
        sb[i] = b[i]
    out = np.zeros((n, n, max(m, la + lb - 1)))
    # upper triangle only, then mirror, so the symmetry is entry-exact
    for i in range(n):
        for j in range(i, n):
            K.umul_into(out[i, j], sa[i], sb[j + 1], 1.0)
            K.umul_into(out[i, j], sb[i], sa[j + 1], -1.0)
            if i > 0 and j + 1 < n:
                out[i, j] += out[i - 1, j + 1]
    for i in range(n):
        for j in range(i):
            out[i, j] = out[j, i]
    return out[:, :, :m].copy()


@njit(cache=True)
def _popcount(x):
    c = 0
    while x:
        x &= x - 1
        c += 1
    return c


@njit(cache=True)
def laplace_det_kernel(R, dmax):
    """det R(v) truncated to degree ``dmax`` by cofactor expansion over column subsets."""
    n = R.shape[0]
    L = dmax + 1
    m = R.shape[2]
    full = (1 << n) - 1
    memo = np.zeros((full + 1, L))
    memo[0, 0] = 1.0
    tmp = np.zeros(L)
    for mask in range(1, full + 1):
        r = _popcount(mask)
        row = r - 1
        pos = 0
        acc = memo[mask]
        for c in range(n):
            if not (mask >> c) & 1:
                continue
            sign = 1.0 if (row + pos) % 2 == 0 else -1.0
            pos += 1
            sub = memo[mask ^ (1 << c)]
            ent = R[row, c]
            tmp[:] = 0.0
            for p in range(L):
                x = sub[p]
                if x == 0.0:
                    continue
                top = min(m, L - p)
                for q in range(top):
                    tmp[p + q] += x * ent[q]
            for p in range(L):
                acc[p] += sign * tmp[p]
    return memo[full].copy()


@njit(cache=True)
def eval_matrix(R, v):
    n = R.shape[0]
    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = K.ueval(R[i, j], v)
    return out


@njit(cache=True)
def row_scales(M):
    n = M.shape[0]
    s = np.ones(n)
    for i in range(n):
        mx = 0.0
        for j in range(n):
            a = abs(M[i, j])
            if a > mx:
                mx = a
        if mx > 0.0:
            s[i] = mx
    return s


@njit(cache=True)
def det_scaled(M, s):
    """(sign, log|det|) of diag(1/s) M by partial pivoting; sign 0 when singular.

    Pivot: largest magnitude, lowest row index on ties.
    """
    n = M.shape[0]
    A = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            A[i, j] = M[i, j] / s[i]
    sign = 1.0
    logabs = 0.0
    for k in range(n):
        p = k
        best = abs(A[k, k])
        for i in range(k + 1, n):
            x = abs(A[i, k])
            if x > best:
                best = x
                p = i
        if best == 0.0:
            return 0.0, -np.inf
        if p != k:
            for j in range(n):
                t = A[k, j]
                A[k, j] = A[p, j]
                A[p, j] = t
            sign = -sign
        piv = A[k, k]
        if piv < 0.0:
            sign = -sign
        logabs += math.log(abs(piv))
        for i in range(k + 1, n):
            f = A[i, k] / piv
            if f != 0.0:
                for j in range(k + 1, n):
                    A[i, j] -= f * A[k, j]
    return sign, logabs


@njit(cache=True)
def det_eval_kernel(R, v):
    M = eval_matrix(R, v)
    s = row_scales(M)
    sign, logabs = det_scaled(M, s)
    if sign == 0.0:
        return 0.0
    for i in range(s.shape[0]):
        logabs += math.log(s[i])
    return sign * math.exp(logabs)


def det_degree_bound(a: BivariatePolynomial, b: BivariatePolynomial, n: int) -> int:
    """Degree bound of det R(v) from total degrees: ``n * (deg a + deg b - n)``.

    Entry (i, j) has degree at most ``deg a + deg b - i - j - 1`` because the
    u**i slice of a polynomial of total degree d has v-degree at most d - i.
    """
    return max(0, n * (a.degree + b.degree - n))


@dataclass(frozen=True, eq=False)
class ResultantMatrix:
    """Bezout matrix with polynomial entries in the hidden variable v.

    ``entries[i, j, :]`` are the ascending coefficients of entry (i, j).
    ``det_degree`` is the a priori degree bound of the determinant.
    """

    entries: np.ndarray
    cond_scale: float = 1.0
    det_degree: int | None = None

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def entry(self, i: int, j: int) -> UnivariatePolynomial:
        return UnivariatePolynomial._raw(np.array(self.entries[i, j]))

    def __call__(self, v: float) -> np.ndarray:
        return eval_matrix(self.entries, float(v))

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.entries, self.entries.transpose(1, 0, 2)))

    def dump(self) -> str:
        rows = []
        for i in range(self.n):
            for j in range(self.n):
                rows.append(f"{i} {j} " + " ".join(repr(float(c)) for c in self.entries[i, j]))
        return "\n".join(rows)


def _check_pair(a, b):
    if not isinstance(a, BivariatePolynomial) or not isinstance(b, BivariatePolynomial):
        raise TypeError("expected BivariatePolynomial inputs")


def bezout_matrix(a: BivariatePolynomial, b: BivariatePolynomial, condition: bool = True) -> ResultantMatrix:
    """Bezout resultant matrix eliminating u.

    With ``condition`` the inputs are first scaled to unit max coefficient;
    ``cond_scale`` records the product of the two scale factors.
    """
    _check_pair(a, b)
    n = max(a.deg_u, b.deg_u)
    if n == 0:
        raise ResultantError("neither polynomial depends on u; swap variables and re-pose")
    ca = cb = 1.0
    if condition:
        ca, cb = a.max_abs(), b.max_abs()
        if ca == 0.0 or cb == 0.0:
            raise ResultantError("zero polynomial in system")
        a, b = a.normalized(), b.normalized()
    R = bezout_kernel(a.coeffs, b.coeffs)
    return ResultantMatrix(R, 1.0 / (ca * cb), det_degree_bound(a, b, n))


def sylvester_matrix(a: BivariatePolynomial, b: BivariatePolynomial) -> list[list[UnivariatePolynomial]]:
    """Sylvester matrix in u of order ``deg_u a + deg_u b`` (entries in v)."""
    _check_pair(a, b)
    sa = coeff_slices(a)[::-1]  # descending powers of u
    sb = coeff_slices(b)[::-1]
    p, q = len(sa) - 1, len(sb) - 1
    size = p + q
    if size == 0:
        raise ResultantError("neither polynomial depends on u")
    zero = UnivariatePolynomial([0.0])
    M = [[zero] * size for _ in range(size)]
    for r in range(q):
        for k, c in enumerate(sa):
            M[r][r + k] = c
    for r in range(p):
        for k, c in enumerate(sb):
            M[q + r][r + k] = c
    return M


def poly_matrix_array(M) -> np.ndarray:
    """Pack a list-of-lists of UnivariatePolynomial into an (n, n, m) coefficient array."""
    n = len(M)
    m = max(e.coeffs.size for row in M for e in row)
    out = np.zeros((n, n, m))
    for i, row in enumerate(M):
        for j, e in enumerate(row):
            out[i, j, : e.coeffs.size] = e.coeffs
    return out


def expand_determinant(R, cap: int = EXPAND_CAP) -> UnivariatePolynomial:
    """Explicit coefficients of det R(v) by memoized Laplace expansion (n <= cap)."""
    ent = R.entries if isinstance(R, ResultantMatrix) else poly_matrix_array(R) if isinstance(R, list) else np.asarray(R, dtype=float)
    n = ent.shape[0]
    if n > cap:
        raise ResultantError(f"order {n} exceeds the expansion cap {cap}; use det_eval")
    full = n * (ent.shape[2] - 1)
    dmax = full
    if isinstance(R, ResultantMatrix) and R.det_degree is not None:
        dmax = min(full, R.det_degree)
    return UnivariatePolynomial._raw(laplace_det_kernel(np.ascontiguousarray(ent), dmax))


def det_eval(R, v: float) -> float:
    """det R(v) by row-equilibrated Gaussian elimination with partial pivoting."""
    ent = R.entries if isinstance(R, ResultantMatrix) else poly_matrix_array(R) if isinstance(R, list) else np.asarray(R, dtype=float)
    return det_eval_kernel(np.ascontiguousarray(ent), float(v))
