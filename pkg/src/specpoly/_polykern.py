"""Array kernels for dense polynomial arithmetic.

Bivariate polynomials are square float64 arrays ``c`` of shape ``(D+1, D+1)``
with ``c[i, j]`` the coefficient of ``u**i * v**j``; entries with ``i + j > D``
are zero. ``D`` is a capacity, the true degree may be lower. A vector of
bivariate polynomials stacks three such grids into shape ``(3, D+1, D+1)``.
Univariate polynomials are 1-D arrays in ascending power order.
"""

import numpy as np
from numba import njit

# ---------------------------------------------------------------- univariate


@njit(cache=True)
def udeg(p):
    for k in range(p.shape[0] - 1, -1, -1):
        if p[k] != 0.0:
            return k
    return 0


@njit(cache=True)
def utrim(p):
    return p[: udeg(p) + 1].copy()


@njit(cache=True)
def ueval(p, x):
    acc = 0.0
    for k in range(p.shape[0] - 1, -1, -1):
        acc = acc * x + p[k]
    return acc


@njit(cache=True)
def umul(p, q):
    dp = udeg(p)
    dq = udeg(q)
    out = np.zeros(dp + dq + 1)
    for i in range(dp + 1):
        c = p[i]
        if c == 0.0:
            continue
        for j in range(dq + 1):
            out[i + j] += c * q[j]
    return out


@njit(cache=True)
def umul_into(out, p, q, sign):
    # out += sign * p * q, caller guarantees capacity
    for i in range(p.shape[0]):
        c = p[i]
        if c == 0.0:
            continue
        c *= sign
        for j in range(q.shape[0]):
            out[i + j] += c * q[j]


@njit(cache=True)
def uadd(p, q):
    n = max(p.shape[0], q.shape[0])
    out = np.zeros(n)
    out[: p.shape[0]] += p
    out[: q.shape[0]] += q
    return out


@njit(cache=True)
def usub(p, q):
    n = max(p.shape[0], q.shape[0])
    out = np.zeros(n)
    out[: p.shape[0]] += p
    out[: q.shape[0]] -= q
    return out


@njit(cache=True)
def uderiv(p):
    if p.shape[0] <= 1:
        return np.zeros(1)
    out = np.empty(p.shape[0] - 1)
    for k in range(1, p.shape[0]):
        out[k - 1] = k * p[k]
    return out


@njit(cache=True)
def umaxabs(p):
    m = 0.0
    for k in range(p.shape[0]):
        a = abs(p[k])
        if a > m:
            m = a
    return m


# ----------------------------------------------------------------- bivariate


@njit(cache=True)
def bdeg(c):
    # total degree of the nonzero support
    n = c.shape[0]
    for s in range(n - 1, -1, -1):
        for i in range(s + 1):
            if c[i, s - i] != 0.0:
                return s
    return 0


@njit(cache=True)
def bdeg_u(c):
    for i in range(c.shape[0] - 1, -1, -1):
        for j in range(c.shape[1]):
            if c[i, j] != 0.0:
                return i
    return 0


@njit(cache=True)
def bdeg_v(c):
    for j in range(c.shape[1] - 1, -1, -1):
        for i in range(c.shape[0]):
            if c[i, j] != 0.0:
                return j
    return 0


@njit(cache=True)
def btrim(c):
    d = bdeg(c)
    return c[: d + 1, : d + 1].copy()


@njit(cache=True)
def bconst(x):
    out = np.zeros((1, 1))
    out[0, 0] = x
    return out


@njit(cache=True)
def badd(a, b):
    n = max(a.shape[0], b.shape[0])
    out = np.zeros((n, n))
    out[: a.shape[0], : a.shape[1]] += a
    out[: b.shape[0], : b.shape[1]] += b
    return out


@njit(cache=True)
def bsub(a, b):
    n = max(a.shape[0], b.shape[0])
    out = np.zeros((n, n))
    out[: a.shape[0], : a.shape[1]] += a
    out[: b.shape[0], : b.shape[1]] -= b
    return out


@njit(cache=True)
def bscale(a, s):
    return a * s


@njit(cache=True)
def bmul(a, b):
    da = a.shape[0] - 1
    db = b.shape[0] - 1
    out = np.zeros((da + db + 1, da + db + 1))
    for i in range(da + 1):
        for j in range(da + 1 - i):
            c = a[i, j]
            if c == 0.0:
                continue
            for k in range(db + 1):
                for l in range(db + 1 - k):
                    out[i + k, j + l] += c * b[k, l]
    return out


@njit(cache=True)
def beval(c, u, v):
    # Horner in u over Horner-in-v rows
    n = c.shape[0]
    acc = 0.0
    for i in range(n - 1, -1, -1):
        row = 0.0
        for j in range(n - 1 - i, -1, -1):
            row = row * v + c[i, j]
        acc = acc * u + row
    return acc


@njit(cache=True)
def bgrad(c, u, v):
    """Value and partial derivatives at (u, v)."""
    n = c.shape[0]
    f = 0.0
    fu = 0.0
    fv = 0.0
    upow = np.empty(n)
    vpow = np.empty(n)
    upow[0] = 1.0
    vpow[0] = 1.0
    for k in range(1, n):
        upow[k] = upow[k - 1] * u
        vpow[k] = vpow[k - 1] * v
    for i in range(n):
        for j in range(n - i):
            x = c[i, j]
            if x == 0.0:
                continue
            f += x * upow[i] * vpow[j]
            if i > 0:
                fu += i * x * upow[i - 1] * vpow[j]
            if j > 0:
                fv += j * x * upow[i] * vpow[j - 1]
    return f, fu, fv


@njit(cache=True)
def bslice_at_v(c, v):
    """Univariate polynomial in u obtained by fixing v."""
    n = c.shape[0]
    out = np.zeros(n)
    for i in range(n):
        row = 0.0
        for j in range(c.shape[1] - 1, -1, -1):
            row = row * v + c[i, j]
        out[i] = row
    return out


@njit(cache=True)
def bslice_at_u(c, u):
    n = c.shape[0]
    out = np.zeros(c.shape[1])
    for j in range(c.shape[1]):
        col = 0.0
        for i in range(n - 1, -1, -1):
            col = col * u + c[i, j]
        out[j] = col
    return out


@njit(cache=True)
def bmaxabs(c):
    m = 0.0
    for i in range(c.shape[0]):
        for j in range(c.shape[1]):
            a = abs(c[i, j])
            if a > m:
                m = a
    return m


# ------------------------------------------------------------------ vectors


@njit(cache=True)
def vconst(x):
    out = np.zeros((3, 1, 1))
    for k in range(3):
        out[k, 0, 0] = x[k]
    return out


@njit(cache=True)
def vlinear(base, du, dv):
    """base + u*du + v*dv as a degree-1 vector polynomial."""
    out = np.zeros((3, 2, 2))
    for k in range(3):
        out[k, 0, 0] = base[k]
        out[k, 1, 0] = du[k]
        out[k, 0, 1] = dv[k]
    return out


@njit(cache=True)
def vadd(a, b):
    n = max(a.shape[1], b.shape[1])
    out = np.zeros((3, n, n))
    out[:, : a.shape[1], : a.shape[2]] += a
    out[:, : b.shape[1], : b.shape[2]] += b
    return out


@njit(cache=True)
def vsub(a, b):
    n = max(a.shape[1], b.shape[1])
    out = np.zeros((3, n, n))
    out[:, : a.shape[1], : a.shape[2]] += a
    out[:, : b.shape[1], : b.shape[2]] -= b
    return out


@njit(cache=True)
def vscale(a, s):
    """Vector polynomial times scalar polynomial."""
    da = a.shape[1] - 1
    ds = s.shape[0] - 1
    out = np.zeros((3, da + ds + 1, da + ds + 1))
    for k in range(3):
        out[k] = bmul(a[k], s)
    return out


@njit(cache=True)
def vdot(a, b):
    out = bmul(a[0], b[0])
    out += bmul(a[1], b[1])
    out += bmul(a[2], b[2])
    return out


@njit(cache=True)
def vcross(a, b):
    da = a.shape[1] - 1
    db = b.shape[1] - 1
    n = da + db + 1
    out = np.zeros((3, n, n))
    out[0] = bmul(a[1], b[2]) - bmul(a[2], b[1])
    out[1] = bmul(a[2], b[0]) - bmul(a[0], b[2])
    out[2] = bmul(a[0], b[1]) - bmul(a[1], b[0])
    return out


@njit(cache=True)
def vdot_const(a, x):
    """Dot product of a vector polynomial with a constant 3-vector."""
    return a[0] * x[0] + a[1] * x[1] + a[2] * x[2]


@njit(cache=True)
def vcross_const(a, x):
    out = np.empty_like(a)
    out[0] = a[1] * x[2] - a[2] * x[1]
    out[1] = a[2] * x[0] - a[0] * x[2]
    out[2] = a[0] * x[1] - a[1] * x[0]
    return out


@njit(cache=True)
def veval(a, u, v):
    out = np.empty(3)
    for k in range(3):
        out[k] = beval(a[k], u, v)
    return out
