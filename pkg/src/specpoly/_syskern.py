"""Array kernels that assemble the specular polynomial systems.

All vector arguments are (3, n, n) polynomial-vector grids (see ``_polykern``).
The fused builders at the bottom work on geometry that has already been
translated and scaled to O(1) so that degeneracy thresholds are absolute.
"""

import math

import numpy as np
from numba import njit

from ._polykern import (bdeg, bmaxabs, bmul, beval, vconst, vcross, vcross_const, vdot,
                        vdot_const, veval, vlinear, vscale, vsub)

DEGENERATE_REL = 1e-10

# basis candidates for the square form, in preference order
BASES = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]])


# ------------------------------------------------------------ formula kernels


@njit(cache=True)
def coplanarity_k(d_prev, x_prev, x_next, n):
    """(d_prev x (x_next - x_prev)) . n"""
    return vdot(vcross(d_prev, vsub(x_next, x_prev)), n)


@njit(cache=True)
def product_form_k(d_prev, d_next, n, t):
    """(d_prev . n)(d_next . t) + (d_prev . t)(d_next . n)"""
    x = bmul(vdot(d_prev, n), vdot(d_next, t))
    y = bmul(vdot(d_prev, t), vdot(d_next, n))
    return _sum2(x, y, 1.0)


@njit(cache=True)
def _sum2(x, y, sy):
    n = max(x.shape[0], y.shape[0])
    out = np.zeros((n, n))
    out[: x.shape[0], : x.shape[1]] += x
    out[: y.shape[0], : y.shape[1]] += sy * y
    return out


@njit(cache=True)
def square_form_k(d_prev, d_next, n, eta_prev, eta_next, basis):
    """eta_prev^2 |d_next|^2 ((d_prev x n).b)^2 - eta_next^2 |d_prev|^2 ((d_next x n).b)^2"""
    sp = vdot_const(vcross(d_prev, n), basis)
    sn = vdot_const(vcross(d_next, n), basis)
    t1 = bmul(vdot(d_next, d_next), bmul(sp, sp))
    t2 = bmul(vdot(d_prev, d_prev), bmul(sn, sn))
    return _sum2(t1 * (eta_prev * eta_prev), t2, -(eta_next * eta_next))


@njit(cache=True)
def reflect_k(d_prev, n):
    """-2 (d_prev . n) n + d_prev (n . n)"""
    a = vscale(n, vdot(d_prev, n))
    b = vscale(d_prev, vdot(n, n))
    m = max(a.shape[1], b.shape[1])
    out = np.zeros((3, m, m))
    out[:, : a.shape[1], : a.shape[2]] -= 2.0 * a
    out[:, : b.shape[1], : b.shape[2]] += b
    return out


@njit(cache=True)
def refract_k(d_prev, n, eta_ratio, C, sgn, c0, c1, q0, q1):
    """Refracted direction as (numerator vector, denominator polynomial).

    sqrt(beta) is replaced by sqrt(C) (c0 C + c1 beta) / (q0 C + q1 beta), the
    surrogate for sqrt(beta / C) scaled back, where
    beta = n^2 d^2 - eta'^2 (n^2 d^2 - (d.n)^2).
    """
    nn = vdot(n, n)
    dd = vdot(d_prev, d_prev)
    dn = vdot(d_prev, n)
    nndd = bmul(nn, dd)
    beta = _sum2(nndd * (1.0 - eta_ratio * eta_ratio), bmul(dn, dn), eta_ratio * eta_ratio)
    q = beta * q1
    q[0, 0] += q0 * C
    s = beta * (math.sqrt(C) * c1)
    s[0, 0] += math.sqrt(C) * c0 * C
    t1 = vscale(d_prev, nn)
    t2 = vscale(n, dn)
    m = max(t1.shape[1], t2.shape[1])
    base = np.zeros((3, m, m))
    base[:, : t1.shape[1], : t1.shape[2]] += eta_ratio * t1
    base[:, : t2.shape[1], : t2.shape[2]] -= eta_ratio * t2
    a = vscale(base, q)
    b = vscale(n, s)
    m = max(a.shape[1], b.shape[1])
    num = np.zeros((3, m, m))
    num[:, : a.shape[1], : a.shape[2]] += a
    num[:, : b.shape[1], : b.shape[2]] += sgn * b
    return num, q, beta


@njit(cache=True)
def map_k(d, x, p0, e1, e2):
    """Rational coordinate mapping of the ray (x, d) onto the plane of (p0, e1, e2): (kappa, ut, vt)."""
    de2 = vcross_const(d, e2)
    kappa = vdot_const(de2, e1)
    s = vsub(x, vconst(p0))
    ut = vdot(de2, s)
    vt = vdot(vcross_const(s, e1), d)
    return kappa, ut, vt


@njit(cache=True)
def _combine3(k, a, ua, b, vb, c):
    """k*a + ua*b + vb*c for scalar polynomials k, ua, vb and constant vectors a, b, c."""
    n = max(k.shape[0], max(ua.shape[0], vb.shape[0]))
    out = np.zeros((3, n, n))
    for i in range(3):
        out[i, : k.shape[0], : k.shape[1]] += a[i] * k
        out[i, : ua.shape[0], : ua.shape[1]] += b[i] * ua
        out[i, : vb.shape[0], : vb.shape[1]] += c[i] * vb
    return out


@njit(cache=True)
def _scaled_point(k, x):
    # k * x for scalar polynomial k and constant point x
    out = np.zeros((3, k.shape[0], k.shape[1]))
    for i in range(3):
        out[i] = x[i] * k
    return out


# ------------------------------------------------------------------- helpers


@njit(cache=True)
def _norm(v):
    return math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])


@njit(cache=True)
def _cross(a, b):
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


@njit(cache=True)
def _unit(v):
    n = _norm(v)
    if n == 0.0:
        return v * 0.0
    return v / n


@njit(cache=True)
def vmax(a):
    m = 0.0
    for k in range(3):
        x = bmaxabs(a[k])
        if x > m:
            m = x
    return m


@njit(cache=True)
def normal_field(P, N, face):
    """Interpolated normal polynomial (degree 1), or the constant plane normal."""
    if face:
        return vconst(_unit(N[0]))
    return vlinear(N[0], N[1] - N[0], N[2] - N[0])


@njit(cache=True)
def pick_tangent(nc, e1, e2, m, sel):
    """Tangent edge for the product form: 0 -> n x e1, 1 -> n x e2.

    With sel < 0, e1 is used unless n x e1 is nearly parallel to the
    incidence-plane normal m (then the form loses its information) and e2 is
    better.
    """
    if sel >= 0:
        return sel
    mu = _unit(m)
    c1 = abs(np.dot(_unit(_cross(nc, e1)), mu))
    c2 = abs(np.dot(_unit(_cross(nc, e2)), mu))
    if c1 > 0.9 and c2 < c1:
        return 1
    return 0


@njit(cache=True)
def pick_basis(m, sel):
    """Square-form basis index into BASES.

    With sel < 0: the first of x, z, y whose projection on the incidence
    normal is not small (|b.m| >= 0.25), otherwise the largest.
    """
    if sel >= 0:
        return sel
    mu = _unit(m)
    best = 0
    bv = -1.0
    for k in range(3):
        c = abs(np.dot(BASES[k], mu))
        if c >= 0.25:
            return k
        if c > bv:
            bv = c
            best = k
    return best


@njit(cache=True)
def is_degenerate(p, scale):
    return bmaxabs(p) <= DEGENERATE_REL * scale


# ----------------------------------------------------------- fused builders

# status codes
OK = 0
DEGENERATE_A = 1
DEGENERATE_B = 2
DEGENERATE_KAPPA = 3
TIR = 4


@njit(cache=True)
def one_bounce_kernel(x0, x2, P, N, face, refract, eta0, eta1, tsel, bsel):
    """System (a, b) for a single R or T vertex.

    Returns (a, b, choice, fallback, status). ``choice`` is the tangent index
    (reflection) or basis index (refraction); ``fallback`` is 1 when the
    coplanarity polynomial vanished and a second angular form replaced it.
    """
    p0 = P[0]
    e1 = P[1] - P[0]
    e2 = P[2] - P[0]
    n = normal_field(P, N, face)
    d0 = vlinear(p0 - x0, e1, e2)
    d1 = vlinear(x2 - p0, -e1, -e2)
    X0 = vconst(x0)
    X2 = vconst(x2)
    a = coplanarity_k(d0, X0, X2, n)
    scale_a = vmax(d0) * _norm(x2 - x0) * vmax(n)
    c = p0 + (e1 + e2) / 3.0
    nc = veval(n, 1.0 / 3.0, 1.0 / 3.0)
    m = _cross(c - x0, x2 - c)
    fallback = 0
    if refract:
        k = pick_basis(m, bsel)
        b = square_form_k(d0, d1, n, eta0, eta1, BASES[k])
        s = vmax(d0) * vmax(d1) * vmax(n)
        scale_b = s * s * max(eta0, eta1) ** 2
        if is_degenerate(b, scale_b) and bsel < 0:
            for kk in range(3):
                if kk != k:
                    bb = square_form_k(d0, d1, n, eta0, eta1, BASES[kk])
                    if not is_degenerate(bb, scale_b):
                        k = kk
                        b = bb
                        break
        if is_degenerate(b, scale_b):
            return a, b, k, fallback, DEGENERATE_B
        if is_degenerate(a, scale_a):
            fallback = 1
            for kk in range(3):
                if kk != k:
                    aa = square_form_k(d0, d1, n, eta0, eta1, BASES[kk])
                    if not is_degenerate(aa, scale_b):
                        return aa, b, k, fallback, OK
            return a, b, k, fallback, DEGENERATE_A
        return a, b, k, fallback, OK
    k = pick_tangent(nc, e1, e2, m, tsel)
    edge = e1 if k == 0 else e2
    t = vcross_const(n, edge)
    b = product_form_k(d0, d1, n, t)
    scale_b = vmax(d0) * vmax(d1) * vmax(n) ** 2 * _norm(edge)
    if is_degenerate(b, scale_b) and tsel < 0:
        k = 1 - k
        edge = e1 if k == 0 else e2
        t = vcross_const(n, edge)
        b = product_form_k(d0, d1, n, t)
    if is_degenerate(b, scale_b):
        return a, b, k, fallback, DEGENERATE_B
    if is_degenerate(a, scale_a):
        # coplanarity carries no information (e.g. x2 - x0 parallel to a face
        # normal); use the product form with the second tangent n x t
        fallback = 1
        t2 = vcross(n, t)
        aa = product_form_k(d0, d1, n, t2)
        if is_degenerate(aa, scale_b * vmax(n)):
            return a, b, k, fallback, DEGENERATE_A
        return aa, b, k, fallback, OK
    return a, b, k, fallback, OK


@njit(cache=True)
def first_direction(d0, n1, refract, eta_ratio, C, sgn, sq):
    """Scaled outgoing direction at the first vertex (numerator only for refraction)."""
    if not refract:
        return reflect_k(d0, n1)
    num, _q, _beta = refract_k(d0, n1, eta_ratio, C, sgn, sq[0], sq[1], sq[2], sq[3])
    return num


@njit(cache=True)
def two_bounce_kernel(x0, x3, P1, N1, face1, P2, N2, face2, refract1, refract2,
                      eta_ratio1, C, sgn, sq, eta2p, eta2n, tsel, bsel):
    """System (a, b) in (u1, v1) for two vertices via the rational coordinate mapping.

    Returns (a, b, kappa, ut, vt, choice, status).
    """
    p10 = P1[0]
    e11 = P1[1] - P1[0]
    e12 = P1[2] - P1[0]
    x1 = vlinear(p10, e11, e12)
    n1 = normal_field(P1, N1, face1)
    d0 = vlinear(p10 - x0, e11, e12)
    dt = first_direction(d0, n1, refract1, eta_ratio1, C, sgn, sq)
    p20 = P2[0]
    e21 = P2[1] - P2[0]
    e22 = P2[2] - P2[0]
    kappa, ut, vt = map_k(dt, x1, p20, e21, e22)
    scale_k = vmax(dt) * _norm(e21) * _norm(e22)
    if is_degenerate(kappa, scale_k):
        z = np.zeros((1, 1))
        return z, z, kappa, ut, vt, 0, DEGENERATE_KAPPA
    X2 = _combine3(kappa, p20, ut, e21, vt, e22)
    if face2:
        N2p = vconst(_unit(N2[0]))
    else:
        N2p = _combine3(kappa, N2[0], ut, N2[1] - N2[0], vt, N2[2] - N2[0])
    D2 = vsub(_scaled_point(kappa, x3), X2)
    a = coplanarity_k(dt, x1, vconst(x3), N2p)
    # incidence plane at vertex 2, evaluated at the first triangle's centroid
    th = 1.0 / 3.0
    kc = beval(kappa, th, th)
    x2c = veval(X2, th, th) / kc if kc != 0.0 else veval(X2, th, th)
    x1c = veval(x1, th, th)
    m = _cross(x2c - x1c, x3 - x2c)
    n2c = veval(N2p, th, th)
    if refract2:
        k = pick_basis(m, bsel)
        b = square_form_k(dt, D2, N2p, eta2p, eta2n, BASES[k])
    else:
        k = pick_tangent(n2c, e21, e22, m, tsel)
        edge = e21 if k == 0 else e22
        t = vcross_const(N2p, edge)
        b = product_form_k(dt, D2, N2p, t)
    status = OK
    if bmaxabs(a) == 0.0:
        status = DEGENERATE_A
    elif bmaxabs(b) == 0.0:
        status = DEGENERATE_B
    return a, b, kappa, ut, vt, k, status


@njit(cache=True)
def normalize_geometry(pts):
    """Origin and scale that map the given points into the unit ball."""
    c = np.zeros(3)
    for i in range(pts.shape[0]):
        c += pts[i]
    c /= pts.shape[0]
    L = 0.0
    for i in range(pts.shape[0]):
        r = _norm(pts[i] - c)
        if r > L:
            L = r
    if L == 0.0:
        L = 1.0
    return c, L


@njit(cache=True)
def normalize_tuple(x0, xe, P, N):
    """Translate/scale endpoints and the (k, 3, 3) vertex stack ``P`` into the unit
    ball; normals ``N`` are divided by their per-triangle largest norm."""
    k = P.shape[0]
    pts = np.empty((2 + 3 * k, 3))
    pts[0] = x0
    pts[1] = xe
    for t in range(k):
        for i in range(3):
            pts[2 + 3 * t + i] = P[t, i]
    c, L = normalize_geometry(pts)
    Pn = np.empty_like(P)
    Nn = np.empty_like(N)
    for t in range(k):
        m = 0.0
        for i in range(3):
            Pn[t, i] = (P[t, i] - c) / L
            r = _norm(N[t, i])
            if r > m:
                m = r
        for i in range(3):
            Nn[t, i] = N[t, i] / m
    return (x0 - c) / L, (xe - c) / L, Pn, Nn


COEFF_FLOOR = 1e-14


@njit(cache=True)
def condition_trim(p):
    """Conditioned copy (max |coeff| = 1) with rounding-noise coefficients flushed
    to zero and trimmed to its total degree; returns (copy, degree).

    Coefficients that vanish exactly in exact arithmetic come out of the
    fused builders as ~1e-19 noise; a noisy leading u coefficient would make
    the Bezout determinant collapse by its square.
    """
    m = bmaxabs(p)
    s = 1.0 / m if m > 0.0 else 1.0
    q = p * s
    for i in range(q.shape[0]):
        for j in range(q.shape[1]):
            if abs(q[i, j]) <= COEFF_FLOOR:
                q[i, j] = 0.0
    d = bdeg(q)
    out = np.zeros((d + 1, d + 1))
    for i in range(d + 1):
        for j in range(d + 1 - i):
            out[i, j] = q[i, j]
    return out, d


@njit(cache=True)
def condition(p):
    m = bmaxabs(p)
    if m == 0.0:
        return p.copy()
    return p / m


@njit(cache=True)
def total_degree(p):
    return bdeg(p)


@njit(cache=True)
def one_bounce_full(x0, xe, P, N, face, refract, eta0, eta1, tsel, bsel):
    """Normalization, ``one_bounce_kernel`` and ``condition_trim`` in one call.

    Returns (a, deg a, b, deg b, choice, fallback, status); on a non-OK
    status the polynomials are empty placeholders.
    """
    nx0, nxe, Pn, Nn = normalize_tuple(x0, xe, P.reshape(1, 3, 3), N.reshape(1, 3, 3))
    a, b, choice, fb, status = one_bounce_kernel(nx0, nxe, Pn[0], Nn[0], face, refract, eta0, eta1,
                                                 tsel, bsel)
    if status != OK:
        z = np.zeros((1, 1))
        return z, 0, z, 0, choice, fb, status
    ca, da = condition_trim(a)
    cb, db = condition_trim(b)
    return ca, da, cb, db, choice, fb, status
