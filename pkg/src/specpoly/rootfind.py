"""Real-root machinery for the eliminated systems.

* :func:`isolate_roots` finds the real roots of an explicit univariate
  polynomial on an interval: the roots of the derivative split the interval
  into monotonic pieces, and each piece with a sign change is bisected.
* :func:`det_zero_scan` locates zeros of ``det R(v)`` when the determinant is
  too large to expand: sign changes on a uniform grid, bisection, then a
  safeguarded secant refinement inside the final bracket.
* :func:`back_substitute` recovers u from a located v.
* :func:`newton_polish_2d` refines an already located common root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from . import _polykern as K
from .poly import BivariatePolynomial, UnivariatePolynomial
from .resultant import ResultantMatrix, det_scaled, eval_matrix, row_scales

TANGENT_REL = 1e-13  # |p(c)| / max|coeff| below which a critical point counts as a double root


class RootFindError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """Tunables for the elimination and path phases.

    ``polish`` is ``"auto"`` (on for chains with a refraction), ``"on"`` or ``"off"``.
    """

    pieces: int = 100
    bisect_iters: int = 10
    bisect_tol: float = 1e-9
    polish_iters: int = 1
    polish: str = "auto"
    dedup_tol: float = 1e-7
    theta: float = 1e-4
    prefilter: float = 1e-5
    expand_cap: int = 8
    backsub_margin: float = 0.1
    scan_refine: bool = True
    rescue: bool = True

    def __post_init__(self):
        if self.pieces < 1:
            raise ValueError("pieces must be >= 1")
        if self.bisect_iters < 0 or self.polish_iters < 0:
            raise ValueError("iteration counts must be non-negative")
        if not (self.bisect_tol > 0 and self.dedup_tol > 0 and self.theta > 0 and self.prefilter > 0):
            raise ValueError("tolerances must be positive")
        if self.polish not in ("auto", "on", "off"):
            raise ValueError("polish must be 'auto', 'on' or 'off'")

    def with_(self, **kw) -> SolverConfig:
        return replace(self, **kw)


@dataclass(frozen=True, eq=False)
class RootList:
    roots: np.ndarray
    method: str
    residuals: np.ndarray
    miss_risk: tuple = field(default=())

    def __len__(self):
        return self.roots.size

    def __iter__(self):
        return iter(self.roots.tolist())

    @property
    def scan_miss_risk(self) -> bool:
        return bool(self.miss_risk)


# ------------------------------------------------------------------ kernels


@njit(cache=True)
def _sgn(x):
    if x > 0.0:
        return 1
    if x < 0.0:
        return -1
    return 0


@njit(cache=True)
def _bisect(p, a, b, fa, tol):
    # p(a), p(b) have strictly opposite signs; bisect to ``tol`` then take one
    # regula falsi step on the final bracket (quadratic gain for simple roots)
    sa = _sgn(fa)
    fb = K.ueval(p, b)
    while b - a > tol:
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        fm = K.ueval(p, m)
        sm = _sgn(fm)
        if sm == 0:
            return m
        if sm == sa:
            a, fa = m, fm
        else:
            b, fb = m, fm
    if fa != fb:
        x = a - fa * (b - a) / (fb - fa)
        if a <= x <= b:
            return x
    return 0.5 * (a + b)


@njit(cache=True)
def _roots_on_pieces(p, pts, npts, tol, out):
    """Roots of ``p`` (monotone between consecutive ``pts``); returns count written to ``out``."""
    cnt = 0
    fa = K.ueval(p, pts[0])
    if fa == 0.0:
        out[cnt] = pts[0]
        cnt += 1
    for k in range(npts - 1):
        a = pts[k]
        b = pts[k + 1]
        fb = K.ueval(p, b)
        if fb == 0.0:
            if b > a or cnt == 0:
                out[cnt] = b
                cnt += 1
        elif fa != 0.0 and (fa > 0.0) != (fb > 0.0):
            out[cnt] = _bisect(p, a, b, fa, tol)
            cnt += 1
        fa = fb
    return cnt


@njit(cache=True)
def isolate_kernel(p, lo, hi, tol, tangent_rel):
    """Real roots of ``p`` in [lo, hi] by recursive derivative isolation."""
    d = K.udeg(p)
    out = np.empty(2 * d + 4)
    if d == 0:
        return out[:0]
    # derivative tower, each level scaled to unit max coefficient
    tower = np.zeros((d, d + 1))
    q = p[: d + 1].copy()
    for k in range(d):
        m = K.umaxabs(q)
        tower[k, : q.shape[0]] = q / m
        q = K.uderiv(q)
    pts = np.empty(d + 2)
    crit = np.empty(d + 1)
    ncrit = 0
    for k in range(d - 1, -1, -1):
        # crit holds the roots of level k+1 (sorted), i.e. turning points of level k
        pts[0] = lo
        npts = 1
        for i in range(ncrit):
            c = crit[i]
            if c > pts[npts - 1] and c < hi:
                pts[npts] = c
                npts += 1
        pts[npts] = hi
        npts += 1
        lvl = tower[k, : d - k + 1]
        cnt = _roots_on_pieces(lvl, pts, npts, tol, out)
        if k == 0 and tangent_rel > 0.0:
            # even-multiplicity roots: turning points where |p| is negligible
            for i in range(1, npts - 1):
                c = pts[i]
                if abs(K.ueval(lvl, c)) <= tangent_rel:
                    dup = False
                    for j in range(cnt):
                        if abs(out[j] - c) <= 2.0 * tol:
                            dup = True
                    if not dup:
                        out[cnt] = c
                        cnt += 1
        for i in range(cnt):
            crit[i] = out[i]
        ncrit = cnt
        crit[:ncrit] = np.sort(crit[:ncrit])
    return crit[:ncrit].copy()


@njit(cache=True)
def _dedup(roots, res, tol):
    n = roots.shape[0]
    if n == 0:
        return roots, res
    order = np.argsort(roots)
    r = roots[order]
    e = res[order]
    keep_r = np.empty(n)
    keep_e = np.empty(n)
    m = 0
    for i in range(n):
        if m > 0 and r[i] - keep_r[m - 1] <= tol:
            if e[i] < keep_e[m - 1]:
                keep_r[m - 1] = r[i]
                keep_e[m - 1] = e[i]
            continue
        keep_r[m] = r[i]
        keep_e[m] = e[i]
        m += 1
    return keep_r[:m].copy(), keep_e[:m].copy()


@njit(cache=True)
def _det_sign(R, v):
    M = eval_matrix(R, v)
    sign, logabs = det_scaled(M, row_scales(M))
    return sign, logabs


@njit(cache=True)
def _det_fixed(R, v, s):
    # determinant with fixed row scales: a smooth function of v
    M = eval_matrix(R, v)
    sign, logabs = det_scaled(M, s)
    if sign == 0.0:
        return 0.0
    return sign * math.exp(logabs)


@njit(cache=True)
def _deriv_entries(R):
    n, _, m = R.shape
    Rd = np.zeros((n, n, max(m - 1, 1)))
    for i in range(n):
        for j in range(n):
            for k in range(1, m):
                Rd[i, j, k - 1] = k * R[i, j, k]
    return Rd


@njit(cache=True)
def _det_logderiv(R, Rd, v):
    """(sign, log|det R(v)|, d/dv log|det R(v)|); the derivative is tr(R^-1 R')."""
    M = eval_matrix(R, v)
    n = M.shape[0]
    s = row_scales(M)
    A = np.empty((n, n))
    B = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            A[i, j] = M[i, j] / s[i]
            B[i, j] = K.ueval(Rd[i, j], v) / s[i]
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
            return 0.0, -np.inf, 0.0
        if p != k:
            for j in range(n):
                t = A[k, j]
                A[k, j] = A[p, j]
                A[p, j] = t
                t = B[k, j]
                B[k, j] = B[p, j]
                B[p, j] = t
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
                for j in range(n):
                    B[i, j] -= f * B[k, j]
    # trace of U^-1 B' by back substitution, column by column
    tr = 0.0
    x = np.empty(n)
    for c in range(n):
        for i in range(n - 1, -1, -1):
            acc = B[i, c]
            for j in range(i + 1, n):
                acc -= A[i, j] * x[j]
            x[i] = acc / A[i, i]
        tr += x[c]
    for i in range(n):
        logabs += math.log(s[i])
    return sign, logabs, tr


@njit(cache=True)
def _hermite_crit(sa, la, ga, sb, lb, gb, h):
    """Interior critical points of the cubic Hermite model of det on one piece.

    Endpoint values are ``sa * exp(la)`` and ``sb * exp(lb)`` with
    log-derivatives ``ga``, ``gb`` and piece width ``h``. Returns
    ``(ts, qs, k)``: the first ``k`` entries of ``ts`` are sorted critical
    points in (0, 1), ``qs`` the model values there relative to the smaller
    endpoint magnitude.
    """
    top = max(la, lb)
    pa = math.exp(la - top)
    pb = math.exp(lb - top)
    fa = sa * pa
    fb = sb * pb
    da = fa * ga * h
    db = fb * gb * h
    c3 = 2.0 * fa + da - 2.0 * fb + db
    c2 = -3.0 * fa - 2.0 * da + 3.0 * fb - db
    c1 = da
    lo = min(pa, pb)
    ts = np.empty(2)
    qs = np.empty(2)
    cand = np.empty(2)
    nc = 0
    A = 3.0 * c3
    B = 2.0 * c2
    if A == 0.0:
        if B != 0.0:
            cand[0] = -c1 / B
            nc = 1
    else:
        disc = B * B - 4.0 * A * c1
        if disc >= 0.0:
            sq = math.sqrt(disc)
            r1 = (-B - sq) / (2.0 * A)
            r2 = (-B + sq) / (2.0 * A)
            cand[0] = min(r1, r2)
            cand[1] = max(r1, r2)
            nc = 2
    k = 0
    for j in range(nc):
        t = cand[j]
        if t > 0.0 and t < 1.0:
            ts[k] = t
            qs[k] = (((c3 * t + c2) * t + c1) * t + fa) / lo
            k += 1
    return ts, qs, k


@njit(cache=True)
def _refine_bracket(R, a, b, sa, iters, refine):
    """Root of det R in [a, b] (opposite signs at the ends): ``iters``
    bisections, then Illinois false position on a fixed-scale determinant."""
    for _ in range(iters):
        m = 0.5 * (a + b)
        sm, _l = _det_sign(R, m)
        if sm == 0.0:
            return m
        if sm == sa:
            a = m
        else:
            b = m
    x = 0.5 * (a + b)
    if not refine:
        return x
    s = row_scales(eval_matrix(R, x))
    fa = _det_fixed(R, a, s)
    fb = _det_fixed(R, b, s)
    side = 0
    for _ in range(60):
        if fa == fb:
            break
        x = (a * fb - b * fa) / (fb - fa)
        if not (x > a and x < b):
            x = 0.5 * (a + b)
        fx = _det_fixed(R, x, s)
        if fx == 0.0:
            return x
        if (fx > 0.0) == (fb > 0.0):
            b = x
            fb = fx
            if side == 1:
                fa *= 0.5
            side = 1
        else:
            a = x
            fa = fx
            if side == -1:
                fb *= 0.5
            side = -1
        if b - a <= 1e-15 * max(1.0, abs(x)):
            break
    return 0.5 * (a + b) if b - a > 0.0 else a


DIP_PROBE = 0.25  # a model extremum below this fraction of the smaller end counts as a near touch
RISK_DEPTH = math.log(1e3)


@njit(cache=True)
def scan_kernel(R, pieces, iters, refine):
    """Sign-change scan of det R on [0, 1].

    Returns (roots, residuals, risk). Every piece gets a cubic Hermite model of
    det from the values and log-derivatives at its ends; the true sign is
    probed at each interior extremum of the model, so root pairs (or triples)
    inside one piece split into separate brackets. Extrema where the model
    predicts a crossing or near touch that the probe does not confirm, and
    local minima of log|det| well below the scan maximum, go to ``risk``.
    """
    P = pieces
    h = 1.0 / P
    Rd = _deriv_entries(R)
    sg = np.empty(P + 1)
    la = np.empty(P + 1)
    gl = np.empty(P + 1)
    for i in range(P + 1):
        sg[i], la[i], gl[i] = _det_logderiv(R, Rd, i / P)
    lmax = -np.inf
    for i in range(P + 1):
        if la[i] > lmax:
            lmax = la[i]
    roots = np.empty(3 * P + 3)
    res = np.empty(3 * P + 3)
    risk = np.empty(2 * P + 2)
    cnt = 0
    nrisk = 0
    for i in range(P + 1):
        if sg[i] == 0.0:
            roots[cnt] = i / P
            cnt += 1
    xs = np.empty(4)
    ss = np.empty(4)
    for i in range(P):
        a = i / P
        b = (i + 1) / P
        if sg[i] == 0.0 or sg[i + 1] == 0.0:
            continue
        ts, qs, k = _hermite_crit(sg[i], la[i], gl[i], sg[i + 1], la[i + 1], gl[i + 1], h)
        xs[0] = a
        ss[0] = sg[i]
        nn = 1
        for j in range(k):
            m = a + ts[j] * h
            sm, _l = _det_sign(R, m)
            if sm == 0.0:
                roots[cnt] = m
                cnt += 1
                continue
            if sm == ss[nn - 1] and (qs[j] * sm < 0.0 or abs(qs[j]) < DIP_PROBE):
                risk[nrisk] = m
                nrisk += 1
            xs[nn] = m
            ss[nn] = sm
            nn += 1
        xs[nn] = b
        ss[nn] = sg[i + 1]
        nn += 1
        for j in range(nn - 1):
            if ss[j] != ss[j + 1]:
                roots[cnt] = _refine_bracket(R, xs[j], xs[j + 1], ss[j], iters, refine)
                cnt += 1
        if k == 0 and sg[i] == sg[i + 1] and gl[i] < 0.0 < gl[i + 1]:
            if min(la[i], la[i + 1]) < lmax - RISK_DEPTH:
                risk[nrisk] = a + h * gl[i] / (gl[i] - gl[i + 1])
                nrisk += 1
    for k in range(cnt):
        x = roots[k]
        res[k] = abs(_det_fixed(R, x, row_scales(eval_matrix(R, x))))
    return roots[:cnt].copy(), res[:cnt].copy(), risk[:nrisk].copy()


@njit(cache=True)
def rescue_kernel(R, risk, pieces, iters):
    """Local minimizers of log|det R| around flagged points.

    Golden-section search on [r - 1/P, r + 1/P] with row scales frozen at the
    flagged point. Even-multiplicity (or numerically merged) roots give no
    sign change; their minimizers are offered as extra candidates.
    """
    out = np.empty(risk.shape[0])
    g = (math.sqrt(5.0) - 1.0) / 2.0
    for k in range(risk.shape[0]):
        r = risk[k]
        a = max(0.0, r - 1.0 / pieces)
        b = min(1.0, r + 1.0 / pieces)
        s = row_scales(eval_matrix(R, r))
        c = b - g * (b - a)
        d = a + g * (b - a)
        fc = abs(_det_fixed(R, c, s))
        fd = abs(_det_fixed(R, d, s))
        for _ in range(iters):
            if fc < fd:
                b = d
                d = c
                fd = fc
                c = b - g * (b - a)
                fc = abs(_det_fixed(R, c, s))
            else:
                a = c
                c = d
                fc = fd
                d = a + g * (b - a)
                fd = abs(_det_fixed(R, d, s))
        out[k] = 0.5 * (a + b)
    return out


@njit(cache=True)
def backsub_kernel(a, b, v, lo, hi, tol, slice_floor, tangent_rel):
    """u-roots of a(., v) on [lo, hi]; falls back to b(., v) if that slice vanishes.

    Returns (roots, which) with which = 0 (a), 1 (b), -1 (both vanish).
    """
    s = K.bslice_at_v(a, v)
    which = 0
    if K.umaxabs(s) < slice_floor:
        s = K.bslice_at_v(b, v)
        which = 1
        if K.umaxabs(s) < slice_floor:
            return np.empty(0), -1
    return isolate_kernel(s, lo, hi, tol, tangent_rel), which


@njit(cache=True)
def newton_kernel(a, b, u, v, iters):
    """Damped Newton on F = (a, b); returns (u, v, |F|, status).

    status: 1 converged, 0 stopped (no decrease), -1 singular Jacobian.
    """
    fa, au, av = K.bgrad(a, u, v)
    fb, bu, bv = K.bgrad(b, u, v)
    norm = math.sqrt(fa * fa + fb * fb)
    status = 1 if norm == 0.0 else 0
    for _ in range(iters):
        if norm == 0.0:
            status = 1
            break
        det = au * bv - av * bu
        jn = abs(au * bv) + abs(av * bu)
        if det == 0.0 or abs(det) <= 1e-14 * jn or jn == 0.0:
            return u, v, norm, -1
        du = (fa * bv - fb * av) / det
        dv = (fb * au - fa * bu) / det
        lam = 1.0
        accepted = False
        for _h in range(12):
            un = u - lam * du
            vn = v - lam * dv
            ga, gau, gav = K.bgrad(a, un, vn)
            gb, gbu, gbv = K.bgrad(b, un, vn)
            nn = math.sqrt(ga * ga + gb * gb)
            if nn <= norm:
                u, v = un, vn
                fa, au, av = ga, gau, gav
                fb, bu, bv = gb, gbu, gbv
                norm = nn
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            status = 0
            break
        status = 1
        if math.sqrt(du * du + dv * dv) * lam < 1e-15:
            break
    return u, v, norm, status


# ---------------------------------------------------------------- wrappers


def _coeffs(p) -> np.ndarray:
    if isinstance(p, UnivariatePolynomial):
        return p.coeffs
    return np.ascontiguousarray(np.asarray(p, dtype=np.float64))


def residual_gate(p) -> float:
    """Residual bound for reported roots: 1e-6 * max|coeff| * degree."""
    c = _coeffs(p)
    return 1e-6 * K.umaxabs(c) * max(K.udeg(c), 1)


def isolate_roots(p, lo: float = 0.0, hi: float = 1.0, tol: float = 1e-9,
                  dedup_tol: float = 1e-7) -> RootList:
    """All real roots of ``p`` in ``[lo, hi]`` (simple roots always; tangencies when |p| negligible)."""
    c = _coeffs(p)
    if not np.isfinite(lo) or not np.isfinite(hi) or lo > hi:
        raise RootFindError("interval must be finite with lo <= hi")
    m = K.umaxabs(c)
    if m == 0.0:
        raise RootFindError("cannot isolate roots of the zero polynomial")
    r = isolate_kernel(c, float(lo), float(hi), float(tol), TANGENT_REL)
    res = np.abs(np.array([K.ueval(c, x) for x in r]))
    r, res = _dedup(r, res, dedup_tol)
    return RootList(r, "isolation", res)


def det_zero_scan(R: ResultantMatrix, cfg: SolverConfig = SolverConfig()) -> RootList:
    """Zeros of det R(v) on [0, 1] from sign changes on a ``cfg.pieces`` grid.

    Grid points are ``i / pieces`` so grids for P and 2P nest exactly.
    Even-multiplicity or clustered zeros inside one piece can be missed; grid
    minima of |det| without a sign change are returned in ``miss_risk``.
    """
    ent = R.entries if isinstance(R, ResultantMatrix) else np.asarray(R, dtype=float)
    r, res, risk = scan_kernel(np.ascontiguousarray(ent), int(cfg.pieces), int(cfg.bisect_iters),
                               bool(cfg.scan_refine))
    r, res = _dedup(r, res, cfg.dedup_tol)
    return RootList(r, "piecewise_scan", res, tuple(risk.tolist()))


def back_substitute(a: BivariatePolynomial, v1: float, tol: float = 1e-9, margin: float = 0.1,
                    b: BivariatePolynomial | None = None, dedup_tol: float = 1e-7) -> RootList:
    """u-roots of ``a(u, v1)`` over ``[-margin, 1 + margin]``.

    If that slice vanishes (max |coeff| < 1e-8) the slice of ``b`` is used.
    """
    bc = b.coeffs if b is not None else np.zeros((1, 1))
    roots, which = backsub_kernel(a.coeffs, bc, float(v1), -margin, 1.0 + margin, tol, 1e-8, TANGENT_REL)
    if which < 0:
        raise RootFindError(f"both system slices vanish at v = {v1}")
    src = a if which == 0 else b
    s = src.slice_at_v(v1).coeffs
    res = np.abs(np.array([K.ueval(s, x) for x in roots]))
    roots, res = _dedup(roots, res, dedup_tol)
    return RootList(roots, "isolation", res)


def newton_polish_2d(system, u: float, v: float, iters: int = 1):
    """Damped Newton refinement of a located root of ``(system.a, system.b)``.

    Returns ``(u, v, converged)``. A singular Jacobian returns the input
    unchanged with ``converged=False``.
    """
    a = system.a.coeffs if hasattr(system, "a") else system[0].coeffs
    b = system.b.coeffs if hasattr(system, "b") else system[1].coeffs
    un, vn, _norm, status = newton_kernel(a, b, float(u), float(v), int(iters))
    if status < 0:
        return float(u), float(v), False
    return float(un), float(vn), status == 1
