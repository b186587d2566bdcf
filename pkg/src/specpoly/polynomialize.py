"""Specular constraints as bivariate polynomial systems.

For a chain ``x0 -> x1 -> ... -> x_{k+1}`` the unknowns are the barycentric
coordinates ``(u, v)`` of the first specular vertex. Each later vertex is a
rational function of ``(u, v)`` through ray/plane intersection, so the whole
chain collapses to two polynomials ``a(u, v) = b(u, v) = 0``:

* ``a`` is the coplanarity constraint at the last vertex,
* ``b`` is an angular constraint there: the product form for reflection, the
  squared (basis-projected) Snell form for refraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _syskern as S
from ._polykern import beval, veval
from .poly import (BivariatePolynomial, DegreeOverflowError, PolyVec3, RationalPolyVec3,
                   _vec)
from .scene import Separators, SpecularTriangle
from .sqrtfit import SqrtApprox, default_sqrt_approx

REFLECT = "R"
REFRACT = "T"


class DegenerateConfigurationError(ValueError):
    """The constraint polynomials carry no information for this configuration.

    ``attempted`` lists the fallbacks that were tried.
    """

    def __init__(self, msg, attempted=()):
        self.attempted = tuple(attempted)
        if attempted:
            msg = f"{msg} (attempted: {', '.join(attempted)})"
        super().__init__(msg)


class TotalInternalReflectionError(DegenerateConfigurationError):
    """No transmitted direction exists anywhere on the triangle."""


@dataclass(frozen=True)
class ChainType:
    """Sequence of scattering events, e.g. ``ChainType.parse("RT")``."""

    events: tuple

    def __post_init__(self):
        ev = tuple(str(e).upper() for e in self.events)
        if not ev:
            raise ValueError("a chain needs at least one event")
        if any(e not in (REFLECT, REFRACT) for e in ev):
            raise ValueError(f"events must be R or T, got {self.events!r}")
        object.__setattr__(self, "events", ev)

    @classmethod
    def parse(cls, name: str) -> ChainType:
        return cls(tuple(name.strip().upper()))

    @property
    def name(self) -> str:
        return "".join(self.events)

    @property
    def k(self) -> int:
        return len(self.events)

    @property
    def has_refraction(self) -> bool:
        return REFRACT in self.events

    def reversed(self) -> ChainType:
        return ChainType(self.events[::-1])

    def __str__(self):
        return self.name


GATED_CHAINS = ("R", "T", "RR")
EXPERIMENTAL_CHAINS = ("RT", "TR", "TT")

# upper bounds on (deg a, deg b); one-bounce values are attained exactly
EXPECTED_DEGREES = {"R": (2, 4), "T": (2, 6), "RR": (10, 16), "RT": (10, 24), "TR": (10, 24), "TT": (18, 48)}
# constant normals: d.n no longer depends on (u, v), which lowers the product form to degree 1
FACE_DEGREES = {"R": (1, 1), "T": (1, 4)}


@dataclass(frozen=True, eq=False)
class SpecularSystem:
    """The pair ``a(u, v) = b(u, v) = 0`` for one triangle tuple.

    ``a`` and ``b`` are conditioned to unit max coefficient. When ``reversed``
    is set (TR chains) the unknowns belong to the last triangle and the chain
    was posed from the light side.
    For two-vertex chains ``kappa``, ``ut``, ``vt`` give the next vertex's
    barycentrics as ``(ut / kappa, vt / kappa)``.
    """

    a: BivariatePolynomial
    b: BivariatePolynomial
    chain_type: ChainType
    expected_degrees: tuple
    etas: tuple = ()
    choice: str = ""
    fallback: str = ""
    reversed: bool = False
    kappa: BivariatePolynomial | None = None
    ut: BivariatePolynomial | None = None
    vt: BivariatePolynomial | None = None
    info: dict = field(default_factory=dict)

    @property
    def degrees(self) -> tuple:
        return self.a.degree, self.b.degree

    def map_next(self, u: float, v: float):
        """Barycentrics of the second vertex from the rational mapping (None when undefined)."""
        if self.kappa is None:
            raise ValueError("single-vertex system has no coordinate mapping")
        k = beval(self.kappa.coeffs, u, v)
        if k == 0.0:
            return None
        return beval(self.ut.coeffs, u, v) / k, beval(self.vt.coeffs, u, v) / k


# ----------------------------------------------------------- formula layer


def _num(x) -> np.ndarray:
    """Coefficient array of a polynomial vector; rational inputs contribute their numerator.

    Every constraint form is homogeneous in each vector argument, so a
    nonzero scalar denominator only rescales the result.
    """
    if isinstance(x, RationalPolyVec3):
        return x.num.coeffs
    return _vec(x).coeffs


def _diff(x_next, x_prev) -> np.ndarray:
    if isinstance(x_next, RationalPolyVec3) or isinstance(x_prev, RationalPolyVec3):
        rn = x_next if isinstance(x_next, RationalPolyVec3) else RationalPolyVec3(_vec(x_next), BivariatePolynomial.constant(1.0))
        rp = x_prev if isinstance(x_prev, RationalPolyVec3) else RationalPolyVec3(_vec(x_prev), BivariatePolynomial.constant(1.0))
        return (rn.num * rp.den - rp.num * rn.den).coeffs
    return (_vec(x_next) - _vec(x_prev)).coeffs


def _checked(c, what, scale):
    p = BivariatePolynomial._raw(c)
    if p.is_zero() or p.max_abs() <= S.DEGENERATE_REL * scale:
        raise DegenerateConfigurationError(f"{what} polynomial vanishes identically")
    return p


def coplanarity_poly(d_prev, x_prev, x_next, n) -> BivariatePolynomial:
    """``(d_prev x (x_next - x_prev)) . n`` with rational inputs cleared."""
    diff = _diff(x_next, x_prev)
    d, nn = _num(d_prev), _num(n)
    c = S.vdot(S.vcross(d, diff), nn)
    return _checked(c, "coplanarity", S.vmax(d) * S.vmax(diff) * S.vmax(nn))


def square_form_poly(d_prev, d_next, n, eta_prev: float, eta_next: float, basis=(1.0, 0.0, 0.0)) -> BivariatePolynomial:
    """Snell's law projected on ``basis`` and squared to remove the norms."""
    bvec = np.asarray(basis, dtype=np.float64)
    if bvec.shape != (3,) or not np.isclose(np.linalg.norm(bvec), 1.0):
        raise ValueError("basis must be a unit 3-vector")
    dp, dn, nn = _num(d_prev), _num(d_next), _num(n)
    c = S.square_form_k(dp, dn, nn, float(eta_prev), float(eta_next), bvec)
    scale = (S.vmax(dp) * S.vmax(dn) * S.vmax(nn) * max(eta_prev, eta_next)) ** 2
    return _checked(c, "square-form", scale)


def product_form_poly(d_prev, d_next, n, t) -> BivariatePolynomial:
    """Mirror law split along normal ``n`` and tangent ``t``."""
    dp, dn, nn, tt = _num(d_prev), _num(d_next), _num(n), _num(t)
    c = S.product_form_k(dp, dn, nn, tt)
    return _checked(c, "product-form", S.vmax(dp) * S.vmax(dn) * S.vmax(nn) * S.vmax(tt))


def reflect_dir(d_prev, n) -> PolyVec3:
    """Reflected direction scaled by ``|n|^2 |d_prev|`` (so it stays polynomial)."""
    return PolyVec3._raw(S.reflect_k(_num(d_prev), _num(n)))


def _sqrt_params(d_prev: np.ndarray, n: np.ndarray, eta_ratio: float, approx: SqrtApprox, at=(1 / 3, 1 / 3)):
    """Per-tuple constants of the sqrt surrogate: (C, sign, piece coefficients).

    ``C = n^2 d^2`` at ``at`` normalizes beta into [0, 1]; the piece and the
    side of the normal are frozen at the same point.
    """
    dc = veval(d_prev, *at)
    nc = veval(n, *at)
    C = float(np.dot(nc, nc) * np.dot(dc, dc))
    if C == 0.0:
        raise DegenerateConfigurationError("zero direction or normal at the domain centroid")
    dn = float(np.dot(dc, nc))
    beta = lambda d, m: np.dot(m, m) * np.dot(d, d) - eta_ratio**2 * (np.dot(m, m) * np.dot(d, d) - np.dot(d, m) ** 2)  # noqa: E731
    samples = [at, (0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    betas = [beta(veval(d_prev, *s), veval(n, *s)) for s in samples]
    if max(betas) < 0.0:
        raise TotalInternalReflectionError("total internal reflection over the whole triangle")
    x = min(max(betas[0] / C, 0.0), 1.0)
    k = int(approx.piece_index(x))
    return C, (1.0 if dn >= 0.0 else -1.0), np.array(approx.coeffs[k]), k


def refract_dir(d_prev, n, eta_ratio: float, sqrt_fit: SqrtApprox | None = None) -> RationalPolyVec3:
    """Refracted direction ``eta' n^2 d - eta' (d.n) n + sign(d.n) sqrt(beta) n`` with the
    square root replaced by the piecewise rational surrogate.

    ``eta_ratio`` is ``eta_prev / eta_next``. The result is parallel to the
    transmitted direction (scaled by ``|n| |d|`` times the surrogate denominator).
    """
    if not eta_ratio > 0:
        raise ValueError("eta_ratio must be positive")
    approx = sqrt_fit or default_sqrt_approx()
    d = _num(d_prev)
    nn = _num(n)
    C, sgn, sq, _k = _sqrt_params(d, nn, float(eta_ratio), approx)
    num, q, _beta = S.refract_k(d, nn, float(eta_ratio), C, sgn, *sq)
    return RationalPolyVec3(PolyVec3._raw(num), BivariatePolynomial._raw(q))


def map_next_barycentric(d_scaled, x_cur, tri_next: SpecularTriangle) -> RationalPolyVec3:
    """Barycentrics of the ray ``(x_cur, d_scaled)`` hitting ``tri_next``'s plane.

    The numerator components are ``(ut, vt, kappa - ut - vt)`` over ``kappa``,
    so evaluating gives ``(u, v, 1 - u - v)``.
    """
    P = tri_next.positions
    e1 = P[1] - P[0]
    e2 = P[2] - P[0]
    d = _num(d_scaled)
    if isinstance(x_cur, RationalPolyVec3):
        raise TypeError("x_cur must be polynomial")
    kappa, ut, vt = S.map_k(d, _vec(x_cur).coeffs, P[0].copy(), e1, e2)
    k = BivariatePolynomial._raw(kappa)
    if k.is_zero() or k.max_abs() <= S.DEGENERATE_REL * S.vmax(d) * np.linalg.norm(e1) * np.linalg.norm(e2):
        raise DegenerateConfigurationError("ray is parallel to the next triangle for every (u, v)")
    U = BivariatePolynomial._raw(ut)
    V = BivariatePolynomial._raw(vt)
    return RationalPolyVec3(PolyVec3(U, V, k - U - V), k)


# --------------------------------------------------------------- builders


def _expected(chain: ChainType, tris) -> tuple:
    if chain.k == 1 and tris[0].constant_normal:
        return FACE_DEGREES[chain.name]
    return EXPECTED_DEGREES[chain.name]


def _normalized(x0, xe, tris):
    if len(tris) == 1:
        P, N = tris[0].positions[None], tris[0].normal_matrix[None]
    else:
        P = np.array([t.positions for t in tris])
        N = np.array([t.normal_matrix for t in tris])
    nx0, nxe, Pn, Nn = S.normalize_tuple(x0, xe, P, N)
    return nx0, nxe, list(zip(Pn, Nn))


_CHOICES_T = ("t=n x e1", "t=n x e2")
_CHOICES_B = ("b=x", "b=z", "b=y")
_STATUS = {S.DEGENERATE_A: "coplanarity", S.DEGENERATE_B: "angular form", S.DEGENERATE_KAPPA: "coordinate mapping"}


def _sel(value, names):
    if value is None:
        return -1
    if isinstance(value, str):
        for i, nm in enumerate(names):
            if value in (nm, nm.split("=")[-1], nm.split(" ")[-1]):
                return i
        raise ValueError(f"unknown choice {value!r}; expected one of {names}")
    return int(value)


def check_materials(chain: ChainType, tris) -> None:
    for ev, t in zip(chain.events, tris):
        if ev == REFRACT and t.material != "dielectric":
            raise ValueError(f"refraction event on non-dielectric triangle {t.name!r}")


def build_system(separators: Separators, tuple_: tuple, chain, *, tangent=None, basis=None,
                 sqrt_fit: SqrtApprox | None = None) -> SpecularSystem:
    """Assemble, condition and degree-check the system for one triangle tuple.

    ``tangent`` ("e1"/"e2") and ``basis`` ("x"/"z"/"y") override the automatic
    choices, which fall back on degeneracy.
    """
    chain = chain if isinstance(chain, ChainType) else ChainType.parse(str(chain))
    tris = tuple(tuple_)
    if len(tris) != chain.k:
        raise ValueError(f"tuple length {len(tris)} does not match chain {chain.name}")
    if chain.k > 2:
        raise ValueError("chains longer than two vertices are not supported")
    check_materials(chain, tris)
    x0 = np.asarray(separators.x0, dtype=float)
    xe = np.asarray(separators.x_end, dtype=float)
    if chain.name == "TR":
        # pose from the light side as RT, then map back in the pipeline
        sub = build_system(separators.reversed(), tris[::-1], ChainType.parse("RT"),
                           tangent=tangent, basis=basis, sqrt_fit=sqrt_fit)
        return SpecularSystem(sub.a, sub.b, chain, EXPECTED_DEGREES["TR"], sub.etas, sub.choice,
                              sub.fallback, True, sub.kappa, sub.ut, sub.vt, sub.info)
    tsel = _sel(tangent, _CHOICES_T)
    bsel = _sel(basis, _CHOICES_B)
    info = {}
    if chain.k == 1:
        tri = tris[0]
        refract = chain.events[0] == REFRACT
        eta0, eta1 = tri.etas_from(x0)
        ca, da, cb, db, choice, fb, status = S.one_bounce_full(
            x0, xe, tri.positions, tri.normal_matrix, tri.constant_normal, refract, eta0, eta1, tsel, bsel)
        names = _CHOICES_B if refract else _CHOICES_T
        if status != S.OK:
            raise DegenerateConfigurationError(f"{_STATUS.get(status, 'system')} polynomial vanishes identically",
                                               [names[choice]])
        expected = _expected(chain, tris)
        fallback = ""
        if fb:
            fallback = "second angular form replaces coplanarity"
            expected = (expected[1], expected[1])
        _check_degrees(chain, expected, da, db)
        return SpecularSystem(BivariatePolynomial._trusted(ca), BivariatePolynomial._trusted(cb), chain,
                              expected, ((eta0, eta1),), names[choice], fallback, info=info)
    nx0, nxe, geo = _normalized(x0, xe, tris)
    t1, t2 = tris
    (P1, N1), (P2, N2) = geo
    refract1 = chain.events[0] == REFRACT
    refract2 = chain.events[1] == REFRACT
    eta1p, eta1n = t1.etas_from(x0)
    eta2p, eta2n = t2.etas_from(t1.centroid)
    C, sgn, sq = 1.0, 1.0, np.zeros(4)
    if refract1:
        approx = sqrt_fit or default_sqrt_approx()
        d0 = S.vlinear(P1[0] - nx0, P1[1] - P1[0], P1[2] - P1[0])
        n1 = S.normal_field(P1, N1, t1.constant_normal)
        C, sgn, sq, piece = _sqrt_params(d0, n1, eta1p / eta1n, approx)
        info["sqrt_piece"] = piece
    a, b, kappa, ut, vt, choice, status = S.two_bounce_kernel(
        nx0, nxe, P1, N1, t1.constant_normal, P2, N2, t2.constant_normal,
        refract1, refract2, eta1p / eta1n, C, sgn, sq, eta2p, eta2n, tsel, bsel)
    names = _CHOICES_B if refract2 else _CHOICES_T
    if status != S.OK:
        raise DegenerateConfigurationError(f"{_STATUS.get(status, 'system')} polynomial vanishes identically",
                                           [names[choice]])
    etas = ((eta1p, eta1n) if refract1 else (eta1p, eta1p), (eta2p, eta2n) if refract2 else (eta2p, eta2p))
    return _finish(a, b, chain, _expected(chain, tris), etas, names[choice], "",
                   kappa, ut, vt, info)


def _check_degrees(chain, expected, da, db):
    if da > expected[0] or db > expected[1]:
        raise DegreeOverflowError(
            f"{chain.name} system degrees {(da, db)} exceed expected {expected}")


def _finish(a, b, chain, expected, etas, choice, fallback, kappa, ut, vt, info) -> SpecularSystem:
    ca, da = S.condition_trim(a)
    cb, db = S.condition_trim(b)
    _check_degrees(chain, expected, da, db)
    A = BivariatePolynomial._trusted(ca)
    B = BivariatePolynomial._trusted(cb)
    wrap = (lambda c: BivariatePolynomial._raw(c)) if kappa is not None else (lambda c: None)
    return SpecularSystem(A, B, chain, tuple(expected), tuple(etas), choice, fallback, False,
                          wrap(kappa), wrap(ut), wrap(vt), info)
