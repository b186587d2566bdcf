"""Dense univariate/bivariate polynomials over float64 and 3-vectors of them."""

from __future__ import annotations

from numbers import Real

import numpy as np

from . import _polykern as K

MAX_DEGREE = 64


class DegreeOverflowError(ValueError):
    pass


def _as_float_array(x, ndim):
    arr = np.array(x, dtype=np.float64)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d coefficient array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("polynomial coefficients must be finite")
    return arr


class UnivariatePolynomial:
    """Polynomial in one variable, coefficients in ascending power order.

    Trailing exact zeros are trimmed on construction; the zero polynomial is
    stored as ``[0.0]`` with degree 0.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = _as_float_array(coeffs, 1)
        if c.size == 0:
            c = np.zeros(1)
        c = K.utrim(c)
        if c.size - 1 > MAX_DEGREE:
            raise DegreeOverflowError(f"degree {c.size - 1} exceeds cap {MAX_DEGREE}")
        c.flags.writeable = False
        self.coeffs = c

    @classmethod
    def _raw(cls, c):
        # trusted kernel output
        obj = cls.__new__(cls)
        c = K.utrim(c)
        c.flags.writeable = False
        obj.coeffs = c
        return obj

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def is_zero(self) -> bool:
        return self.coeffs.size == 1 and self.coeffs[0] == 0.0

    def __call__(self, x):
        if np.ndim(x) == 0:
            return K.ueval(self.coeffs, float(x))
        return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), self.coeffs)

    def derivative(self) -> UnivariatePolynomial:
        return UnivariatePolynomial._raw(K.uderiv(self.coeffs))

    def normalized(self) -> UnivariatePolynomial:
        m = K.umaxabs(self.coeffs)
        if m == 0.0:
            raise ValueError("cannot normalize the zero polynomial")
        return UnivariatePolynomial._raw(self.coeffs / m)

    def __add__(self, other):
        other = _uni(other)
        return UnivariatePolynomial._raw(K.uadd(self.coeffs, other.coeffs))

    __radd__ = __add__

    def __sub__(self, other):
        other = _uni(other)
        return UnivariatePolynomial._raw(K.usub(self.coeffs, other.coeffs))

    def __rsub__(self, other):
        return _uni(other) - self

    def __neg__(self):
        return UnivariatePolynomial._raw(-self.coeffs)

    def __mul__(self, other):
        if isinstance(other, Real):
            return UnivariatePolynomial._raw(self.coeffs * float(other))
        other = _uni(other)
        out = K.umul(self.coeffs, other.coeffs)
        if out.size - 1 > MAX_DEGREE:
            raise DegreeOverflowError(f"product degree {out.size - 1} exceeds cap")
        return UnivariatePolynomial._raw(out)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, UnivariatePolynomial):
            return NotImplemented
        return np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def __repr__(self):
        return f"UnivariatePolynomial({self.coeffs.tolist()})"


def _uni(x) -> UnivariatePolynomial:
    if isinstance(x, UnivariatePolynomial):
        return x
    if isinstance(x, Real):
        return UnivariatePolynomial([float(x)])
    raise TypeError(f"cannot use {type(x).__name__} as a univariate polynomial")


def uni_derivative(p: UnivariatePolynomial) -> UnivariatePolynomial:
    return p.derivative()


def uni_eval(p: UnivariatePolynomial, x: float) -> float:
    return K.ueval(p.coeffs, float(x))


def uni_normalize(p: UnivariatePolynomial) -> UnivariatePolynomial:
    """Scale so the largest coefficient magnitude is 1 (same roots, same signs)."""
    return p.normalized()


class BivariatePolynomial:
    """Polynomial in (u, v) stored as a dense triangular grid.

    ``coeffs[i, j]`` multiplies ``u**i * v**j``. The grid is square with side
    ``degree + 1`` and every entry with ``i + j > degree`` is zero.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = _as_float_array(coeffs, 2)
        if c.size == 0:
            c = np.zeros((1, 1))
        ii, jj = np.nonzero(c)
        d = int((ii + jj).max()) if ii.size else 0
        if d > MAX_DEGREE:
            raise DegreeOverflowError(f"degree {d} exceeds cap {MAX_DEGREE}")
        sq = np.zeros((d + 1, d + 1))
        m0, m1 = min(d + 1, c.shape[0]), min(d + 1, c.shape[1])
        sq[:m0, :m1] = c[:m0, :m1]
        self.coeffs = _freeze(sq)

    @classmethod
    def _raw(cls, c):
        obj = cls.__new__(cls)
        d = K.bdeg(c)
        if d > MAX_DEGREE:
            raise DegreeOverflowError(f"degree {d} exceeds cap {MAX_DEGREE}")
        obj.coeffs = _freeze(_fit(c, d))
        return obj

    @classmethod
    def _trusted(cls, c):
        # already trimmed square kernel output of degree <= MAX_DEGREE
        obj = cls.__new__(cls)
        obj.coeffs = _freeze(c)
        return obj

    @classmethod
    def constant(cls, x: float) -> BivariatePolynomial:
        return cls([[float(x)]])

    @classmethod
    def from_monomials(cls, terms: dict) -> BivariatePolynomial:
        """Build from ``{(i, j): coeff}``."""
        if not terms:
            return cls.constant(0.0)
        d = max(i + j for i, j in terms)
        c = np.zeros((d + 1, d + 1))
        for (i, j), x in terms.items():
            c[i, j] += x
        return cls(c)

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def deg_u(self) -> int:
        return K.bdeg_u(self.coeffs)

    @property
    def deg_v(self) -> int:
        return K.bdeg_v(self.coeffs)

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def max_abs(self) -> float:
        return K.bmaxabs(self.coeffs)

    def normalized(self) -> BivariatePolynomial:
        m = self.max_abs()
        if m == 0.0:
            raise ValueError("cannot normalize the zero polynomial")
        return BivariatePolynomial._raw(self.coeffs / m)

    def __call__(self, u, v):
        if np.ndim(u) == 0 and np.ndim(v) == 0:
            return K.beval(self.coeffs, float(u), float(v))
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return np.polynomial.polynomial.polyval2d(u, v, self.coeffs)

    def grad(self, u: float, v: float):
        """(value, d/du, d/dv) at a point."""
        return K.bgrad(self.coeffs, float(u), float(v))

    def partial_u(self) -> BivariatePolynomial:
        d = self.degree
        if d == 0:
            return BivariatePolynomial.constant(0.0)
        c = self.coeffs[1:, :d] * np.arange(1, d + 1)[:, None]
        return BivariatePolynomial._raw(np.ascontiguousarray(c))

    def partial_v(self) -> BivariatePolynomial:
        d = self.degree
        if d == 0:
            return BivariatePolynomial.constant(0.0)
        c = self.coeffs[:d, 1:] * np.arange(1, d + 1)[None, :]
        return BivariatePolynomial._raw(np.ascontiguousarray(c))

    def slice_at_v(self, v: float) -> UnivariatePolynomial:
        return UnivariatePolynomial._raw(K.bslice_at_v(self.coeffs, float(v)))

    def slice_at_u(self, u: float) -> UnivariatePolynomial:
        return UnivariatePolynomial._raw(K.bslice_at_u(self.coeffs, float(u)))

    def transpose(self) -> BivariatePolynomial:
        """Swap the roles of u and v."""
        return BivariatePolynomial._raw(np.ascontiguousarray(self.coeffs.T))

    def __add__(self, other):
        other = _biv(other)
        return BivariatePolynomial._raw(K.badd(self.coeffs, other.coeffs))

    __radd__ = __add__

    def __sub__(self, other):
        other = _biv(other)
        return BivariatePolynomial._raw(K.bsub(self.coeffs, other.coeffs))

    def __rsub__(self, other):
        return _biv(other) - self

    def __neg__(self):
        return BivariatePolynomial._raw(-self.coeffs)

    def __mul__(self, other):
        if isinstance(other, Real):
            return BivariatePolynomial._raw(self.coeffs * float(other))
        if isinstance(other, PolyVec3):
            return other * self
        other = _biv(other)
        if self.degree + other.degree > MAX_DEGREE:
            raise DegreeOverflowError(
                f"product degree {self.degree + other.degree} exceeds cap {MAX_DEGREE}")
        return BivariatePolynomial._raw(K.bmul(self.coeffs, other.coeffs))

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = BivariatePolynomial.constant(1.0)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, BivariatePolynomial):
            return NotImplemented
        return np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def monomials(self):
        """Nonzero terms as ``[((i, j), c), ...]`` sorted by total degree, then u-power."""
        out = []
        for s in range(self.degree + 1):
            for i in range(s, -1, -1):
                c = self.coeffs[i, s - i]
                if c != 0.0:
                    out.append(((i, s - i), float(c)))
        return out

    def dump(self) -> str:
        lines = [f"u^{i} v^{j} {c!r}" for (i, j), c in self.monomials()]
        return "\n".join(lines) if lines else "0"

    def __repr__(self):
        return f"BivariatePolynomial(degree={self.degree}, terms={len(self.monomials())})"


def _fit(c, d):
    n = d + 1
    if c.shape == (n, n):
        return np.ascontiguousarray(c)
    out = np.zeros((n, n))
    m = min(n, c.shape[0])
    out[:m, :m] = c[:m, :m]
    return out


def _freeze(c):
    c.flags.writeable = False
    return c


def _biv(x) -> BivariatePolynomial:
    if isinstance(x, BivariatePolynomial):
        return x
    if isinstance(x, Real):
        return BivariatePolynomial.constant(float(x))
    raise TypeError(f"cannot use {type(x).__name__} as a bivariate polynomial")


def biv_add(a, b) -> BivariatePolynomial:
    return _biv(a) + _biv(b)


def biv_sub(a, b) -> BivariatePolynomial:
    return _biv(a) - _biv(b)


def biv_mul(a, b) -> BivariatePolynomial:
    return _biv(a) * b


def biv_scale(a, s: float) -> BivariatePolynomial:
    return _biv(a) * float(s)


def biv_eval(p: BivariatePolynomial, u: float, v: float) -> float:
    return K.beval(p.coeffs, float(u), float(v))


def coeff_slices(p: BivariatePolynomial) -> list[UnivariatePolynomial]:
    """Split ``p(u, v) = sum_i a_i(v) u**i`` into the list ``[a_0, ..., a_{deg_u}]``."""
    du = p.deg_u
    return [UnivariatePolynomial._raw(np.array(p.coeffs[i])) for i in range(du + 1)]


def from_slices(slices) -> BivariatePolynomial:
    """Inverse of :func:`coeff_slices`."""
    terms = {}
    for i, s in enumerate(slices):
        for j, c in enumerate(_uni(s).coeffs):
            if c != 0.0:
                terms[(i, j)] = terms.get((i, j), 0.0) + c
    return BivariatePolynomial.from_monomials(terms)


class PolyVec3:
    """3-vector whose components are bivariate polynomials sharing a degree bound."""

    __slots__ = ("coeffs",)

    def __init__(self, x, y=None, z=None):
        if y is None and z is None:
            arr = np.array(x, dtype=np.float64)
            if arr.ndim != 3 or arr.shape[0] != 3 or arr.shape[1] != arr.shape[2]:
                raise ValueError(f"expected (3, n, n) coefficients, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError("polynomial coefficients must be finite")
            self.coeffs = _freeze(_vfit(arr))
            return
        comps = [_biv(c) for c in (x, y, z)]
        n = max(c.coeffs.shape[0] for c in comps)
        arr = np.zeros((3, n, n))
        for k, c in enumerate(comps):
            m = c.coeffs.shape[0]
            arr[k, :m, :m] = c.coeffs
        self.coeffs = _freeze(arr)

    @classmethod
    def _raw(cls, arr):
        obj = cls.__new__(cls)
        obj.coeffs = _freeze(_vfit(arr))
        return obj

    @classmethod
    def constant(cls, vec) -> PolyVec3:
        return cls._raw(K.vconst(np.asarray(vec, dtype=np.float64)))

    @classmethod
    def linear(cls, base, du, dv) -> PolyVec3:
        """``base + u*du + v*dv``."""
        f = lambda a: np.asarray(a, dtype=np.float64)  # noqa: E731
        return cls._raw(K.vlinear(f(base), f(du), f(dv)))

    @property
    def x(self) -> BivariatePolynomial:
        return BivariatePolynomial._raw(np.array(self.coeffs[0]))

    @property
    def y(self) -> BivariatePolynomial:
        return BivariatePolynomial._raw(np.array(self.coeffs[1]))

    @property
    def z(self) -> BivariatePolynomial:
        return BivariatePolynomial._raw(np.array(self.coeffs[2]))

    def components(self):
        return self.x, self.y, self.z

    @property
    def degree(self) -> int:
        return max(K.bdeg(self.coeffs[k]) for k in range(3))

    def __call__(self, u: float, v: float) -> np.ndarray:
        return K.veval(self.coeffs, float(u), float(v))

    def dot(self, other) -> BivariatePolynomial:
        return vec_dot(self, other)

    def cross(self, other) -> PolyVec3:
        return vec_cross(self, other)

    def norm2(self) -> BivariatePolynomial:
        return vec_dot(self, self)

    def __add__(self, other):
        return PolyVec3._raw(K.vadd(self.coeffs, _vec(other).coeffs))

    def __sub__(self, other):
        return PolyVec3._raw(K.vsub(self.coeffs, _vec(other).coeffs))

    def __rsub__(self, other):
        return _vec(other) - self

    def __neg__(self):
        return PolyVec3._raw(-self.coeffs)

    def __mul__(self, s):
        if isinstance(s, Real):
            return PolyVec3._raw(self.coeffs * float(s))
        s = _biv(s)
        return PolyVec3._raw(K.vscale(self.coeffs, s.coeffs))

    __rmul__ = __mul__

    def __repr__(self):
        return f"PolyVec3(degree={self.degree})"


def _vfit(arr):
    d = max(K.bdeg(np.ascontiguousarray(arr[k])) for k in range(3))
    if d > MAX_DEGREE:
        raise DegreeOverflowError(f"degree {d} exceeds cap {MAX_DEGREE}")
    n = d + 1
    if arr.shape[1] == n:
        return np.ascontiguousarray(arr)
    out = np.zeros((3, n, n))
    m = min(n, arr.shape[1])
    out[:, :m, :m] = arr[:, :m, :m]
    return out


def _vec(x) -> PolyVec3:
    if isinstance(x, PolyVec3):
        return x
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape == (3,):
        return PolyVec3.constant(arr)
    raise TypeError(f"cannot use {type(x).__name__} as a polynomial vector")


def vec_dot(a, b) -> BivariatePolynomial:
    a, b = _vec(a), _vec(b)
    if a.degree + b.degree > MAX_DEGREE:
        raise DegreeOverflowError("dot product degree exceeds cap")
    return BivariatePolynomial._raw(K.vdot(a.coeffs, b.coeffs))


def vec_cross(a, b) -> PolyVec3:
    a, b = _vec(a), _vec(b)
    if a.degree + b.degree > MAX_DEGREE:
        raise DegreeOverflowError("cross product degree exceeds cap")
    return PolyVec3._raw(K.vcross(a.coeffs, b.coeffs))


class RationalPolyVec3:
    """``num / den`` with a vector numerator and a shared scalar denominator."""

    __slots__ = ("num", "den")

    def __init__(self, num: PolyVec3, den: BivariatePolynomial):
        if den.is_zero():
            raise ValueError("denominator is identically zero")
        self.num = num
        self.den = den

    def __call__(self, u: float, v: float) -> np.ndarray:
        return self.num(u, v) / self.den(u, v)

    def __repr__(self):
        return f"RationalPolyVec3(num_degree={self.num.degree}, den_degree={self.den.degree})"
