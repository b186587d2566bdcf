"""Piecewise rational surrogate for sqrt on [0, 1].

Each piece approximates ``sqrt(x)`` by ``(c0 + c1*x) / (d0 + d1*x)``. The
pieces are fitted in the minimax sense with a linear program per trial error
level, and the breakpoints are placed so every piece has the same error.

A fitted table is shipped in ``data/sqrt_pieces.txt`` and certified against a
dense grid when first loaded; :func:`fit_sqrt_pieces` regenerates it.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.optimize import linprog

N_PIECES = 6
MAX_ERROR = 1e-3
CERT_POINTS = 100_000


class SqrtFitError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class SqrtApprox:
    """Contiguous rational pieces covering [0, 1].

    Attributes
    ----------
    breaks : (n+1,) array
        ``breaks[0] == 0``, ``breaks[-1] == 1``, strictly increasing.
    coeffs : (n, 4) array
        Rows ``(c0, c1, d0, d1)``.
    """

    breaks: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        b = np.array(self.breaks, dtype=np.float64)
        c = np.array(self.coeffs, dtype=np.float64)
        if b.ndim != 1 or c.shape != (b.size - 1, 4):
            raise ValueError("breaks/coeffs shape mismatch")
        if b[0] != 0.0 or b[-1] != 1.0 or np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must increase from 0 to 1")
        for k in range(c.shape[0]):
            q = c[k, 2] + c[k, 3] * b[k : k + 2]
            if not (np.all(q > 0) or np.all(q < 0)):
                raise ValueError(f"denominator of piece {k} vanishes on its interval")
        b.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "coeffs", c)

    @property
    def n_pieces(self) -> int:
        return self.coeffs.shape[0]

    def piece_index(self, x):
        """Index of the piece containing ``x`` (values outside [0, 1] clamp to the end pieces)."""
        idx = np.searchsorted(self.breaks, x, side="right") - 1
        return np.clip(idx, 0, self.n_pieces - 1)

    def piece(self, k: int):
        return tuple(float(t) for t in self.coeffs[k])

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        c = self.coeffs[self.piece_index(x)]
        out = (c[..., 0] + c[..., 1] * x) / (c[..., 2] + c[..., 3] * x)
        return out if out.ndim else float(out)

    def max_error(self, n: int = CERT_POINTS) -> float:
        x = np.linspace(0.0, 1.0, n)
        return float(np.max(np.abs(self(x) - np.sqrt(x))))

    def certify(self, n: int = CERT_POINTS, bound: float = MAX_ERROR) -> float:
        err = self.max_error(n)
        if not err < bound:
            raise SqrtFitError(f"sqrt surrogate error {err:.3e} exceeds {bound:.0e}")
        return err

    # text table: one line per piece "lo hi c0 c1 d0 d1"
    def dumps(self) -> str:
        lines = ["# lo hi c0 c1 d0 d1   sqrt(x) ~ (c0 + c1 x) / (d0 + d1 x) on [lo, hi]"]
        for k in range(self.n_pieces):
            vals = [self.breaks[k], self.breaks[k + 1], *self.coeffs[k]]
            lines.append(" ".join(repr(float(v)) for v in vals))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> SqrtApprox:
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        arr = np.array(rows, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 6:
            raise ValueError("sqrt table rows must have 6 columns")
        if np.any(arr[1:, 0] != arr[:-1, 1]):
            raise ValueError("sqrt table pieces are not contiguous")
        breaks = np.append(arr[:, 0], arr[-1, 1])
        return cls(breaks, arr[:, 2:])

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> SqrtApprox:
        return cls.loads(Path(path).read_text())


def _minimax_unit(r: float, npts: int = 160, iters: int = 30):
    """Best (1,1) rational approximation of sqrt on [r, 1]: (error, c0, c1, d0, d1).

    Bisection on the error level; each level is a feasibility LP
    ``|sqrt(x) q(x) - p(x)| <= e q(x)``, ``q >= 1`` on a Chebyshev-clustered grid.
    """
    t = np.cos(np.linspace(np.pi, 0.0, npts))
    x = r + (1.0 - r) * (t + 1.0) / 2.0
    f = np.sqrt(x)
    one = np.ones_like(x)
    zero = np.zeros_like(x)
    lo, hi = 0.0, float(np.sqrt(1.0) - np.sqrt(r)) / 2.0 + 1e-12
    best = None
    for _ in range(iters):
        e = 0.5 * (lo + hi)
        a_ub = np.concatenate([
            np.stack([-one, -x, f - e, (f - e) * x], axis=1),
            np.stack([one, x, -f - e, (-f - e) * x], axis=1),
            np.stack([zero, zero, -one, -x], axis=1),
        ])
        b_ub = np.concatenate([zero, zero, -one])
        res = linprog(np.zeros(4), A_ub=a_ub, b_ub=b_ub, bounds=[(None, None)] * 4, method="highs")
        if res.status == 0:
            hi, best = e, res.x
        else:
            lo = e
    if best is None:
        raise SqrtFitError(f"minimax LP infeasible on [{r}, 1]")
    return hi, best


def _piece_on(a: float, b: float):
    """Minimax coefficients on [a, b] via the scaling sqrt(b t) = sqrt(b) sqrt(t)."""
    err, (c0, c1, d0, d1) = _minimax_unit(a / b)
    s = np.sqrt(b)
    return err * s, np.array([s * c0, s * c1 / b, d0, d1 / b])


def fit_sqrt_pieces(n_pieces: int = N_PIECES, target: float = 7e-4) -> SqrtApprox:
    """Fit ``n_pieces`` equal-error rational pieces on [0, 1] and certify them.

    Breakpoints are placed right to left: each piece is widened until its
    minimax error reaches ``target``; the leftmost piece takes what remains.
    """
    breaks = [1.0]
    for _ in range(n_pieces - 1):
        b = breaks[-1]
        lo, hi = -12.0, 0.0  # log10 of the ratio a / b
        for _ in range(24):
            mid = 0.5 * (lo + hi)
            if _piece_on(b * 10.0**mid, b)[0] <= target:
                hi = mid
            else:
                lo = mid
        breaks.append(b * 10.0**hi)
    breaks.append(0.0)
    breaks = breaks[::-1]
    coeffs = [_piece_on(breaks[k], breaks[k + 1])[1] for k in range(n_pieces)]
    approx = SqrtApprox(np.array(breaks), np.array(coeffs))
    approx.certify()
    return approx


_TABLE = "sqrt_pieces.txt"


@lru_cache(maxsize=1)
def default_sqrt_approx() -> SqrtApprox:
    """The pinned table, certified on first use (hard error if it fails)."""
    text = resources.files("specpoly").joinpath("data", _TABLE).read_text()
    approx = SqrtApprox.loads(text)
    approx.certify()
    return approx


def regenerate_table(path=None) -> SqrtApprox:
    approx = fit_sqrt_pieces()
    if path is None:
        path = Path(__file__).with_name("data") / _TABLE
    approx.save(path)
    default_sqrt_approx.cache_clear()
    return approx
