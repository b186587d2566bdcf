"""Seeded property suites behind ``specpoly verify``.

Each suite returns a flat dict of metrics with a ``passed`` flag, so the CLI
can print one JSON line per suite and tests can assert on the raw numbers.
"""

from __future__ import annotations

import math
import time

import numpy as np
from numpy.polynomial import polynomial as npoly

from .oracle import brute_force_chains, compare_solution_sets, random_instance
from .pipeline import solve_tuple
from .poly import BivariatePolynomial, UnivariatePolynomial
from .polynomialize import ChainType
from .resultant import bezout_matrix, det_eval, expand_determinant, poly_matrix_array, sylvester_matrix
from .rootfind import SolverConfig, isolate_roots
from .scene import interpolate_normal

ORACLE_CASES = {"R": 1000, "T": 1000, "RR": 200}
ORACLE_RECALL = {"R": 1.0, "T": 0.99, "RR": 0.95}
TOL_POS = 1e-5
PLANTED_DET = 1e-8
SYLVESTER_TOL = 1e-6


def _random_biv(rng, d: int, scale: float = 1.0) -> BivariatePolynomial:
    c = np.zeros((d + 1, d + 1))
    for i in range(d + 1):
        for j in range(d + 1 - i):
            c[i, j] = rng.normal() * scale
    return BivariatePolynomial(c)


# ------------------------------------------------------------------ poly


def suite_poly(seed: int = 0, cases: int = 200) -> dict:
    """Products, sums and partials against numpy's 2-d polynomial evaluation."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        p = _random_biv(rng, int(rng.integers(0, 5)))
        q = _random_biv(rng, int(rng.integers(0, 5)))
        u, v = rng.uniform(-1, 1, 2)
        pv, qv = npoly.polyval2d(u, v, p.coeffs), npoly.polyval2d(u, v, q.coeffs)
        du = npoly.polyval2d(u, v, npoly.polyder(p.coeffs, axis=0))
        checks = [
            (p * q)(u, v) - pv * qv,
            (p + q)(u, v) - (pv + qv),
            (p - q)(u, v) - (pv - qv),
            p.partial_u()(u, v) - du,
            p.slice_at_v(v)(u) - pv,
        ]
        worst = max(worst, max(abs(float(x)) for x in checks))
        a = UnivariatePolynomial(rng.normal(size=int(rng.integers(1, 7))))
        b = UnivariatePolynomial(rng.normal(size=int(rng.integers(1, 7))))
        worst = max(worst, float(np.max(np.abs(
            np.pad((a * b).coeffs, (0, 12))[:12] - np.pad(npoly.polymul(a.coeffs, b.coeffs), (0, 12))[:12]))))
    return {"suite": "poly", "cases": cases, "worst_error": worst, "passed": worst < 1e-12}


# ------------------------------------------------------------- resultant


def planted_system(rng, max_degree: int = 4):
    """Random pair (a, b) of total degrees in [1, max_degree] sharing a root
    (u*, v*) in the unit square."""
    us, vs = rng.uniform(0.05, 0.95, 2)
    a = _random_biv(rng, int(rng.integers(1, max_degree + 1)))
    b = _random_biv(rng, int(rng.integers(1, max_degree + 1)))
    a = a - BivariatePolynomial.constant(a(us, vs))
    b = b - BivariatePolynomial.constant(b(us, vs))
    return a, b, float(us), float(vs)


def _roots01(p) -> np.ndarray:
    if p.is_zero():
        return np.empty(0)
    return isolate_roots(p, 0.0, 1.0, tol=1e-13).roots


def bezout_sylvester_agreement(a, b) -> float:
    """Max distance between the [0, 1] root sets of the two determinants (inf on count mismatch)."""
    rb = _roots01(expand_determinant(bezout_matrix(a, b)))
    rs = _roots01(expand_determinant(poly_matrix_array(sylvester_matrix(a.normalized(), b.normalized()))))
    if rb.size != rs.size:
        return math.inf
    return float(np.max(np.abs(np.sort(rb) - np.sort(rs)))) if rb.size else 0.0


def random_22_system(rng):
    """Random pair of total degree 2, or None when neither depends on u."""
    a, b = _random_biv(rng, 2), _random_biv(rng, 2)
    if a.deg_u < 1 and b.deg_u < 1:
        return None
    return a, b


def suite_resultant(seed: int = 0, cases: int = 1000) -> dict:
    """Planted common roots vanish on the Bezout determinant; Bezout and
    Sylvester determinants share their real roots in [0, 1]."""
    rng = np.random.default_rng(seed)
    worst_det = 0.0
    for _ in range(cases):
        a, b, _u, v = planted_system(rng)
        worst_det = max(worst_det, abs(det_eval(bezout_matrix(a, b), v)))
    worst_syl = 0.0
    compared = 0
    skipped = 0
    while compared < cases:
        pair = random_22_system(rng)
        if pair is None:
            continue
        a, b = pair
        if a.deg_u != b.deg_u:
            # degree drop: the determinants differ by a power of a leading coefficient
            skipped += 1
            continue
        d = bezout_sylvester_agreement(a, b)
        worst_syl = max(worst_syl, d)
        compared += 1
    return {"suite": "resultant", "cases": cases, "worst_planted_det": worst_det,
            "worst_root_gap": worst_syl, "skipped_unequal_degree": skipped,
            "passed": worst_det < PLANTED_DET and worst_syl < SYLVESTER_TOL}


# -------------------------------------------------------------- rootfind


def suite_rootfind(seed: int = 0, cases: int = 500) -> dict:
    """Planted simple roots in [0, 1] times a positive quadratic are recovered."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    count_errors = 0
    for _ in range(cases):
        k = int(rng.integers(1, 6))
        while True:
            r = np.sort(rng.uniform(0.02, 0.98, k))
            if k == 1 or np.min(np.diff(r)) > 1e-3:
                break
        c = npoly.polyfromroots(r)
        c0 = 1.0 + rng.uniform(0.1, 1.0)
        # x^2 + c1 x + c0 has no real roots while |c1| < 2 sqrt(c0)
        c = npoly.polymul(c, [c0, rng.uniform(-1.9, 1.9) * math.sqrt(c0), 1.0])
        got = isolate_roots(c).roots
        if got.size != k:
            count_errors += 1
            continue
        worst = max(worst, float(np.max(np.abs(got - r))))
    return {"suite": "rootfind", "cases": cases, "worst_error": worst, "count_errors": count_errors,
            "passed": count_errors == 0 and worst < 1e-8}


# ---------------------------------------------------------------- oracle


def _beta(chain) -> float:
    """Refraction discriminant at the first vertex of a chain (negative under TIR)."""
    tri = chain.triangles[0]
    n = interpolate_normal(tri, chain.bcs[0])
    n = n / np.linalg.norm(n)
    d = chain.vertices[0] - chain.x0
    d = d / np.linalg.norm(d)
    e_in, e_out = tri.etas_from(chain.x0)
    c = float(np.dot(d, n))
    return 1.0 - (e_in / e_out) ** 2 * (1.0 - c * c)


def suite_oracle(kind: str, seed: int = 0, cases: int | None = None,
                 cfg: SolverConfig = SolverConfig()) -> dict:
    """Solver against the brute-force oracle on random planted instances.

    Oracle chains at near-singular roots carry no ground truth and are left
    out of both sets. Every miss is listed with its seed and (for T) the
    refraction discriminant at the missed chain.
    """
    kind = kind.upper()
    ChainType.parse(kind)
    cases = ORACLE_CASES.get(kind, 100) if cases is None else cases
    t0 = time.perf_counter()
    n_oracle = n_found = matched = 0
    tangent = 0
    misses = []
    extras = []
    unflagged = 0
    for s in range(seed, seed + cases):
        seps, tris = random_instance(kind, np.random.default_rng(s))
        found, rep = solve_tuple(seps, tris, kind, cfg)
        oracle = brute_force_chains(seps, tris, kind, solver_cfg=cfg)
        excl = [c for c in oracle if c.note == "tangent"]
        tangent += len(excl)
        m = compare_solution_sets(found, oracle, TOL_POS, exclude=excl)
        n_oracle += m.n_oracle
        n_found += m.n_found
        matched += m.matched
        if m.missed:
            flagged = rep.scan_miss_risk > 0
            unflagged += 0 if flagged else len(m.missed)
            info = {"seed": s, "count": len(m.missed), "flagged": flagged}
            if kind == "T":
                info["beta"] = [round(_beta(c), 6) for c in oracle
                                if any(np.max(np.abs(c.key() - k)) <= TOL_POS for k in m.missed)]
            misses.append(info)
        if m.extra:
            extras.append({"seed": s, "count": len(m.extra)})
    recall = matched / n_oracle if n_oracle else 1.0
    precision = matched / n_found if n_found else 1.0
    need = ORACLE_RECALL.get(kind, 0.95)
    ok = recall >= need
    if kind == "R":
        ok = ok and precision == 1.0
    if kind == "RR":
        ok = ok and unflagged == 0
    return {"suite": f"oracle-{kind}", "cases": cases, "recall": recall, "precision": precision,
            "oracle_chains": n_oracle, "found_chains": n_found, "matched": matched,
            "tangent_excluded": tangent, "unflagged_misses": unflagged, "misses": misses,
            "extras": extras, "seconds": round(time.perf_counter() - t0, 3), "passed": bool(ok)}


SUITES = ("poly", "resultant", "rootfind", "oracle-R", "oracle-T", "oracle-RR")


def run_suite(name: str, seed: int = 0, cases: int | None = None,
              cfg: SolverConfig = SolverConfig()) -> dict:
    if name == "poly":
        return suite_poly(seed, cases or 200)
    if name == "resultant":
        return suite_resultant(seed, cases or 1000)
    if name == "rootfind":
        return suite_rootfind(seed, cases or 500)
    if name.startswith("oracle-"):
        return suite_oracle(name.split("-", 1)[1], seed, cases, cfg)
    raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
