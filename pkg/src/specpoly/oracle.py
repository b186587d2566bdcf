"""Brute-force reference solver and random planted instances.

The oracle shares only the scene and polynomial containers with the main
solver: it evaluates the system with ``numpy.polynomial`` on a dense lattice,
runs vectorized damped Newton from every lattice local minimum of
``a**2 + b**2`` and clusters the converged points. Candidate chains then go
through the same path-space validation as the solver, so a comparison
isolates the root finding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.optimize import linear_sum_assignment

from .pipeline import SpecularChain, path_phase, reflect, refract, validate_path
from .polynomialize import ChainType, DegenerateConfigurationError, SpecularSystem, build_system
from .rootfind import SolverConfig
from .scene import BarycentricCoord, Separators, SpecularTriangle, interpolate_normal, interpolate_position

RESIDUAL_GATE = 1e-8
TANGENT_JAC = 1e-6


@dataclass(frozen=True)
class OracleConfig:
    grid_n: int = 256
    refine_iters: int = 30
    cluster_tol: float = 1e-6
    margin: float = 0.05

    def __post_init__(self):
        if self.grid_n < 16:
            raise ValueError("grid_n must be at least 16")
        if self.refine_iters < 1 or self.cluster_tol <= 0 or self.margin < 0:
            raise ValueError("invalid oracle configuration")


@dataclass(frozen=True)
class OracleRoot:
    u: float
    v: float
    residual: float
    jac_det: float

    @property
    def tangent(self) -> bool:
        """Near-singular Jacobian: a tangent or clustered root the grid may merge."""
        return abs(self.jac_det) < TANGENT_JAC


def _eval(c, u, v):
    return npoly.polyval2d(u, v, c)


def _newton(a, b, u, v, iters):
    au, av = npoly.polyder(a, axis=0), npoly.polyder(a, axis=1)
    bu, bv = npoly.polyder(b, axis=0), npoly.polyder(b, axis=1)
    for _ in range(iters):
        A, B = _eval(a, u, v), _eval(b, u, v)
        f = A * A + B * B
        j11, j12, j21, j22 = _eval(au, u, v), _eval(av, u, v), _eval(bu, u, v), _eval(bv, u, v)
        det = j11 * j22 - j12 * j21
        ok = np.abs(det) > 1e-300
        sd = np.where(ok, det, 1.0)
        du = np.where(ok, (j22 * A - j12 * B) / sd, 0.0)
        dv = np.where(ok, (j11 * B - j21 * A) / sd, 0.0)
        t = np.ones_like(u)
        done = np.zeros(u.shape, dtype=bool)
        for _h in range(12):
            un, vn = u - t * du, v - t * dv
            fn = _eval(a, un, vn) ** 2 + _eval(b, un, vn) ** 2
            better = (fn <= f) & ~done
            u = np.where(better, un, u)
            v = np.where(better, vn, v)
            done |= better
            t = np.where(done, t, 0.5 * t)
            if done.all():
                break
    return u, v


def brute_force_roots(system: SpecularSystem, cfg: OracleConfig = OracleConfig(), detail: bool = False):
    """Common roots of ``(a, b)`` near the unit simplex by dense seeding.

    Returns ``(u, v)`` pairs, or :class:`OracleRoot` records with ``detail``.
    Points with ``|a|, |b| < 1e-8`` (conditioned polynomials) are kept.
    """
    a = np.asarray(system.a.coeffs, dtype=float)
    b = np.asarray(system.b.coeffs, dtype=float)
    m = cfg.margin
    g = np.linspace(-m, 1.0 + m, cfg.grid_n)
    U, V = np.meshgrid(g, g, indexing="ij")
    F = _eval(a, U, V) ** 2 + _eval(b, U, V) ** 2
    F[U + V > 1.0 + 2.0 * m] = np.inf
    P = np.pad(F, 1, constant_values=np.inf)
    core = P[1:-1, 1:-1]
    is_min = np.isfinite(core)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                is_min &= core <= P[1 + di:P.shape[0] - 1 + di, 1 + dj:P.shape[1] - 1 + dj]
    u, v = _newton(a, b, U[is_min], V[is_min], cfg.refine_iters)
    A, B = _eval(a, u, v), _eval(b, u, v)
    res = np.maximum(np.abs(A), np.abs(B))
    near = (u >= -m) & (v >= -m) & (u + v <= 1.0 + 2.0 * m)
    keep = np.isfinite(res) & (res < RESIDUAL_GATE) & near
    u, v, res = u[keep], v[keep], res[keep]
    order = np.argsort(res, kind="stable")
    roots = []
    for k in order:
        if all(max(abs(u[k] - r.u), abs(v[k] - r.v)) > cfg.cluster_tol for r in roots):
            ju = _eval(npoly.polyder(a, axis=0), u[k], v[k]), _eval(npoly.polyder(a, axis=1), u[k], v[k])
            jv = _eval(npoly.polyder(b, axis=0), u[k], v[k]), _eval(npoly.polyder(b, axis=1), u[k], v[k])
            roots.append(OracleRoot(float(u[k]), float(v[k]), float(res[k]), float(ju[0] * jv[1] - ju[1] * jv[0])))
    roots.sort(key=lambda r: (r.u, r.v))
    return roots if detail else [(r.u, r.v) for r in roots]


def brute_force_chains(separators: Separators, tuple_, chain, scene=None, cfg: OracleConfig = OracleConfig(),
                       solver_cfg: SolverConfig = SolverConfig()) -> list:
    """Admissible chains from oracle roots, validated exactly like the solver's.

    Chains whose root has a near-singular Jacobian carry ``note == "tangent"``.
    """
    ch = chain if isinstance(chain, ChainType) else ChainType.parse(str(chain))
    try:
        system = build_system(separators, tuple(tuple_), ch)
    except DegenerateConfigurationError:
        return []
    roots = brute_force_roots(system, cfg, detail=True)
    out = []
    for r in roots:
        found = path_phase(system, separators, tuple_, [(r.u, r.v)], solver_cfg, scene, polish=False)
        out.extend(replace(c, note="tangent") if r.tangent else c for c in found)
    # distinct roots may map to one chain (e.g. a doubled factor); keep one
    uniq = []
    for c in out:
        if all(np.max(np.abs(c.key() - d.key())) > cfg.cluster_tol for d in uniq):
            uniq.append(c)
    return uniq


# ---------------------------------------------------------------- matching


@dataclass
class MatchReport:
    recall: float
    precision: float
    worst: float
    matched: int
    n_found: int
    n_oracle: int
    missed: list = field(default_factory=list)
    extra: list = field(default_factory=list)


def _keys(items):
    out = []
    for it in items:
        if isinstance(it, SpecularChain):
            out.append(it.key())
        else:
            out.append(np.asarray(it, dtype=float).reshape(-1))
    return out


def _dedup_keys(keys, tol):
    kept = []
    for k in keys:
        if all(np.max(np.abs(k - q)) > tol for q in kept):
            kept.append(k)
    return kept


def compare_solution_sets(found, oracle_set, tol_pos: float = 1e-5, exclude=()) -> MatchReport:
    """Optimal one-to-one matching of two solution sets under a max-abs tolerance.

    Items are chains (compared by their barycentric keys) or coordinate
    tuples. Near-duplicates within ``tol_pos`` are merged first. Items within
    ``tol_pos`` of an ``exclude`` entry (e.g. oracle roots without ground
    truth) are dropped from both sets.
    """
    if not tol_pos > 0:
        raise ValueError("tol_pos must be positive")
    X = _keys(exclude)

    def keep(k):
        return all(k.shape != x.shape or np.max(np.abs(k - x)) > tol_pos for x in X)

    F = [k for k in _dedup_keys(_keys(found), tol_pos) if keep(k)]
    O = [k for k in _dedup_keys(_keys(oracle_set), tol_pos) if keep(k)]
    matched, worst = 0, 0.0
    pairs = []
    if F and O:
        C = np.array([[np.max(np.abs(f - o)) if f.shape == o.shape else np.inf for o in O] for f in F])
        big = np.where(np.isfinite(C), C, 1e300)
        rows, cols = linear_sum_assignment(big)
        for r, c in zip(rows, cols):
            if C[r, c] <= tol_pos:
                pairs.append((r, c))
                worst = max(worst, float(C[r, c]))
        matched = len(pairs)
    mf = {r for r, _ in pairs}
    mo = {c for _, c in pairs}
    return MatchReport(
        recall=matched / len(O) if O else 1.0,
        precision=matched / len(F) if F else 1.0,
        worst=worst, matched=matched, n_found=len(F), n_oracle=len(O),
        missed=[O[i] for i in range(len(O)) if i not in mo],
        extra=[F[i] for i in range(len(F)) if i not in mf])


# ------------------------------------------------------ random instances


def _unit(x):
    return x / np.linalg.norm(x)


def _frame(n):
    h = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.8 else np.array([0.0, 1.0, 0.0])
    t = _unit(np.cross(n, h))
    return t, np.cross(n, t)


def _random_dir_around(rng, n, max_angle):
    t, s = _frame(n)
    th = max_angle * math.sqrt(rng.uniform())
    ph = rng.uniform(0.0, 2.0 * math.pi)
    return _unit(math.cos(th) * n + math.sin(th) * (math.cos(ph) * t + math.sin(ph) * s))


def _triangle_at(rng, x, n_geo, bc, size, bend, **kw) -> SpecularTriangle:
    """Random triangle in the plane through ``x`` with normal ``n_geo`` and ``x`` at ``bc``."""
    t, s = _frame(n_geo)
    ang = rng.uniform(0, 2 * math.pi) + np.array([0.0, 2.1, 4.2]) + rng.uniform(-0.4, 0.4, 3)
    rad = size * rng.uniform(0.6, 1.2, 3)
    q = [r * (math.cos(a) * t + math.sin(a) * s) for r, a in zip(rad, ang)]
    u, v = bc
    off = (1 - u - v) * q[0] + u * q[1] + v * q[2]
    P = np.array([x + qi - off for qi in q])
    if np.dot(np.cross(P[1] - P[0], P[2] - P[0]), n_geo) < 0:
        P = P[[0, 2, 1]]
        bc = (v, u)
    N = np.array([_unit(n_geo + bend * rng.normal(size=3)) for _ in range(3)])
    N = np.array([m if np.dot(m, n_geo) > 0.2 else n_geo for m in N])
    return SpecularTriangle(P, N, **kw), BarycentricCoord(*bc)


def _bc(rng, inset=0.05):
    while True:
        u, v = rng.uniform(inset, 1 - inset, 2)
        if u + v <= 1 - inset:
            return float(u), float(v)


def random_instance(kind: str, rng, bend: float = 0.3, max_tries: int = 100):
    """A random one- or two-vertex configuration with a planted admissible chain.

    ``kind`` is ``"R"``, ``"T"`` or ``"RR"``. Returns ``(separators, triangles)``.
    Shading normals are perturbed by ``bend`` so some instances carry several
    chains; the planted one is checked with :func:`validate_path`.
    """
    kind = kind.upper()
    for _ in range(max_tries):
        n1 = _random_dir_around(rng, np.array([0.0, 0.0, 1.0]), math.pi)
        x1 = rng.uniform(-0.5, 0.5, 3)
        kw = {}
        if "T" in kind:
            kw = dict(eta_in=float(rng.uniform(1.3, 1.8)), eta_out=1.0, material="dielectric")
        tri1, bc1 = _triangle_at(rng, x1, n1, _bc(rng), rng.uniform(0.5, 1.5), bend, **kw)
        ns = _unit(interpolate_normal(tri1, bc1))
        x1 = interpolate_position(tri1, bc1)
        front = rng.uniform() < 0.5 if kind == "T" else True
        w0 = _random_dir_around(rng, ns if front else -ns, 1.2)
        x0 = x1 + rng.uniform(0.5, 3.0) * w0
        d0 = x1 - x0
        if kind == "T":
            e_prev, e_next = tri1.etas_from(x0)
            d1 = refract(d0, ns, e_prev, e_next)
            if d1 is None:
                continue
            xe = x1 + rng.uniform(0.5, 3.0) * _unit(d1)
            tris, bcs = (tri1,), (bc1,)
        else:
            d1 = _unit(reflect(d0, ns))
            if kind == "R":
                xe = x1 + rng.uniform(0.5, 3.0) * d1
                tris, bcs = (tri1,), (bc1,)
            elif kind == "RR":
                x2 = x1 + rng.uniform(1.0, 3.0) * d1
                n2 = _random_dir_around(rng, -d1, 1.0)
                tri2, bc2 = _triangle_at(rng, x2, n2, _bc(rng), rng.uniform(0.5, 1.5), bend)
                d2 = _unit(reflect(d1, interpolate_normal(tri2, bc2)))
                xe = x2 + rng.uniform(0.5, 3.0) * d2
                tris, bcs = (tri1, tri2), (bc1, bc2)
            else:
                raise ValueError(f"unsupported instance kind {kind!r}")
        seps = Separators(x0, xe)
        xs = np.array([interpolate_position(t, bc) for t, bc in zip(tris, bcs)])
        planted = validate_path(SpecularChain(tuple(range(len(tris))), ChainType.parse(kind), bcs, xs,
                                              tris, x0, xe))
        if planted.admissible:
            return seps, tris
    raise RuntimeError("could not plant an admissible chain")


# ----------------------------------------------------------- frozen corpus


CORPUS_KINDS = ("R", "T", "RR")


def corpus_counts(kind: str, seeds, cfg: OracleConfig = OracleConfig()) -> list:
    """(seed, oracle admissible-chain count, tangent count) for each seed."""
    out = []
    for s in seeds:
        rng = np.random.default_rng(int(s))
        seps, tris = random_instance(kind, rng)
        chains = brute_force_chains(seps, tris, kind, None, cfg)
        out.append((int(s), len(chains), sum(c.note == "tangent" for c in chains)))
    return out


def write_corpus(path, kind: str, records) -> None:
    lines = [f"# oracle chain counts for random {kind} instances: seed count tangent"]
    lines += [f"{s} {n} {t}" for s, n, t in records]
    Path(path).write_text("\n".join(lines) + "\n")


def read_corpus(path) -> list:
    out = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            s, n, t = line.split()
            out.append((int(s), int(n), int(t)))
    return out


def regenerate_corpus(directory, n_seeds: int = 50, kinds=CORPUS_KINDS) -> list:
    """Recompute and write ``corpus_<kind>.txt`` files; returns the paths written."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for kind in kinds:
        p = directory / f"corpus_{kind}.txt"
        write_corpus(p, kind, corpus_counts(kind, range(n_seeds)))
        paths.append(p)
    return paths
