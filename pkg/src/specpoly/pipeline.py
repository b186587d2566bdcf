"""Per-tuple solver: coefficient phase, elimination phase, path phase.

``solve_tuple`` builds the bivariate system for one triangle tuple, eliminates
u with the Bezout resultant, finds the v roots, back-substitutes for u and
then checks every candidate in path space. Each candidate lands in exactly one
bucket of the :class:`SolveReport` (domain, superfluous, occluded, duplicate,
admissible).
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from . import _polykern as K
from .polynomialize import (DegenerateConfigurationError, REFLECT, REFRACT, ChainType,
                            SpecularSystem, build_system)
from .resultant import bezout_kernel, laplace_det_kernel
from .rootfind import (TANGENT_REL, SolverConfig, _dedup, backsub_kernel, isolate_kernel,
                       newton_kernel, rescue_kernel, scan_kernel)
from .scene import (BarycentricCoord, Scene, Separators, SpecularTriangle, Triangle, first_hit,
                    interpolate_normal, interpolate_position, ray_plane_barycentric, visible)

DOMAIN_SLACK = 1e-9
RESCUE_NEWTON = 20
RESCUE_CONVERGED = 1e-10
PHASES = ("poly", "det", "sol_v", "sol_u", "path")
BUCKETS = ("domain", "superfluous", "occluded", "duplicate", "admissible")


# ------------------------------------------------------------------ records


@dataclass(frozen=True, eq=False)
class SpecularChain:
    """A candidate or solved chain ``x0 -> vertices -> x_end``.

    ``bcs`` and ``vertices`` are ordered from the camera side. ``residual`` is
    the largest per-vertex ``|h x n| / |h|``.
    """

    tuple_ids: tuple
    chain_type: ChainType
    bcs: tuple
    vertices: np.ndarray
    triangles: tuple = ()
    x0: np.ndarray | None = None
    x_end: np.ndarray | None = None
    residual: float = math.inf
    domain_ok: bool = False
    constraint_ok: bool = False
    visible: bool = False
    polished: bool = False
    note: str = ""

    @property
    def admissible(self) -> bool:
        return self.domain_ok and self.constraint_ok and self.visible

    @property
    def flags(self) -> dict:
        return {"domain_ok": self.domain_ok, "constraint_ok": self.constraint_ok,
                "visible": self.visible, "polished": self.polished}

    def key(self) -> np.ndarray:
        return np.array([c for bc in self.bcs for c in bc])

    def describe(self) -> str:
        parts = [f"chain {self.chain_type.name} tuple={list(self.tuple_ids)} residual={self.residual:.3e}"]
        for i, (bc, x) in enumerate(zip(self.bcs, self.vertices)):
            parts.append(f"  x{i + 1}: bc=({bc[0]:.12f}, {bc[1]:.12f}) pos=({x[0]:.9f}, {x[1]:.9f}, {x[2]:.9f})")
        return "\n".join(parts)


@dataclass
class SolveReport:
    """Counters and phase timings; merge with ``+=``.

    Every candidate (a (u, v) pair, or a v root with no u root) lands in one
    bucket, so ``candidates == sum of buckets`` (see :meth:`audit`).
    """

    tuples: int = 0
    systems: int = 0
    degenerate: int = 0
    resultant_roots: int = 0
    candidates: int = 0
    domain: int = 0
    superfluous: int = 0
    occluded: int = 0
    duplicate: int = 0
    admissible: int = 0
    polish_calls: int = 0
    scan_miss_risk: int = 0
    timings: dict = field(default_factory=lambda: {p: 0.0 for p in PHASES})
    diagnostics: list = field(default_factory=list)

    def __iadd__(self, other: SolveReport) -> SolveReport:
        for f in ("tuples", "systems", "degenerate", "resultant_roots", "candidates", "domain",
                  "superfluous", "occluded", "duplicate", "admissible", "polish_calls", "scan_miss_risk"):
            setattr(self, f, getattr(self, f) + getattr(other, f))
        for p in PHASES:
            self.timings[p] += other.timings[p]
        self.diagnostics.extend(other.diagnostics)
        return self

    def audit(self) -> bool:
        return self.candidates == sum(getattr(self, b) for b in BUCKETS)

    @property
    def admissible_ratio(self) -> float:
        return self.admissible / self.resultant_roots if self.resultant_roots else 0.0

    def counts(self) -> dict:
        keys = ("tuples", "systems", "degenerate", "resultant_roots", "candidates") + BUCKETS + (
            "polish_calls", "scan_miss_risk")
        return {k: getattr(self, k) for k in keys}

    def to_text(self) -> str:
        lines = [f"{k} {v}" for k, v in self.counts().items()]
        lines.append(f"audit {'ok' if self.audit() else 'FAILED'}")
        n = max(self.systems, 1)
        us = {p: self.timings[p] * 1e6 / n for p in PHASES}
        total = us["poly"] + us["det"] + us["sol_v"] + us["sol_u"]
        lines.append("time_per_tuple_us  Poly.  Det.  Sol.v1  Sol.u1  Total  (Path)")
        lines.append(f"time_per_tuple_us  {us['poly']:.3f}  {us['det']:.3f}  {us['sol_v']:.3f}  "
                     f"{us['sol_u']:.3f}  {total:.3f}  ({us['path']:.3f})")
        for d in self.diagnostics:
            lines.append(f"diagnostic {d}")
        return "\n".join(lines)


# --------------------------------------------------------------- geometry


def _unit(v):
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


def reflect(d, n):
    """Mirror ``d`` about unit-normalized ``n``."""
    n = _unit(n)
    return d - 2.0 * np.dot(d, n) * n


def refract(d, n, eta_prev, eta_next):
    """Snell transmission of unit ``d`` through a surface with normal ``n``; None under TIR."""
    d = _unit(d)
    n = _unit(n)
    if np.dot(d, n) > 0:
        n = -n
    r = eta_prev / eta_next
    c = -np.dot(d, n)
    k = 1.0 - r * r * (1.0 - c * c)
    if k < 0.0:
        return None
    return r * d + (r * c - math.sqrt(k)) * n


def _event_direction(event, d_in, tri, bc, prev_point):
    n = interpolate_normal(tri, bc)
    if event == REFLECT:
        return reflect(d_in, n)
    e_prev, e_next = tri.etas_from(prev_point)
    return refract(d_in, n, e_prev, e_next)


def reconstruct(system: SpecularSystem, x0, tris, u, v, eps):
    """Vertices and barycentrics of the chain from the first vertex's (u, v).

    Later vertices follow the exact outgoing ray; returns None if that ray is
    parallel to the next plane or hits it behind the current vertex (roots at
    zeros of the mapping denominator or on the backward ray are superfluous).
    """
    events = system.chain_type.events
    if system.reversed:
        events = events[::-1]
    bcs = [BarycentricCoord(u, v)]
    xs = [interpolate_position(tris[0], bcs[0])]
    prev = np.asarray(x0, dtype=float)
    for i in range(1, len(tris)):
        d_out = _event_direction(events[i - 1], xs[-1] - prev, tris[i - 1], bcs[-1], prev)
        if d_out is None:
            return None
        hit = ray_plane_barycentric(xs[-1], d_out, tris[i])
        if hit is None:
            return None
        t, uu, vv = hit
        if not t * np.linalg.norm(d_out) > eps:
            return None
        bc = BarycentricCoord(uu, vv)
        prev = xs[-1]
        bcs.append(bc)
        xs.append(interpolate_position(tris[i], bc))
    return bcs, np.array(xs)


@njit(cache=True)
def _vertex_law(xp, xc, xn, n, refract, eta_prev, eta_next):
    """(residual, direction-sign ok) of the specular law at ``xc``; inf if a segment is empty."""
    dp = xc - xp
    dn = xn - xc
    lp = math.sqrt(dp[0] ** 2 + dp[1] ** 2 + dp[2] ** 2)
    ln = math.sqrt(dn[0] ** 2 + dn[1] ** 2 + dn[2] ** 2)
    nn = math.sqrt(n[0] ** 2 + n[1] ** 2 + n[2] ** 2)
    if lp == 0.0 or ln == 0.0 or nn == 0.0:
        return np.inf, False
    dp = dp / lp
    dn = dn / ln
    m = n / nn
    if refract:
        h = eta_next * dn - eta_prev * dp
    else:
        h = dn - dp
    cx = h[1] * m[2] - h[2] * m[1]
    cy = h[2] * m[0] - h[0] * m[2]
    cz = h[0] * m[1] - h[1] * m[0]
    hn = max(math.sqrt(h[0] ** 2 + h[1] ** 2 + h[2] ** 2), 1e-300)
    r = math.sqrt(cx * cx + cy * cy + cz * cz) / hn
    s = (dp[0] * m[0] + dp[1] * m[1] + dp[2] * m[2]) * (dn[0] * m[0] + dn[1] * m[1] + dn[2] * m[2])
    return r, (s > 0.0) if refract else (s < 0.0)


@njit(cache=True)
def _ueval_abs(p, xs):
    out = np.empty(xs.shape[0])
    for i in range(xs.shape[0]):
        out[i] = abs(K.ueval(p, xs[i]))
    return out


@njit(cache=True)
def _lead_factor(a, b, n):
    """Scale of the extra factor ``lc_u(f)**(n - m)`` carried by an order-n Bezout
    determinant when the u-degrees differ (f the higher-degree polynomial)."""
    ma = K.bdeg_u(a)
    mb = K.bdeg_u(b)
    if ma == mb:
        return 1.0
    hi = b if mb > ma else a
    lc = hi[n]
    return K.umaxabs(lc) ** (n - min(ma, mb))


@njit(cache=True)
def _vroots_kernel(r, R, a, b, tol, tangent_rel, dedup_tol):
    """Isolate and de-duplicate roots of the expanded determinant on [0, 1].

    Returns an empty array with ``vanished`` set when r, with the leading
    coefficient factor divided out, is numerically zero relative to the entry
    scale of R.
    """
    n = R.shape[0]
    emax = 0.0
    for x in R.ravel():
        if abs(x) > emax:
            emax = abs(x)
    lead = _lead_factor(a, b, n)
    if lead == 0.0 or K.umaxabs(r) / lead <= 1e-11 * max(emax, 1e-300) ** n:
        return np.empty(0), True
    roots = isolate_kernel(r, 0.0, 1.0, tol, tangent_rel)
    roots, _ = _dedup(roots, _ueval_abs(r, roots), dedup_tol)
    return roots, False


@njit(cache=True)
def _backsub_all(a, b, vroots, lo, hi, tol, slice_floor, tangent_rel, dedup_tol):
    """u roots for every v root; ``idx[k]`` is the v-root index of candidate k,
    and v roots without any u root give a candidate with NaN u."""
    out_u = np.empty(8)
    out_i = np.empty(8, dtype=np.int64)
    m = 0
    for k in range(vroots.shape[0]):
        v = vroots[k]
        us, which = backsub_kernel(a, b, v, lo, hi, tol, slice_floor, tangent_rel)
        if us.shape[0] > 0:
            s = K.bslice_at_v(a if which == 0 else b, v)
            us, _ = _dedup(us, _ueval_abs(s, us), dedup_tol)
        need = m + max(us.shape[0], 1)
        if need > out_u.shape[0]:
            nu = np.empty(2 * need)
            ni = np.empty(2 * need, dtype=np.int64)
            nu[:m] = out_u[:m]
            ni[:m] = out_i[:m]
            out_u, out_i = nu, ni
        if us.shape[0] == 0:
            out_u[m] = np.nan
            out_i[m] = k
            m += 1
        for j in range(us.shape[0]):
            out_u[m] = us[j]
            out_i[m] = k
            m += 1
    return out_u[:m].copy(), out_i[:m].copy()


def validate_path(chain: SpecularChain, scene: Scene | None = None, theta: float = 1e-4,
                  ignore_start=(), ignore_end=()) -> SpecularChain:
    """Path-space checks: simplex domain, per-vertex specular law and sides, visibility."""
    domain_ok = all(BarycentricCoord(*bc).inside(DOMAIN_SLACK) for bc in chain.bcs)
    pts = [np.asarray(chain.x0, float)] + list(chain.vertices) + [np.asarray(chain.x_end, float)]
    residual = 0.0
    ok = True
    for i, (ev, tri, bc) in enumerate(zip(chain.chain_type.events, chain.triangles, chain.bcs)):
        xp, xc, xn = pts[i], pts[i + 1], pts[i + 2]
        refr = ev == REFRACT
        e_prev, e_next = tri.etas_from(xp) if refr else (1.0, 1.0)
        r, sign_ok = _vertex_law(xp, xc, xn, interpolate_normal(tri, bc), refr, e_prev, e_next)
        sides = tri.side(xp) * tri.side(xn)
        side_ok = sign_ok and (sides < 0.0 if refr else sides > 0.0)
        residual = max(residual, r)
        ok = ok and side_ok and r < theta
    vis = True
    if scene is not None and domain_ok and ok:
        ids = list(chain.tuple_ids)
        ends = [set(ignore_start)] + [{t} for t in ids] + [set(ignore_end)]
        for i in range(len(pts) - 1):
            if not visible(pts[i], pts[i + 1], scene, ends[i] | ends[i + 1]):
                vis = False
                break
    return replace(chain, residual=residual, domain_ok=domain_ok, constraint_ok=ok, visible=vis)


# ------------------------------------------------------------ elimination


def _eliminate(a: np.ndarray, b: np.ndarray, cfg: SolverConfig, report: SolveReport):
    """v roots on [0, 1] of the resultant of (a, b): (roots or None if it vanishes, risk, rescued mask)."""
    t0 = time.perf_counter()
    R = bezout_kernel(a, b)
    n = R.shape[0]
    t1 = time.perf_counter()
    report.timings["poly"] += t1 - t0
    if n <= cfg.expand_cap:
        dmax = min(n * (R.shape[2] - 1), max(0, n * (K.bdeg(a) + K.bdeg(b) - n)))
        r = laplace_det_kernel(R, dmax)
        t2 = time.perf_counter()
        report.timings["det"] += t2 - t1
        roots, vanished = _vroots_kernel(r, R, a, b, cfg.bisect_tol, TANGENT_REL, cfg.dedup_tol)
        report.timings["sol_v"] += time.perf_counter() - t2
        return (None if vanished else roots), (), np.zeros(roots.size, dtype=bool)
    roots, res, risk = scan_kernel(R, int(cfg.pieces), int(cfg.bisect_iters), bool(cfg.scan_refine))
    if cfg.rescue and risk.size:
        extra = rescue_kernel(R, risk, int(cfg.pieces), 60)
        roots = np.concatenate((roots, extra))
        res = np.concatenate((res, np.full(extra.size, np.inf)))
    roots, res = _dedup(roots, res, cfg.dedup_tol)
    report.timings["sol_v"] += time.perf_counter() - t1
    return roots, tuple(risk.tolist()), res == np.inf


def _polish_on(cfg: SolverConfig, chain: ChainType) -> bool:
    if cfg.polish == "on":
        return True
    if cfg.polish == "off":
        return False
    return chain.has_refraction


def solve_tuple(separators: Separators, tuple_, chain, cfg: SolverConfig = SolverConfig(),
                scene: Scene | None = None, tuple_ids=None, ignore_start=(), ignore_end=(),
                system: SpecularSystem | None = None):
    """All admissible chains through one triangle tuple, plus the bookkeeping.

    ``tuple_ids`` are the global triangle ids (for visibility ignore sets);
    ``ignore_start``/``ignore_end`` are ids to skip next to x0 / x_end.
    Degenerate configurations give an empty result and a diagnostic.
    """
    chain = chain if isinstance(chain, ChainType) else ChainType.parse(str(chain))
    tris = tuple(tuple_)
    ids = tuple(tuple_ids) if tuple_ids is not None else tuple(range(len(tris)))
    report = SolveReport(tuples=1)
    t0 = time.perf_counter()
    if system is None:
        try:
            system = build_system(separators, tris, chain)
        except DegenerateConfigurationError as exc:
            report.degenerate += 1
            report.diagnostics.append(f"tuple {list(ids)}: degenerate: {exc}")
            report.timings["poly"] += time.perf_counter() - t0
            return [], report
    report.timings["poly"] += time.perf_counter() - t0
    report.systems += 1
    chains, risk = _solve_system(system, separators, tris, chain, cfg, scene, ids,
                                 ignore_start, ignore_end, report)
    if risk:
        report.scan_miss_risk += 1
        report.diagnostics.append(f"tuple {list(ids)}: scan_miss_risk at v={', '.join(f'{r:.3f}' for r in risk)}")
    return chains, report


def _solve_system(system, separators, tris, chain, cfg, scene, ids, ignore_start, ignore_end, report):
    a = system.a.coeffs
    b = system.b.coeffs
    swapped = max(K.bdeg_u(a), K.bdeg_u(b)) == 0
    if swapped:  # no u dependence: hide u instead of v
        a, b = np.ascontiguousarray(a.T), np.ascontiguousarray(b.T)
    vroots, risk, rescued = _eliminate(a, b, cfg, report)
    if vroots is None and not swapped:
        # resultant vanished identically (common factor); retry with the other choice
        alt = _alternate(system, separators, tris, chain)
        if alt is not None:
            system = alt
            a, b = system.a.coeffs, system.b.coeffs
            vroots, risk, rescued = _eliminate(a, b, cfg, report)
    if vroots is None:
        report.degenerate += 1
        report.diagnostics.append(f"tuple {list(ids)}: resultant vanishes identically")
        return [], risk
    report.resultant_roots += len(vroots)

    t0 = time.perf_counter()
    us, idx = _backsub_all(a, b, vroots, -cfg.backsub_margin, 1.0 + cfg.backsub_margin,
                           cfg.bisect_tol, 1e-8, TANGENT_REL, cfg.dedup_tol)
    report.timings["sol_u"] += time.perf_counter() - t0
    cands = []
    for u, k in zip(us.tolist(), idx.tolist()):
        v = float(vroots[k])
        if u != u:
            cands.append(None)
        else:
            uv = (v, u) if swapped else (u, v)
            cands.append(uv + (RESCUE_NEWTON,) if rescued[k] else uv)
    found = path_phase(system, separators, tris, cands, cfg, scene, ids, ignore_start, ignore_end, report)
    return found, risk


def path_phase(system: SpecularSystem, separators: Separators, tris, cands, cfg: SolverConfig = SolverConfig(),
               scene: Scene | None = None, ids=None, ignore_start=(), ignore_end=(),
               report: SolveReport | None = None, polish: bool | None = None) -> list:
    """Turn (u, v) candidates of ``system`` into admissible chains.

    ``None`` entries stand for v roots without a u root; a third entry
    ``(u, v, n)`` asks for ``n`` Newton steps before the residual prefilter
    (used for roots recovered from |det| minima, located only roughly). Each
    candidate is counted in exactly one bucket of ``report``. ``polish``
    defaults to the config policy.
    """
    report = report if report is not None else SolveReport()
    chain = system.chain_type
    tris = tuple(tris)
    ids = tuple(ids) if ids is not None else tuple(range(len(tris)))
    # TR systems are posed from the light side
    f_sep, f_tris = (separators.reversed(), tris[::-1]) if system.reversed else (separators, tris)
    t0 = time.perf_counter()
    if polish is None:
        polish = _polish_on(cfg, chain)
    found = []
    eps = scene.eps_ray if scene is not None else 1e-6 * max(1.0, float(np.max(np.abs(tris[0].positions))))
    sa, sb = system.a.coeffs, system.b.coeffs
    x0 = np.asarray(separators.x0, float)
    xe = np.asarray(separators.x_end, float)
    for c in cands:
        report.candidates += 1
        if c is None:
            report.superfluous += 1
            continue
        u, v = c[0], c[1]
        polished = False
        if len(c) > 2:
            report.polish_calls += 1
            u, v, nrm, _status = newton_kernel(sa, sb, u, v, c[2])
            if not nrm <= RESCUE_CONVERGED:
                report.superfluous += 1
                continue
            polished = True
        if abs(K.beval(sa, u, v)) > cfg.prefilter or abs(K.beval(sb, u, v)) > cfg.prefilter:
            report.superfluous += 1
            continue
        if polish and cfg.polish_iters > 0 and not polished:
            report.polish_calls += 1
            un, vn, _nrm, status = newton_kernel(sa, sb, u, v, cfg.polish_iters)
            if status >= 0:
                u, v, polished = un, vn, True
        if not BarycentricCoord(u, v).inside(DOMAIN_SLACK):
            report.domain += 1
            continue
        rec = reconstruct(system, f_sep.x0, f_tris, u, v, eps)
        if rec is None:
            report.superfluous += 1
            continue
        bcs, xs = rec
        if system.reversed:
            bcs, xs = bcs[::-1], xs[::-1]
        ch = SpecularChain(ids, chain, tuple(bcs), xs, tris, x0, xe, polished=polished)
        ch = validate_path(ch, scene, cfg.theta, ignore_start, ignore_end)
        if not ch.domain_ok:
            report.domain += 1
        elif not ch.constraint_ok:
            report.superfluous += 1
        elif not ch.visible:
            report.occluded += 1
        elif any(np.max(np.abs(ch.key() - f.key())) <= 10 * cfg.dedup_tol for f in found):
            report.duplicate += 1
        else:
            report.admissible += 1
            found.append(ch)
    report.timings["path"] += time.perf_counter() - t0
    return found


def _alternate(system, separators, tris, chain):
    """Rebuild with the other tangent / basis choice, or None if there is none."""
    opts = {"t=n x e1": {"tangent": "e2"}, "t=n x e2": {"tangent": "e1"},
            "b=x": {"basis": "z"}, "b=z": {"basis": "y"}, "b=y": {"basis": "x"}}
    kw = opts.get(system.choice)
    if kw is None:
        return None
    try:
        return build_system(separators, tris, chain, **kw)
    except (DegenerateConfigurationError, ValueError):
        return None


# ------------------------------------------------------------ enumeration


def _sides(tri: SpecularTriangle, pts) -> np.ndarray:
    g = tri.geometric_normal
    return (np.atleast_2d(pts) - tri.p0) @ g


def _tuple_feasible(scene: Scene, ids, chain: ChainType, seps: Separators) -> bool:
    """Coarse plane-side test; never rejects a tuple that validation could accept."""
    tris = [scene.triangles[i] for i in ids]
    tol = scene.eps_geom
    for i, (ev, tri) in enumerate(zip(chain.events, tris)):
        before = [seps.x0] if i == 0 else list(tris[i - 1].positions)
        after = [seps.x_end] if i == len(tris) - 1 else list(tris[i + 1].positions)
        if i > 0 and ids[i] == ids[i - 1]:
            return False
        sb = _sides(tri, before)
        sa = _sides(tri, after)
        if ev == REFLECT:
            same = (sb.max() > tol and sa.max() > tol) or (sb.min() < -tol and sa.min() < -tol)
            if not same:
                return False
        else:
            opp = (sb.max() > tol and sa.min() < -tol) or (sb.min() < -tol and sa.max() > tol)
            if not opp:
                return False
    return True


def enumerate_tuples(scene: Scene, chain, cull: bool = False, separators: Separators | None = None):
    """Ordered k-tuples of specular triangle ids in lexicographic order.

    Refraction events only use dielectric triangles. With ``cull`` (needs
    ``separators``) tuples that cannot satisfy the plane-side conditions of
    validation are skipped.
    """
    chain = chain if isinstance(chain, ChainType) else ChainType.parse(str(chain))
    n = len(scene.triangles)
    for ids in itertools.product(range(n), repeat=chain.k):
        if any(ev == REFRACT and scene.triangles[i].material != "dielectric"
               for ev, i in zip(chain.events, ids)):
            continue
        if cull:
            if separators is None:
                raise ValueError("culling needs separators")
            if not _tuple_feasible(scene, ids, chain, separators):
                continue
        yield ids


def solve_scene(scene: Scene, separators: Separators, chains=("R",), cfg: SolverConfig = SolverConfig(),
                cull: bool = True, ignore_start=(), ignore_end=(), deadline: float | None = None):
    """Solve every enumerated tuple for each chain type; returns (chains, report)."""
    out = []
    report = SolveReport()
    for name in chains:
        ch = name if isinstance(name, ChainType) else ChainType.parse(str(name))
        for ids in enumerate_tuples(scene, ch, cull, separators):
            if deadline is not None and time.perf_counter() > deadline:
                raise TimeoutError("time budget exceeded")
            tris = tuple(scene.triangles[i] for i in ids)
            found, rep = solve_tuple(separators, tris, ch, cfg, scene, ids, ignore_start, ignore_end)
            out.extend(found)
            report += rep
    return out, report


# ------------------------------------------------------- geometric term


def _trace(origin, direction, tris, events, plane_point, plane_normal):
    """Follow a ray through the planes of ``tris`` (extended) and onto a receiver plane."""
    x = np.asarray(origin, float)
    d = _unit(np.asarray(direction, float))
    prev = x
    for tri, ev in zip(tris, events):
        hit = ray_plane_barycentric(x, d, tri)
        if hit is None or hit[0] <= 0:
            return None
        _t, u, v = hit
        bc = BarycentricCoord(u, v)
        xn = interpolate_position(tri, bc)
        d = _event_direction(ev, d, tri, bc, prev)
        if d is None:
            return None
        prev, x = x, xn
        d = _unit(d)
    den = np.dot(d, plane_normal)
    if den == 0.0:
        return None
    t = np.dot(plane_point - x, plane_normal) / den
    if t <= 0:
        return None
    return x + t * d


def geometric_term(chain: SpecularChain, scene: Scene | None = None, h: float = 1e-4) -> float:
    """Irradiance falloff ``|d omega / dA|`` at x0 for a point source at x_end.

    The emission direction at the light is perturbed by ``h`` radians in two
    orthogonal directions; the chain is re-traced and the landing points on the
    plane through x0 perpendicular to the arriving ray give the Jacobian by
    central differences. Returns 0.0 when the Jacobian is not finite or singular.
    """
    x0 = np.asarray(chain.x0, float)
    xl = np.asarray(chain.x_end, float)
    verts = np.asarray(chain.vertices, float)
    tris = tuple(chain.triangles)[::-1]
    events = chain.chain_type.events[::-1]
    w0 = _unit(verts[-1] - xl)
    pn = _unit(x0 - verts[0])
    helper = np.array([1.0, 0.0, 0.0]) if abs(w0[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    s1 = _unit(np.cross(w0, helper))
    s2 = np.cross(w0, s1)
    r1 = _unit(np.cross(pn, helper if abs(np.dot(pn, helper)) < 0.9 else np.array([0.0, 0.0, 1.0])))
    r2 = np.cross(pn, r1)
    J = np.empty((2, 2))
    for k, s in enumerate((s1, s2)):
        pp = _trace(xl, w0 + h * s, tris, events, x0, pn)
        pm = _trace(xl, w0 - h * s, tris, events, x0, pn)
        if pp is None or pm is None:
            return 0.0
        dx = (pp - pm) / (2.0 * h)
        J[0, k] = np.dot(dx, r1)
        J[1, k] = np.dot(dx, r2)
    det = abs(np.linalg.det(J))
    if not np.isfinite(det) or det == 0.0:
        return 0.0
    g = 1.0 / det
    return g if np.isfinite(g) else 0.0


# ----------------------------------------------------------------- warmup


def warmup() -> None:
    """Run every compiled kernel once on canned R, T and RR problems.

    The first call of a numba kernel in a process compiles it or loads it
    from the on-disk cache; doing that up front keeps JIT latency out of
    per-pixel time budgets.
    """
    flat = np.array([[-1.0, -1.0, 0.0], [2.0, -1.0, 0.0], [-1.0, 2.0, 0.0]])
    seps = Separators(np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 1.0]))
    bent = SpecularTriangle(flat, np.array([[0.1, 0.0, 1.0], [0.0, 0.1, 1.0], [-0.1, 0.0, 1.0]]))
    solve_tuple(seps, (bent,), "R")
    mirror = SpecularTriangle(flat)
    scene = Scene(triangles=(mirror,), occluders=(Triangle(flat + [0.0, 0.0, -1.0]),))
    solve_scene(scene, seps, ("R",), ignore_start={1})
    first_hit(seps.x0, np.array([0.0, 0.0, -1.0]), scene)
    glass = SpecularTriangle(flat, eta_in=1.5, eta_out=1.0, material="dielectric")
    solve_tuple(Separators(np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.3, -1.0])), (glass,), "T")
    lower = SpecularTriangle(np.array([[-1.0, -1.0, 1.0], [1.0, -1.0, -1.0], [0.0, 2.0, 0.0]]),
                             np.array([[1.0, 0.05, 1.0], [1.0, 0.0, 1.05], [0.95, 0.0, 1.0]]))
    upper = SpecularTriangle(np.array([[4.0, -1.0, -1.0], [6.0, -1.0, 1.0], [5.0, 2.0, 0.0]]),
                             np.array([[-1.0, 0.0, 1.05], [-1.0, 0.05, 1.0], [-0.95, 0.0, 1.0]]))
    per = Separators(np.array([0.0, 0.2, 3.0]), np.array([5.0, 0.1, 3.0]))
    found, _ = solve_tuple(per, (lower, upper), "RR")
    R = bezout_kernel(np.eye(3), np.eye(3)[::-1].copy())
    rescue_kernel(R, np.array([0.5]), 10, 2)
    for ch in found:
        geometric_term(ch)


# ------------------------------------------------------------------ bench


def bench_tuple(separators: Separators, tuple_, chain, cfg: SolverConfig = SolverConfig(),
                repetitions: int = 200, warmup: int = 5) -> dict:
    """Median per-phase microseconds over ``repetitions`` solves of one tuple.

    ``total`` is Poly + Det + Sol.v1 + Sol.u1 (the path phase is reported
    separately as ``path``), medians taken per column.
    """
    for _ in range(warmup):
        solve_tuple(separators, tuple_, chain, cfg)
    rows = []
    for _ in range(repetitions):
        _, rep = solve_tuple(separators, tuple_, chain, cfg)
        t = rep.timings
        rows.append([t["poly"], t["det"], t["sol_v"], t["sol_u"],
                     t["poly"] + t["det"] + t["sol_v"] + t["sol_u"], t["path"]])
    med = np.median(np.array(rows), axis=0) * 1e6
    return dict(zip(("poly", "det", "sol_v", "sol_u", "total", "path"), med.tolist()))


def format_bench(rows: dict) -> str:
    """Phase table: one line per chain type, microseconds per tuple."""
    out = [f"{'chain':<6}{'Poly.':>10}{'Det.':>10}{'Sol. v1':>10}{'Sol. u1':>10}{'Total':>10}{'Path':>10}"]
    for name, r in rows.items():
        out.append(f"{name:<6}{r['poly']:>10.3f}{r['det']:>10.3f}{r['sol_v']:>10.3f}{r['sol_u']:>10.3f}"
                   f"{r['total']:>10.3f}{r['path']:>10.3f}")
    return "\n".join(out)
