import time

import numpy as np
import pytest
from scipy.optimize import brentq

from specpoly.oracle import brute_force_chains, compare_solution_sets, random_instance
from specpoly.pipeline import (BUCKETS, SolveReport, bench_tuple, enumerate_tuples, format_bench,
                               geometric_term, solve_scene, solve_tuple)
from specpoly.rootfind import SolverConfig
from specpoly.scene import Separators, SpecularTriangle


def fermat_refraction_point(x0, xe, eta0, eta1):
    """Refraction point on the plane z = 0 by bisection on the optical path derivative.

    The point lies on the segment between the feet of x0 and xe; along it the
    derivative of eta0 |x - x0| + eta1 |x - xe| is monotone.
    """
    a, b = np.array([x0[0], x0[1], 0.0]), np.array([xe[0], xe[1], 0.0])

    def dpath(s):
        x = a + s * (b - a)
        return (eta0 * np.dot(x - x0, b - a) / np.linalg.norm(x - x0)
                + eta1 * np.dot(x - xe, b - a) / np.linalg.norm(x - xe))

    s = brentq(dpath, 0.0, 1.0, xtol=1e-15, rtol=1e-15)
    return a + s * (b - a)


def test_mirror_fixture_single_chain(scene_of):
    s = scene_of("mirror.yaml")
    found, rep = solve_tuple(s.separators, s.triangles, "R", scene=s)
    assert len(found) == 1
    ch = found[0]
    assert np.max(np.abs(np.array(ch.bcs[0]) - [0.5, 1 / 3])) < 1e-6
    np.testing.assert_allclose(ch.vertices[0], [0.5, 0.0, 0.0], atol=1e-9)
    assert ch.admissible and ch.residual < 1e-9
    assert rep.audit() and rep.admissible == 1


def test_occluded_mirror_reports_bucket(scene_of):
    s = scene_of("mirror_occluded.yaml")
    found, rep = solve_scene(s, s.separators, ("R",))
    assert found == [] and rep.occluded == 1 and rep.audit()


@pytest.mark.parametrize("polish,tol", [("off", 1e-4), ("on", 1e-6)])
def test_interface_matches_fermat(scene_of, polish, tol):
    s = scene_of("interface.yaml")
    x0, xe = s.separators.x0, s.separators.x_end
    ref = fermat_refraction_point(x0, xe, 1.0, 1.5)
    found, _ = solve_tuple(s.separators, s.triangles, "T", SolverConfig(polish=polish), scene=s)
    assert len(found) == 1
    assert np.linalg.norm(found[0].vertices[0] - ref) < tol


def test_periscope_vertices(scene_of):
    s = scene_of("periscope.yaml")
    found, rep = solve_scene(s, s.separators, ("RR",))
    assert len(found) == 1
    np.testing.assert_allclose(found[0].vertices, [[0, 0.2 - 0.3 / 11, 0], [5, 0.2 - 0.8 / 11, 0]],
                               atol=1e-9)
    assert rep.audit()


def test_geometric_term_matches_image_source(scene_of):
    s = scene_of("mirror.yaml")
    (ch,), _ = solve_tuple(s.separators, s.triangles, "R", scene=s)
    image = np.array([1.0, 0.0, -1.0])
    assert geometric_term(ch, s) == pytest.approx(1.0 / np.sum((s.separators.x0 - image) ** 2), rel=1e-6)
    p = scene_of("periscope.yaml")
    (ch2,), _ = solve_scene(p, p.separators, ("RR",))
    # unfolded: 11 along the folded axis, 0.1 drop in y
    assert geometric_term(ch2, p) == pytest.approx(1.0 / (11.0**2 + 0.1**2), rel=1e-6)


def test_report_buckets_and_merge():
    a, b = SolveReport(candidates=3, domain=1, superfluous=2), SolveReport(candidates=1, admissible=1,
                                                                            resultant_roots=4)
    a += b
    assert a.audit() and a.candidates == 4 and a.admissible_ratio == 0.25
    assert set(BUCKETS) <= set(a.counts())
    text = a.to_text()
    assert "Sol.v1" in text and "audit ok" in text


@pytest.mark.parametrize("kind", ["R", "T", "RR"])
def test_random_instances_agree_with_oracle(kind):
    for seed in range(15):
        seps, tris = random_instance(kind, np.random.default_rng(1000 + seed))
        found, rep = solve_tuple(seps, tris, kind)
        oracle = brute_force_chains(seps, tris, kind)
        m = compare_solution_sets(found, oracle, 1e-5, exclude=[c for c in oracle if c.note == "tangent"])
        assert m.recall == 1.0 and m.precision == 1.0, (seed, m)
        assert rep.audit()


def test_solutions_do_not_depend_on_piece_count():
    seps, tris = random_instance("RR", np.random.default_rng(77))
    keys = []
    for pieces in (50, 100, 200):
        found, _ = solve_tuple(seps, tris, "RR", SolverConfig(pieces=pieces))
        keys.append(np.sort(np.concatenate([c.key() for c in found])))
    np.testing.assert_allclose(keys[0], keys[1], atol=1e-9)
    np.testing.assert_allclose(keys[1], keys[2], atol=1e-9)


def test_cull_keeps_admissible_tuples(scene_of):
    s = scene_of("periscope.yaml")
    assert set(enumerate_tuples(s, "RR", cull=True, separators=s.separators)) <= set(enumerate_tuples(s, "RR"))
    full, _ = solve_scene(s, s.separators, ("R", "RR"), cull=False)
    culled, _ = solve_scene(s, s.separators, ("R", "RR"), cull=True)
    assert sorted(c.tuple_ids for c in full) == sorted(c.tuple_ids for c in culled)


def test_degenerate_tuple_is_reported_not_raised():
    tri = SpecularTriangle([[-1, -1, 0], [2, -1, 0], [-1, 2, 0]], normal_mode="face")
    # both separators on the mirror plane: every form vanishes
    found, rep = solve_tuple(Separators([0, 0, 0], [0.5, 0.5, 0]), (tri,), "R")
    assert found == [] and rep.degenerate == 1 and rep.diagnostics


def test_deadline_raises_timeout(scene_of):
    s = scene_of("periscope.yaml")
    with pytest.raises(TimeoutError):
        solve_scene(s, s.separators, ("R", "RR"), deadline=time.perf_counter() - 1.0)


def test_bench_layout(scene_of):
    s = scene_of("mirror.yaml")
    row = bench_tuple(s.separators, s.triangles, "R", repetitions=20)
    assert row["total"] == pytest.approx(row["poly"] + row["det"] + row["sol_v"] + row["sol_u"], rel=0.5)
    text = format_bench({"R": row})
    assert text.splitlines()[0].split()[:5] == ["chain", "Poly.", "Det.", "Sol.", "v1"]


def test_bench_sol_v_is_largest_phase_for_r(scene_of):
    # root finding in v should dominate the one-bounce budget
    s = scene_of("mirror.yaml")
    row = bench_tuple(s.separators, s.triangles, "R", repetitions=500)
    phases = {k: row[k] for k in ("poly", "det", "sol_v", "sol_u")}
    assert max(phases, key=phases.get) == "sol_v", phases


def test_experimental_tr_and_rt_are_mirror_images():
    glass = SpecularTriangle([[-4, -4, 0], [6, -4, 0.2], [-4, 6, -0.2]], normal_mode="face", eta_in=1.5,
                             material="dielectric")
    mirror = SpecularTriangle([[-4, -4, -1], [6, -4, -1.2], [-4, 6, -0.8]], normal_mode="face")
    seps = Separators([0, 0, 1], [1.0, 0.4, -0.5])
    tr, _ = solve_tuple(seps, (glass, mirror), "TR")
    rt, _ = solve_tuple(seps.reversed(), (mirror, glass), "RT")
    assert len(tr) == len(rt) == 1
    np.testing.assert_allclose(tr[0].vertices, rt[0].vertices[::-1], atol=1e-10)
    m = compare_solution_sets(tr, brute_force_chains(seps, (glass, mirror), "TR"), 1e-5)
    assert m.recall == 1.0 and m.precision == 1.0
