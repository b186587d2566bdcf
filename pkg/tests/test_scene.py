import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specpoly.scene import (DegenerateTriangleError, MissingSectionError, Scene, SceneError,
                            SceneParseError, Separators, SpecularTriangle, Triangle, first_hit,
                            interpolate_normal, interpolate_position, intersect_ray, load_scene,
                            visible)

TRI = SpecularTriangle([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], normal_mode="face")


def _solve_hit(o, d, p):
    # o + t d = p0 + u e1 + v e2 as a 3x3 linear system
    m = np.column_stack([-d, p[1] - p[0], p[2] - p[0]])
    return np.linalg.solve(m, o - p[0])


vec = st.tuples(*[st.floats(-1, 1)] * 3).map(np.array)


@settings(max_examples=80, deadline=None)
@given(vec, vec)
def test_intersection_matches_linear_solve(o_off, d_off):
    o = np.array([0.3, 0.3, 2.0]) + 0.5 * o_off
    d = np.array([0.0, 0.0, -1.0]) + 0.4 * d_off
    t, u, v = _solve_hit(o, d, TRI.positions)
    hit = intersect_ray(o, d, TRI)
    inside = u >= 0 and v >= 0 and u + v <= 1 and t > 0
    if hit is None:
        assert not inside or min(u, v, 1 - u - v) < 1e-12
    else:
        assert inside or min(u, v, 1 - u - v) > -1e-12
        np.testing.assert_allclose([hit[0], *hit[1]], [t, u, v], atol=1e-12)


def test_interpolation():
    n = [[0.0, 0.0, 1.0], [0.0, 0.1, 1.0], [0.1, 0.0, 1.0]]
    tri = SpecularTriangle(TRI.positions, normals=n)
    np.testing.assert_allclose(interpolate_position(tri, (0.25, 0.5)), [0.25, 0.5, 0.0])
    np.testing.assert_allclose(interpolate_normal(tri, (0.0, 1.0)), n[2])
    assert not tri.constant_normal
    np.testing.assert_allclose(interpolate_normal(TRI, (0.2, 0.2)), [0.0, 0.0, 1.0])
    assert TRI.constant_normal


def test_triangle_validation():
    with pytest.raises(DegenerateTriangleError):
        SpecularTriangle([[0, 0, 0], [1, 0, 0], [2, 0, 0]])
    with pytest.raises(ValueError, match="positive dot"):
        SpecularTriangle(TRI.positions, normals=[[0, 0, -1]] * 3)
    with pytest.raises(ValueError):
        SpecularTriangle(TRI.positions, material="glass")
    with pytest.raises(ValueError):
        Separators([0, 0, 0], [0, 0, 0])


def test_etas_follow_geometric_normal():
    glass = SpecularTriangle(TRI.positions, normal_mode="face", eta_in=1.5, eta_out=1.0,
                             material="dielectric")
    assert glass.etas_from([0, 0, 1]) == (1.0, 1.5)
    assert glass.etas_from([0, 0, -1]) == (1.5, 1.0)


def test_visibility_and_first_hit():
    wall = Triangle([[-1, -1, 0.5], [3, -1, 0.5], [-1, 3, 0.5]])
    scene = Scene(triangles=(TRI,), occluders=(wall,))
    assert not visible([0.2, 0.2, 1.0], [0.2, 0.2, 0.0], scene)
    assert visible([0.2, 0.2, 1.0], [0.2, 0.2, 0.0], scene, ignore={1})
    assert visible([0.2, 0.2, 0.4], [0.2, 0.2, 0.0], scene)
    k, t, bc = first_hit([0.2, 0.2, 1.0], [0, 0, -1], scene)
    assert (k, round(t, 12)) == (1, 0.5)
    k, t, bc = first_hit([0.2, 0.2, 1.0], [0, 0, -1], scene, ignore={1})
    assert k == 0 and bc == pytest.approx((0.2, 0.2))
    assert first_hit([5, 5, 1], [0, 0, -1], scene) is None


def test_fixtures_load(fixture_path):
    for name in ("mirror.yaml", "mirror_occluded.yaml", "interface.yaml", "periscope.yaml",
                 "caustic_line.yaml", "rr_render.yaml", "diffuse_only.yaml"):
        scene = load_scene(fixture_path(name))
        assert scene.camera is not None and scene.lights
    glass = load_scene(fixture_path("interface.yaml")).triangles[0]
    assert glass.material == "dielectric" and (glass.eta_in, glass.eta_out) == (1.5, 1.0)


def _write(tmp_path, text):
    p = tmp_path / "s.yaml"
    p.write_text(text)
    return p


CAM = "camera:\n  position: [0, 0, 5]\n  look_at: [0, 0, 0]\n"


def test_loader_errors_carry_lines(tmp_path):
    with pytest.raises(MissingSectionError):
        load_scene(_write(tmp_path, "lights: []\n"))
    with pytest.raises(SceneParseError) as exc:
        load_scene(_write(tmp_path, CAM + "lights: [\n"))
    assert exc.value.line is not None
    bad = CAM + "lights: []\nspecular:\n  - normal_mode: face\n    positions: [[0,0,0],[1,0,0],[2,0,0]]\n"
    with pytest.raises(DegenerateTriangleError) as exc:
        load_scene(_write(tmp_path, bad))
    assert exc.value.line == 6  # the "- normal_mode" entry
    interp = CAM + "lights: []\nspecular:\n  - positions: [[0,0,0],[1,0,0],[0,1,0]]\n"
    with pytest.raises(SceneError, match="normals"):
        load_scene(_write(tmp_path, interp))
    with pytest.raises(SceneParseError):
        load_scene(tmp_path / "missing.yaml")


def test_mesh_include(tmp_path):
    (tmp_path / "mesh.yaml").write_text(
        "triangles:\n  - vertices: [[0,0,0],[1,0,0],[1,1,0],[0,1,0]]\n    faces: [[0,1,2],[0,2,3]]\n")
    scene = load_scene(_write(tmp_path, CAM + "lights: []\noccluders:\n  - include: mesh.yaml\n"))
    assert len(scene.occluders) == 2
