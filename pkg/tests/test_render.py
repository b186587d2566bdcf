import math

import numpy as np
import pytest

from specpoly.render import (RenderJob, ppm_bytes, read_ppm, read_sidecar, render, sidecar_path,
                             tone_map, write_outputs)


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _cross(a, b):
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def _mt(o, d, p):
    """Textbook Moller-Trumbore in scalar float arithmetic: (t, u, v), or None on a miss."""
    e1 = [p[1][i] - p[0][i] for i in range(3)]
    e2 = [p[2][i] - p[0][i] for i in range(3)]
    pv = _cross(d, e2)
    det = _dot(e1, pv)
    if det == 0.0:
        return None
    inv = 1.0 / det
    s = [o[i] - p[0][i] for i in range(3)]
    u = _dot(s, pv) * inv
    q = _cross(s, e1)
    v = _dot(d, q) * inv
    t = _dot(e2, q) * inv
    if u < 0.0 or v < 0.0 or u + v > 1.0:
        return None
    return t, u, v


def _mt_all(o, d, tris):
    """Hit distances against every triangle, nan on a miss."""
    out = []
    for p in tris:
        hit = _mt(o, d, p)
        out.append(np.nan if hit is None else hit[0])
    return np.array(out)


def _camera_rays(cam):
    w, h = cam.resolution
    fwd = (cam.look_at - cam.position) / np.linalg.norm(cam.look_at - cam.position)
    right = np.cross(fwd, cam.up)
    right /= np.linalg.norm(right)
    up = np.cross(right, fwd)
    th = math.tan(math.radians(cam.fov) / 2.0)
    for py in range(h):
        for px in range(w):
            x = (2.0 * (px + 0.5) / w - 1.0) * th * (w / h)
            y = (1.0 - 2.0 * (py + 0.5) / h) * th
            d = fwd + x * right + y * up
            yield px, py, d / np.linalg.norm(d)


def _primary(scene, d, eps):
    occ = np.array([t.positions for t in scene.occluders])
    # scene queries renormalize the direction before intersecting
    t = _mt_all(scene.camera.position, d / np.linalg.norm(d), occ)
    t = np.where(t > eps, t, np.nan)
    if np.all(np.isnan(t)):
        return None
    k = int(np.nanargmin(t))
    return k, t[k]


def _reference_direct(scene):
    """Direct lighting only, written out from the shading formula."""
    w, h = scene.camera.resolution
    img = np.zeros((h, w, 3))
    occ = np.array([t.positions for t in scene.occluders])
    eps = scene.eps_ray
    for px, py, d in _camera_rays(scene.camera):
        hit = _primary(scene, d, eps)
        if hit is None:
            continue
        k, t = hit
        x0 = scene.camera.position + t * d
        tri = scene.occluders[k]
        n = tri.geometric_normal
        if np.dot(n, d) > 0:
            n = -n
        acc = np.zeros(3)
        for light in scene.lights:
            to_l = light.position - x0
            r2 = float(np.dot(to_l, to_l))
            cos = float(np.dot(n, to_l)) / math.sqrt(r2)
            if cos <= 0:
                continue
            length = math.sqrt(r2)
            ts = _mt_all(x0, to_l / length, np.delete(occ, k, axis=0))
            if np.any((ts > eps) & (ts < length - eps)):
                continue
            acc = acc + light.intensity * (cos / r2)
        img[py, px] = np.asarray(tri.albedo) / math.pi * acc
    return img


def test_diffuse_only_matches_reference(scene_of):
    scene = scene_of("diffuse_only.yaml")
    res = render(RenderJob(scene, chains=()))
    ref = _reference_direct(scene)
    assert np.count_nonzero(ref.sum(axis=2)) > 0.5 * ref.shape[0] * ref.shape[1]
    np.testing.assert_array_max_ulp(res.linear, ref, maxulp=1)
    assert not res.lit_mask.any()


def _image_source_mask(scene):
    """Lit floor pixels: the segment from x0 to the light's mirror image crosses the mirror."""
    mirror = scene.triangles[0]
    n = mirror.geometric_normal
    light = scene.lights[0].position
    image = light - 2.0 * np.dot(light - mirror.positions[0], n) * n
    w, h = scene.camera.resolution
    mask = np.zeros((h, w), dtype=bool)
    for px, py, d in _camera_rays(scene.camera):
        hit = _primary(scene, d, scene.eps_ray)
        if hit is None:
            continue
        x0 = scene.camera.position + hit[1] * d
        seg = image - x0
        t = _mt_all(x0, seg, mirror.positions[None])
        mask[py, px] = 0.0 < t[0] < 1.0
    return mask


def test_caustic_line_matches_image_source(scene_of):
    scene = scene_of("caustic_line.yaml")
    res = render(RenderJob(scene, chains=("R",), direct=False, watchdog_ms=0.0))
    ref = _image_source_mask(scene)
    got = res.lit_mask
    iou = np.sum(got & ref) / np.sum(got | ref)
    assert ref.sum() > 100
    assert iou == 1.0
    # flat mirror: the splat equals the unoccluded point-light term from the image source
    assert np.all(res.direct == 0.0)


def test_threads_do_not_change_bytes(scene_of, tmp_path):
    scene = scene_of("caustic_line.yaml")
    outs = []
    for threads in (1, 3):
        out = tmp_path / f"img{threads}.ppm"
        render(RenderJob(scene, chains=("R",), resolution=(40, 30), out=out, threads=threads,
                         watchdog_ms=0.0))
        outs.append((out.read_bytes(), sidecar_path(out).read_bytes()))
    assert outs[0] == outs[1]


def test_output_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    img = rng.uniform(-0.1, 1.3, (7, 5, 3))
    img[0, 0, 0] = 10.0 / 255.0  # tone maps to a whitespace byte value range
    ppm, side = write_outputs(tmp_path / "sub" / "x.ppm", img)
    np.testing.assert_array_equal(read_sidecar(side), img)
    assert np.array_equal(read_ppm(ppm), tone_map(img))
    assert ppm.read_bytes() == ppm_bytes(img)


def test_tone_map_formula():
    x = np.array([0.0, 1e-4, 0.18, 0.5, 1.0, 2.0, -1.0, np.nan])
    expect = [0, int(255 * 1e-4 ** (1 / 2.2) + 0.5), int(255 * 0.18 ** (1 / 2.2) + 0.5),
              int(255 * 0.5 ** (1 / 2.2) + 0.5), 255, 255, 0, 0]
    assert tone_map(x).tolist() == expect


def test_watchdog_keeps_direct_and_drops_splats(scene_of):
    scene = scene_of("caustic_line.yaml")
    res = render(RenderJob(scene, chains=("R",), resolution=(16, 16), watchdog_ms=1e-9))
    assert res.timeouts and not res.lit_mask.any()
    assert res.direct.sum() > 0


def test_job_validation(scene_of):
    scene = scene_of("mirror.yaml")
    with pytest.raises(ValueError, match="experimental"):
        RenderJob(scene, chains=("RT",))
    RenderJob(scene, chains=("RT",), experimental=True)
    with pytest.raises(ValueError):
        RenderJob(scene, resolution=(4096, 4096))
    with pytest.raises(ValueError):
        RenderJob(scene, threads=0)
    with pytest.raises(ValueError):
        read_sidecar_bytes = b"\x00" * 8
        p = sidecar_path("short.ppm")
        p.write_bytes(read_sidecar_bytes)
        try:
            read_sidecar(p)
        finally:
            p.unlink()
