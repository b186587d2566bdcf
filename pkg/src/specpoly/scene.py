"""Scene geometry: specular triangles, occluders, lights, camera, ray casting.

Triangle ids used by :func:`visible` and the solvers are global indices into
``Scene.all_positions``: specular triangles first, then occluders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
import yaml
from numba import njit

NORMAL_MODES = ("interpolated", "face")
MATERIALS = ("mirror", "dielectric")

EPS_GEOM_REL = 1e-12  # times scale**2, minimum |e1 x e2|
EPS_RAY_REL = 1e-6  # times scale, minimum hit distance


class SceneError(ValueError):
    """Invalid scene content; ``line`` is the 1-based source line when known."""

    def __init__(self, msg, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {msg}" if where else msg)


class SceneParseError(SceneError):
    pass


class MissingSectionError(SceneError):
    pass


class DegenerateTriangleError(SceneError):
    pass


class BarycentricCoord(NamedTuple):
    u: float
    v: float

    def inside(self, slack: float = 0.0) -> bool:
        return self.u >= -slack and self.v >= -slack and self.u + self.v <= 1.0 + slack


def _vec3(x, name="vector"):
    a = np.array(x, dtype=np.float64).reshape(-1)
    if a.shape != (3,) or not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be 3 finite numbers, got {x!r}")
    return a


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


def _local_scale(positions):
    ext = positions.max(axis=0) - positions.min(axis=0)
    return float(np.linalg.norm(ext)) or 1.0


@dataclass(frozen=True, eq=False)
class SpecularTriangle:
    """A reflective or refractive triangle.

    ``eta_out`` is the index of refraction on the side the geometric normal
    ``(p1 - p0) x (p2 - p0)`` points into, ``eta_in`` on the other side.
    """

    positions: np.ndarray
    normals: np.ndarray | None = None
    normal_mode: str = "interpolated"
    eta_in: float = 1.0
    eta_out: float = 1.0
    material: str = "mirror"
    name: str = ""
    scale: float | None = None

    def __post_init__(self):
        p = np.array(self.positions, dtype=np.float64)
        if p.shape != (3, 3) or not np.all(np.isfinite(p)):
            raise ValueError("positions must be three finite 3-d points")
        if self.normal_mode not in NORMAL_MODES:
            raise ValueError(f"normal_mode must be one of {NORMAL_MODES}")
        if self.material not in MATERIALS:
            raise ValueError(f"material must be one of {MATERIALS}")
        if not (self.eta_in > 0 and self.eta_out > 0):
            raise ValueError("indices of refraction must be positive")
        g = np.cross(p[1] - p[0], p[2] - p[0])
        scale = self.scale if self.scale is not None else _local_scale(p)
        if np.linalg.norm(g) <= EPS_GEOM_REL * scale * scale:
            raise DegenerateTriangleError("triangle has (near) zero area")
        gu = g / np.linalg.norm(g)
        if self.normals is None:
            n = np.tile(gu, (3, 1))
        else:
            n = np.array(self.normals, dtype=np.float64)
            if n.shape != (3, 3) or not np.all(np.isfinite(n)):
                raise ValueError("normals must be three finite 3-d vectors")
            if np.any(n @ g <= 0.0):
                raise ValueError(
                    "shading normals must have positive dot product with the geometric normal")
        object.__setattr__(self, "positions", _frozen(p))
        object.__setattr__(self, "normals", _frozen(n))
        object.__setattr__(self, "eta_in", float(self.eta_in))
        object.__setattr__(self, "eta_out", float(self.eta_out))
        # derived geometry, computed once (the solver queries it per tuple)
        nm = _frozen(np.tile(gu, (3, 1))) if self.normal_mode == "face" else self.normals
        object.__setattr__(self, "_gn", _frozen(gu))
        object.__setattr__(self, "_nm", nm)
        object.__setattr__(self, "_const", bool(np.all(nm == nm[0])))

    @property
    def p0(self):
        return self.positions[0]

    @property
    def e1(self):
        return self.positions[1] - self.positions[0]

    @property
    def e2(self):
        return self.positions[2] - self.positions[0]

    @property
    def geometric_normal(self):
        """Unit normal of the triangle plane (winding order p0, p1, p2)."""
        return self._gn

    @property
    def area(self) -> float:
        return 0.5 * float(np.linalg.norm(np.cross(self.e1, self.e2)))

    @property
    def centroid(self):
        return self.positions.mean(axis=0)

    @property
    def normal_matrix(self):
        """Per-vertex normals used for interpolation (face mode: the plane normal)."""
        return self._nm

    @property
    def constant_normal(self) -> bool:
        """True when the shading normal does not vary over the triangle."""
        return self._const

    def side(self, point) -> float:
        """Signed distance of ``point`` from the triangle plane."""
        p = self.positions[0]
        g = self._gn
        return float((point[0] - p[0]) * g[0] + (point[1] - p[1]) * g[1] + (point[2] - p[2]) * g[2])

    def etas_from(self, point) -> tuple[float, float]:
        """(eta on the side of ``point``, eta on the opposite side)."""
        if self.side(point) >= 0.0:
            return self.eta_out, self.eta_in
        return self.eta_in, self.eta_out


@dataclass(frozen=True, eq=False)
class Triangle:
    """Plain diffuse triangle: blocks light and receives it."""

    positions: np.ndarray
    albedo: tuple = (0.8, 0.8, 0.8)

    def __post_init__(self):
        p = np.array(self.positions, dtype=np.float64)
        if p.shape != (3, 3) or not np.all(np.isfinite(p)):
            raise ValueError("positions must be three finite 3-d points")
        s = _local_scale(p)
        if np.linalg.norm(np.cross(p[1] - p[0], p[2] - p[0])) <= EPS_GEOM_REL * s * s:
            raise DegenerateTriangleError("triangle has (near) zero area")
        object.__setattr__(self, "positions", _frozen(p))
        object.__setattr__(self, "albedo", tuple(float(x) for x in np.broadcast_to(self.albedo, 3)))

    @property
    def geometric_normal(self):
        g = np.cross(self.positions[1] - self.positions[0], self.positions[2] - self.positions[0])
        return g / np.linalg.norm(g)


@dataclass(frozen=True)
class PointLight:
    position: np.ndarray
    power: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "position", _frozen(_vec3(self.position, "light position")))
        object.__setattr__(self, "power", tuple(float(x) for x in np.broadcast_to(self.power, 3)))

    @property
    def intensity(self):
        """Radiant intensity (power over 4 pi) per channel."""
        return np.asarray(self.power) / (4.0 * math.pi)


@dataclass(frozen=True)
class Camera:
    position: np.ndarray
    look_at: np.ndarray
    up: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))
    fov: float = 40.0
    resolution: tuple = (64, 64)

    def __post_init__(self):
        for name in ("position", "look_at", "up"):
            object.__setattr__(self, name, _frozen(_vec3(getattr(self, name), name)))
        w, h = (int(x) for x in self.resolution)
        if w <= 0 or h <= 0:
            raise ValueError("resolution must be positive")
        if not 0.0 < self.fov < 180.0:
            raise ValueError("fov must be in (0, 180) degrees")
        object.__setattr__(self, "resolution", (w, h))
        if np.linalg.norm(np.cross(self.look_at - self.position, self.up)) == 0.0:
            raise ValueError("camera up vector is parallel to the view direction")

    def with_resolution(self, w: int, h: int) -> Camera:
        return Camera(self.position, self.look_at, self.up, self.fov, (w, h))

    def basis(self):
        fwd = self.look_at - self.position
        fwd = fwd / np.linalg.norm(fwd)
        right = np.cross(fwd, self.up)
        right /= np.linalg.norm(right)
        up = np.cross(right, fwd)
        return fwd, right, up

    def ray(self, px: int, py: int):
        """Origin and unit direction through the center of pixel (px, py); py=0 is the top row."""
        w, h = self.resolution
        fwd, right, up = self.basis()
        th = math.tan(math.radians(self.fov) / 2.0)
        x = (2.0 * (px + 0.5) / w - 1.0) * th * (w / h)
        y = (1.0 - 2.0 * (py + 0.5) / h) * th
        d = fwd + x * right + y * up
        return self.position, d / np.linalg.norm(d)


@dataclass(frozen=True, eq=False)
class Separators:
    """Fixed chain endpoints: camera side ``x0`` and light side ``x_end``."""

    x0: np.ndarray
    x_end: np.ndarray

    def __post_init__(self):
        a = _frozen(_vec3(self.x0, "x0"))
        b = _frozen(_vec3(self.x_end, "x_end"))
        if np.array_equal(a, b):
            raise ValueError("separators must be distinct points")
        object.__setattr__(self, "x0", a)
        object.__setattr__(self, "x_end", b)

    def reversed(self) -> Separators:
        return Separators(self.x_end, self.x0)


@dataclass(frozen=True, eq=False)
class Scene:
    triangles: tuple = ()
    occluders: tuple = ()
    lights: tuple = ()
    camera: Camera | None = None
    separators: Separators | None = None

    def __post_init__(self):
        object.__setattr__(self, "triangles", tuple(self.triangles))
        object.__setattr__(self, "occluders", tuple(self.occluders))
        object.__setattr__(self, "lights", tuple(self.lights))
        pts = [t.positions for t in self.triangles] + [t.positions for t in self.occluders]
        pts += [l.position[None, :] for l in self.lights]
        if pts:
            allp = np.concatenate(pts)
            scale = float(np.linalg.norm(allp.max(axis=0) - allp.min(axis=0))) or 1.0
        else:
            scale = 1.0
        object.__setattr__(self, "scale", scale)
        packed = np.zeros((len(self.triangles) + len(self.occluders), 3, 3))
        for k, t in enumerate(self.triangles + self.occluders):
            packed[k] = t.positions
        packed.flags.writeable = False
        object.__setattr__(self, "all_positions", packed)
        for k, t in enumerate(self.triangles):
            a = np.linalg.norm(np.cross(t.e1, t.e2))
            if a <= self.eps_geom:
                raise DegenerateTriangleError(f"specular triangle {k} has (near) zero area")

    @property
    def eps_ray(self) -> float:
        return EPS_RAY_REL * self.scale

    @property
    def eps_geom(self) -> float:
        return EPS_GEOM_REL * self.scale * self.scale

    def occluder_id(self, k: int) -> int:
        return len(self.triangles) + k


# ----------------------------------------------------------------- geometry


def interpolate_position(tri: SpecularTriangle, bc) -> np.ndarray:
    u, v = bc
    return (1.0 - u - v) * tri.positions[0] + u * tri.positions[1] + v * tri.positions[2]


def interpolate_normal(tri: SpecularTriangle, bc) -> np.ndarray:
    """Un-normalized shading normal; constant plane normal in face mode."""
    if tri.normal_mode == "face":
        return tri.geometric_normal.copy()
    u, v = bc
    n = tri.normals
    return (1.0 - u - v) * n[0] + u * n[1] + v * n[2]


@njit(cache=True)
def _mt(o, d, p0, p1, p2):
    """Moller-Trumbore without range checks: (ok, t, u, v)."""
    e1 = p1 - p0
    e2 = p2 - p0
    px = d[1] * e2[2] - d[2] * e2[1]
    py = d[2] * e2[0] - d[0] * e2[2]
    pz = d[0] * e2[1] - d[1] * e2[0]
    det = e1[0] * px + e1[1] * py + e1[2] * pz
    if det == 0.0:
        return False, 0.0, 0.0, 0.0
    inv = 1.0 / det
    s = o - p0
    u = (s[0] * px + s[1] * py + s[2] * pz) * inv
    qx = s[1] * e1[2] - s[2] * e1[1]
    qy = s[2] * e1[0] - s[0] * e1[2]
    qz = s[0] * e1[1] - s[1] * e1[0]
    v = (d[0] * qx + d[1] * qy + d[2] * qz) * inv
    t = (e2[0] * qx + e2[1] * qy + e2[2] * qz) * inv
    return True, t, u, v


@njit(cache=True)
def _closest_hit(o, d, tris, tmin, tmax, skip):
    best = -1
    bt = tmax
    bu = 0.0
    bv = 0.0
    for k in range(tris.shape[0]):
        if skip[k]:
            continue
        ok, t, u, v = _mt(o, d, tris[k, 0], tris[k, 1], tris[k, 2])
        if not ok or t <= tmin or t >= bt:
            continue
        if u < 0.0 or v < 0.0 or u + v > 1.0:
            continue
        best = k
        bt = t
        bu = u
        bv = v
    return best, bt, bu, bv


@njit(cache=True)
def _segment_blocked(a, b, tris, skip, eps):
    d = b - a
    length = math.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
    if length <= 2.0 * eps:
        return False
    dn = d / length
    for k in range(tris.shape[0]):
        if skip[k]:
            continue
        ok, t, u, v = _mt(a, dn, tris[k, 0], tris[k, 1], tris[k, 2])
        if not ok or t <= eps or t >= length - eps:
            continue
        if u < 0.0 or v < 0.0 or u + v > 1.0:
            continue
        return True
    return False


def intersect_ray(origin, direction, tri, eps: float | None = None):
    """Nearest hit ``(t, BarycentricCoord)`` with ``t > eps``, or ``None`` on a miss.

    ``tri`` is anything with a ``positions`` (3, 3) array. ``eps`` defaults to
    1e-6 times the triangle's own extent.
    """
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    if not np.linalg.norm(d) > 0.0:
        raise ValueError("ray direction must be nonzero")
    p = tri.positions
    if eps is None:
        eps = EPS_RAY_REL * _local_scale(p)
    ok, t, u, v = _mt(o, d, p[0], p[1], p[2])
    if not ok or t <= eps * 1.0 / np.linalg.norm(d) or u < 0.0 or v < 0.0 or u + v > 1.0:
        return None
    return t, BarycentricCoord(u, v)


def ray_plane_barycentric(origin, direction, tri):
    """Unrestricted line hit ``(t, u, v)`` against the triangle's plane, or ``None`` if parallel."""
    p = tri.positions
    ok, t, u, v = _mt(np.asarray(origin, dtype=np.float64), np.asarray(direction, dtype=np.float64),
                      p[0], p[1], p[2])
    if not ok:
        return None
    return t, u, v


def _skip_mask(scene: Scene, ignore):
    skip = np.zeros(scene.all_positions.shape[0], dtype=np.bool_)
    for k in ignore or ():
        skip[k] = True
    return skip


def visible(a, b, scene: Scene, ignore=frozenset()) -> bool:
    """True iff no non-ignored triangle crosses the open segment (a, b)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if np.array_equal(a, b):
        raise ValueError("segment endpoints must differ")
    if scene.all_positions.shape[0] == 0:
        return True
    return not _segment_blocked(a, b, scene.all_positions, _skip_mask(scene, ignore), scene.eps_ray)


def first_hit(origin, direction, scene: Scene, ignore=frozenset()):
    """Closest scene triangle along a ray: ``(tri_id, t, BarycentricCoord)`` or ``None``."""
    if scene.all_positions.shape[0] == 0:
        return None
    d = np.asarray(direction, dtype=np.float64)
    d = d / np.linalg.norm(d)
    k, t, u, v = _closest_hit(np.asarray(origin, dtype=np.float64), d, scene.all_positions,
                              scene.eps_ray, np.inf, _skip_mask(scene, ignore))
    if k < 0:
        return None
    return int(k), t, BarycentricCoord(u, v)


# ------------------------------------------------------------------ loading


class _Map(dict):
    line = None


class _Seq(list):
    line = None


class _LineLoader(yaml.SafeLoader):
    pass


def _construct_map(loader, node):
    m = _Map(loader.construct_mapping(node, deep=True))
    m.line = node.start_mark.line + 1
    return m


def _construct_seq(loader, node):
    s = _Seq(loader.construct_sequence(node, deep=True))
    s.line = node.start_mark.line + 1
    return s


_LineLoader.add_constructor("tag:yaml.org,2002:map", _construct_map)
_LineLoader.add_constructor("tag:yaml.org,2002:seq", _construct_seq)


def _line(obj, fallback=None):
    return getattr(obj, "line", None) or fallback


def _req(section, key, path, what):
    if not isinstance(section, dict) or key not in section:
        raise MissingSectionError(f"{what}: missing '{key}'", _line(section), path)
    return section[key]


def _parse_yaml(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SceneParseError(f"cannot read scene file: {exc}", None, path) from exc
    try:
        doc = yaml.load(text, Loader=_LineLoader)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark else None
        raise SceneParseError(f"YAML syntax error: {exc.problem}", line, path) from exc
    except yaml.YAMLError as exc:
        raise SceneParseError(f"YAML error: {exc}", None, path) from exc
    return doc


def _mesh_triangles(entry, path):
    """Expand a ``positions`` triangle or a ``vertices``/``faces`` mesh into vertex triples."""
    if "positions" in entry:
        normals = entry.get("normals")
        return [(entry["positions"], normals)]
    if "vertices" in entry:
        verts = np.asarray(entry["vertices"], dtype=float)
        faces = _req(entry, "faces", path, "mesh")
        vn = entry.get("normals")
        vn = None if vn is None else np.asarray(vn, dtype=float)
        out = []
        for f in faces:
            idx = [int(i) for i in f]
            if len(idx) != 3 or min(idx) < 0 or max(idx) >= len(verts):
                raise SceneError(f"face {list(f)} has invalid vertex indices", _line(f, _line(faces)), path)
            out.append((verts[idx], None if vn is None else vn[idx]))
        return out
    raise SceneError("triangle entry needs 'positions' or 'vertices'+'faces'", _line(entry), path)


def _load_occluders(entries, path, base):
    occ = []
    for e in entries or []:
        if "include" in e:
            inc = base / str(e["include"])
            doc = _parse_yaml(inc)
            tris = _req(doc, "triangles", inc, "included mesh")
            occ.extend(_load_occluders(tris, inc, inc.parent))
            continue
        albedo = e.get("albedo", (0.8, 0.8, 0.8))
        for pos, _ in _mesh_triangles(e, path):
            try:
                occ.append(Triangle(pos, albedo))
            except DegenerateTriangleError as exc:
                raise DegenerateTriangleError(f"occluder: {exc}", _line(e), path) from None
            except (ValueError, TypeError) as exc:
                raise SceneError(f"occluder: {exc}", _line(e), path) from None
    return occ


def load_scene(path) -> Scene:
    """Read and validate a YAML scene file.

    Required sections: ``camera`` and ``lights``. Optional: ``specular``,
    ``occluders``, ``separators``. See ``fixtures/`` for commented examples.
    """
    path = Path(path)
    doc = _parse_yaml(path)
    if not isinstance(doc, dict):
        raise SceneParseError("top level must be a mapping", 1, path)

    cam = _req(doc, "camera", path, "scene")
    try:
        camera = Camera(
            position=_req(cam, "position", path, "camera"),
            look_at=_req(cam, "look_at", path, "camera"),
            up=cam.get("up", (0.0, 1.0, 0.0)),
            fov=float(cam.get("fov", 40.0)),
            resolution=tuple(cam.get("resolution", (64, 64))),
        )
    except (ValueError, TypeError) as exc:
        raise SceneError(f"camera: {exc}", _line(cam), path) from None

    lights = []
    for e in _req(doc, "lights", path, "scene") or []:
        try:
            lights.append(PointLight(_req(e, "position", path, "light"), e.get("power", (1.0, 1.0, 1.0))))
        except (ValueError, TypeError) as exc:
            raise SceneError(f"light: {exc}", _line(e), path) from None

    raw = []
    for e in doc.get("specular") or []:
        mode = e.get("normal_mode", "interpolated")
        ior = e.get("ior", (1.0, 1.0))
        try:
            eta_in, eta_out = (float(x) for x in ior)
        except (TypeError, ValueError):
            raise SceneError("ior must be [eta_in, eta_out]", _line(e), path) from None
        for k, (pos, nrm) in enumerate(_mesh_triangles(e, path)):
            if nrm is None and mode == "interpolated":
                raise SceneError("interpolated normal mode needs per-vertex 'normals'", _line(e), path)
            name = str(e.get("name", f"tri{len(raw)}"))
            raw.append((e, dict(positions=pos, normals=nrm, normal_mode=mode, eta_in=eta_in,
                                eta_out=eta_out, material=e.get("material", "mirror"),
                                name=name if "positions" in e else f"{name}.{k}")))

    occluders = _load_occluders(doc.get("occluders"), path, path.parent)

    # scale from all geometry so the degeneracy threshold is unit independent
    pts = [np.asarray(kw["positions"], dtype=float).reshape(-1, 3) for _, kw in raw]
    pts += [o.positions for o in occluders] + [l.position[None] for l in lights]
    allp = np.concatenate(pts) if pts else np.zeros((1, 3))
    scale = float(np.linalg.norm(allp.max(axis=0) - allp.min(axis=0))) or 1.0

    triangles = []
    for e, kw in raw:
        try:
            triangles.append(SpecularTriangle(scale=scale, **kw))
        except DegenerateTriangleError as exc:
            raise DegenerateTriangleError(f"specular '{kw['name']}': {exc}", _line(e), path) from None
        except (ValueError, TypeError) as exc:
            raise SceneError(f"specular '{kw['name']}': {exc}", _line(e), path) from None

    seps = None
    if "separators" in doc:
        s = doc["separators"]
        try:
            seps = Separators(_req(s, "x0", path, "separators"), _req(s, "x_end", path, "separators"))
        except (ValueError, TypeError) as exc:
            raise SceneError(f"separators: {exc}", _line(s), path) from None

    return Scene(triangles=triangles, occluders=occluders, lights=lights, camera=camera, separators=seps)
