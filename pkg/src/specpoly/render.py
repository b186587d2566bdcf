"""Deterministic splat renderer for caustics and glints.

Every pixel traces one primary ray through its center to the first diffuse
surface x0 (specular triangles are skipped by primary rays). Each point light
then contributes direct lighting plus one splat per admissible specular chain
from x0 to the light, weighted by the chain's geometric term. There is no
sampling, so a render is a pure function of the job.

Outputs are a binary PPM (P6, 8 bit) and a raw float64 sidecar holding the
linear image. The sidecar starts with width and height as little-endian
uint64, followed by row-major RGB little-endian float64 values. The PPM is
``tone_map`` applied to the sidecar.
"""

from __future__ import annotations

import logging
import math
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .pipeline import SolveReport, geometric_term, solve_scene, warmup
from .polynomialize import EXPERIMENTAL_CHAINS, GATED_CHAINS
from .rootfind import SolverConfig
from .scene import Scene, Separators, first_hit, load_scene, visible

log = logging.getLogger(__name__)

MAX_PIXELS = 2048 * 2048
GAMMA = 2.2
WATCHDOG_MS = 50.0
_PPM_HEADER = re.compile(rb"P6\s+(\d+)\s+(\d+)\s+(\d+)\s")


@dataclass(frozen=True)
class RenderJob:
    """Everything a render depends on. ``scene`` is a path or a loaded Scene.

    ``resolution`` overrides the camera resolution when given. A pixel whose
    chain solve exceeds ``watchdog_ms`` keeps its direct lighting, loses its
    specular splats and is listed in the result; ``0`` disables the watchdog.
    """

    scene: object
    chains: tuple = ("R",)
    resolution: tuple | None = None
    out: str | None = None
    cfg: SolverConfig = field(default_factory=SolverConfig)
    threads: int = 1
    watchdog_ms: float = WATCHDOG_MS
    experimental: bool = False
    direct: bool = True

    def __post_init__(self):
        chains = tuple(str(c).upper() for c in self.chains)
        allowed = GATED_CHAINS + (EXPERIMENTAL_CHAINS if self.experimental else ())
        bad = [c for c in chains if c not in allowed]
        if bad:
            hint = "" if self.experimental else " (RT/TR/TT need the experimental flag)"
            raise ValueError(f"unsupported chain types {bad}{hint}")
        object.__setattr__(self, "chains", chains)
        if self.resolution is not None:
            w, h = (int(x) for x in self.resolution)
            if w <= 0 or h <= 0 or w * h > MAX_PIXELS:
                raise ValueError(f"resolution {w}x{h} outside 1 .. 2048x2048")
            object.__setattr__(self, "resolution", (w, h))
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.watchdog_ms < 0:
            raise ValueError("watchdog_ms must be >= 0")


@dataclass
class RenderResult:
    """Linear images (h, w, 3) split into direct and specular parts."""

    direct: np.ndarray
    caustic: np.ndarray
    report: SolveReport
    timeouts: list

    @property
    def linear(self) -> np.ndarray:
        return self.direct + self.caustic

    @property
    def lit_mask(self) -> np.ndarray:
        """Pixels receiving any specular contribution."""
        return np.any(self.caustic > 0.0, axis=2)


# ------------------------------------------------------------ shading


def _facing_normal(scene: Scene, tri_id: int, view_dir) -> np.ndarray:
    n = scene.occluders[tri_id - len(scene.triangles)].geometric_normal
    return -n if np.dot(n, view_dir) > 0.0 else n


def _direct(scene: Scene, x0, n, tri_id, albedo):
    """``albedo / pi * sum_l I_l * cos / r^2`` over visible lights."""
    acc = np.zeros(3)
    for light in scene.lights:
        d = light.position - x0
        r2 = float(np.dot(d, d))
        cos = float(np.dot(n, d)) / math.sqrt(r2)
        if cos <= 0.0 or not visible(x0, light.position, scene, ignore={tri_id}):
            continue
        acc = acc + light.intensity * (cos / r2)
    return np.asarray(albedo) / math.pi * acc


def _caustic(scene: Scene, x0, n, tri_id, albedo, chains, cfg, deadline):
    acc = np.zeros(3)
    report = SolveReport()
    for light in scene.lights:
        seps = Separators(x0, light.position)
        found, rep = solve_scene(scene, seps, chains, cfg, cull=True, ignore_start={tri_id},
                                 deadline=deadline)
        report += rep
        for ch in found:
            w = ch.vertices[0] - x0
            cos = float(np.dot(n, w)) / float(np.linalg.norm(w))
            if cos <= 0.0:
                continue
            g = geometric_term(ch, scene)
            if g > 0.0 and math.isfinite(g):
                acc = acc + light.intensity * (g * cos)
    return np.asarray(albedo) / math.pi * acc, report


def shade_pixel(scene: Scene, px: int, py: int, chains=("R",), cfg: SolverConfig = SolverConfig(),
                watchdog_ms: float = WATCHDOG_MS, direct: bool = True):
    """(direct rgb, specular rgb, report, timed_out) for one pixel."""
    origin, d = scene.camera.ray(px, py)
    hit = first_hit(origin, d, scene, ignore=range(len(scene.triangles)))
    zero = np.zeros(3)
    if hit is None:
        return zero, zero, SolveReport(), False
    tri_id, t, _bc = hit
    x0 = origin + t * d
    n = _facing_normal(scene, tri_id, d)
    albedo = scene.occluders[tri_id - len(scene.triangles)].albedo
    dl = _direct(scene, x0, n, tri_id, albedo) if direct else zero
    if not scene.triangles or not chains:
        return dl, zero, SolveReport(), False
    deadline = time.perf_counter() + watchdog_ms * 1e-3 if watchdog_ms > 0 else None
    try:
        cl, rep = _caustic(scene, x0, n, tri_id, albedo, chains, cfg, deadline)
    except TimeoutError:
        return dl, zero, SolveReport(), True
    return dl, cl, rep, False


# ------------------------------------------------------- parallel driver

_WORKER: dict = {}


def _warmup(scene: Scene, chains, cfg):
    # compile / load the numba kernels so the watchdog never sees JIT time
    if scene.triangles and scene.camera is not None:
        warmup()
        w, h = scene.camera.resolution
        shade_pixel(scene, w // 2, h // 2, chains, cfg, watchdog_ms=0.0)


def _init_worker(scene, chains, cfg, watchdog_ms, direct):
    _WORKER.update(scene=scene, chains=chains, cfg=cfg, watchdog_ms=watchdog_ms, direct=direct)
    _warmup(scene, chains, cfg)


def _render_rows(rows):
    w = _WORKER
    scene = w["scene"]
    width = scene.camera.resolution[0]
    direct = np.zeros((len(rows), width, 3))
    caustic = np.zeros((len(rows), width, 3))
    report = SolveReport()
    timeouts = []
    for i, py in enumerate(rows):
        for px in range(width):
            dl, cl, rep, late = shade_pixel(scene, px, py, w["chains"], w["cfg"], w["watchdog_ms"],
                                            w["direct"])
            direct[i, px] = dl
            caustic[i, px] = cl
            report += rep
            if late:
                timeouts.append((px, py))
    return direct, caustic, report, timeouts


def _row_blocks(h: int, threads: int):
    size = max(1, math.ceil(h / (4 * threads)))
    return [list(range(s, min(h, s + size))) for s in range(0, h, size)]


def render(job: RenderJob) -> RenderResult:
    """Render ``job``; blocks of rows go to a process pool and are assembled in row order."""
    scene = job.scene if isinstance(job.scene, Scene) else load_scene(job.scene)
    if scene.camera is None:
        raise ValueError("scene has no camera")
    if job.resolution is not None:
        scene = Scene(scene.triangles, scene.occluders, scene.lights,
                      scene.camera.with_resolution(*job.resolution), scene.separators)
    w, h = scene.camera.resolution
    if w * h > MAX_PIXELS:
        raise ValueError(f"resolution {w}x{h} exceeds 2048x2048")
    args = (scene, job.chains, job.cfg, job.watchdog_ms, job.direct)
    blocks = _row_blocks(h, job.threads)
    if job.threads == 1:
        _init_worker(*args)
        parts = [_render_rows(b) for b in blocks]
    else:
        with ProcessPoolExecutor(max_workers=job.threads, initializer=_init_worker, initargs=args) as ex:
            parts = list(ex.map(_render_rows, blocks))
    report = SolveReport()
    timeouts = []
    for p in parts:
        report += p[2]
        timeouts.extend(p[3])
    for px, py in timeouts:
        log.warning("watchdog: pixel (%d, %d) exceeded %.1f ms, specular splats dropped",
                    px, py, job.watchdog_ms)
    res = RenderResult(np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]),
                       report, timeouts)
    if job.out is not None:
        write_outputs(job.out, res.linear)
    return res


# --------------------------------------------------------------- output


def tone_map(linear: np.ndarray) -> np.ndarray:
    """8-bit display values: ``floor(255 * clip(x, 0, 1) ** (1 / 2.2) + 0.5)``."""
    x = np.clip(np.nan_to_num(np.asarray(linear, dtype=np.float64), nan=0.0), 0.0, 1.0)
    return np.floor(255.0 * x ** (1.0 / GAMMA) + 0.5).astype(np.uint8)


def ppm_bytes(linear: np.ndarray) -> bytes:
    h, w, _ = linear.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + tone_map(linear).tobytes()


def sidecar_path(out) -> Path:
    return Path(out).with_suffix(".f64")


def write_outputs(out, linear: np.ndarray) -> tuple[Path, Path]:
    """Write ``out`` (PPM) and the float sidecar next to it; returns both paths."""
    out = Path(out)
    if out.parent and not out.parent.exists():
        os.makedirs(out.parent, exist_ok=True)
    out.write_bytes(ppm_bytes(linear))
    h, w, _ = linear.shape
    side = sidecar_path(out)
    with open(side, "wb") as f:
        f.write(np.array([w, h], dtype="<u8").tobytes())
        f.write(np.ascontiguousarray(linear, dtype="<f8").tobytes())
    return out, side


def read_sidecar(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 16:
        raise ValueError("sidecar too short")
    w, h = (int(x) for x in np.frombuffer(raw[:16], dtype="<u8"))
    data = np.frombuffer(raw[16:], dtype="<f8")
    if data.size != w * h * 3:
        raise ValueError(f"sidecar holds {data.size} values, header says {w}x{h}x3")
    return data.reshape(h, w, 3).copy()


def read_ppm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    m = _PPM_HEADER.match(raw)
    if m is None or int(m.group(3)) != 255:
        raise ValueError("not an 8-bit P6 file")
    w, h = int(m.group(1)), int(m.group(2))
    return np.frombuffer(raw[m.end():], dtype=np.uint8).reshape(h, w, 3).copy()
