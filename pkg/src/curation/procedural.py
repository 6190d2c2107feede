"""
Procedural scenes made of analytic primitives and their exact ray-cast renderer.

Scenes hold axis-aligned boxes, spheres and a finite ground slab with a checker
texture, shaded with a fixed directional light. Rendering is pure numpy in float64,
so identical specs give bit-identical images.
"""

from dataclasses import dataclass, field

import numpy as np
import torch

from src.curation.trajectories import make_trajectories
from src.geometry import pixel_grid
from src.models.camera_types import Camera
from src.models.config_types import SceneSpec
from src.scene.base import DEFAULT_BACKGROUND, RenderOutput

LIGHT = np.array([0.4, 0.3, 1.0]) / np.linalg.norm([0.4, 0.3, 1.0])
AMBIENT = 0.35
CHECKER_COLORS = (np.array([0.78, 0.78, 0.74]), np.array([0.46, 0.46, 0.50]))
HIT_EPS = 1e-6


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray
    color: np.ndarray
    checker: bool = False


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float
    color: np.ndarray


@dataclass
class AnalyticScene:
    """Ground-truth scene; `bounds` encloses every primitive and is what reconstructions fit inside."""

    scene_id: str
    boxes: list[Box] = field(default_factory=list)
    spheres: list[Sphere] = field(default_factory=list)
    bounds: tuple[tuple[float, float, float], tuple[float, float, float]] = ((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))
    background: float = DEFAULT_BACKGROUND
    supersample: int = 2

    @property
    def n_primitives(self) -> int:
        return len(self.boxes) + len(self.spheres)


def _intersect_box(box: Box, origins: np.ndarray, directions: np.ndarray):
    safe = np.where(np.abs(directions) < 1e-12, 1e-12, directions)
    t0 = (box.lo - origins) / safe
    t1 = (box.hi - origins) / safe
    t_min = np.minimum(t0, t1)
    t_max = np.maximum(t0, t1)
    t_enter = t_min.max(axis=1)
    t_exit = t_max.min(axis=1)
    entering = t_enter > HIT_EPS
    t = np.where(entering, t_enter, t_exit)
    hit = (t_exit >= np.maximum(t_enter, HIT_EPS)) & (t > HIT_EPS)

    axis = np.where(entering, t_min.argmax(axis=1), t_max.argmin(axis=1))
    normals = np.zeros_like(origins)
    rows = np.arange(origins.shape[0])
    normals[rows, axis] = -np.sign(safe[rows, axis])
    normals[~entering] *= -1.0
    return hit, t, normals


def _intersect_sphere(sphere: Sphere, origins: np.ndarray, directions: np.ndarray):
    oc = origins - sphere.center
    b = np.sum(oc * directions, axis=1)
    c = np.sum(oc * oc, axis=1) - sphere.radius**2
    disc = b * b - c
    root = np.sqrt(np.clip(disc, 0.0, None))
    t_near = -b - root
    t = np.where(t_near > HIT_EPS, t_near, -b + root)
    hit = (disc >= 0) & (t > HIT_EPS)
    normals = (origins + t[:, None] * directions - sphere.center) / sphere.radius
    return hit, t, normals


def cast_rays(scene: AnalyticScene, origins: np.ndarray, directions: np.ndarray):
    """Nearest hit per ray: (hit mask, ray distance, shaded rgb)."""
    n = origins.shape[0]
    best_t = np.full(n, np.inf)
    best_normal = np.zeros((n, 3))
    best_albedo = np.zeros((n, 3))
    checker = np.zeros(n, dtype=bool)

    candidates = [(_intersect_box(b, origins, directions), b.color, b.checker) for b in scene.boxes]
    candidates += [(_intersect_sphere(s, origins, directions), s.color, False) for s in scene.spheres]
    for (hit, t, normals), color, is_checker in candidates:
        closer = hit & (t < best_t)
        best_t[closer] = t[closer]
        best_normal[closer] = normals[closer]
        best_albedo[closer] = color
        checker[closer] = is_checker

    hit = np.isfinite(best_t)
    if checker.any():
        points = origins[checker] + best_t[checker, None] * directions[checker]
        parity = (np.floor(points[:, 0]) + np.floor(points[:, 1])).astype(np.int64) % 2 == 0
        best_albedo[checker] = np.where(parity[:, None], CHECKER_COLORS[0], CHECKER_COLORS[1])

    shade = AMBIENT + (1.0 - AMBIENT) * np.clip(best_normal @ LIGHT, 0.0, None)
    rgb = np.where(hit[:, None], best_albedo * shade[:, None], scene.background)
    return hit, np.where(hit, best_t, 0.0), rgb


def render_ground_truth(scene: AnalyticScene, camera: Camera) -> RenderOutput:
    """Supersampled exact render: rgb (3, H, W), z-depth and hit fraction as accumulation."""
    s = scene.supersample
    k = camera.intrinsics
    R = camera.pose.matrix
    u0, v0 = pixel_grid(camera.width, camera.height)
    rgb = np.zeros((camera.height, camera.width, 3))
    depth = np.zeros((camera.height, camera.width))
    hits = np.zeros((camera.height, camera.width))

    for a in range(s):
        for b in range(s):
            u = u0 - 0.5 + (b + 0.5) / s
            v = v0 - 0.5 + (a + 0.5) / s
            local = np.stack([(u - k.cx) / k.fx, (v - k.cy) / k.fy, np.ones_like(u)], axis=-1).reshape(-1, 3)
            directions = local @ R.T
            directions /= np.linalg.norm(directions, axis=1, keepdims=True)
            origins = np.broadcast_to(camera.center, directions.shape)
            hit, t, color = cast_rays(scene, origins, directions)
            z = t * (directions @ R[:, 2])
            rgb += color.reshape(rgb.shape)
            depth += z.reshape(depth.shape)
            hits += hit.reshape(hits.shape)

    count = float(s * s)
    depth = np.where(hits > 0, depth / np.maximum(hits, 1.0), 0.0)
    return RenderOutput(
        rgb=torch.from_numpy(rgb / count).permute(2, 0, 1).to(torch.float32).contiguous(),
        depth=torch.from_numpy(depth).to(torch.float32),
        accumulation=torch.from_numpy(hits / count).to(torch.float32),
    )


def _layout_bounds(spec: SceneSpec) -> tuple[np.ndarray, np.ndarray]:
    ex, ey, ez = spec.extent
    if spec.trajectory_style == "orbit":
        return np.array([-ex - 1.0, -ey - 1.0, -0.2]), np.array([ex + 1.0, ey + 1.0, 2.0 * ez + 0.5])
    length = (spec.n_frames - 1) * spec.spacing
    return np.array([-2.0, -ey - 1.0, -0.2]), np.array([length + 2.0 * ex + 2.0, ey + 1.0, 2.0 * ez + 0.5])


def _place_primitives(spec: SceneSpec, rng: np.random.Generator, lo: np.ndarray, hi: np.ndarray):
    ex, ey, ez = spec.extent
    palette = np.asarray(spec.palette, dtype=np.float64)
    boxes, spheres = [], []
    for i in range(spec.n_primitives):
        color = palette[rng.integers(len(palette))]
        if spec.trajectory_style == "orbit":
            x, y = rng.uniform(-ex, ex), rng.uniform(-ey, ey)
        else:
            # Line the path on both sides, leaving a clear lane around y = 0.
            side = 1.0 if i % 2 == 0 else -1.0
            x = rng.uniform(lo[0] + 1.0, hi[0] - 1.0)
            y = side * rng.uniform(0.45 * ey + 0.5, ey)
        if rng.uniform() < 0.5:
            half = rng.uniform(0.25, 0.6, size=3)
            half[2] = rng.uniform(0.3, ez)
            center = np.array([x, y, half[2]])
            boxes.append(Box(lo=center - half, hi=center + half, color=color))
        else:
            radius = rng.uniform(0.3, min(0.7, ez))
            spheres.append(Sphere(center=np.array([x, y, radius]), radius=float(radius), color=color))
    return boxes, spheres


def generate_scene(spec: SceneSpec) -> tuple[AnalyticScene, list[Camera], list[Camera]]:
    """Ground-truth scene plus reference and target trajectories; a pure function of `spec`."""
    rng = np.random.default_rng(spec.seed)
    lo, hi = _layout_bounds(spec)
    boxes, spheres = _place_primitives(spec, rng, lo, hi)
    ground = Box(lo=np.array([lo[0], lo[1], -0.1]), hi=np.array([hi[0], hi[1], 0.0]), color=CHECKER_COLORS[0], checker=True)
    margin = 0.05
    scene = AnalyticScene(
        scene_id=spec.scene_id,
        boxes=[ground, *boxes],
        spheres=spheres,
        bounds=(tuple(float(v) for v in lo - margin), tuple(float(v) for v in hi + margin)),
        supersample=spec.supersample,
    )
    reference, target = make_trajectories(spec)
    return scene, reference, target
