"""
Pinhole rays and point projection.

Pixel coordinates are continuous: the center of pixel (row i, column j) sits at
(u, v) = (j + 0.5, i + 0.5), and the image spans [0, width] x [0, height].
"""

from dataclasses import dataclass

import numpy as np

from src.errors import DomainError, ShapeMismatchError
from src.models.camera_types import Camera


@dataclass(frozen=True)
class Ray:
    """World-space ray with a unit direction."""

    origin: np.ndarray
    direction: np.ndarray

    def at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


def _check_in_bounds(camera: Camera, u: np.ndarray, v: np.ndarray) -> None:
    inside = (u >= 0) & (u <= camera.width) & (v >= 0) & (v <= camera.height)
    if not np.all(inside):
        raise DomainError(
            f"pixel outside a {camera.width}x{camera.height} image",
            {"u": np.asarray(u)[~inside].tolist()[:4], "v": np.asarray(v)[~inside].tolist()[:4]},
        )


def _directions(camera: Camera, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    k = camera.intrinsics
    local = np.stack([(u - k.cx) / k.fx, (v - k.cy) / k.fy, np.ones_like(u)], axis=-1)
    world = local @ camera.pose.matrix.T
    return world / np.linalg.norm(world, axis=-1, keepdims=True)


def camera_ray(camera: Camera, pixel) -> Ray:
    """World-space ray through a continuous pixel coordinate (u, v)."""
    u, v = (np.float64(p) for p in pixel)
    _check_in_bounds(camera, np.atleast_1d(u), np.atleast_1d(v))
    direction = _directions(camera, np.atleast_1d(u), np.atleast_1d(v))[0]
    return Ray(origin=camera.center.copy(), direction=direction)


def pixel_grid(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Pixel-center coordinates (u, v), each shaped (height, width)."""
    u, v = np.meshgrid(np.arange(width, dtype=np.float64) + 0.5, np.arange(height, dtype=np.float64) + 0.5)
    return u, v


def camera_rays(camera: Camera) -> tuple[np.ndarray, np.ndarray]:
    """Origins and unit directions for every pixel center, both shaped (H, W, 3)."""
    u, v = pixel_grid(camera.width, camera.height)
    directions = _directions(camera, u, v)
    origins = np.broadcast_to(camera.center, directions.shape).copy()
    return origins, directions


def project(camera: Camera, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Project world points into the image.

    Args:
        camera: Camera to project into
        points: (N, 3) world points

    Returns:
        (pixels (N, 2), depth (N,)) where depth is the camera-frame z coordinate.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ShapeMismatchError(f"points must be (N, 3), got {points.shape}")
    local = (points - camera.center) @ camera.pose.matrix
    depth = local[:, 2]
    k = camera.intrinsics
    with np.errstate(divide="ignore", invalid="ignore"):
        u = k.fx * local[:, 0] / depth + k.cx
        v = k.fy * local[:, 1] / depth + k.cy
    return np.stack([u, v], axis=-1), depth


def unproject(camera: Camera, pixels: np.ndarray, depth: np.ndarray) -> np.ndarray:
    """Lift (N, 2) pixels at camera-frame z-depth (N,) back to (N, 3) world points."""
    pixels = np.asarray(pixels, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    if pixels.ndim != 2 or pixels.shape[1] != 2 or depth.shape != pixels.shape[:1]:
        raise ShapeMismatchError(f"pixels (N, 2) and depth (N,) expected, got {pixels.shape} and {depth.shape}")
    k = camera.intrinsics
    local = np.stack(
        [(pixels[:, 0] - k.cx) / k.fx * depth, (pixels[:, 1] - k.cy) / k.fy * depth, depth],
        axis=-1,
    )
    return camera.pose.transform_points(local)
