"""
Analytic epipolar geometry between two known cameras.

F maps a pixel x in camera A to its epipolar line in camera B, so that
x_Bᵀ F x_A = 0 for every correspondence of a common 3D point.
"""

from dataclasses import dataclass

import numpy as np

from src.errors import ShapeMismatchError
from src.models.camera_types import Camera

BASELINE_EPS = 1e-9
LINE_EPS = 1e-12
# Lines shorter than this, relative to the homogeneous point, pass through the epipole.
EPIPOLE_TOL = 1e-9
DEGENERATE_DISTANCE = 1e6


@dataclass(frozen=True)
class FundamentalResult:
    matrix: np.ndarray
    degenerate: bool


def skew(t: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -t[2], t[1]], [t[2], 0.0, -t[0]], [-t[1], t[0], 0.0]])


def fundamental_matrix(cam_a: Camera, cam_b: Camera) -> FundamentalResult:
    """
    Fundamental matrix from poses and intrinsics, scaled to unit Frobenius norm.

    Pairs with (near) zero baseline have no epipolar geometry; they come back with
    `degenerate=True` and a zero matrix so callers can skip them.
    """
    R_a, R_b = cam_a.pose.matrix, cam_b.pose.matrix
    R = R_b.T @ R_a
    t = R_b.T @ (cam_a.center - cam_b.center)
    if np.linalg.norm(t) < BASELINE_EPS:
        return FundamentalResult(matrix=np.zeros((3, 3)), degenerate=True)

    F = cam_b.intrinsics.K_inv.T @ skew(t) @ R @ cam_a.intrinsics.K_inv
    # Enforce rank 2 against round-off.
    U, S, Vt = np.linalg.svd(F)
    S[2] = 0.0
    F = U @ np.diag(S) @ Vt
    return FundamentalResult(matrix=F / np.linalg.norm(F), degenerate=False)


def _homogeneous(points: np.ndarray) -> np.ndarray:
    return np.concatenate([points, np.ones((points.shape[0], 1))], axis=1)


def symmetric_epipolar_distances(F: np.ndarray, xs: np.ndarray, xs_prime: np.ndarray) -> np.ndarray:
    """
    Vectorized symmetric epipolar distance for (N, 2) correspondences x -> x'.

    A point at an epipole has no epipolar line; such correspondences get DEGENERATE_DISTANCE.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    xs_prime = np.atleast_2d(np.asarray(xs_prime, dtype=np.float64))
    if xs.shape != xs_prime.shape or xs.shape[1] != 2:
        raise ShapeMismatchError(f"correspondences must both be (N, 2), got {xs.shape} and {xs_prime.shape}")
    x = _homogeneous(xs)
    x_prime = _homogeneous(xs_prime)

    lines_b = x @ F.T
    lines_a = x_prime @ F
    residual = np.abs(np.sum(x_prime * lines_b, axis=1))
    norm_b = np.hypot(lines_b[:, 0], lines_b[:, 1])
    norm_a = np.hypot(lines_a[:, 0], lines_a[:, 1])
    degenerate = (norm_b < EPIPOLE_TOL * np.linalg.norm(x, axis=1)) | (norm_a < EPIPOLE_TOL * np.linalg.norm(x_prime, axis=1))
    distances = 0.5 * (residual / np.maximum(norm_b, LINE_EPS) + residual / np.maximum(norm_a, LINE_EPS))
    return np.where(degenerate, DEGENERATE_DISTANCE, distances)


def symmetric_epipolar_distance(F: np.ndarray, x, x_prime) -> float:
    """Mean distance of x' to the epipolar line of x and of x to the line of x', in pixels."""
    return float(symmetric_epipolar_distances(F, np.asarray(x)[None], np.asarray(x_prime)[None])[0])
