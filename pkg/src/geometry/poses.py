"""
Pose construction, interpolation and distances.
"""

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from src.errors import DomainError
from src.models.camera_types import Pose


def look_at(eye, target, up=(0.0, 0.0, 1.0)) -> Pose:
    """Camera-to-world pose at `eye` whose +z axis points at `target`."""
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - eye
    norm = np.linalg.norm(forward)
    if norm < 1e-12:
        raise DomainError("look_at needs distinct eye and target", {"eye": eye.tolist()})
    forward /= norm
    right = np.cross(forward, np.asarray(up, dtype=np.float64))
    if np.linalg.norm(right) < 1e-9:
        raise DomainError("look_at up vector is parallel to the viewing direction", {"up": list(up)})
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    return Pose.from_matrix(np.stack([right, down, forward], axis=1), eye)


def interpolate_pose(a: Pose, b: Pose, t: float) -> Pose:
    """Slerp rotations along the shorter arc, lerp translations. Exact at t = 0 and t = 1."""
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"interpolation parameter must be in [0, 1], got {t}")
    if t == 0.0:
        return a
    if t == 1.0:
        return b
    slerp = Slerp([0.0, 1.0], Rotation.concatenate([a.as_rotation(), b.as_rotation()]))
    translation = (1.0 - t) * a.center + t * b.center
    return Pose.from_rotation(slerp([t])[0], translation)


def rotation_angle(a: Pose, b: Pose) -> float:
    """Geodesic angle (radians) between two orientations."""
    return float((a.as_rotation().inv() * b.as_rotation()).magnitude())


def pose_distance(a: Pose, b: Pose) -> float:
    """Rotation angle in radians plus translation distance in world units."""
    return rotation_angle(a, b) + float(np.linalg.norm(a.center - b.center))
