"""
Camera paths for procedural scenes.
"""

import numpy as np
from scipy.spatial.transform import Rotation

from src.errors import DomainError
from src.geometry import look_at
from src.models.camera_types import Camera, CameraIntrinsics, Pose
from src.models.config_types import SceneSpec

ORBIT_LOOK_HEIGHT = 0.5
LINE_PITCH = 0.15


def orbit_trajectory(intrinsics: CameraIntrinsics, n: int, radius: float, height: float, phase: float = 0.0) -> list[Camera]:
    """Cameras on a horizontal circle looking at the scene center."""
    target = np.array([0.0, 0.0, ORBIT_LOOK_HEIGHT])
    cameras = []
    for k in range(n):
        theta = 2.0 * np.pi * k / n + phase
        eye = np.array([radius * np.cos(theta), radius * np.sin(theta), height])
        cameras.append(Camera(intrinsics=intrinsics, pose=look_at(eye, target)))
    return cameras


def line_trajectory(intrinsics: CameraIntrinsics, n: int, spacing: float, height: float) -> list[Camera]:
    """Cameras advancing along +x with a constant baseline, looking ahead and slightly down."""
    cameras = []
    for k in range(n):
        eye = np.array([k * spacing, 0.0, height])
        cameras.append(Camera(intrinsics=intrinsics, pose=look_at(eye, eye + np.array([1.0, 0.0, -LINE_PITCH]))))
    return cameras


def shifted_trajectory(trajectory: list[Camera], shift: float) -> list[Camera]:
    """Translate every camera by `shift` along its own right (+x) axis."""
    shifted = []
    for camera in trajectory:
        center = camera.center + shift * camera.pose.matrix[:, 0]
        shifted.append(camera.with_pose(Pose(rotation=camera.pose.rotation, translation=tuple(center))))
    return shifted


def make_camera_rig(trajectory: list[Camera], n_cameras: int = 3, separation_deg: float = 40.0) -> list[list[Camera]]:
    """
    Simulated multi-camera rig sharing each frame's center.

    Camera i is yawed by (i - n_cameras // 2) * separation about its own vertical
    axis; index n_cameras // 2 reproduces `trajectory`.
    """
    if n_cameras < 2:
        raise DomainError(f"a rig needs at least 2 cameras, got {n_cameras}")
    center_index = n_cameras // 2
    rigs = []
    for i in range(n_cameras):
        yaw = Rotation.from_euler("y", (i - center_index) * separation_deg, degrees=True)
        if i == center_index:
            rigs.append(list(trajectory))
            continue
        rigs.append([cam.with_pose(Pose.from_rotation(cam.pose.as_rotation() * yaw, cam.center)) for cam in trajectory])
    return rigs


def make_trajectories(spec: SceneSpec) -> tuple[list[Camera], list[Camera]]:
    """Reference trajectory and a target trajectory offset from it by `spec.deviation`."""
    intrinsics = CameraIntrinsics.from_fov(spec.width, spec.height, spec.fov_deg)
    if spec.trajectory_style == "orbit":
        reference = orbit_trajectory(intrinsics, spec.n_frames, spec.orbit_radius, spec.camera_height)
        target = orbit_trajectory(
            intrinsics,
            spec.n_frames,
            spec.orbit_radius,
            spec.camera_height + spec.deviation,
            phase=np.pi / spec.n_frames,
        )
        return reference, target
    height = spec.camera_height if spec.trajectory_style == "driving-line" else 0.5 * spec.camera_height
    reference = line_trajectory(intrinsics, spec.n_frames, spec.spacing, height)
    return reference, shifted_trajectory(reference, spec.deviation)
