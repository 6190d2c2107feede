from src.geometry.epipolar import FundamentalResult, fundamental_matrix, symmetric_epipolar_distance, symmetric_epipolar_distances
from src.geometry.poses import interpolate_pose, look_at, pose_distance, rotation_angle
from src.geometry.rays import Ray, camera_ray, camera_rays, pixel_grid, project, unproject
from src.geometry.trajectory import load_trajectory, save_trajectory

__all__ = [
    "FundamentalResult",
    "fundamental_matrix",
    "symmetric_epipolar_distance",
    "symmetric_epipolar_distances",
    "interpolate_pose",
    "look_at",
    "pose_distance",
    "rotation_angle",
    "Ray",
    "camera_ray",
    "camera_rays",
    "pixel_grid",
    "project",
    "unproject",
    "load_trajectory",
    "save_trajectory",
]
