"""
Pydantic models for cameras and rigid poses.

Convention used everywhere: poses are camera-to-world, right-handed, camera +z looks
forward, +x points right and +y points down; image origin is the top-left corner.
Quaternions are stored scalar-first (w, x, y, z).
"""

from functools import cached_property
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.spatial.transform import Rotation


class CameraIntrinsics(BaseModel):
    """Pinhole intrinsics in pixels."""

    model_config = ConfigDict(frozen=True)

    fx: float = Field(gt=0, description="Focal length along x (pixels)")
    fy: float = Field(gt=0, description="Focal length along y (pixels)")
    cx: float = Field(ge=0, description="Principal point x (pixels)")
    cy: float = Field(ge=0, description="Principal point y (pixels)")
    width: int = Field(gt=0, description="Image width (pixels)")
    height: int = Field(gt=0, description="Image height (pixels)")

    @model_validator(mode="after")
    def _principal_point_inside(self) -> "CameraIntrinsics":
        if not (self.cx < self.width and self.cy < self.height):
            raise ValueError(f"principal point ({self.cx}, {self.cy}) outside a {self.width}x{self.height} image")
        return self

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def K_inv(self) -> np.ndarray:
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )

    @classmethod
    def from_fov(cls, width: int, height: int, fov_deg: float) -> "CameraIntrinsics":
        """Square-pixel intrinsics with the given horizontal field of view."""
        focal = 0.5 * width / np.tan(np.deg2rad(fov_deg) / 2.0)
        return cls(fx=focal, fy=focal, cx=width / 2.0, cy=height / 2.0, width=width, height=height)


class Pose(BaseModel):
    """Rigid camera-to-world transform."""

    model_config = ConfigDict(frozen=True)

    rotation: tuple[float, float, float, float] = Field(default=(1.0, 0.0, 0.0, 0.0), description="Unit quaternion (w, x, y, z)")
    translation: tuple[float, float, float] = Field(default=(0.0, 0.0, 0.0), description="Camera center in world units")

    @field_validator("rotation")
    @classmethod
    def _normalize(cls, q: tuple[float, float, float, float]) -> tuple[float, float, float, float]:
        norm = float(np.linalg.norm(q))
        if not np.isfinite(norm) or norm < 1e-12:
            raise ValueError(f"rotation quaternion must be finite and non-zero, got {q}")
        if abs(norm - 1.0) <= 1e-15:
            return tuple(float(v) for v in q)
        return tuple(float(v) / norm for v in q)

    @cached_property
    def matrix(self) -> np.ndarray:
        """3x3 rotation matrix (camera axes as columns, in world coordinates)."""
        w, x, y, z = self.rotation
        return Rotation.from_quat([x, y, z, w]).as_matrix()

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.translation, dtype=np.float64)

    @property
    def forward(self) -> np.ndarray:
        return self.matrix[:, 2]

    def as_rotation(self) -> Rotation:
        w, x, y, z = self.rotation
        return Rotation.from_quat([x, y, z, w])

    def to_matrix(self) -> np.ndarray:
        """4x4 homogeneous camera-to-world matrix."""
        T = np.eye(4)
        T[:3, :3] = self.matrix
        T[:3, 3] = self.center
        return T

    @classmethod
    def from_rotation(cls, rotation: Rotation, translation: Any) -> "Pose":
        x, y, z, w = rotation.as_quat()
        return cls(rotation=(w, x, y, z), translation=tuple(float(v) for v in np.asarray(translation, dtype=np.float64)))

    @classmethod
    def from_matrix(cls, R: np.ndarray, t: Any) -> "Pose":
        return cls.from_rotation(Rotation.from_matrix(R), t)

    def compose(self, other: "Pose") -> "Pose":
        """self ∘ other: apply other first, then self."""
        R = self.matrix @ other.matrix
        t = self.matrix @ other.center + self.center
        return Pose.from_matrix(R, t)

    def inverse(self) -> "Pose":
        R_t = self.matrix.T
        return Pose.from_matrix(R_t, -R_t @ self.center)

    def transform_points(self, points: np.ndarray) -> np.ndarray:
        """Map (N, 3) camera-frame points to world."""
        return points @ self.matrix.T + self.center


class Camera(BaseModel):
    """Intrinsics plus camera-to-world pose; the unit of view identity."""

    model_config = ConfigDict(frozen=True)

    intrinsics: CameraIntrinsics
    pose: Pose = Field(default_factory=Pose)

    @property
    def width(self) -> int:
        return self.intrinsics.width

    @property
    def height(self) -> int:
        return self.intrinsics.height

    @property
    def center(self) -> np.ndarray:
        return self.pose.center

    def with_pose(self, pose: Pose) -> "Camera":
        return Camera(intrinsics=self.intrinsics, pose=pose)

    def to_record(self) -> dict[str, float | int]:
        """Flat JSON record {fx, fy, cx, cy, w, h, qw, qx, qy, qz, tx, ty, tz}."""
        k = self.intrinsics
        qw, qx, qy, qz = self.pose.rotation
        tx, ty, tz = self.pose.translation
        return {
            "fx": k.fx,
            "fy": k.fy,
            "cx": k.cx,
            "cy": k.cy,
            "w": k.width,
            "h": k.height,
            "qw": qw,
            "qx": qx,
            "qy": qy,
            "qz": qz,
            "tx": tx,
            "ty": ty,
            "tz": tz,
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "Camera":
        intrinsics = CameraIntrinsics(
            fx=record["fx"],
            fy=record["fy"],
            cx=record["cx"],
            cy=record["cy"],
            width=record["w"],
            height=record["h"],
        )
        pose = Pose(
            rotation=(record["qw"], record["qx"], record["qy"], record["qz"]),
            translation=(record["tx"], record["ty"], record["tz"]),
        )
        return cls(intrinsics=intrinsics, pose=pose)
