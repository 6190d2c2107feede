"""
Trajectory files: a JSON array of flat camera records.
"""

import json
from pathlib import Path

from src.models.camera_types import Camera


def save_trajectory(path: str | Path, cameras: list[Camera]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump([camera.to_record() for camera in cameras], f, indent=2)
    return path


def load_trajectory(path: str | Path) -> list[Camera]:
    with open(path) as f:
        return [Camera.from_record(record) for record in json.load(f)]
