from pathlib import Path

import hypothesis
import numpy as np
import pytest
import torch

from src.curation import build_dataset
from src.geometry import look_at
from src.models.camera_types import Camera, CameraIntrinsics
from src.models.config_types import FixerConfig, RunConfig, SceneSpec
from src.models.record_types import DatasetManifest

hypothesis.settings.register_profile("fast", max_examples=20, deadline=None)
hypothesis.settings.load_profile("fast")

torch.set_num_threads(1)


@pytest.fixture
def intrinsics() -> CameraIntrinsics:
    return CameraIntrinsics.from_fov(16, 16, 60.0)


@pytest.fixture
def camera(intrinsics) -> Camera:
    return Camera(intrinsics=intrinsics, pose=look_at((4.0, 0.0, 1.0), (0.0, 0.0, 0.5)))


@pytest.fixture
def camera_pair(intrinsics) -> tuple[Camera, Camera]:
    a = Camera(intrinsics=intrinsics, pose=look_at((4.0, 0.0, 1.0), (0.0, 0.0, 0.5)))
    b = Camera(intrinsics=intrinsics, pose=look_at((3.5, 1.5, 1.2), (0.0, 0.0, 0.5)))
    return a, b


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_fixer_config() -> FixerConfig:
    return FixerConfig(widths=(8, 16), attention_levels=1, heads=2, steps=4, val_every=2, batch_size=2, lr=1e-3)


def make_tiny_config(output_root) -> RunConfig:
    """Smallest end-to-end config: 16x16 images, a handful of pairs, a few steps everywhere."""
    small = {"width": 16, "height": 16, "n_frames": 6, "n_primitives": 3, "supersample": 1}
    return RunConfig(
        name="tiny",
        output_root=str(output_root),
        curation_scenes=[SceneSpec(seed=1, **small), SceneSpec(seed=2, trajectory_style="driving-line", **small)],
        benchmark_scenes=[SceneSpec(seed=101, **small)],
        scene_fit={"grid_resolution": 8, "n_iters": 5, "rays_per_step": 128, "gaussian_points_per_view": 20},
        curation={"pair_budget": 8, "val_fraction": 0.5},
        extractor={"widths": (4, 8)},
        fixer={"widths": (8, 16), "attention_levels": 1, "heads": 2, "steps": 4, "val_every": 2, "batch_size": 2},
        pipeline={"n_iter": 3, "rounds": 2, "rays_per_step": 128},
        metrics={"tsed_thresholds": [2.0, 4.0], "heatmaps": False, "mask_policy": "none"},
        experiments={"taus": [10, 1000], "steps": 2},
    )


@pytest.fixture
def tiny_run_config(tmp_path) -> RunConfig:
    return make_tiny_config(tmp_path / "runs")


@pytest.fixture(scope="session")
def curated(tmp_path_factory) -> tuple[RunConfig, Path, DatasetManifest]:
    """One tiny curated dataset shared by the fixer and pipeline tests."""
    config = make_tiny_config(tmp_path_factory.mktemp("runs"))
    root = tmp_path_factory.mktemp("dataset")
    manifest = build_dataset(config.curation_scenes, root, config.curation, config.scene_fit, seed=7)
    return config, root, manifest
