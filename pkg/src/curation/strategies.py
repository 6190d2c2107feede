"""
The four curation strategies that turn a ground-truth scene into degraded/clean pairs.

Every strategy fits a representation of one family on some ground-truth views and
renders it where it was not (or not well) supervised; clean images always come from
the exact renderer at the same camera.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import torch

from src.curation.procedural import AnalyticScene, render_ground_truth
from src.curation.trajectories import shifted_trajectory
from src.errors import CurationError, DomainError
from src.geometry import rotation_angle, unproject
from src.models.camera_types import Camera
from src.models.config_types import SceneFamily, SceneFitConfig
from src.models.record_types import CurationStrategy
from src.scene import (
    GaussianCloud,
    RadianceFieldGrid,
    RenderOutput,
    SceneRepresentation,
    TrainingView,
    gaussians_from_points,
    optimize_scene,
    render,
)

logger = logging.getLogger(__name__)

TRIVIAL_DIFFERENCE = 1e-4
CYCLE_SHIFT_RANGE = (1.0, 6.0)
UNDERFIT_RANGE = (0.25, 0.75)


@dataclass
class PairedSample:
    """Degraded render, exact clean image and clean reference views at one camera."""

    degraded: torch.Tensor
    clean: torch.Tensor
    camera: Camera
    strategy: CurationStrategy
    scene_id: str
    family: SceneFamily
    frame_index: int
    seed: int
    references: list[tuple[Camera, torch.Tensor]] = field(default_factory=list)

    @property
    def is_trivial(self) -> bool:
        return float((self.degraded - self.clean).abs().mean()) <= TRIVIAL_DIFFERENCE


def nearest_cameras(query: Camera, candidates: list[Camera], k: int = 1, exclude: set[int] | None = None) -> list[int]:
    """Indices of the k closest candidates by camera center, ties broken by smaller rotation angle."""
    exclude = exclude or set()
    keyed = [
        (float(np.linalg.norm(cam.center - query.center)), rotation_angle(cam.pose, query.pose), i)
        for i, cam in enumerate(candidates)
        if i not in exclude
    ]
    return [i for _, _, i in sorted(keyed)[:k]]


def _seed_points(views: list[TrainingView], renders: list[RenderOutput], per_view: int, rng: np.random.Generator):
    points, colors = [], []
    for view, output in zip(views, renders, strict=True):
        acc = output.accumulation.numpy()
        rows, cols = np.nonzero(acc >= 0.5)
        if len(rows) == 0:
            continue
        pick = rng.choice(len(rows), size=min(per_view, len(rows)), replace=False)
        rows, cols = rows[pick], cols[pick]
        pixels = np.stack([cols + 0.5, rows + 0.5], axis=-1).astype(np.float64)
        depth = output.depth.numpy()[rows, cols].astype(np.float64)
        points.append(unproject(view.camera, pixels, depth))
        colors.append(view.image[:, rows, cols].T.double().numpy())
    if not points:
        return np.zeros((0, 3)), np.zeros((0, 3))
    return np.concatenate(points), np.concatenate(colors)


def fit_representation(
    family: SceneFamily,
    bounds,
    views: list[TrainingView],
    depth_sources: list[RenderOutput],
    config: SceneFitConfig,
    seed: int,
    n_iters: int | None = None,
) -> SceneRepresentation:
    """
    Fit a representation of `family` to the views.

    Gaussian clouds start from particles back-projected through `depth_sources`
    (one render per view carrying depth and accumulation).
    """
    if family == "radiance_field":
        scene: SceneRepresentation = RadianceFieldGrid(bounds, resolution=config.grid_resolution)
    else:
        rng = np.random.default_rng(seed)
        points, colors = _seed_points(views, depth_sources, config.gaussian_points_per_view, rng)
        scene = gaussians_from_points(points, colors, config.gaussian_scale, config.gaussian_opacity) if len(points) else GaussianCloud.empty()
    iters = config.n_iters if n_iters is None else n_iters
    optimize_scene(scene, views, iters, lr=config.lr_for(family), rays_per_step=config.rays_per_step, seed=seed, background=config.background)
    return scene


def _render_image(scene: SceneRepresentation, camera: Camera, background: float) -> torch.Tensor:
    with torch.no_grad():
        return render(scene, camera, background=background).rgb.to(torch.float32).clamp(0.0, 1.0)


def _ground_truth(scene: AnalyticScene, cameras: list[Camera]) -> list[RenderOutput]:
    return [render_ground_truth(scene, camera) for camera in cameras]


def _references(candidates: list[Camera], images: list[torch.Tensor], query: Camera, k: int, exclude: set[int] | None = None):
    return [(candidates[i], images[i]) for i in nearest_cameras(query, candidates, k, exclude)]


def _drop_trivial(samples: list[PairedSample]) -> list[PairedSample]:
    kept = [s for s in samples if not s.is_trivial]
    if len(kept) < len(samples):
        logger.warning(
            "Dropped trivial pairs",
            extra={"dropped": len(samples) - len(kept), "strategy": samples[0].strategy.value, "scene": samples[0].scene_id},
        )
    return kept


def sparse_reconstruction_pairs(
    scene: AnalyticScene,
    trajectory: list[Camera],
    holdout_stride: int,
    family: SceneFamily = "radiance_field",
    config: SceneFitConfig | None = None,
    seed: int = 0,
    reference_views: int = 1,
) -> list[PairedSample]:
    """Fit every `holdout_stride`-th frame, pair renders at the held-out frames with ground truth."""
    if holdout_stride < 2:
        raise DomainError(f"holdout stride must be >= 2, got {holdout_stride}")
    config = config or SceneFitConfig()
    kept = list(range(0, len(trajectory), holdout_stride))
    if len(kept) < 3:
        raise CurationError(f"stride {holdout_stride} keeps {len(kept)} of {len(trajectory)} frames; need at least 3")

    truth = _ground_truth(scene, trajectory)
    kept_cameras = [trajectory[i] for i in kept]
    kept_images = [truth[i].rgb for i in kept]
    views = [TrainingView(cam, img) for cam, img in zip(kept_cameras, kept_images, strict=True)]
    model = fit_representation(family, scene.bounds, views, [truth[i] for i in kept], config, seed)

    samples = []
    for index, camera in enumerate(trajectory):
        if index in kept:
            continue
        samples.append(
            PairedSample(
                degraded=_render_image(model, camera, config.background),
                clean=truth[index].rgb,
                camera=camera,
                strategy=CurationStrategy.SPARSE_RECONSTRUCTION,
                scene_id=scene.scene_id,
                family=family,
                frame_index=index,
                seed=seed,
                references=_references(kept_cameras, kept_images, camera, reference_views),
            )
        )
    return _drop_trivial(samples)


def cycle_reconstruction_pairs(
    scene: AnalyticScene,
    trajectory: list[Camera],
    shift: float,
    family: SceneFamily = "radiance_field",
    config: SceneFitConfig | None = None,
    seed: int = 0,
    reference_views: int = 1,
) -> list[PairedSample]:
    """
    Fit A on the path, render A on a laterally shifted path, fit B on those renders,
    and pair B's renders on the original path with ground truth.
    """
    if not CYCLE_SHIFT_RANGE[0] <= shift <= CYCLE_SHIFT_RANGE[1]:
        logger.warning("Cycle shift outside the usual range", extra={"shift": shift, "range": list(CYCLE_SHIFT_RANGE)})
    config = config or SceneFitConfig()
    truth = _ground_truth(scene, trajectory)
    images = [t.rgb for t in truth]
    model_a = fit_representation(family, scene.bounds, [TrainingView(c, i) for c, i in zip(trajectory, images, strict=True)], truth, config, seed)

    shifted = shifted_trajectory(trajectory, shift)
    with torch.no_grad():
        shifted_renders = [render(model_a, camera, background=config.background).detach() for camera in shifted]
    shifted_views = [TrainingView(c, r.rgb.to(torch.float32).clamp(0.0, 1.0)) for c, r in zip(shifted, shifted_renders, strict=True)]
    model_b = fit_representation(family, scene.bounds, shifted_views, shifted_renders, config, seed + 1)

    samples = []
    for index, camera in enumerate(trajectory):
        samples.append(
            PairedSample(
                degraded=_render_image(model_b, camera, config.background),
                clean=images[index],
                camera=camera,
                strategy=CurationStrategy.CYCLE_RECONSTRUCTION,
                scene_id=scene.scene_id,
                family=family,
                frame_index=index,
                seed=seed,
                references=_references(trajectory, images, camera, reference_views, exclude={index}),
            )
        )
    return _drop_trivial(samples)


def underfit_pairs(
    scene: AnalyticScene,
    trajectory: list[Camera],
    fraction: float,
    family: SceneFamily = "radiance_field",
    config: SceneFitConfig | None = None,
    seed: int = 0,
    reference_views: int = 1,
) -> list[PairedSample]:
    """Fit with `fraction` of the full iteration budget and pair renders on the training path with ground truth."""
    if not 0.0 <= fraction <= 1.0:
        raise DomainError(f"underfit fraction must be in [0, 1], got {fraction}")
    if not UNDERFIT_RANGE[0] <= fraction <= UNDERFIT_RANGE[1]:
        logger.warning("Underfit fraction outside the usual range", extra={"fraction": fraction, "range": list(UNDERFIT_RANGE)})
    config = config or SceneFitConfig()
    truth = _ground_truth(scene, trajectory)
    images = [t.rgb for t in truth]
    views = [TrainingView(c, i) for c, i in zip(trajectory, images, strict=True)]
    model = fit_representation(family, scene.bounds, views, truth, config, seed, n_iters=int(round(fraction * config.n_iters)))

    samples = []
    for index, camera in enumerate(trajectory):
        samples.append(
            PairedSample(
                degraded=_render_image(model, camera, config.background),
                clean=images[index],
                camera=camera,
                strategy=CurationStrategy.MODEL_UNDERFITTING,
                scene_id=scene.scene_id,
                family=family,
                frame_index=index,
                seed=seed,
                references=_references(trajectory, images, camera, reference_views, exclude={index}),
            )
        )
    return _drop_trivial(samples)


def cross_reference_pairs(
    scene: AnalyticScene,
    multi_rig: list[list[Camera]],
    family: SceneFamily = "radiance_field",
    config: SceneFitConfig | None = None,
    seed: int = 0,
    reference_views: int = 1,
) -> list[PairedSample]:
    """Fit on the center rig camera only; pair side-camera renders with ground truth."""
    if len(multi_rig) < 2:
        raise CurationError(f"cross reference needs at least 2 rig trajectories, got {len(multi_rig)}")
    if len({len(t) for t in multi_rig}) != 1:
        raise CurationError("rig trajectories must have the same number of frames")
    config = config or SceneFitConfig()
    center_index = len(multi_rig) // 2
    center = multi_rig[center_index]
    center_truth = _ground_truth(scene, center)
    center_images = [t.rgb for t in center_truth]
    views = [TrainingView(c, i) for c, i in zip(center, center_images, strict=True)]
    model = fit_representation(family, scene.bounds, views, center_truth, config, seed)

    samples = []
    for rig_index, trajectory in enumerate(multi_rig):
        if rig_index == center_index:
            continue
        for index, camera in enumerate(trajectory):
            refs = [(center[index], center_images[index])]
            if reference_views > 1:
                refs += _references(center, center_images, camera, reference_views - 1, exclude={index})
            samples.append(
                PairedSample(
                    degraded=_render_image(model, camera, config.background),
                    clean=render_ground_truth(scene, camera).rgb,
                    camera=camera,
                    strategy=CurationStrategy.CROSS_REFERENCE,
                    scene_id=scene.scene_id,
                    family=family,
                    frame_index=index,
                    seed=seed,
                    references=refs,
                )
            )
    return _drop_trivial(samples)
