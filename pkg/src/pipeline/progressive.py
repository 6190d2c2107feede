"""
Progressive 3D updates: walk training cameras toward target poses, fix their renders,
and distill the fixed images back into the scene.
"""

import logging
import time
from dataclasses import dataclass, field

import torch
from tqdm import tqdm

from src.curation.strategies import nearest_cameras
from src.errors import PipelineError
from src.fixer import DenoiserModel, FixerInput, fix_image
from src.geometry import interpolate_pose, pose_distance
from src.models.camera_types import Camera
from src.models.config_types import PipelineConfig
from src.models.record_types import RoundLog
from src.pipeline.run_dir import RoundWriter
from src.pipeline.state import PseudoEntry, TrainingSetState
from src.scene import DEFAULT_BACKGROUND, SceneRepresentation, optimize_scene, render

logger = logging.getLogger(__name__)


@dataclass
class UpdateResult:
    scene: SceneRepresentation
    state: TrainingSetState
    logs: list[RoundLog] = field(default_factory=list)


def nearest_training_camera(target: Camera, cameras: list[Camera]) -> int:
    """Index of the training camera with the smallest pose distance to `target`."""
    distances = [pose_distance(c.pose, target.pose) for c in cameras]
    return min(range(len(cameras)), key=lambda i: (distances[i], i))


def step_toward(current: Camera, target: Camera, delta_pose: float, snap: bool, snap_tolerance: float = 0.0) -> Camera:
    """Move `current` a fraction `delta_pose` of the way to `target`; snap exactly when asked or when close enough."""
    if snap:
        return target
    moved = interpolate_pose(current.pose, target.pose, delta_pose)
    if pose_distance(moved, target.pose) <= snap_tolerance:
        return target
    return Camera(intrinsics=target.intrinsics, pose=moved)


def plateau_rounds(logs: list[RoundLog], tolerance: float) -> int:
    """Trailing run of at-target rounds whose train loss improved by less than `tolerance`, relative."""
    plateau = 0
    for previous, log in zip(logs, logs[1:], strict=False):
        if log.mean_target_distance != 0.0:
            continue
        improvement = (previous.final_train_loss - log.final_train_loss) / max(abs(previous.final_train_loss), 1e-12)
        plateau = plateau + 1 if improvement < tolerance else 0
    return plateau


def fix_view(
    scene: SceneRepresentation,
    camera: Camera,
    fixer: DenoiserModel,
    state: TrainingSetState,
    background: float = DEFAULT_BACKGROUND,
) -> torch.Tensor:
    """Render `camera` and fix it against its nearest original reference views."""
    with torch.no_grad():
        raw = render(scene, camera, background=background).rgb.to(torch.float32).clamp(0.0, 1.0)
    ref_cameras = [e.camera for e in state.references]
    k = max(fixer.config.reference_views, 0)
    references = [state.references[i].image for i in nearest_cameras(camera, ref_cameras, k)] if k else []
    fixed = fix_image(fixer, FixerInput(novel=raw, references=references, tau=fixer.config.tau))
    if fixed.shape != raw.shape:
        raise PipelineError(f"fixer returned {tuple(fixed.shape)} for a {tuple(raw.shape)} render")
    return fixed


def progressive_update(
    scene: SceneRepresentation,
    reference_views: list[tuple[Camera, torch.Tensor]],
    targets: list[Camera],
    fixer: DenoiserModel,
    config: PipelineConfig | None = None,
    seed: int = 0,
    background: float = DEFAULT_BACKGROUND,
    writer: RoundWriter | None = None,
    progress: bool = False,
) -> UpdateResult:
    """
    Each round perturbs, for every target, its nearest current training camera toward
    it by `delta_pose`, renders and fixes that view, appends it as a pseudo view and
    optimizes the scene for `n_iter` iterations. The last round snaps to the targets.

    With a `writer`, every finished round is persisted and a rerun resumes after the
    latest complete one.
    """
    config = config or PipelineConfig()
    if not targets:
        raise PipelineError("progressive update needs at least one target camera")
    state = TrainingSetState.from_views(reference_views)
    logs: list[RoundLog] = []
    start = 0
    if writer is not None:
        start, restored, logs = writer.resume(state)
        if restored is not None:
            with torch.no_grad():
                for mine, stored in zip(scene.parameters(), restored.parameters(), strict=True):
                    mine.copy_(stored.to(mine.dtype))

    if config.early_stop and plateau_rounds(logs, config.plateau_tolerance) >= 2:
        return UpdateResult(scene=scene, state=state, logs=logs)

    for round_index in tqdm(range(start + 1, config.rounds + 1), desc="progressive update", disable=not progress):
        last_round = round_index == config.rounds
        cameras = state.cameras
        entries = []
        fix_seconds = 0.0
        for target_index, target in enumerate(targets):
            nearest = cameras[nearest_training_camera(target, cameras)]
            camera = step_toward(nearest, target, config.delta_pose, last_round, config.snap_tolerance)
            started = time.perf_counter()
            image = fix_view(scene, camera, fixer, state, background)
            fix_seconds += time.perf_counter() - started
            entries.append(PseudoEntry(camera, image, config.pseudo_view_weight, round_index, target_index))
        state.append(entries)
        state.check_invariants(round_index, len(targets))

        fit = optimize_scene(scene, state.views(), config.n_iter, rays_per_step=config.rays_per_step, seed=seed + round_index, background=background)
        distances = [pose_distance(e.camera.pose, targets[e.target_index].pose) for e in entries]
        log = RoundLog(
            round=round_index,
            pseudo_views_added=len(entries),
            training_set_size=len(state),
            final_train_loss=fit.losses[-1] if fit.losses else 0.0,
            mean_target_distance=sum(distances) / len(distances),
            fix_latency_ms=1000.0 * fix_seconds / len(entries),
        )
        logs.append(log)
        if writer is not None:
            writer.write_round(round_index, scene, entries, log)
        logger.info("Round done", extra={"round": round_index, "size": len(state), "loss": log.final_train_loss})

        if config.early_stop and plateau_rounds(logs, config.plateau_tolerance) >= 2:
            logger.info("Early stop", extra={"round": round_index})
            break

    return UpdateResult(scene=scene, state=state, logs=logs)


def single_shot_update(
    scene: SceneRepresentation,
    reference_views: list[tuple[Camera, torch.Tensor]],
    targets: list[Camera],
    fixer: DenoiserModel,
    config: PipelineConfig | None = None,
    seed: int = 0,
    background: float = DEFAULT_BACKGROUND,
) -> UpdateResult:
    """Fix every target render once and distill them with the progressive run's total iteration budget."""
    config = config or PipelineConfig()
    state = TrainingSetState.from_views(reference_views)
    entries = [
        PseudoEntry(target, fix_view(scene, target, fixer, state, background), config.pseudo_view_weight, 1, i)
        for i, target in enumerate(targets)
    ]
    state.append(entries)
    budget = config.n_iter * max(config.rounds, 1)
    fit = optimize_scene(scene, state.views(), budget, rays_per_step=config.rays_per_step, seed=seed + 1, background=background)
    log = RoundLog(
        round=1,
        pseudo_views_added=len(entries),
        training_set_size=len(state),
        final_train_loss=fit.losses[-1] if fit.losses else 0.0,
        mean_target_distance=0.0,
        fix_latency_ms=0.0,
    )
    return UpdateResult(scene=scene, state=state, logs=[log])
