from src.curation.dataset import (
    MANIFEST_NAME,
    PairedDataset,
    assign_splits,
    build_dataset,
    load_manifest,
    strategy_budgets,
)
from src.curation.procedural import AnalyticScene, Box, Sphere, cast_rays, generate_scene, render_ground_truth
from src.curation.strategies import (
    PairedSample,
    cross_reference_pairs,
    cycle_reconstruction_pairs,
    fit_representation,
    nearest_cameras,
    sparse_reconstruction_pairs,
    underfit_pairs,
)
from src.curation.trajectories import line_trajectory, make_camera_rig, make_trajectories, orbit_trajectory, shifted_trajectory

__all__ = [
    "MANIFEST_NAME",
    "PairedDataset",
    "assign_splits",
    "build_dataset",
    "load_manifest",
    "strategy_budgets",
    "AnalyticScene",
    "Box",
    "Sphere",
    "cast_rays",
    "generate_scene",
    "render_ground_truth",
    "PairedSample",
    "cross_reference_pairs",
    "cycle_reconstruction_pairs",
    "fit_representation",
    "nearest_cameras",
    "sparse_reconstruction_pairs",
    "underfit_pairs",
    "line_trajectory",
    "make_camera_rig",
    "make_trajectories",
    "orbit_trajectory",
    "shifted_trajectory",
]
