from src.scene.base import DEFAULT_BACKGROUND, RayBundle, RenderOutput, SceneRepresentation, render
from src.scene.checkpoint import load_scene, save_scene
from src.scene.compositing import composite, compositing_weights, field_alpha
from src.scene.field import RadianceFieldGrid, voxelize_gaussians
from src.scene.gaussians import GaussianCloud, GaussianParticle, gaussian_alpha, gaussians_from_points
from src.scene.optimize import FitResult, TrainingView, optimize_scene, photometric_loss

__all__ = [
    "DEFAULT_BACKGROUND",
    "RayBundle",
    "RenderOutput",
    "SceneRepresentation",
    "render",
    "load_scene",
    "save_scene",
    "composite",
    "compositing_weights",
    "field_alpha",
    "RadianceFieldGrid",
    "voxelize_gaussians",
    "GaussianCloud",
    "GaussianParticle",
    "gaussian_alpha",
    "gaussians_from_points",
    "FitResult",
    "TrainingView",
    "optimize_scene",
    "photometric_loss",
]
