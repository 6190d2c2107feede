"""
Pydantic models for run configuration.

Every model forbids unknown keys so a typo in a TOML file fails loudly instead of
silently falling back to a default.
"""

import math
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

TrajectoryStyle = Literal["orbit", "corridor", "driving-line"]
SceneFamily = Literal["radiance_field", "gaussian_cloud"]

DEFAULT_PALETTE = [
    (0.85, 0.25, 0.20),
    (0.20, 0.55, 0.85),
    (0.95, 0.80, 0.25),
    (0.30, 0.70, 0.35),
    (0.65, 0.35, 0.75),
    (0.90, 0.55, 0.20),
]


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SceneSpec(StrictModel):
    """Procedural scene plus the two camera trajectories rendered from it."""

    seed: int = Field(ge=0, description="Scene seed; identical seed and spec give identical scenes")
    n_primitives: int = Field(default=6, ge=1, description="Number of boxes and spheres")
    palette: list[tuple[float, float, float]] = Field(default_factory=lambda: list(DEFAULT_PALETTE), min_length=1)
    extent: tuple[float, float, float] = Field(default=(3.0, 3.0, 1.5), description="Half-extent x, y and height of the content box")
    trajectory_style: TrajectoryStyle = Field(default="orbit")
    n_frames: int = Field(default=20, ge=2, description="Cameras per trajectory")
    width: int = Field(default=32, gt=0)
    height: int = Field(default=32, gt=0)
    fov_deg: float = Field(default=60.0, gt=0, lt=180)
    orbit_radius: float = Field(default=7.0, gt=0)
    camera_height: float = Field(default=2.0, description="Camera height above the ground")
    spacing: float = Field(default=0.5, gt=0, description="Baseline between consecutive driving-line/corridor cameras")
    deviation: float = Field(default=1.0, ge=0, description="Offset of the target trajectory from the reference one")
    supersample: int = Field(default=2, ge=1, description="Ground-truth subsamples per pixel axis")

    @field_validator("palette")
    @classmethod
    def _palette_in_range(cls, palette):
        for color in palette:
            if not all(0.0 <= c <= 1.0 for c in color):
                raise ValueError(f"palette colors must lie in [0, 1], got {color}")
        return palette

    @property
    def scene_id(self) -> str:
        return f"{self.trajectory_style}-{self.seed:05d}"


class SceneFitConfig(StrictModel):
    """How curation and reconstruction fit a representation to images."""

    grid_resolution: int = Field(default=64, ge=2)
    n_iters: int = Field(default=300, ge=0, description="Full per-scene iteration budget")
    lr_field: float = Field(default=1e-2, gt=0)
    lr_gaussians: float = Field(default=5e-3, gt=0)
    rays_per_step: int = Field(default=4096, gt=0)
    gaussian_scale: float = Field(default=0.08, gt=0)
    gaussian_opacity: float = Field(default=0.6, gt=0, lt=1)
    gaussian_points_per_view: int = Field(default=200, gt=0, description="Depth samples per view used to seed particles")
    background: float = Field(default=0.5, ge=0, le=1)

    def lr_for(self, family: SceneFamily) -> float:
        return self.lr_field if family == "radiance_field" else self.lr_gaussians


class CurationConfig(StrictModel):
    """Paired-data curation: strategy mix and per-strategy knobs."""

    ratios: dict[str, float] = Field(
        default_factory=lambda: {
            "sparse_reconstruction": 0.25,
            "cycle_reconstruction": 0.25,
            "cross_reference": 0.25,
            "model_underfitting": 0.25,
        },
        description="Share of the pair budget per strategy",
    )
    pair_budget: int = Field(default=2000, gt=0)
    families: list[SceneFamily] = Field(default_factory=lambda: ["radiance_field", "gaussian_cloud"], min_length=1)
    holdout_stride: int = Field(default=2, ge=2)
    cycle_shift: float = Field(default=2.0, ge=0, description="Lateral shift (world units) for cycle reconstruction")
    underfit_fraction: float = Field(default=0.5, ge=0, le=1)
    rig_cameras: int = Field(default=3, ge=2)
    rig_separation_deg: float = Field(default=40.0, gt=0)
    reference_views: int = Field(default=1, ge=1, le=3)
    val_fraction: float = Field(default=0.2, ge=0, lt=1)

    @field_validator("ratios")
    @classmethod
    def _ratios_valid(cls, ratios: dict[str, float]) -> dict[str, float]:
        known = {"sparse_reconstruction", "cycle_reconstruction", "cross_reference", "model_underfitting"}
        unknown = set(ratios) - known
        if unknown:
            raise ValueError(f"unknown curation strategies: {sorted(unknown)}")
        if any(v < 0 for v in ratios.values()):
            raise ValueError("ratios must be non-negative")
        if not math.isclose(sum(ratios.values()), 1.0, abs_tol=1e-9):
            raise ValueError(f"ratios must sum to 1, got {sum(ratios.values())}")
        return ratios


class LossWeights(StrictModel):
    """Weights of the fixer's training loss terms."""

    recon: float = Field(default=1.0, ge=0)
    perceptual: float = Field(default=1.0, ge=0)
    gram: float = Field(default=0.5, ge=0)


class ExtractorConfig(StrictModel):
    """Feature extractor shared by the perceptual losses and metrics."""

    seed: int = Field(default=0, ge=0)
    widths: tuple[int, ...] = Field(default=(16, 32, 64, 128), min_length=1)
    layer_weights: list[float] | None = Field(default=None, description="alpha_l per stage (default all 1)")
    gram_weights: list[float] | None = Field(default=None, description="beta_l per stage (default all 1)")
    pretrained_path: str | None = Field(default=None, description="Container with pretrained stage weights")


class FixerConfig(StrictModel):
    """Denoiser architecture and training hyperparameters."""

    widths: tuple[int, ...] = Field(default=(32, 64, 128), min_length=2)
    attention_levels: int = Field(default=2, ge=0, description="Reference-mixing attention at this many coarsest scales")
    heads: int = Field(default=4, ge=1)
    codec: Literal["identity", "autoencoder"] = "identity"
    codec_steps: int = Field(default=500, ge=0)
    schedule: Literal["cosine", "linear"] = "cosine"
    tau: int = Field(default=200, ge=0, le=1000, description="Noise level for single-step fixing")
    reference_views: int = Field(default=1, ge=0, le=3)
    noise_references: bool = False
    include_reference_loss: bool = False
    batch_size: int = Field(default=4, gt=0)
    lr: float = Field(default=1e-4, gt=0)
    steps: int = Field(default=20000, ge=0)
    val_every: int = Field(default=200, gt=0)
    seed: int = Field(default=0, ge=0, description="Parameter init seed")
    noise_seed: int = Field(default=0, ge=0, description="Seed of the fixed noise field used at inference")

    @model_validator(mode="after")
    def _attention_fits(self) -> "FixerConfig":
        if self.attention_levels > len(self.widths):
            raise ValueError(f"attention_levels={self.attention_levels} exceeds the {len(self.widths)} U-Net scales")
        for width in self.widths:
            if width % self.heads:
                raise ValueError(f"width {width} not divisible by {self.heads} heads")
        return self


class PipelineConfig(StrictModel):
    """Progressive 3D update schedule."""

    n_iter: int = Field(default=150, gt=0, description="Optimization iterations per refinement round")
    delta_pose: float = Field(default=0.25, gt=0, le=1, description="Fraction of the remaining pose distance covered per round")
    rounds: int = Field(default=4, ge=0)
    pseudo_view_weight: float = Field(default=0.5, gt=0, le=1)
    rays_per_step: int = Field(default=4096, gt=0)
    early_stop: bool = False
    plateau_tolerance: float = Field(default=1e-3, gt=0)
    snap_tolerance: float = Field(default=1e-6, ge=0, description="Remaining pose distance treated as arrived")


class MetricsConfig(StrictModel):
    """Evaluation settings echoed into every report."""

    tsed_thresholds: list[float] = Field(default_factory=lambda: [2.0, 4.0, 8.0], min_length=1)
    tsed_pairs: Literal["consecutive", "all"] = "consecutive"
    correspondences: Literal["reprojection", "patch-match"] = "patch-match"
    mask_policy: Literal["visibility", "none"] = "visibility"
    mask_threshold: float = Field(default=0.5, ge=0, le=1)
    max_value: float = Field(default=1.0, gt=0)
    heatmaps: bool = True


class ExperimentsConfig(StrictModel):
    """Fixer-side ablations that retrain the denoiser."""

    taus: list[int] = Field(default_factory=lambda: [10, 200, 1000], min_length=1)
    steps: int | None = Field(default=None, ge=0, description="Training steps per variant (default: fixer.steps)")


class RunConfig(StrictModel):
    """Everything a run depends on besides the code version."""

    schema_version: Literal[1] = 1
    name: str = "viewfix"
    seed: int = Field(default=0, ge=0, description="Root seed; module seeds are derived from it")
    output_root: str = Field(default="runs")
    curation_scenes: list[SceneSpec] = Field(min_length=1)
    benchmark_scenes: list[SceneSpec] = Field(min_length=1)
    scene_fit: SceneFitConfig = Field(default_factory=SceneFitConfig)
    benchmark_family: SceneFamily = "radiance_field"
    curation: CurationConfig = Field(default_factory=CurationConfig)
    extractor: ExtractorConfig = Field(default_factory=ExtractorConfig)
    losses: LossWeights = Field(default_factory=LossWeights)
    fixer: FixerConfig = Field(default_factory=FixerConfig)
    pipeline: PipelineConfig = Field(default_factory=PipelineConfig)
    metrics: MetricsConfig = Field(default_factory=MetricsConfig)
    experiments: ExperimentsConfig = Field(default_factory=ExperimentsConfig)

    @model_validator(mode="after")
    def _disjoint_scene_sets(self) -> "RunConfig":
        curated = {s.scene_id for s in self.curation_scenes}
        overlap = curated & {s.scene_id for s in self.benchmark_scenes}
        if overlap:
            raise ValueError(f"benchmark scenes must not be curated for training: {sorted(overlap)}")
        if len(curated) != len(self.curation_scenes):
            raise ValueError("curation_scenes contains duplicate scene ids")
        return self
