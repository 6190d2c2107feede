from src.models.camera_types import Camera, CameraIntrinsics, Pose
from src.models.config_types import (
    CurationConfig,
    ExperimentsConfig,
    ExtractorConfig,
    FixerConfig,
    LossWeights,
    MetricsConfig,
    PipelineConfig,
    RunConfig,
    SceneFamily,
    SceneFitConfig,
    SceneSpec,
    TrajectoryStyle,
)
from src.models.record_types import (
    AggregateMetrics,
    CurationStrategy,
    DatasetManifest,
    LatencyRecord,
    MetricsReport,
    RoundLog,
    SampleRecord,
    ViewMetrics,
)

__all__ = [
    "Camera",
    "CameraIntrinsics",
    "Pose",
    "CurationConfig",
    "ExperimentsConfig",
    "ExtractorConfig",
    "FixerConfig",
    "LossWeights",
    "MetricsConfig",
    "PipelineConfig",
    "RunConfig",
    "SceneFamily",
    "SceneFitConfig",
    "SceneSpec",
    "TrajectoryStyle",
    "AggregateMetrics",
    "CurationStrategy",
    "DatasetManifest",
    "LatencyRecord",
    "MetricsReport",
    "RoundLog",
    "SampleRecord",
    "ViewMetrics",
]
