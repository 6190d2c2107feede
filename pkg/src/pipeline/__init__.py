from src.pipeline.ablation import (
    ABLATION_ROWS,
    AblationResult,
    BenchmarkCase,
    ablation_row,
    evaluate_case,
    fit_baseline,
    make_case,
    render_targets,
    run_ablation,
    write_ablation_csv,
)
from src.pipeline.enhance import EnhanceResult, post_render_enhance
from src.pipeline.progressive import (
    UpdateResult,
    fix_view,
    nearest_training_camera,
    plateau_rounds,
    progressive_update,
    single_shot_update,
    step_toward,
)
from src.pipeline.run_dir import COMPLETE_MARKER, RoundWriter
from src.pipeline.state import PseudoEntry, ReferenceEntry, TrainingSetState, camera_key

__all__ = [
    "ABLATION_ROWS",
    "AblationResult",
    "BenchmarkCase",
    "ablation_row",
    "evaluate_case",
    "fit_baseline",
    "make_case",
    "render_targets",
    "run_ablation",
    "write_ablation_csv",
    "EnhanceResult",
    "post_render_enhance",
    "UpdateResult",
    "fix_view",
    "nearest_training_camera",
    "plateau_rounds",
    "progressive_update",
    "single_shot_update",
    "step_toward",
    "COMPLETE_MARKER",
    "RoundWriter",
    "PseudoEntry",
    "ReferenceEntry",
    "TrainingSetState",
    "camera_key",
]
