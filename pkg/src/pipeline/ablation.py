"""
The 3D-update ablation: baseline reconstruction against (a) fixer at render time,
(b) single-shot distillation, (c) progressive distillation and (d) progressive
distillation plus post-render enhancement.
"""

import copy
import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from src.curation import fit_representation, generate_scene, nearest_cameras, render_ground_truth
from src.curation.procedural import AnalyticScene
from src.fixer import DenoiserModel, FixerInput, fix_image
from src.losses import FeatureExtractor
from src.metrics import PatchMatchCorrespondences, ReprojectionCorrespondences, TsedFrame, evaluate_views, visibility_mask
from src.models.camera_types import Camera
from src.models.config_types import MetricsConfig, RunConfig, SceneSpec
from src.models.record_types import MetricsReport
from src.pipeline.enhance import post_render_enhance
from src.pipeline.progressive import progressive_update, single_shot_update
from src.scene import RenderOutput, SceneRepresentation, TrainingView, render
from src.seeds import derive_seed

logger = logging.getLogger(__name__)

ABLATION_ROWS = ["baseline", "(a)", "(b)", "(c)", "(d)"]
ROW_DESCRIPTIONS = {
    "baseline": "reconstruction only",
    "(a)": "fixer at render time",
    "(b)": "single-shot distillation",
    "(c)": "progressive distillation",
    "(d)": "progressive + post-render",
}


@dataclass
class BenchmarkCase:
    """One benchmark scene: ground truth, reference views and target cameras with their exact renders."""

    spec: SceneSpec
    scene: AnalyticScene
    references: list[tuple[Camera, torch.Tensor]]
    reference_truth: list[RenderOutput]
    targets: list[Camera]
    target_truth: list[RenderOutput]

    @property
    def scene_id(self) -> str:
        return self.spec.scene_id

    def reference_images_for(self, camera: Camera, k: int) -> list[torch.Tensor]:
        cameras = [c for c, _ in self.references]
        return [self.references[i][1] for i in nearest_cameras(camera, cameras, k)] if k > 0 else []


def make_case(spec: SceneSpec) -> BenchmarkCase:
    scene, reference, target = generate_scene(spec)
    reference_truth = [render_ground_truth(scene, c) for c in reference]
    return BenchmarkCase(
        spec=spec,
        scene=scene,
        references=[(c, t.rgb) for c, t in zip(reference, reference_truth, strict=True)],
        reference_truth=reference_truth,
        targets=target,
        target_truth=[render_ground_truth(scene, c) for c in target],
    )


def fit_baseline(case: BenchmarkCase, config: RunConfig, seed: int) -> SceneRepresentation:
    views = [TrainingView(c, img) for c, img in case.references]
    return fit_representation(config.benchmark_family, case.scene.bounds, views, case.reference_truth, config.scene_fit, seed)


def render_targets(scene: SceneRepresentation, targets: list[Camera], background: float) -> list[torch.Tensor]:
    with torch.no_grad():
        return [render(scene, c, background=background).rgb.to(torch.float32).clamp(0.0, 1.0) for c in targets]


def evaluate_case(
    case: BenchmarkCase,
    predictions: list[torch.Tensor],
    masks: list[torch.Tensor] | None,
    extractor: FeatureExtractor,
    metrics: MetricsConfig,
    provenance: dict | None = None,
) -> MetricsReport:
    """Metrics of predicted target views against ground truth, TSED over the predicted sequence."""
    frames = [
        TsedFrame(camera=c, image=img, depth=t.depth.numpy().astype(np.float64), valid=(t.accumulation.numpy() >= 0.5))
        for c, img, t in zip(case.targets, predictions, case.target_truth, strict=True)
    ]
    provider = PatchMatchCorrespondences() if metrics.correspondences == "patch-match" else ReprojectionCorrespondences()
    return evaluate_views(
        predictions,
        [t.rgb for t in case.target_truth],
        extractor,
        metrics,
        view_ids=[f"{case.scene_id}/{i:03d}" for i in range(len(predictions))],
        masks=masks,
        tsed_frames=frames,
        correspondences=provider,
        provenance=provenance,
    )


@dataclass
class AblationResult:
    """rows[scene_id][label] -> MetricsReport, in ABLATION_ROWS order."""

    rows: dict[str, dict[str, MetricsReport]] = field(default_factory=dict)
    latencies_ms: list[float] = field(default_factory=list)

    def table(self) -> list[dict]:
        out = []
        for scene_id, reports in self.rows.items():
            for label in ABLATION_ROWS:
                if label in reports:
                    out.append(ablation_row(scene_id, label, reports[label]))
        return out


def ablation_row(scene_id: str, label: str, report: MetricsReport) -> dict:
    agg = report.aggregates
    row = {
        "scene_id": scene_id,
        "config": label,
        "description": ROW_DESCRIPTIONS[label],
        "psnr": agg.psnr,
        "ssim": agg.ssim,
        "lpips_proxy": agg.perceptual,
        "fid_proxy": agg.fid,
    }
    for threshold, score in agg.tsed.items():
        row[f"tsed@{threshold}"] = score
    return row


def run_ablation(config: RunConfig, fixer: DenoiserModel, extractor: FeatureExtractor, progress: bool = False) -> AblationResult:
    """Evaluate baseline and configurations (a)-(d) on every benchmark scene."""
    background = config.scene_fit.background
    result = AblationResult()
    for spec in config.benchmark_scenes:
        case = make_case(spec)
        seed = derive_seed(config.seed, "benchmark", case.scene_id)
        baseline = fit_baseline(case, config, seed)
        masks = [visibility_mask(baseline, c, config.metrics.mask_threshold) for c in case.targets]
        k = fixer.config.reference_views

        baseline_renders = render_targets(baseline, case.targets, background)
        fixer_only = [
            fix_image(fixer, FixerInput(img, case.reference_images_for(c, k), fixer.config.tau))
            for c, img in zip(case.targets, baseline_renders, strict=True)
        ]

        single = single_shot_update(copy.deepcopy(baseline), case.references, case.targets, fixer, config.pipeline, seed, background)
        progressive = progressive_update(
            copy.deepcopy(baseline), case.references, case.targets, fixer, config.pipeline, seed, background, progress=progress
        )
        progressive_renders = render_targets(progressive.scene, case.targets, background)
        enhanced = [post_render_enhance(progressive.scene, c, fixer, case.reference_images_for(c, k), background) for c in case.targets]
        result.latencies_ms.extend(e.fix_ms for e in enhanced)

        predictions = {
            "baseline": baseline_renders,
            "(a)": fixer_only,
            "(b)": render_targets(single.scene, case.targets, background),
            "(c)": progressive_renders,
            "(d)": [e.image for e in enhanced],
        }
        result.rows[case.scene_id] = {
            label: evaluate_case(case, predictions[label], masks, extractor, config.metrics, {"scene_id": case.scene_id, "config": label})
            for label in ABLATION_ROWS
        }
        logger.info("Ablation scene done", extra={"scene": case.scene_id})
    return result


def write_ablation_csv(path: str | Path, rows: list[dict]) -> Path:
    """One line per (scene, configuration); infinite PSNR is written as "inf"."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = list(dict.fromkeys(key for row in rows for key in row))
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(row.get(k)) for k in columns})
    return path


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)
