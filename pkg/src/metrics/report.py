"""
Evaluation over a set of views and the CSV / JSON / heatmap writers.
"""

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import torch  # noqa: E402

from src.losses.extractor import FeatureExtractor  # noqa: E402
from src.metrics.fid import fid, image_features  # noqa: E402
from src.metrics.image import perceptual_distance, psnr, ssim  # noqa: E402
from src.metrics.tsed import CorrespondenceProvider, TsedFrame, tsed  # noqa: E402
from src.models.config_types import MetricsConfig  # noqa: E402
from src.models.record_types import MetricsReport, ViewMetrics  # noqa: E402

CSV_COLUMNS = ["view_id", "psnr", "ssim", "perceptual", "masked", "mask_fraction"]


def evaluate_views(
    predictions: list[torch.Tensor],
    targets: list[torch.Tensor],
    extractor: FeatureExtractor,
    config: MetricsConfig | None = None,
    view_ids: list[str] | None = None,
    masks: list[torch.Tensor | None] | None = None,
    tsed_frames: list[TsedFrame] | None = None,
    correspondences: CorrespondenceProvider | None = None,
    provenance: dict | None = None,
) -> MetricsReport:
    """Per-view PSNR/SSIM/LPIPS-proxy rows plus FID over the sets and TSED over `tsed_frames`."""
    config = config or MetricsConfig()
    if len(predictions) != len(targets):
        raise ValueError(f"{len(predictions)} predictions for {len(targets)} targets")
    view_ids = view_ids or [f"{i:03d}" for i in range(len(predictions))]
    masks = masks or [None] * len(predictions)

    rows = []
    for view_id, pred, target, mask in zip(view_ids, predictions, targets, masks, strict=True):
        use_mask = mask if config.mask_policy == "visibility" else None
        fraction = float(use_mask.double().mean()) if use_mask is not None else 1.0
        rows.append(
            ViewMetrics(
                view_id=view_id,
                psnr=psnr(pred, target, use_mask, config.max_value),
                ssim=ssim(pred, target, use_mask, config.max_value),
                perceptual=perceptual_distance(pred, target, extractor),
                masked=use_mask is not None,
                mask_fraction=fraction,
            )
        )

    aggregates: dict = {}
    if len(predictions) >= 2:
        aggregates["fid"] = fid(image_features(predictions, extractor), image_features(targets, extractor))
    if tsed_frames is not None and correspondences is not None and len(tsed_frames) >= 2:
        result = tsed(tsed_frames, correspondences, config.tsed_thresholds, config.tsed_pairs)
        aggregates["tsed"] = result.as_dict()
        aggregates["tsed_evaluated"] = result.evaluated
        aggregates["tsed_skipped"] = result.skipped
        aggregates["tsed_degenerate"] = result.degenerate

    return MetricsReport.from_rows(
        rows,
        aggregates=aggregates,
        config=config.model_dump(),
        provenance=provenance or {},
    )


def _format(value) -> str:
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def write_report_csv(path: str | Path, report: MetricsReport) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in report.rows:
            writer.writerow([_format(getattr(row, column)) for column in CSV_COLUMNS])
    return path


def write_report_json(path: str | Path, report: MetricsReport) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.model_dump_json(indent=2))
    return path


def save_heatmap(path: str | Path, pred: torch.Tensor, target: torch.Tensor) -> Path:
    """Per-pixel mean absolute difference as a PNG heatmap."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    diff = (pred.detach().double() - target.detach().double()).abs().mean(dim=0).numpy()
    plt.imsave(path, diff, cmap="magma", vmin=0.0, vmax=max(float(diff.max()), 1e-6))
    return path
