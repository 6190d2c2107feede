from src.metrics.fid import fid, frechet_distance, image_features
from src.metrics.image import gaussian_window, perceptual_distance, psnr, ssim
from src.metrics.report import evaluate_views, save_heatmap, write_report_csv, write_report_json
from src.metrics.tsed import (
    CorrespondenceProvider,
    PatchMatchCorrespondences,
    ReprojectionCorrespondences,
    TsedFrame,
    TsedResult,
    frame_pairs,
    tsed,
)
from src.metrics.visibility import visibility_mask

__all__ = [
    "fid",
    "frechet_distance",
    "image_features",
    "gaussian_window",
    "perceptual_distance",
    "psnr",
    "ssim",
    "evaluate_views",
    "save_heatmap",
    "write_report_csv",
    "write_report_json",
    "CorrespondenceProvider",
    "PatchMatchCorrespondences",
    "ReprojectionCorrespondences",
    "TsedFrame",
    "TsedResult",
    "frame_pairs",
    "tsed",
    "visibility_mask",
]
