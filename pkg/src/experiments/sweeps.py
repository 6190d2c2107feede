"""
Fixer-side ablations that retrain the denoiser on one curated dataset.
"""

import csv
import logging
from pathlib import Path

from src.experiments.heldout import HeldoutScores, evaluate_heldout
from src.fixer import build_fixer, train_fixer
from src.losses import FeatureExtractor
from src.models.config_types import FixerConfig, LossWeights, RunConfig
from src.models.record_types import DatasetManifest
from src.seeds import derive_seed

logger = logging.getLogger(__name__)

COMPONENT_ROWS: list[tuple[str, int, bool, bool]] = [
    ("tau=1000", 1000, False, False),
    ("tau=200", 200, False, False),
    ("tau=200 + gram", 200, True, False),
    ("tau=200 + gram + references", 200, True, True),
]


def _train_variant(
    config: RunConfig,
    fixer: FixerConfig,
    weights: LossWeights,
    root: Path,
    manifest: DatasetManifest,
    extractor: FeatureExtractor,
    label: str,
    progress: bool,
) -> HeldoutScores:
    model = build_fixer(fixer, root, manifest, progress=progress)
    train_fixer(
        model,
        root,
        manifest,
        extractor,
        weights,
        steps=config.experiments.steps,
        seed=derive_seed(config.seed, "experiments", label),
        progress=progress,
    )
    scores = evaluate_heldout(model, root, manifest, extractor)
    logger.info("Variant evaluated", extra={"variant": label, "psnr": scores.psnr, "perceptual": scores.perceptual})
    return scores


def noise_level_sweep(
    config: RunConfig,
    root: str | Path,
    manifest: DatasetManifest,
    extractor: FeatureExtractor,
    taus: list[int] | None = None,
    progress: bool = False,
) -> list[dict]:
    """One fixer per tau on the same data; rows carry held-out PSNR, SSIM and LPIPS-proxy."""
    root = Path(root)
    rows = []
    for tau in taus or config.experiments.taus:
        fixer = config.fixer.model_copy(update={"tau": tau})
        scores = _train_variant(config, fixer, config.losses, root, manifest, extractor, f"tau={tau}", progress)
        rows.append({"tau": tau, "psnr": scores.psnr, "ssim": scores.ssim, "lpips_proxy": scores.perceptual})
    return rows


def fixer_component_ablation(
    config: RunConfig,
    root: str | Path,
    manifest: DatasetManifest,
    extractor: FeatureExtractor,
    progress: bool = False,
) -> list[dict]:
    """Noise level, Gram loss and reference conditioning switched on one at a time."""
    root = Path(root)
    rows = []
    for label, tau, gram, references in COMPONENT_ROWS:
        fixer = config.fixer.model_copy(update={"tau": tau, "reference_views": max(config.fixer.reference_views, 1) if references else 0})
        weights = config.losses.model_copy(update={"gram": config.losses.gram if gram else 0.0})
        scores = _train_variant(config, fixer, weights, root, manifest, extractor, label, progress)
        rows.append({"variant": label, "lpips_proxy": scores.perceptual, "fid_proxy": scores.fid, "psnr": scores.psnr})
    return rows


def write_rows(path: str | Path, rows: list[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows({k: ("" if v is None else v) for k, v in row.items()} for row in rows)
    return path
