"""
Held-out fixing quality: fix every sample of a split and score it against its clean target.
"""

from pathlib import Path

import numpy as np
import torch
from pydantic import BaseModel, Field

from src.curation.dataset import PairedDataset
from src.errors import CurationError
from src.fixer import DenoiserModel, FixerInput, fix_image
from src.losses import FeatureExtractor
from src.metrics import fid, image_features, perceptual_distance, psnr, ssim
from src.models.record_types import DatasetManifest


class HeldoutScores(BaseModel):
    """Means over a split; `fid` compares the fixed set against the clean set."""

    samples: int
    psnr: float
    ssim: float
    perceptual: float
    fid: float | None = Field(default=None, description="Needs at least two samples")


def _score(outputs: list[torch.Tensor], targets: list[torch.Tensor], extractor: FeatureExtractor) -> HeldoutScores:
    extractor = extractor.to(torch.float64)
    outputs = [o.to(torch.float64) for o in outputs]
    targets = [t.to(torch.float64) for t in targets]
    fid_value = None
    if len(outputs) >= 2:
        fid_value = fid(image_features(outputs, extractor), image_features(targets, extractor))
    return HeldoutScores(
        samples=len(outputs),
        psnr=float(np.mean([psnr(o, t) for o, t in zip(outputs, targets, strict=True)])),
        ssim=float(np.mean([ssim(o, t) for o, t in zip(outputs, targets, strict=True)])),
        perceptual=float(np.mean([perceptual_distance(o, t, extractor) for o, t in zip(outputs, targets, strict=True)])),
        fid=fid_value,
    )


def evaluate_heldout(
    model: DenoiserModel | None,
    root: str | Path,
    manifest: DatasetManifest,
    extractor: FeatureExtractor,
    split: str = "val",
) -> HeldoutScores:
    """
    Score fixed outputs against clean targets; `model=None` scores the degraded inputs
    themselves (the identity baseline).

    Raises:
        CurationError: the split holds no samples.
    """
    k = model.config.reference_views if model is not None else 0
    dataset = PairedDataset(root, manifest, split, reference_views=k)
    if len(dataset) == 0:
        raise CurationError(f"split '{split}' holds no samples", {"split": split})
    outputs, targets = [], []
    for i in range(len(dataset)):
        sample = dataset[i]
        if model is None:
            outputs.append(sample["degraded"])
        else:
            refs = list(sample["references"].unbind(0))
            outputs.append(fix_image(model, FixerInput(sample["degraded"], refs, model.config.tau)))
        targets.append(sample["clean"])
    return _score(outputs, targets, extractor)
