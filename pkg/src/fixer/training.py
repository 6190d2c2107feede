"""
Fixer training on curated pairs with the weighted image-space loss.
"""

import copy
import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import torch
from torch.utils.data import DataLoader
from tqdm import tqdm

from src.curation.dataset import PairedDataset
from src.errors import TrainingHaltedError
from src.fixer.codec import train_codec
from src.fixer.schedule import fixed_noise
from src.fixer.unet import DenoiserModel
from src.losses import FeatureExtractor, LossBreakdown, total_loss
from src.models.config_types import FixerConfig, LossWeights
from src.models.record_types import DatasetManifest

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ["step", "train_loss", "val_loss", "recon", "perceptual", "gram"]


@dataclass
class TrainResult:
    model: DenoiserModel
    curves: list[dict] = field(default_factory=list)
    best_val: float = math.inf
    best_step: int = 0


def _batch_loss(
    model: DenoiserModel, batch: dict, extractor: FeatureExtractor, weights: LossWeights, noise: torch.Tensor, ref_noise
) -> LossBreakdown:
    config = model.config
    references = batch["references"] if config.reference_views > 0 else None
    out = model(batch["degraded"], references, config.tau, noise=noise, reference_noise=ref_noise)
    loss = total_loss(out[:, 0], batch["clean"], extractor, weights)
    if config.include_reference_loss and out.shape[1] > 1:
        ref_loss = total_loss(out[:, 1:].flatten(0, 1), batch["references"].flatten(0, 1), extractor, weights)
        loss = LossBreakdown(*(a + b for a, b in zip(_parts(loss), _parts(ref_loss), strict=True)))
    return loss


def _parts(loss: LossBreakdown):
    return loss.total, loss.recon, loss.perceptual, loss.gram


def _latent_noise(model: DenoiserModel, batch: dict, generator: torch.Generator | None, dtype: torch.dtype):
    degraded = batch["degraded"]
    shape = (degraded.shape[0], model.codec.latent_channels, degraded.shape[-2] // model.codec.factor, degraded.shape[-1] // model.codec.factor)
    if generator is None:
        noise = fixed_noise(shape, model.config.noise_seed, dtype=dtype)
    else:
        noise = torch.randn(shape, generator=generator, dtype=torch.float64).to(dtype)
    ref_noise = None
    if model.config.noise_references and batch["references"].shape[1] > 0:
        ref_shape = (shape[0], batch["references"].shape[1], *shape[1:])
        if generator is None:
            ref_noise = fixed_noise(ref_shape, model.config.noise_seed + 1, dtype=dtype)
        else:
            ref_noise = torch.randn(ref_shape, generator=generator, dtype=torch.float64).to(dtype)
    return noise, ref_noise


def evaluate_loss(model: DenoiserModel, loader: DataLoader, extractor: FeatureExtractor, weights: LossWeights) -> float:
    """Mean total loss over a loader, using the deterministic inference noise."""
    dtype = next(model.parameters()).dtype
    model.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for batch in loader:
            batch = {k: v.to(dtype) for k, v in batch.items()}
            noise, ref_noise = _latent_noise(model, batch, None, dtype)
            loss = _batch_loss(model, batch, extractor, weights, noise, ref_noise)
            total += float(loss.total) * batch["degraded"].shape[0]
            count += batch["degraded"].shape[0]
    model.train()
    return total / max(count, 1)


def write_curves(path: str | Path, curves: list[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CURVE_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in curves:
            writer.writerow({k: ("" if row.get(k) is None else row[k]) for k in CURVE_COLUMNS})
    return path


def train_fixer(
    model: DenoiserModel,
    root: str | Path,
    manifest: DatasetManifest,
    extractor: FeatureExtractor,
    weights: LossWeights | None = None,
    steps: int | None = None,
    seed: int = 0,
    curves_path: str | Path | None = None,
    progress: bool = False,
) -> TrainResult:
    """
    Optimize the denoiser with Adam and keep the weights with the best validation loss.

    Raises:
        TrainingHaltedError: validation loss became non-finite; the model is restored
            to its last finite checkpoint before raising.
    """
    config: FixerConfig = model.config
    weights = weights or LossWeights()
    steps = config.steps if steps is None else steps
    dtype = next(model.parameters()).dtype
    extractor = extractor.to(dtype)

    train_set = PairedDataset(root, manifest, "train", max(config.reference_views, 0))
    val_set = PairedDataset(root, manifest, "val", max(config.reference_views, 0))
    if len(train_set) == 0:
        raise ValueError("the manifest has no training samples")
    generator = torch.Generator().manual_seed(seed)
    train_loader = DataLoader(train_set, batch_size=config.batch_size, shuffle=True, generator=generator, drop_last=False)
    val_loader = DataLoader(val_set, batch_size=config.batch_size, shuffle=False)

    trainable = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.Adam(trainable, lr=config.lr, weight_decay=0.0)
    noise_generator = torch.Generator().manual_seed(seed + 1)

    result = TrainResult(model=model)
    best_state = copy.deepcopy(model.state_dict())
    last_finite_state = best_state
    model.train()

    iterator = iter(train_loader)
    for step in tqdm(range(1, steps + 1), desc="train fixer", disable=not progress):
        try:
            batch = next(iterator)
        except StopIteration:
            iterator = iter(train_loader)
            batch = next(iterator)
        batch = {k: v.to(dtype) for k, v in batch.items()}
        noise, ref_noise = _latent_noise(model, batch, noise_generator, dtype)
        loss = _batch_loss(model, batch, extractor, weights, noise, ref_noise)
        optimizer.zero_grad()
        loss.total.backward()
        optimizer.step()

        terms = {k: v for k, v in loss.as_floats().items() if k != "total"}
        row = {"step": step, "train_loss": float(loss.total.detach()), "val_loss": None, **terms}
        if len(val_set) and (step % config.val_every == 0 or step == steps):
            val_loss = evaluate_loss(model, val_loader, extractor, weights)
            row["val_loss"] = val_loss
            if not math.isfinite(val_loss):
                model.load_state_dict(last_finite_state)
                result.curves.append(row)
                if curves_path:
                    write_curves(curves_path, result.curves)
                logger.error("Validation loss is not finite; restored last finite weights", extra={"step": step})
                raise TrainingHaltedError(f"validation loss became non-finite at step {step}", {"step": step, "best_step": result.best_step})
            last_finite_state = copy.deepcopy(model.state_dict())
            if val_loss < result.best_val:
                result.best_val, result.best_step = val_loss, step
                best_state = last_finite_state
            logger.info("Validation", extra={"step": step, "val_loss": val_loss, "train_loss": row["train_loss"]})
        result.curves.append(row)

    if len(val_set) and steps > 0:
        model.load_state_dict(best_state)
    model.eval()
    if curves_path:
        write_curves(curves_path, result.curves)
    return result


def build_fixer(config: FixerConfig, root: str | Path, manifest: DatasetManifest, progress: bool = False) -> DenoiserModel:
    """A fresh denoiser; an autoencoder codec is pre-trained on the clean training images first."""
    model = DenoiserModel(config)
    if config.codec == "autoencoder":
        train_set = PairedDataset(root, manifest, "train", reference_views=0)
        images = torch.stack([train_set[i]["clean"] for i in range(len(train_set))])
        train_codec(model.codec, images, config.codec_steps, seed=config.seed, progress=progress)
    return model
