"""
Dataset assembly: strategy budgets, scene-level splits, on-disk layout and reload.

Layout: <root>/<scene_id>/<strategy>/<index>/{degraded.png, clean.png, ref_0.png, ..., cameras.json}
plus <root>/manifest.json.
"""

import json
import logging
import math
from collections import Counter
from collections.abc import Callable
from pathlib import Path

import numpy as np
import torch
from torch.utils.data import Dataset
from tqdm import tqdm

from src.curation.procedural import AnalyticScene, generate_scene
from src.curation.strategies import (
    PairedSample,
    cross_reference_pairs,
    cycle_reconstruction_pairs,
    sparse_reconstruction_pairs,
    underfit_pairs,
)
from src.curation.trajectories import make_camera_rig
from src.errors import CurationError, DatasetSplitError, DomainError
from src.models.camera_types import Camera
from src.models.config_types import CurationConfig, SceneFitConfig, SceneSpec
from src.models.record_types import CurationStrategy, DatasetManifest, SampleRecord
from src.seeds import derive_seed
from src.storage import load_png, save_png

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
STRATEGY_ORDER = [
    CurationStrategy.SPARSE_RECONSTRUCTION,
    CurationStrategy.CYCLE_RECONSTRUCTION,
    CurationStrategy.CROSS_REFERENCE,
    CurationStrategy.MODEL_UNDERFITTING,
]


def strategy_budgets(total: int, ratios: dict[str, float]) -> dict[str, int]:
    """Split `total` by `ratios` with largest-remainder rounding."""
    if not math.isclose(sum(ratios.values()), 1.0, abs_tol=1e-9):
        raise DomainError(f"ratios must sum to 1, got {sum(ratios.values())}")
    exact = {name: total * share for name, share in ratios.items()}
    budgets = {name: int(math.floor(value)) for name, value in exact.items()}
    remainder = total - sum(budgets.values())
    for name in sorted(exact, key=lambda n: (-(exact[n] - budgets[n]), n))[:remainder]:
        budgets[name] += 1
    return budgets


def assign_splits(scene_ids: list[str], val_fraction: float, seed: int) -> dict[str, str]:
    """Whole scenes go to train or val; never individual frames."""
    if len(set(scene_ids)) != len(scene_ids):
        duplicates = sorted(s for s, c in Counter(scene_ids).items() if c > 1)
        raise DatasetSplitError(f"scene ids appear more than once: {duplicates}")
    order = np.random.default_rng(seed).permutation(len(scene_ids))
    n_val = 0
    if val_fraction > 0 and len(scene_ids) >= 2:
        n_val = min(max(1, int(round(val_fraction * len(scene_ids)))), len(scene_ids) - 1)
    val = {scene_ids[i] for i in order[:n_val]}
    return {scene_id: ("val" if scene_id in val else "train") for scene_id in scene_ids}


def _job(
    strategy: CurationStrategy,
    scene: AnalyticScene,
    trajectory: list[Camera],
    curation: CurationConfig,
    fit: SceneFitConfig,
) -> Callable[[str, int], list[PairedSample]]:
    common = {"config": fit, "reference_views": curation.reference_views}
    if strategy is CurationStrategy.SPARSE_RECONSTRUCTION:
        return lambda family, seed: sparse_reconstruction_pairs(scene, trajectory, curation.holdout_stride, family, seed=seed, **common)
    if strategy is CurationStrategy.CYCLE_RECONSTRUCTION:
        return lambda family, seed: cycle_reconstruction_pairs(scene, trajectory, curation.cycle_shift, family, seed=seed, **common)
    if strategy is CurationStrategy.CROSS_REFERENCE:
        rig = make_camera_rig(trajectory, curation.rig_cameras, curation.rig_separation_deg)
        return lambda family, seed: cross_reference_pairs(scene, rig, family, seed=seed, **common)
    return lambda family, seed: underfit_pairs(scene, trajectory, curation.underfit_fraction, family, seed=seed, **common)


def _interleave(per_family: dict[str, list[PairedSample]], families: list[str], family_counts: Counter[str], limit: int) -> list[PairedSample]:
    """
    Up to `limit` samples, one per frame, each from a least-represented family.

    `family_counts` holds the dataset-wide counts and is updated for every sample taken, so
    counts never drift apart by more than one; a frame whose only usable samples belong to
    over-represented families is skipped.
    """
    keyed = {f: {(s.frame_index, s.camera.pose.translation, s.camera.pose.rotation): s for s in samples} for f, samples in per_family.items()}
    frames = list(dict.fromkeys(key for f in families for key in keyed[f]))
    chosen = []
    for key in frames:
        if len(chosen) >= limit:
            break
        lowest = min(family_counts[f] for f in families)
        family = next((f for f in families if family_counts[f] == lowest and key in keyed[f]), None)
        if family is None:
            continue
        chosen.append(keyed[family][key])
        family_counts[family] += 1
    return chosen


def write_sample(root: Path, sample: PairedSample, index: int) -> str:
    sample_id = f"{sample.scene_id}/{sample.strategy.value}/{index:04d}"
    directory = root / sample_id
    directory.mkdir(parents=True, exist_ok=True)
    save_png(directory / "degraded.png", sample.degraded)
    save_png(directory / "clean.png", sample.clean)
    for i, (_, image) in enumerate(sample.references):
        save_png(directory / f"ref_{i}.png", image)
    cameras = {
        "camera": sample.camera.to_record(),
        "references": [camera.to_record() for camera, _ in sample.references],
        "frame_index": sample.frame_index,
        "family": sample.family,
    }
    (directory / "cameras.json").write_text(json.dumps(cameras, indent=2))
    return sample_id


def build_dataset(
    specs: list[SceneSpec],
    root: str | Path,
    curation: CurationConfig | None = None,
    fit: SceneFitConfig | None = None,
    seed: int = 0,
    progress: bool = False,
) -> DatasetManifest:
    """
    Curate `curation.pair_budget` pairs across strategies and write them under `root`.

    Each strategy spreads its budget evenly over the scenes, cycling until it is met.
    A job fits every configured family and the produced frames alternate between
    families. Dataset content is a pure function of (specs, configs, seed).
    """
    curation = curation or CurationConfig()
    fit = fit or SceneFitConfig()
    root = Path(root)
    splits = assign_splits([s.scene_id for s in specs], curation.val_fraction, derive_seed(seed, "split"))
    budgets = strategy_budgets(curation.pair_budget, curation.ratios)
    generated = {spec.scene_id: generate_scene(spec) for spec in specs}

    records: list[SampleRecord] = []
    family_counts: Counter[str] = Counter()
    bar = tqdm(total=curation.pair_budget, desc="curate", disable=not progress)
    for strategy in STRATEGY_ORDER:
        need = budgets.get(strategy.value, 0)
        passes = 0
        running: Counter[str] = Counter()
        while need > 0:
            produced_this_pass = 0
            for position, spec in enumerate(specs):
                if need <= 0:
                    break
                share = math.ceil(need / (len(specs) - position))
                scene, trajectory, _ = generated[spec.scene_id]
                job = _job(strategy, scene, trajectory, curation, fit)
                job_seed = derive_seed(seed, "curation", strategy.value, spec.scene_id, passes)
                per_family = {family: job(family, job_seed) for family in curation.families}
                samples = _interleave(per_family, list(curation.families), family_counts, share)
                for sample in samples:
                    sample_id = write_sample(root, sample, running[spec.scene_id])
                    running[spec.scene_id] += 1
                    records.append(
                        SampleRecord(
                            sample_id=sample_id,
                            scene_id=sample.scene_id,
                            strategy=sample.strategy,
                            family=sample.family,
                            split=splits[sample.scene_id],
                            frame_index=sample.frame_index,
                            n_references=len(sample.references),
                            seed=sample.seed,
                        )
                    )
                    bar.update(1)
                need -= len(samples)
                produced_this_pass += len(samples)
            passes += 1
            if produced_this_pass == 0 and need > 0:
                raise CurationError(f"strategy {strategy.value} produced no usable pairs", {"missing": need})
    bar.close()

    manifest = DatasetManifest(
        seed=seed,
        splits=splits,
        counts=dict(Counter(r.strategy.value for r in records)),
        family_counts=dict(Counter(r.family for r in records)),
        samples=records,
    )
    root.mkdir(parents=True, exist_ok=True)
    (root / MANIFEST_NAME).write_text(manifest.model_dump_json(indent=2))
    logger.info("Dataset written", extra={"root": str(root), "samples": len(records), "counts": manifest.counts})
    return manifest


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    return DatasetManifest.model_validate_json(path.read_text())


class PairedDataset(Dataset):
    """Samples of one split as tensors: degraded, clean and (V_ref, 3, H, W) references."""

    def __init__(self, root: str | Path, manifest: DatasetManifest, split: str = "train", reference_views: int = 1):
        self.root = Path(root)
        self.records = manifest.split(split)
        self.reference_views = reference_views

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, index: int) -> dict[str, torch.Tensor]:
        record = self.records[index]
        directory = self.root / record.directory
        degraded = load_png(directory / "degraded.png")
        n_refs = min(self.reference_views, record.n_references)
        references = [load_png(directory / f"ref_{i}.png") for i in range(n_refs)]
        if n_refs < self.reference_views and references:
            references += [references[-1]] * (self.reference_views - n_refs)
        stacked = torch.stack(references) if references else degraded.new_zeros((0, *degraded.shape))
        return {"degraded": degraded, "clean": load_png(directory / "clean.png"), "references": stacked}
