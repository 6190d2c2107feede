"""
Desk-scale training oracles on the smoke config. Deselected by default; run with `pytest -m slow`.
"""

import csv
from pathlib import Path

import numpy as np
import pytest
from torch.utils.data import DataLoader

from src.cli.config import load_config
from src.cli.main import main
from src.curation import PairedDataset, build_dataset, load_manifest
from src.experiments import evaluate_heldout
from src.fixer import DenoiserModel, evaluate_loss, load_fixer, train_fixer
from src.losses import FeatureExtractor
from src.models import FixerConfig, LossWeights

from .conftest import make_tiny_config

pytestmark = pytest.mark.slow

SMOKE = Path(__file__).parents[1] / "evaluation" / "configs" / "smoke.toml"
SEEDS = [0, 1, 2, 3, 4]
CHAIN = ["curate", "train-fixer", "reconstruct", "update", "enhance", "evaluate"]


def run_chain(runs_root: Path, seed: int, *extra: str) -> Path:
    for command in [*CHAIN, *extra]:
        args = command.split()
        assert main([*args, "--config", str(SMOKE), "--runs-root", str(runs_root), "--seed", str(seed), "--quiet"]) == 0, command
    return runs_root / f"smoke-seed{seed}"


def read_rows(path: Path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def median_by(runs: list[Path], filename: str, key: str, metric: str) -> dict[str, float]:
    per_label: dict[str, list[float]] = {}
    for run in runs:
        rows = read_rows(run / filename)
        for label in dict.fromkeys(r[key] for r in rows):
            per_label.setdefault(label, []).append(float(np.mean([float(r[metric]) for r in rows if r[key] == label])))
    return {label: float(np.median(values)) for label, values in per_label.items()}


@pytest.fixture(scope="module")
def smoke_runs(tmp_path_factory) -> list[Path]:
    runs_root = tmp_path_factory.mktemp("smoke")
    return [run_chain(runs_root, seed, "experiment noise-level") for seed in SEEDS]


def test_fixer_improves_heldout_views(smoke_runs):
    gains, ratios = [], []
    for run in smoke_runs:
        config = load_config(SMOKE)
        extractor = FeatureExtractor.from_config(config.extractor)
        manifest = load_manifest(run / "dataset")
        fixed = evaluate_heldout(load_fixer(run / "fixer" / "fixer.dfx"), run / "dataset", manifest, extractor)
        identity = evaluate_heldout(None, run / "dataset", manifest, extractor)
        gains.append(fixed.psnr - identity.psnr)
        ratios.append(fixed.perceptual / identity.perceptual)
    assert np.median(gains) >= 2.0
    assert np.median(ratios) <= 0.7


def test_noise_level_ordering(smoke_runs):
    psnr = median_by(smoke_runs, "metrics/noise_level.csv", "tau", "psnr")
    assert psnr["200"] > psnr["1000"]
    assert max(psnr, key=psnr.get) == "200"


def test_ablation_ordering(smoke_runs):
    lpips = median_by(smoke_runs, "ablation.csv", "config", "lpips_proxy")
    psnr = median_by(smoke_runs, "ablation.csv", "config", "psnr")
    assert lpips["baseline"] > lpips["(b)"] > lpips["(c)"] > lpips["(d)"]
    assert lpips["(a)"] < lpips["baseline"]
    assert psnr["(c)"] > psnr["(a)"]


def test_distillation_restores_consistency(smoke_runs):
    for threshold in ["tsed@2", "tsed@4"]:
        tsed = median_by(smoke_runs, "ablation.csv", "config", threshold)
        assert tsed["(d)"] >= tsed["(a)"]


def test_rerun_reproduces_every_csv(smoke_runs, tmp_path):
    first = smoke_runs[0]
    second = run_chain(tmp_path / "rerun", SEEDS[0], "experiment noise-level")
    tables = sorted(p.relative_to(first) for p in first.rglob("*.csv"))
    assert tables
    assert tables == sorted(p.relative_to(second) for p in second.rglob("*.csv"))
    for table in tables:
        assert (first / table).read_bytes() == (second / table).read_bytes(), table


def test_memorizes_eight_samples(tmp_path):
    config = make_tiny_config(tmp_path)
    curation = config.curation.model_copy(update={"val_fraction": 0.0})
    manifest = build_dataset(config.curation_scenes, tmp_path / "dataset", curation, config.scene_fit, seed=3)
    assert len(manifest.split("train")) == 8

    fixer = FixerConfig(widths=(16, 32), attention_levels=1, heads=2, tau=10, batch_size=8, steps=500, lr=1e-3)
    model = DenoiserModel(fixer)
    extractor = FeatureExtractor(widths=(4, 8))
    weights = LossWeights()
    loader = DataLoader(PairedDataset(tmp_path / "dataset", manifest, "train", fixer.reference_views), batch_size=8)
    initial = evaluate_loss(model, loader, extractor, weights)
    train_fixer(model, tmp_path / "dataset", manifest, extractor, weights, seed=0)
    assert evaluate_loss(model, loader, extractor, weights) < 0.25 * initial
