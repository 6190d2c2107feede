"""
One function per pipeline stage. Each reads and writes only the run directory layout,
skips when its completion marker exists, and validates its declared outputs.
"""

import json
import logging
import shutil
import sys
from pathlib import Path

import torch

from src.cli.plots import plot_metric_bars, plot_round_curves, plot_strategy_counts
from src.cli.report import build_report
from src.cli.workspace import RunDirectory, require
from src.curation import MANIFEST_NAME, build_dataset, load_manifest
from src.curation.dataset import STRATEGY_ORDER
from src.errors import MissingArtifactError
from src.experiments import fixer_component_ablation, noise_level_sweep, write_rows
from src.fixer import DenoiserModel, FixerInput, build_fixer, fix_image, load_fixer, save_fixer, train_fixer
from src.geometry import save_trajectory
from src.losses import FeatureExtractor
from src.metrics import evaluate_views, save_heatmap, visibility_mask, write_report_csv, write_report_json
from src.models.config_types import RunConfig
from src.models.record_types import LatencyRecord
from src.pipeline import (
    ABLATION_ROWS,
    BenchmarkCase,
    RoundWriter,
    ablation_row,
    evaluate_case,
    fit_baseline,
    make_case,
    post_render_enhance,
    progressive_update,
    render_targets,
    single_shot_update,
    write_ablation_csv,
)
from src.scene import load_scene, save_scene
from src.seeds import derive_seed
from src.storage import load_png, save_png

logger = logging.getLogger(__name__)

RENDER_DIRS = {"baseline": "baseline", "(a)": "fixer_only", "(b)": "single_shot", "(c)": "progressive", "(d)": "enhanced"}
TRUTH_DIR = "gt"


def make_extractor(config: RunConfig) -> FeatureExtractor:
    return FeatureExtractor.from_config(config.extractor)


def benchmark_seed(config: RunConfig, case: BenchmarkCase) -> int:
    return derive_seed(config.seed, "benchmark", case.scene_id)


def _skip(run: RunDirectory, stage: str, force: bool) -> bool:
    if run.is_done(stage) and not force:
        logger.info("Stage already complete; use --force to redo", extra={"stage": stage, "run": str(run.root)})
        return True
    run.clear(stage)
    return False


def _write_renders(directory: Path, images: list[torch.Tensor]) -> list[Path]:
    return [save_png(directory / f"{i:03d}.png", image) for i, image in enumerate(images)]


def _read_renders(directory: Path) -> list[torch.Tensor]:
    files = sorted(directory.glob("*.png"))
    if not files:
        raise MissingArtifactError(directory)
    return [load_png(f) for f in files]


def _load_fixer(run: RunDirectory) -> DenoiserModel:
    require(run.fixer_path)
    return load_fixer(run.fixer_path)


def cmd_curate(run: RunDirectory, force: bool = False, progress: bool = False) -> None:
    config = run.config
    manifest_path = run.dataset / MANIFEST_NAME
    if _skip(run, "curate", force):
        require(manifest_path)
        manifest = load_manifest(manifest_path)
    else:
        if run.dataset.exists():
            shutil.rmtree(run.dataset)
        manifest = build_dataset(
            config.curation_scenes, run.dataset, config.curation, config.scene_fit, seed=run.seeds["curation"], progress=progress
        )
        plot = plot_strategy_counts(run.plots / "strategy_counts.png", manifest.counts)
        run.mark_done("curate", [manifest_path, plot])
    for strategy in STRATEGY_ORDER:
        print(f"{strategy.value}\t{manifest.counts.get(strategy.value, 0)}")


def cmd_train_fixer(run: RunDirectory, force: bool = False, progress: bool = False) -> None:
    config = run.config
    manifest_path = run.dataset / MANIFEST_NAME
    require(manifest_path)
    if _skip(run, "train_fixer", force):
        return
    manifest = load_manifest(manifest_path)
    model = build_fixer(config.fixer, run.dataset, manifest, progress=progress)
    result = train_fixer(
        model,
        run.dataset,
        manifest,
        make_extractor(config),
        config.losses,
        seed=run.seeds["fixer"],
        curves_path=run.curves_path,
        progress=progress,
    )
    save_fixer(run.fixer_path, result.model)
    print(f"Fixer trained: best val loss {result.best_val:.6g} at step {result.best_step}", file=sys.stderr)
    run.mark_done("train_fixer", [run.fixer_path, run.curves_path])


def cmd_reconstruct(run: RunDirectory, force: bool = False, progress: bool = False) -> None:
    config = run.config
    if _skip(run, "reconstruct", force):
        return
    outputs = []
    for spec in config.benchmark_scenes:
        case = make_case(spec)
        baseline = fit_baseline(case, config, benchmark_seed(config, case))
        directory = run.scene_dir(case.scene_id)
        outputs.append(save_scene(directory / "baseline.dfx", baseline))
        outputs.append(save_trajectory(directory / "reference.json", [c for c, _ in case.references]))
        outputs.append(save_trajectory(directory / "targets.json", case.targets))
        outputs += _write_renders(run.renders_dir(TRUTH_DIR, case.scene_id), [t.rgb for t in case.target_truth])
        renders = render_targets(baseline, case.targets, config.scene_fit.background)
        outputs += _write_renders(run.renders_dir(RENDER_DIRS["baseline"], case.scene_id), renders)
        logger.info("Baseline reconstructed", extra={"scene": case.scene_id})
    run.mark_done("reconstruct", outputs)


def cmd_update(run: RunDirectory, force: bool = False, progress: bool = False) -> None:
    """Configurations (a), (b) and (c): fixer-only renders, single-shot and progressive distillation."""
    config = run.config
    background = config.scene_fit.background
    fixer = _load_fixer(run)
    for spec in config.benchmark_scenes:
        require(run.scene_dir(spec.scene_id) / "baseline.dfx")
    if _skip(run, "update", force):
        return
    outputs = []
    for spec in config.benchmark_scenes:
        case = make_case(spec)
        seed = benchmark_seed(config, case)
        directory = run.scene_dir(case.scene_id)
        baseline_path = directory / "baseline.dfx"
        k = fixer.config.reference_views

        baseline = load_scene(baseline_path)
        fixed = [
            fix_image(fixer, FixerInput(img, case.reference_images_for(c, k), fixer.config.tau))
            for c, img in zip(case.targets, render_targets(baseline, case.targets, background), strict=True)
        ]
        outputs += _write_renders(run.renders_dir(RENDER_DIRS["(a)"], case.scene_id), fixed)

        single = single_shot_update(load_scene(baseline_path), case.references, case.targets, fixer, config.pipeline, seed, background)
        outputs.append(save_scene(directory / "single_shot.dfx", single.scene))
        outputs += _write_renders(run.renders_dir(RENDER_DIRS["(b)"], case.scene_id), render_targets(single.scene, case.targets, background))

        rounds = run.rounds_dir(case.scene_id)
        if force and rounds.exists():
            shutil.rmtree(rounds)
        result = progressive_update(
            load_scene(baseline_path),
            case.references,
            case.targets,
            fixer,
            config.pipeline,
            seed,
            background,
            writer=RoundWriter(rounds),
            progress=progress,
        )
        outputs.append(save_scene(directory / "progressive.dfx", result.scene))
        outputs += _write_renders(run.renders_dir(RENDER_DIRS["(c)"], case.scene_id), render_targets(result.scene, case.targets, background))
        logger.info("Scene updated", extra={"scene": case.scene_id, "rounds": len(result.logs), "training_set": len(result.state)})
    run.mark_done("update", outputs)


def cmd_enhance(run: RunDirectory, force: bool = False, progress: bool = False, source: str = "progressive") -> None:
    """Configuration (d): post-render enhancement of the `source` scene; timing goes to metrics/latency.json."""
    config = run.config
    fixer = _load_fixer(run)
    stage = "enhance" if source == "progressive" else f"enhance_{source}"
    label = RENDER_DIRS["(d)"] if source == "progressive" else f"enhanced_{source}"
    for spec in config.benchmark_scenes:
        require(run.scene_dir(spec.scene_id) / f"{source}.dfx")
    if _skip(run, stage, force):
        return
    outputs = []
    latency: dict[str, list[dict]] = {}
    for spec in config.benchmark_scenes:
        case = make_case(spec)
        scene = load_scene(run.scene_dir(case.scene_id) / f"{source}.dfx")
        k = fixer.config.reference_views
        results = [post_render_enhance(scene, c, fixer, case.reference_images_for(c, k), config.scene_fit.background) for c in case.targets]
        outputs += _write_renders(run.renders_dir(label, case.scene_id), [r.image for r in results])
        latency[case.scene_id] = [LatencyRecord(camera_index=i, render_ms=r.render_ms, fix_ms=r.fix_ms).model_dump() for i, r in enumerate(results)]
    latency_path = run.metrics / f"latency_{label}.json"
    latency_path.parent.mkdir(parents=True, exist_ok=True)
    latency_path.write_text(json.dumps(latency, indent=2))
    outputs.append(latency_path)
    run.mark_done(stage, outputs)


def cmd_evaluate(run: RunDirectory, force: bool = False, progress: bool = False) -> None:
    """Metrics of every configuration against ground truth, the ablation table and comparison plots."""
    config = run.config
    for spec in config.benchmark_scenes:
        for name in [TRUTH_DIR, *RENDER_DIRS.values()]:
            require(run.renders_dir(name, spec.scene_id))
        require(run.scene_dir(spec.scene_id) / "baseline.dfx")
    if _skip(run, "evaluate", force):
        return
    extractor = make_extractor(config)
    outputs, rows = [], []
    for spec in config.benchmark_scenes:
        case = make_case(spec)
        baseline = load_scene(run.scene_dir(case.scene_id) / "baseline.dfx")
        masks = [visibility_mask(baseline, c, config.metrics.mask_threshold) for c in case.targets]
        truth = _read_renders(run.renders_dir(TRUTH_DIR, case.scene_id))
        for label in ABLATION_ROWS:
            name = RENDER_DIRS[label]
            predictions = _read_renders(run.renders_dir(name, case.scene_id))
            report = evaluate_case(case, predictions, masks, extractor, config.metrics, {"scene_id": case.scene_id, "config": label})
            outputs.append(write_report_csv(run.metrics / name / f"{case.scene_id}.csv", report))
            outputs.append(write_report_json(run.metrics / name / f"{case.scene_id}.json", report))
            if config.metrics.heatmaps:
                for i, (pred, target) in enumerate(zip(predictions, truth, strict=True)):
                    save_heatmap(run.metrics / "heatmaps" / name / case.scene_id / f"{i:03d}.png", pred, target)
            rows.append(ablation_row(case.scene_id, label, report))
    outputs.append(write_ablation_csv(run.ablation_csv, rows))
    outputs += _ablation_plots(run, rows)
    round_logs = {}
    for spec in config.benchmark_scenes:
        writer = RoundWriter(run.rounds_dir(spec.scene_id))
        round_logs[spec.scene_id] = [writer.read_log(k) for k in writer.completed_rounds()]
    if any(round_logs.values()):
        outputs.append(plot_round_curves(run.plots / "rounds.png", round_logs))
    run.mark_done("evaluate", outputs)


def _ablation_plots(run: RunDirectory, rows: list[dict]) -> list[Path]:
    paths = []
    for metric in ["psnr", "ssim", "lpips_proxy"]:
        means = []
        for label in ABLATION_ROWS:
            values = [r[metric] for r in rows if r["config"] == label]
            means.append(sum(values) / len(values))
        paths.append(plot_metric_bars(run.plots / f"ablation_{metric}.png", ABLATION_ROWS, means, metric))
    return paths


def cmd_compare(renders: Path, truth: Path, output: Path, config: RunConfig) -> None:
    """Unmasked metrics of two PNG directories matched by file name."""
    require(renders, truth)
    names = sorted(p.name for p in truth.glob("*.png"))
    if not names:
        raise MissingArtifactError(truth)
    for name in names:
        require(renders / name)
    metrics = config.metrics.model_copy(update={"mask_policy": "none"})
    report = evaluate_views(
        [load_png(renders / n) for n in names],
        [load_png(truth / n) for n in names],
        make_extractor(config),
        metrics,
        view_ids=[Path(n).stem for n in names],
        provenance={"renders": str(renders), "truth": str(truth)},
    )
    write_report_csv(output.with_suffix(".csv"), report)
    write_report_json(output.with_suffix(".json"), report)


def cmd_experiment(run: RunDirectory, kind: str, force: bool = False, progress: bool = False) -> None:
    config = run.config
    manifest_path = run.dataset / MANIFEST_NAME
    require(manifest_path)
    stage = f"experiment_{kind.replace('-', '_')}"
    if _skip(run, stage, force):
        return
    manifest = load_manifest(manifest_path)
    extractor = make_extractor(config)
    if kind == "noise-level":
        rows = noise_level_sweep(config, run.dataset, manifest, extractor, progress=progress)
        path = write_rows(run.metrics / "noise_level.csv", rows)
        plot = plot_metric_bars(run.plots / "noise_level.png", [f"tau={r['tau']}" for r in rows], [r["psnr"] for r in rows], "psnr")
    else:
        rows = fixer_component_ablation(config, run.dataset, manifest, extractor, progress=progress)
        path = write_rows(run.metrics / "fixer_components.csv", rows)
        plot = plot_metric_bars(run.plots / "fixer_components.png", [r["variant"] for r in rows], [r["lpips_proxy"] for r in rows], "lpips_proxy")
    run.mark_done(stage, [path, plot])


def cmd_report(run_dirs: list[Path], output: Path | None = None) -> Path:
    """Seed-median report of completed runs, by default in a `report` directory next to the first run."""
    return build_report(run_dirs, output or run_dirs[0].parent / "report")
