"""
Cross-run consolidation: seed-median tables in markdown with embedded plots.
"""

import csv
import json
from pathlib import Path

import numpy as np

from src.cli.plots import plot_metric_bars
from src.errors import IncompatibleRunsError, MissingArtifactError
from src.models.config_types import RunConfig
from src.pipeline import ABLATION_ROWS
from src.pipeline.ablation import ROW_DESCRIPTIONS

SEED_FIELDS = {"seed", "output_root"}
EXPERIMENT_TABLES = {"noise_level.csv": ("tau", "Noise level"), "fixer_components.csv": ("variant", "Fixer components")}


def _flatten(value, prefix: str = "") -> dict[str, object]:
    if isinstance(value, dict):
        out: dict[str, object] = {}
        for key, item in value.items():
            out.update(_flatten(item, f"{prefix}{key}."))
        return out
    return {prefix.rstrip("."): value}


def load_run(directory: Path) -> dict:
    path = directory / "run.json"
    if not path.exists():
        raise MissingArtifactError(path)
    return json.loads(path.read_text())


def check_compatible(configs: list[dict]) -> None:
    """Runs may differ only in their root seed and output location."""
    flat = [{k: v for k, v in _flatten(c).items() if k not in SEED_FIELDS} for c in configs]
    keys = set().union(*flat)
    mismatched = sorted(k for k in keys if any(f.get(k) != flat[0].get(k) for f in flat[1:]))
    if mismatched:
        raise IncompatibleRunsError(mismatched)


def _number(text: str) -> float | None:
    if text == "":
        return None
    try:
        return float(text)
    except ValueError:
        return None


def read_table(path: Path) -> list[dict]:
    if not path.exists():
        raise MissingArtifactError(path)
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def _metric_columns(rows: list[dict], key_columns: set[str]) -> list[str]:
    columns = list(rows[0]) if rows else []
    return [c for c in columns if c not in key_columns and all(_number(r[c]) is not None or r[c] == "" for r in rows)]


def _group_mean(rows: list[dict], key: str, metrics: list[str]) -> dict[str, dict[str, float | None]]:
    """Mean of every metric over rows sharing `key` (the ablation rows are averaged over scenes)."""
    grouped: dict[str, dict[str, float | None]] = {}
    for label in dict.fromkeys(r[key] for r in rows):
        members = [r for r in rows if r[key] == label]
        grouped[label] = {}
        for metric in metrics:
            values = [v for v in (_number(r[metric]) for r in members) if v is not None]
            grouped[label][metric] = float(np.mean(values)) if values else None
    return grouped


def seed_summary(per_run: list[dict[str, dict[str, float | None]]], metrics: list[str]) -> dict[str, dict[str, tuple[float | None, float | None]]]:
    """(median, max - min) across runs per label and metric; spread is None for a single run."""
    labels = list(dict.fromkeys(label for run in per_run for label in run))
    summary: dict[str, dict[str, tuple[float | None, float | None]]] = {}
    for label in labels:
        summary[label] = {}
        for metric in metrics:
            values = np.array([v for run in per_run if (v := run.get(label, {}).get(metric)) is not None], dtype=float)
            if len(values) == 0:
                summary[label][metric] = (None, None)
                continue
            spread = None
            if len(per_run) > 1:
                spread = 0.0 if np.all(values == values[0]) else float(values.max() - values.min())
            summary[label][metric] = (float(np.median(values)), spread)
    return summary


def _fmt(value: float | None) -> str:
    if value is None:
        return "n/a"
    if np.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.4f}"


def _markdown_table(summary: dict, metrics: list[str], first: str, descriptions: dict[str, str] | None, with_spread: bool) -> list[str]:
    header = [first] + (["description"] if descriptions else [])
    for metric in metrics:
        header += [metric] + ([f"{metric} spread"] if with_spread else [])
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for label, values in summary.items():
        cells = [label] + ([descriptions.get(label, "")] if descriptions else [])
        for metric in metrics:
            median, spread = values[metric]
            cells += [_fmt(median)] + ([_fmt(spread)] if with_spread else [])
        lines.append("| " + " | ".join(cells) + " |")
    return lines


def build_report(run_dirs: list[Path], output: Path) -> Path:
    """
    Write `output`/report.md for one or more runs of the same config.

    Raises:
        IncompatibleRunsError: configs differ in anything but the seed.
        MissingArtifactError: a run lacks run.json or ablation.csv.
    """
    records = [load_run(d) for d in run_dirs]
    check_compatible([r["config"] for r in records])
    with_spread = len(run_dirs) > 1
    config = records[0]["config"]
    output.mkdir(parents=True, exist_ok=True)

    ablations = [read_table(d / "ablation.csv") for d in run_dirs]
    metrics = _metric_columns(ablations[0], {"scene_id", "config", "description"})
    per_run = [_group_mean(rows, "config", metrics) for rows in ablations]
    summary = seed_summary(per_run, metrics)
    summary = {label: summary[label] for label in ABLATION_ROWS if label in summary}

    scene_ids = ", ".join(s.scene_id for s in RunConfig.model_validate(config).benchmark_scenes)
    lines = [
        f"# {config['name']}",
        "",
        f"Runs ({len(run_dirs)}): " + ", ".join(str(d) for d in run_dirs),
        "",
        "Values are seed medians" + (" with max - min spread." if with_spread else "."),
        "",
        f"## Benchmark scenes: {scene_ids}",
        "",
        *_markdown_table(summary, metrics, "config", ROW_DESCRIPTIONS, with_spread),
        "",
    ]
    for metric in [m for m in ("psnr", "ssim", "lpips_proxy") if m in metrics]:
        plot = plot_metric_bars(
            output / f"ablation_{metric}.png",
            list(summary),
            [summary[label][metric][0] for label in summary],
            metric,
            [summary[label][metric][1] or 0.0 for label in summary] if with_spread else None,
        )
        lines += [f"![{metric}]({plot.name})", ""]

    for filename, (key, title) in EXPERIMENT_TABLES.items():
        tables = [d / "metrics" / filename for d in run_dirs]
        if not all(t.exists() for t in tables):
            continue
        rows = [read_table(t) for t in tables]
        exp_metrics = _metric_columns(rows[0], {key})
        exp_summary = seed_summary([_group_mean(r, key, exp_metrics) for r in rows], exp_metrics)
        lines += [f"## {title}", "", *_markdown_table(exp_summary, exp_metrics, key, None, with_spread), ""]

    path = output / "report.md"
    path.write_text("\n".join(lines))
    return path
