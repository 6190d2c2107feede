"""
Static PNG comparison plots.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from src.models.record_types import RoundLog  # noqa: E402


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_round_curves(path: str | Path, logs: dict[str, list[RoundLog]]) -> Path:
    """Training loss and mean target distance against round, one line per scene."""
    fig, (loss_ax, dist_ax) = plt.subplots(1, 2, figsize=(9, 3.5))
    for scene_id, scene_logs in logs.items():
        rounds = [log.round for log in scene_logs]
        loss_ax.plot(rounds, [log.final_train_loss for log in scene_logs], marker="o", label=scene_id)
        dist_ax.plot(rounds, [log.mean_target_distance for log in scene_logs], marker="o", label=scene_id)
    loss_ax.set(xlabel="round", ylabel="train loss", yscale="log")
    dist_ax.set(xlabel="round", ylabel="distance to target pose")
    loss_ax.legend(fontsize="small")
    return _save(fig, Path(path))


def plot_strategy_counts(path: str | Path, counts: dict[str, int]) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    names = sorted(counts)
    ax.bar(names, [counts[n] for n in names], color="tab:blue")
    ax.set(ylabel="pairs", title="curated pairs per strategy")
    ax.tick_params(axis="x", labelrotation=20)
    return _save(fig, Path(path))


def plot_metric_bars(path: str | Path, labels: list[str], values: list[float], metric: str, spread: list[float] | None = None) -> Path:
    """One bar per configuration; `spread` draws symmetric error bars (half the seed range)."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    finite = np.nan_to_num(np.asarray(values, dtype=float), nan=0.0, posinf=0.0)
    yerr = None if spread is None else 0.5 * np.nan_to_num(np.asarray(spread, dtype=float), nan=0.0, posinf=0.0)
    ax.bar(labels, finite, yerr=yerr, color="tab:orange", capsize=3)
    ax.set(ylabel=metric, title=metric)
    return _save(fig, Path(path))
