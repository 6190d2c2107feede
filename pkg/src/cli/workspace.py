"""
Run directory layout, single-writer lock, stage markers and output validation.

<runs_root>/<name>-seed<seed>/
    run.json                      config + derived seeds
    dataset/                      curated pairs + manifest.json
    fixer/fixer.dfx, curves.csv
    scenes/<scene>/               baseline.dfx, single_shot.dfx, progressive.dfx, reference.json, targets.json
    rounds/<scene>/round_XXX/     progressive update snapshots
    renders/<config>/<scene>/NNN.png
    metrics/                      per-config reports, latency.csv, heatmaps
    ablation.csv
    plots/
"""

import json
import os
from pathlib import Path

from src.errors import MissingArtifactError, OutputValidationError, RunLockedError
from src.models.config_types import RunConfig
from src.seeds import module_seeds

SEED_MODULES = ["curation", "fixer", "benchmark", "pipeline", "experiments"]
LOCK_NAME = "run.lock"


class RunDirectory:
    def __init__(self, config: RunConfig):
        self.config = config
        self.root = Path(config.output_root) / f"{config.name}-seed{config.seed}"
        self._lock: Path | None = None

    def __enter__(self) -> "RunDirectory":
        self.root.mkdir(parents=True, exist_ok=True)
        lock = self.root / LOCK_NAME
        try:
            fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError as e:
            raise RunLockedError(f"{self.root} is in use by another process", {"lock": str(lock)}) from e
        with os.fdopen(fd, "w") as f:
            f.write(str(os.getpid()))
        self._lock = lock
        self.write_run_record()
        return self

    def __exit__(self, *exc) -> None:
        if self._lock is not None:
            self._lock.unlink(missing_ok=True)
            self._lock = None

    @property
    def seeds(self) -> dict[str, int]:
        return module_seeds(self.config.seed, SEED_MODULES)

    def write_run_record(self) -> Path:
        path = self.root / "run.json"
        record = {"config": self.config.model_dump(mode="json"), "seeds": self.seeds}
        path.write_text(json.dumps(record, indent=2, sort_keys=True))
        return path

    @property
    def dataset(self) -> Path:
        return self.root / "dataset"

    @property
    def fixer_path(self) -> Path:
        return self.root / "fixer" / "fixer.dfx"

    @property
    def curves_path(self) -> Path:
        return self.root / "fixer" / "curves.csv"

    @property
    def metrics(self) -> Path:
        return self.root / "metrics"

    @property
    def plots(self) -> Path:
        return self.root / "plots"

    @property
    def ablation_csv(self) -> Path:
        return self.root / "ablation.csv"

    def scene_dir(self, scene_id: str) -> Path:
        return self.root / "scenes" / scene_id

    def rounds_dir(self, scene_id: str) -> Path:
        return self.root / "rounds" / scene_id

    def renders_dir(self, label: str, scene_id: str) -> Path:
        return self.root / "renders" / label / scene_id

    def marker(self, stage: str) -> Path:
        return self.root / f".done_{stage}"

    def is_done(self, stage: str) -> bool:
        return self.marker(stage).exists()

    def mark_done(self, stage: str, outputs: list[Path]) -> None:
        validate_outputs(outputs)
        self.marker(stage).write_text(json.dumps([str(p.relative_to(self.root)) for p in outputs], indent=2))

    def clear(self, stage: str) -> None:
        self.marker(stage).unlink(missing_ok=True)


def require(*paths: Path) -> None:
    for path in paths:
        if not path.exists():
            raise MissingArtifactError(path)


def validate_outputs(paths: list[Path]) -> None:
    """Every declared output exists; JSON files parse and CSV files are non-empty."""
    for path in paths:
        if not path.exists():
            raise OutputValidationError(f"declared output missing: {path}", {"path": str(path)})
        if path.suffix == ".json":
            try:
                json.loads(path.read_text())
            except json.JSONDecodeError as e:
                raise OutputValidationError(f"malformed JSON: {path}", {"path": str(path), "error": str(e)}) from e
        elif path.suffix == ".csv" and not path.read_text().strip():
            raise OutputValidationError(f"empty CSV: {path}", {"path": str(path)})
