"""
On-disk state of a progressive update, resumable from the latest complete round.

<run>/rounds/round_XXX/{cameras.json, pseudo.dfx, pseudo_YY.png, scene.dfx, metrics.csv, latency.json, COMPLETE}
"""

import csv
import json
import logging
from pathlib import Path

import torch

from src.models.camera_types import Camera
from src.models.record_types import RoundLog
from src.pipeline.state import PseudoEntry, TrainingSetState
from src.scene import SceneRepresentation, load_scene, save_scene
from src.storage import read_container, save_png, write_container

logger = logging.getLogger(__name__)

COMPLETE_MARKER = "COMPLETE"


class RoundWriter:
    """Writes and reads per-round snapshots under one directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def round_dir(self, round_index: int) -> Path:
        return self.root / f"round_{round_index:03d}"

    def write_round(self, round_index: int, scene: SceneRepresentation, entries: list[PseudoEntry], log: RoundLog) -> Path:
        directory = self.round_dir(round_index)
        directory.mkdir(parents=True, exist_ok=True)
        records = [
            {"camera": e.camera.to_record(), "weight": e.weight, "target_index": e.target_index, "round": e.round_added}
            for e in entries
        ]
        (directory / "cameras.json").write_text(json.dumps(records, indent=2))
        write_container(
            directory / "pseudo.dfx",
            "pseudo_views",
            {"count": len(entries)},
            {f"view_{i:02d}": e.image.detach().cpu().numpy() for i, e in enumerate(entries)},
        )
        for i, e in enumerate(entries):
            save_png(directory / f"pseudo_{i:02d}.png", e.image)
        save_scene(directory / "scene.dfx", scene)
        row = log.model_dump(exclude={"fix_latency_ms"})
        (directory / "latency.json").write_text(json.dumps({"fix_latency_ms": log.fix_latency_ms}))
        with open(directory / "metrics.csv", "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(row), lineterminator="\n")
            writer.writeheader()
            writer.writerow(row)
        (directory / COMPLETE_MARKER).touch()
        return directory

    def completed_rounds(self) -> list[int]:
        if not self.root.exists():
            return []
        rounds = []
        for path in sorted(self.root.glob("round_*")):
            if (path / COMPLETE_MARKER).exists():
                rounds.append(int(path.name.split("_")[1]))
        # Only a gap-free prefix is resumable.
        prefix = []
        for expected, found in enumerate(rounds, start=1):
            if expected != found:
                break
            prefix.append(found)
        return prefix

    def read_entries(self, round_index: int, dtype: torch.dtype = torch.float32) -> list[PseudoEntry]:
        directory = self.round_dir(round_index)
        records = json.loads((directory / "cameras.json").read_text())
        blocks = read_container(directory / "pseudo.dfx", expected_kind="pseudo_views").blocks
        return [
            PseudoEntry(
                camera=Camera.from_record(r["camera"]),
                image=torch.as_tensor(blocks[f"view_{i:02d}"], dtype=dtype),
                weight=r["weight"],
                round_added=r["round"],
                target_index=r["target_index"],
            )
            for i, r in enumerate(records)
        ]

    def read_log(self, round_index: int) -> RoundLog:
        with open(self.round_dir(round_index) / "metrics.csv", newline="") as f:
            row = next(csv.DictReader(f))
        latency = json.loads((self.round_dir(round_index) / "latency.json").read_text())
        return RoundLog.model_validate({**row, **latency})

    def resume(self, state: TrainingSetState) -> tuple[int, SceneRepresentation | None, list[RoundLog]]:
        """Append stored pseudo views to `state`; return (last round, its scene, logs)."""
        rounds = self.completed_rounds()
        if not rounds:
            return 0, None, []
        for r in rounds:
            state.append(self.read_entries(r))
        last = rounds[-1]
        logger.info("Resuming progressive update", extra={"round": last, "root": str(self.root)})
        return last, load_scene(self.round_dir(last) / "scene.dfx"), [self.read_log(r) for r in rounds]
