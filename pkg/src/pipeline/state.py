"""
Training set of a progressive update: fixed reference views plus append-only pseudo views.
"""

from dataclasses import dataclass, field

import torch

from src.errors import PipelineError
from src.models.camera_types import Camera
from src.scene import TrainingView


def camera_key(camera: Camera) -> tuple:
    """Identity of a view: its intrinsics and pose record."""
    return tuple(camera.to_record().values())


@dataclass(frozen=True)
class ReferenceEntry:
    camera: Camera
    image: torch.Tensor
    weight: float = 1.0


@dataclass(frozen=True)
class PseudoEntry:
    camera: Camera
    image: torch.Tensor
    weight: float
    round_added: int
    target_index: int


@dataclass
class TrainingSetState:
    """Reference entries are fixed at construction; pseudo entries are only ever appended."""

    references: tuple[ReferenceEntry, ...]
    pseudo: list[PseudoEntry] = field(default_factory=list)

    @classmethod
    def from_views(cls, views: list[tuple[Camera, torch.Tensor]]) -> "TrainingSetState":
        return cls(references=tuple(ReferenceEntry(camera, image) for camera, image in views))

    def __len__(self) -> int:
        return len(self.references) + len(self.pseudo)

    @property
    def cameras(self) -> list[Camera]:
        return [e.camera for e in self.references] + [e.camera for e in self.pseudo]

    def views(self) -> list[TrainingView]:
        return [TrainingView(e.camera, e.image, e.weight) for e in (*self.references, *self.pseudo)]

    def _reference_keys(self) -> set[tuple]:
        return {camera_key(e.camera) for e in self.references}

    def append(self, entries: list[PseudoEntry]) -> None:
        if any(isinstance(e, ReferenceEntry) for e in entries):
            raise PipelineError("a pseudo view would overwrite a reference view")
        reference_keys = self._reference_keys()
        clashes = [e.target_index for e in entries if camera_key(e.camera) in reference_keys]
        if clashes:
            raise PipelineError("a pseudo view would overwrite a reference view", {"targets": clashes})
        self.pseudo.extend(entries)

    def pseudo_for_round(self, round_index: int) -> list[PseudoEntry]:
        return [e for e in self.pseudo if e.round_added == round_index]

    def check_invariants(self, rounds_done: int, n_targets: int) -> None:
        if len(self) != len(self.references) + rounds_done * n_targets:
            raise PipelineError(
                f"training set has {len(self)} views, expected {len(self.references)} + {rounds_done} x {n_targets}",
                {"size": len(self), "rounds": rounds_done},
            )
        reference_keys = self._reference_keys()
        if any(camera_key(e.camera) in reference_keys for e in self.pseudo):
            raise PipelineError("a pseudo view shares its camera with a reference view", {"rounds": rounds_done})
        if {id(e.image) for e in self.references} & {id(e.image) for e in self.pseudo}:
            raise PipelineError("reference and pseudo views share image storage")
