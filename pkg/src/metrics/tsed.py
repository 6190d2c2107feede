"""
Thresholded symmetric epipolar distance (TSED).

A frame pair is consistent when the median symmetric epipolar distance of its
correspondences is within the threshold; the score is the fraction of consistent
pairs. Correspondences come from an injectable provider.
"""

import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Protocol

import numpy as np
import torch
import torch.nn.functional as F

from src.errors import DomainError
from src.geometry import fundamental_matrix, pixel_grid, project, symmetric_epipolar_distances, unproject
from src.models.camera_types import Camera

logger = logging.getLogger(__name__)


@dataclass
class TsedFrame:
    camera: Camera
    image: torch.Tensor
    depth: np.ndarray | None = None
    valid: np.ndarray | None = None


class CorrespondenceProvider(Protocol):
    def __call__(self, frame_a: TsedFrame, frame_b: TsedFrame) -> tuple[np.ndarray, np.ndarray]: ...


class ReprojectionCorrespondences:
    """Exact matches from frame A's depth reprojected into frame B."""

    def __init__(self, stride: int = 2, border: int = 0):
        self.stride = stride
        self.border = border

    def seeds(self, frame_a: TsedFrame, frame_b: TsedFrame) -> tuple[np.ndarray, np.ndarray]:
        if frame_a.depth is None:
            raise DomainError("reprojection correspondences need a depth map for the source frame")
        u, v = pixel_grid(frame_a.camera.width, frame_a.camera.height)
        u, v = u[:: self.stride, :: self.stride].ravel(), v[:: self.stride, :: self.stride].ravel()
        depth = np.asarray(frame_a.depth, dtype=np.float64)[:: self.stride, :: self.stride].ravel()
        keep = depth > 0
        if frame_a.valid is not None:
            keep &= np.asarray(frame_a.valid, dtype=bool)[:: self.stride, :: self.stride].ravel()
        xs = np.stack([u[keep], v[keep]], axis=-1)
        points = unproject(frame_a.camera, xs, depth[keep])
        xs_b, depth_b = project(frame_b.camera, points)
        b = self.border
        inside = (
            (depth_b > 0)
            & (xs_b[:, 0] >= b)
            & (xs_b[:, 0] <= frame_b.camera.width - b)
            & (xs_b[:, 1] >= b)
            & (xs_b[:, 1] <= frame_b.camera.height - b)
        )
        return xs[inside], xs_b[inside]

    def __call__(self, frame_a: TsedFrame, frame_b: TsedFrame) -> tuple[np.ndarray, np.ndarray]:
        return self.seeds(frame_a, frame_b)


class PatchMatchCorrespondences(ReprojectionCorrespondences):
    """
    Reprojection-seeded block matching in the evaluated images.

    Each seed is refined by the integer offset within `radius` that minimizes the
    sum of squared differences between patches, so images that disagree across
    views pull matches off their epipolar lines.
    """

    def __init__(self, stride: int = 2, patch: int = 5, radius: int = 3):
        super().__init__(stride=stride, border=patch // 2 + radius)
        self.patch = patch
        self.radius = radius

    def _patches(self, image: torch.Tensor, centers: np.ndarray) -> torch.Tensor:
        h, w = image.shape[1:]
        half = self.patch // 2
        offsets = torch.arange(-half, half + 1, dtype=torch.float64)
        cx = torch.as_tensor(centers[:, 0], dtype=torch.float64)[:, None, None] + offsets[None, None, :]
        cy = torch.as_tensor(centers[:, 1], dtype=torch.float64)[:, None, None] + offsets[None, :, None]
        grid = torch.stack([cx.expand(-1, self.patch, -1) / w * 2 - 1, cy.expand(-1, -1, self.patch) / h * 2 - 1], dim=-1)
        sampled = F.grid_sample(image[None].to(torch.float64).expand(len(centers), -1, -1, -1), grid, align_corners=False)
        return sampled.flatten(1)

    def __call__(self, frame_a: TsedFrame, frame_b: TsedFrame) -> tuple[np.ndarray, np.ndarray]:
        xs, seeds = self.seeds(frame_a, frame_b)
        if len(xs) == 0:
            return xs, seeds
        reference = self._patches(frame_a.image, xs)
        best_cost = torch.full((len(xs),), torch.inf, dtype=torch.float64)
        best = np.zeros_like(seeds)
        for dy in range(-self.radius, self.radius + 1):
            for dx in range(-self.radius, self.radius + 1):
                offset = np.array([dx, dy], dtype=np.float64)
                candidate = self._patches(frame_b.image, seeds + offset)
                cost = ((candidate - reference) ** 2).sum(dim=1)
                # Prefer the zero offset on ties.
                cost = cost + 1e-12 * (dx * dx + dy * dy)
                better = (cost < best_cost).numpy()
                best_cost = torch.minimum(best_cost, cost)
                best[better] = offset
        return xs, seeds + best


@dataclass
class TsedResult:
    """Per-threshold consistent fractions; every score is None when no pair could be evaluated."""

    scores: dict[float, float | None]
    evaluated: int
    skipped: int
    degenerate: int
    median_distances: list[float] = field(default_factory=list)

    def as_dict(self) -> dict[str, float | None]:
        return {f"{threshold:g}": score for threshold, score in self.scores.items()}


def frame_pairs(n: int, pairs: str = "consecutive") -> list[tuple[int, int]]:
    if pairs == "consecutive":
        return [(i, i + 1) for i in range(n - 1)]
    if pairs == "all":
        return list(combinations(range(n), 2))
    raise DomainError(f"unknown pairing '{pairs}'")


def tsed(
    frames: list[TsedFrame],
    correspondences: CorrespondenceProvider,
    thresholds: list[float] = (2.0, 4.0, 8.0),
    pairs: str = "consecutive",
) -> TsedResult:
    """Fraction of frame pairs whose median symmetric epipolar distance is within each threshold."""
    if len(frames) < 2:
        raise DomainError(f"TSED needs at least 2 frames, got {len(frames)}")

    medians = []
    degenerate = skipped = 0
    for i, j in frame_pairs(len(frames), pairs):
        F_ab = fundamental_matrix(frames[i].camera, frames[j].camera)
        if F_ab.degenerate:
            degenerate += 1
            continue
        xs, xs_b = correspondences(frames[i], frames[j])
        if len(xs) == 0:
            skipped += 1
            continue
        medians.append(float(np.median(symmetric_epipolar_distances(F_ab.matrix, xs, xs_b))))

    if degenerate or skipped:
        logger.info("TSED skipped pairs", extra={"degenerate": degenerate, "no_matches": skipped})
    evaluated = len(medians)
    if not evaluated:
        logger.warning("TSED has no evaluable frame pairs", extra={"pairs": degenerate + skipped})
    scores = {float(t): (sum(m <= t for m in medians) / evaluated if evaluated else None) for t in thresholds}
    return TsedResult(scores=scores, evaluated=evaluated, skipped=skipped + degenerate, degenerate=degenerate, median_distances=medians)
