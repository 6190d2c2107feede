"""
Pydantic models for records written to disk: dataset manifests, metric reports
and pipeline round logs.
"""

import math
from collections import Counter
from enum import StrEnum
from typing import Any, Literal

from pydantic import BaseModel, Field, field_serializer, model_validator


class CurationStrategy(StrEnum):
    SPARSE_RECONSTRUCTION = "sparse_reconstruction"
    CYCLE_RECONSTRUCTION = "cycle_reconstruction"
    CROSS_REFERENCE = "cross_reference"
    MODEL_UNDERFITTING = "model_underfitting"


class SampleRecord(BaseModel):
    """One paired sample as listed in the manifest."""

    sample_id: str = Field(description="<scene_id>/<strategy>/<index>")
    scene_id: str
    strategy: CurationStrategy
    family: Literal["radiance_field", "gaussian_cloud"] = Field(description="Representation that produced the degraded image")
    split: Literal["train", "val"]
    frame_index: int = Field(description="Index of the camera within its source trajectory")
    n_references: int = Field(ge=0)
    seed: int = Field(description="Seed of the fit that produced the sample")

    @property
    def directory(self) -> str:
        return self.sample_id


class DatasetManifest(BaseModel):
    """Everything needed to reload a curated dataset in its original order."""

    schema_version: Literal[1] = 1
    seed: int
    splits: dict[str, Literal["train", "val"]] = Field(description="scene_id -> split")
    counts: dict[str, int] = Field(default_factory=dict, description="Samples per strategy")
    family_counts: dict[str, int] = Field(default_factory=dict)
    samples: list[SampleRecord] = Field(default_factory=list)

    @model_validator(mode="after")
    def _consistent(self) -> "DatasetManifest":
        for sample in self.samples:
            if self.splits.get(sample.scene_id) != sample.split:
                raise ValueError(f"sample {sample.sample_id} split '{sample.split}' disagrees with its scene")
        counted = Counter(s.strategy.value for s in self.samples)
        if self.counts and {k: v for k, v in self.counts.items() if v} != dict(counted):
            raise ValueError(f"per-strategy counts {self.counts} do not match samples {dict(counted)}")
        return self

    def split(self, name: str) -> list[SampleRecord]:
        return [s for s in self.samples if s.split == name]


def _finite_or_tag(value: float | None) -> float | str | None:
    if value is None or math.isfinite(value):
        return value
    return "inf" if value > 0 else "-inf"


class ViewMetrics(BaseModel):
    """Per-view quality row."""

    view_id: str
    psnr: float = Field(description="dB; inf when the images are identical")
    ssim: float
    perceptual: float = Field(description="LPIPS-proxy distance")
    masked: bool = Field(default=False, description="True when a visibility mask was applied")
    mask_fraction: float = Field(default=1.0, ge=0, le=1)

    @field_serializer("psnr")
    def _serialize_psnr(self, value: float):
        return _finite_or_tag(value)


class AggregateMetrics(BaseModel):
    psnr: float
    ssim: float
    perceptual: float
    fid: float | None = Field(default=None, description="FID (proxy features)")
    tsed: dict[str, float | None] = Field(
        default_factory=dict, description="threshold -> fraction of consistent pairs, None when no pair was evaluated"
    )
    tsed_evaluated: int = 0
    tsed_skipped: int = 0
    tsed_degenerate: int = 0

    @field_serializer("psnr")
    def _serialize_psnr(self, value: float):
        return _finite_or_tag(value)


class MetricsReport(BaseModel):
    """Per-view rows, aggregates and the settings that produced them."""

    rows: list[ViewMetrics]
    aggregates: AggregateMetrics
    config: dict[str, Any] = Field(default_factory=dict, description="Thresholds and mask policy")
    provenance: dict[str, Any] = Field(default_factory=dict)

    @classmethod
    def from_rows(cls, rows: list[ViewMetrics], **kwargs) -> "MetricsReport":
        """Build aggregates whose means are the means of `rows`."""
        n = max(len(rows), 1)
        aggregates = AggregateMetrics(
            psnr=sum(r.psnr for r in rows) / n,
            ssim=sum(r.ssim for r in rows) / n,
            perceptual=sum(r.perceptual for r in rows) / n,
            **kwargs.pop("aggregates", {}),
        )
        return cls(rows=rows, aggregates=aggregates, **kwargs)


class RoundLog(BaseModel):
    """Bookkeeping of one progressive-update round."""

    round: int
    pseudo_views_added: int
    training_set_size: int
    final_train_loss: float
    mean_target_distance: float = Field(description="Mean pose distance from the new pseudo cameras to their targets")
    fix_latency_ms: float


class LatencyRecord(BaseModel):
    """Wall-clock timing of one post-render fix."""

    camera_index: int
    render_ms: float
    fix_ms: float
