"""Request/response models for the discovery service.

Binary payloads (FMP1 feature maps, PGM masks and heatmaps, checkpoint
containers) travel base64-encoded inside JSON.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class DiscoveryOptions(BaseModel):
    threshold: float = Field(default=0.5, gt=0.0, lt=1.0)
    eig_index: int = Field(default=1, ge=1)
    sign_rule: Literal["border-negative", "none"] = "border-negative"
    threshold_mode: Literal["minmax", "median"] = "minmax"
    lambda1: float = 0.5
    lambda2: float = 1.5
    chunk_frames: int = Field(default=20, ge=1)


class DiscoverRequest(BaseModel):
    features_b64: str
    options: DiscoveryOptions = DiscoveryOptions()


class DiscoverResponse(BaseModel):
    mask_b64: str
    heatmap_b64: str
    degenerate: bool


class BoxesRequest(BaseModel):
    mask_b64: str
    min_area_frac: float = Field(default=0.0025, ge=0.0)
    dedup_iou: float = Field(default=0.7, gt=0.0)


class BoxesResponse(BaseModel):
    boxes: list[tuple[int, int, int, int]]


class EvalItem(BaseModel):
    stem: str
    pred_b64: str
    gt_b64: str


class EvalRequest(BaseModel):
    items: list[EvalItem]
    beta_sq: float = Field(default=0.3, gt=0.0)
    threshold: float = Field(default=0.5, gt=0.0, lt=1.0)


class EvalResponse(BaseModel):
    f_beta_max: float
    iou: float
    accuracy: float
    jaccard: float
    corloc: float
    n_images: int
    report_text: str


class VideoRequest(BaseModel):
    rgb_b64: list[str]
    flow_b64: list[str]
    options: DiscoveryOptions = DiscoveryOptions()


class VideoResponse(BaseModel):
    masks_b64: list[str]


class TrainRequest(BaseModel):
    epochs: int = Field(default=30, ge=1)
    batch: int = Field(default=16, ge=2)
    lr: float = Field(default=7.5e-3, ge=0.0)
    seed: int = Field(default=0, ge=0)
    n_scenes: int = Field(default=512, ge=2)
    tau: float = Field(default=0.1, gt=0.0)
    alpha: float = 5.0
    beta: float = 1.0
    eval_scenes: int = Field(default=64, ge=1)


class TrainResponse(BaseModel):
    checkpoint_b64: str
    trace: list[float]
    baseline_iou: float
    trained_iou: float
    heldout_seed: int


class SuiteOutcome(BaseModel):
    name: str
    passed: bool
    detail: str


class SelfcheckResponse(BaseModel):
    suites: list[SuiteOutcome]
    ok: bool
