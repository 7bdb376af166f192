"""End-to-end evaluation: compose scenes from dataset layouts, score them.

Scenes are composed from layouts with random seeds, FID is computed against
the dataset images, and generated images are segmented and compared with the
layouts they were conditioned on (train and validation splits separately,
mirroring a two-column report). The report names its provider and segmenter
so numbers from different feature spaces are never conflated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..composer import ComposerEngine, compose
from ..data import DatasetIndex
from ..errors import InvalidInputError
from .fid import fid
from .iou import mean_iou

__all__ = ["EvalReport", "eval_protocol"]


@dataclass
class EvalReport:
    fid: float
    iou_train_per_class: dict[int, float]
    iou_train_mean: float
    iou_val_per_class: dict[int, float]
    iou_val_mean: float
    n_images: int
    seed: int
    mode: str
    provider: str
    segmenter: str
    checkpoints: dict

    def to_dict(self) -> dict:
        return {
            "fid": self.fid,
            "iou": {
                "train": {"per_class": {str(k): v for k, v in
                                        self.iou_train_per_class.items()},
                          "mean": self.iou_train_mean},
                "val": {"per_class": {str(k): v for k, v in
                                      self.iou_val_per_class.items()},
                        "mean": self.iou_val_mean},
            },
            "n_images": self.n_images,
            "seed": self.seed,
            "mode": self.mode,
            "provider": self.provider,
            "segmenter": self.segmenter,
            "checkpoints": self.checkpoints,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))


def _compose_set(engine: ComposerEngine, index: DatasetIndex, n_images: int,
                 rng: np.random.Generator, mode: str):
    """Scenes composed from sampled layouts; returns (images, layouts)."""
    picks = rng.integers(0, len(index.records), size=n_images)
    images, layouts = [], []
    for i in picks:
        layout = index.records[int(i)].layout
        seeds = [int(s) for s in rng.integers(0, 2 ** 31 - 1,
                                              size=len(layout.instances) + 1)]
        images.append(compose(engine, layout, seeds, mode=mode))
        layouts.append(layout)
    return images, layouts


def eval_protocol(engine: ComposerEngine, train_index: DatasetIndex,
                  val_index: DatasetIndex, n_images: int, seed: int,
                  provider, segmenter, mode: str = "raw") -> EvalReport:
    if n_images < 2:
        raise InvalidInputError("need at least 2 images for covariance estimation")
    rng = np.random.default_rng(seed)
    train_images, train_layouts = _compose_set(engine, train_index, n_images, rng, mode)
    val_images, val_layouts = _compose_set(engine, val_index, n_images, rng, mode)

    real = [rec.image for rec in train_index.records]
    fid_value = fid(real, train_images, provider)

    train_pred = segmenter.segment(train_images)
    val_pred = segmenter.segment(val_images)
    train_per_class, train_mean = mean_iou(list(train_pred), train_layouts)
    val_per_class, val_mean = mean_iou(list(val_pred), val_layouts)

    return EvalReport(
        fid=fid_value,
        iou_train_per_class=train_per_class, iou_train_mean=train_mean,
        iou_val_per_class=val_per_class, iou_val_mean=val_mean,
        n_images=n_images, seed=seed, mode=mode,
        provider=provider.name, segmenter=segmenter.name,
        checkpoints=engine.checkpoint_info,
    )
