"""Mean intersection-over-union pooled over an image set.

Label convention: 0 is background, class c occupies label c + 1. Counts are
pooled over the whole set per class; the mean covers classes present in the
ground truth, background excluded.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError
from ..layout import SemanticLayout, occupancy_of

__all__ = ["layout_to_labels", "mean_iou"]


def layout_to_labels(layout: SemanticLayout) -> np.ndarray:
    """H x W int32 label map; later instances overwrite earlier ones."""
    labels = np.zeros((layout.height, layout.width), dtype=np.int32)
    for inst in layout.instances:
        labels[occupancy_of(inst) == 1] = inst.class_id + 1
    return labels


def _as_label_maps(items) -> list[np.ndarray]:
    maps = []
    for item in items:
        if isinstance(item, SemanticLayout):
            maps.append(layout_to_labels(item))
        else:
            arr = np.asarray(item)
            if arr.ndim != 2:
                raise InvalidInputError(f"label map must be H x W, got {arr.shape}")
            maps.append(arr.astype(np.int32))
    return maps


def mean_iou(pred_labels, gt_layouts) -> tuple[dict[int, float], float]:
    """Per-class IoU (keyed by class id, not label) and their mean."""
    preds = _as_label_maps(pred_labels)
    gts = _as_label_maps(gt_layouts)
    if len(preds) != len(gts):
        raise InvalidInputError(f"{len(preds)} predictions vs {len(gts)} ground truths")
    if len(preds) == 0:
        raise InvalidInputError("empty evaluation set")
    gt_labels_present = set()
    for gt in gts:
        gt_labels_present.update(np.unique(gt).tolist())
    gt_labels_present.discard(0)
    if not gt_labels_present:
        raise InvalidInputError("no foreground pixels in the entire ground-truth set")

    per_class: dict[int, float] = {}
    for label in sorted(gt_labels_present):
        inter = 0
        union = 0
        for pred, gt in zip(preds, gts):
            if pred.shape != gt.shape:
                raise InvalidInputError(
                    f"prediction shape {pred.shape} != ground truth {gt.shape}"
                )
            p = pred == label
            g = gt == label
            inter += int(np.sum(p & g))
            union += int(np.sum(p | g))
        per_class[label - 1] = inter / union if union > 0 else 0.0
    return per_class, float(np.mean(list(per_class.values())))
