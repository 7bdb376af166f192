"""Layout algebra: instance masks, occupancy maps, aggregation, boxes, affine transforms.

A scene layout is an ordered sequence of binary instance masks. Each mask is a
dense H x W x N array ({0,1}, uint8) with all foreground pixels in a single
class channel. All operations here are pure functions over immutable inputs.
Coordinate convention: axis 0 = rows (y, downward), axis 1 = columns (x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyLayoutError,
    EmptyMaskError,
    InvalidInputError,
    OutOfFrameError,
)

__all__ = [
    "ClassPalette",
    "InstanceMask",
    "SemanticLayout",
    "BBox",
    "AffineTransform",
    "occupancy_of",
    "aggregate",
    "aggregate_occupancy",
    "bbox_of",
    "bbox_mask",
    "mask_out",
    "apply_affine",
]


@dataclass(frozen=True)
class ClassPalette:
    """Ordered category labels plus per-class display colors (render-only)."""

    class_names: tuple[str, ...]
    colors: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        if len(self.class_names) < 1:
            raise InvalidInputError("palette needs at least one class")
        if len(set(self.class_names)) != len(self.class_names):
            raise InvalidInputError("class names must be unique")
        if len(self.colors) != len(self.class_names):
            raise InvalidInputError("one color per class required")

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


def _as_mask_array(mask) -> np.ndarray:
    """Accept an InstanceMask or a raw H x W x N array."""
    data = mask.data if isinstance(mask, InstanceMask) else np.asarray(mask)
    if data.ndim != 3:
        raise InvalidInputError(f"instance mask must be H x W x N, got shape {data.shape}")
    return data


@dataclass(frozen=True)
class InstanceMask:
    """One foreground object: binary H x W x N tensor, nonzero in a single channel."""

    data: np.ndarray
    class_id: int

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.uint8)
        object.__setattr__(self, "data", data)
        if data.ndim != 3:
            raise InvalidInputError(f"mask must be H x W x N, got shape {data.shape}")
        n = data.shape[2]
        if not 0 <= self.class_id < n:
            raise InvalidInputError(f"class_id {self.class_id} outside [0, {n})")
        if data.max(initial=0) > 1:
            raise InvalidInputError("mask values must be in {0, 1}")
        occupied = data.sum(axis=(0, 1))
        if occupied[self.class_id] == 0:
            raise EmptyMaskError("instance mask has no foreground pixel")
        other = int(occupied.sum() - occupied[self.class_id])
        if other != 0:
            raise InvalidInputError("only the class_id channel may contain nonzero entries")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True)
class SemanticLayout:
    """Ordered sequence of instance masks sharing one H x W x N shape."""

    instances: tuple[InstanceMask, ...]
    height: int
    width: int
    n_classes: int

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        expected = (self.height, self.width, self.n_classes)
        for i, inst in enumerate(self.instances):
            if inst.data.shape != expected:
                raise InvalidInputError(
                    f"instance {i} has shape {inst.data.shape}, layout is {expected}"
                )

    def __len__(self) -> int:
        return len(self.instances)


@dataclass(frozen=True)
class BBox:
    """Axis-aligned pixel box, all coordinates inclusive."""

    row_min: int
    row_max: int
    col_min: int
    col_max: int

    def __post_init__(self):
        if not (0 <= self.row_min <= self.row_max and 0 <= self.col_min <= self.col_max):
            raise InvalidInputError(f"degenerate box {self}")

    @property
    def height(self) -> int:
        return self.row_max - self.row_min + 1

    @property
    def width(self) -> int:
        return self.col_max - self.col_min + 1


@dataclass(frozen=True)
class AffineTransform:
    """Translation (dx columns, dy rows), rotation (degrees about the mask
    centroid, in index space) and isotropic scale."""

    dx: float = 0.0
    dy: float = 0.0
    rotation: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.scale <= 0:
            raise InvalidInputError(f"scale must be positive, got {self.scale}")


def occupancy_of(mask) -> np.ndarray:
    """Per-pixel channel max: 1 where any class channel is set."""
    data = _as_mask_array(mask)
    return data.max(axis=2).astype(np.uint8)


def aggregate(layout: SemanticLayout) -> np.ndarray:
    """Elementwise max over all instance masks (H x W x N)."""
    if len(layout) == 0:
        raise EmptyLayoutError("cannot aggregate an empty layout")
    out = layout.instances[0].data.copy()
    for inst in layout.instances[1:]:
        np.maximum(out, inst.data, out=out)
    return out


def aggregate_occupancy(agg: np.ndarray) -> np.ndarray:
    """Channel max of an aggregated map (H x W)."""
    return occupancy_of(agg)


def bbox_of(occ: np.ndarray, padding: int = 0) -> BBox:
    """Tightest box containing all nonzero pixels, expanded by `padding` and
    clamped to the frame."""
    occ = np.asarray(occ)
    if occ.ndim != 2:
        raise InvalidInputError(f"occupancy map must be H x W, got shape {occ.shape}")
    rows = np.flatnonzero(occ.any(axis=1))
    cols = np.flatnonzero(occ.any(axis=0))
    if rows.size == 0:
        raise EmptyMaskError("occupancy map has no occupied pixel")
    h, w = occ.shape
    return BBox(
        row_min=max(int(rows[0]) - padding, 0),
        row_max=min(int(rows[-1]) + padding, h - 1),
        col_min=max(int(cols[0]) - padding, 0),
        col_max=min(int(cols[-1]) + padding, w - 1),
    )


def bbox_mask(box: BBox, height: int, width: int) -> np.ndarray:
    """Binary H x W map: 1 inside the box (inclusive), 0 outside."""
    if box.row_max >= height or box.col_max >= width:
        raise InvalidInputError(f"box {box} exceeds frame {height}x{width}")
    out = np.zeros((height, width), dtype=np.uint8)
    out[box.row_min : box.row_max + 1, box.col_min : box.col_max + 1] = 1
    return out


def mask_out(image: np.ndarray, occ: np.ndarray) -> np.ndarray:
    """Zero all channels of pixels where occ == 1; other pixels pass through exactly."""
    image = np.asarray(image)
    occ = np.asarray(occ)
    if image.shape[:2] != occ.shape:
        raise InvalidInputError(
            f"image {image.shape} and occupancy {occ.shape} disagree on H x W"
        )
    keep = (occ == 0)
    if image.ndim == 3:
        keep = keep[:, :, None]
    return np.where(keep, image, np.zeros((), dtype=image.dtype))


def _centroid(occ: np.ndarray) -> tuple[float, float]:
    rows, cols = np.nonzero(occ)
    return float(rows.mean()), float(cols.mean())


def apply_affine(mask: InstanceMask, t: AffineTransform) -> InstanceMask:
    """Resample a binary mask under translate/rotate/scale with nearest-neighbor.

    Rotation and scale are applied about the centroid of the input mask's
    occupied pixels; output pixels are pulled from the inverse-mapped source
    location, which keeps the mask binary. Raises OutOfFrameError when no
    pixel survives.
    """
    occ = occupancy_of(mask)
    cy, cx = _centroid(occ)
    h, w = occ.shape

    theta = math.radians(t.rotation)
    cos_t, sin_t = math.cos(theta), math.sin(theta)

    # Inverse map: undo translation, then inverse-rotate/scale about centroid.
    rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    ry = rows - cy - t.dy
    rx = cols - cx - t.dx
    src_r = (cos_t * ry + sin_t * rx) / t.scale + cy
    src_c = (-sin_t * ry + cos_t * rx) / t.scale + cx

    sr = np.rint(src_r).astype(np.int64)
    sc = np.rint(src_c).astype(np.int64)
    inside = (sr >= 0) & (sr < h) & (sc >= 0) & (sc < w)
    sr = np.clip(sr, 0, h - 1)
    sc = np.clip(sc, 0, w - 1)

    channel = mask.data[:, :, mask.class_id]
    moved = np.where(inside, channel[sr, sc], 0).astype(np.uint8)
    if moved.sum() == 0:
        raise OutOfFrameError("transform moved the mask fully out of frame")

    out = np.zeros_like(mask.data)
    out[:, :, mask.class_id] = moved
    return InstanceMask(data=out, class_id=mask.class_id)
