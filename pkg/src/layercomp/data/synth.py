"""Desk-scale synthetic-shapes dataset.

Each image is a smooth two-tone gradient background with 1..3 pairwise-disjoint
shape instances. Class k renders as a fixed shape kind (circle / triangle /
rectangle, cycling) filled with the class's canonical color plus small pixel
noise, so class appearance is quantitatively checkable after training. The
layout masks are exactly the rasterized shape pixels.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import InvalidInputError
from ..layout import ClassPalette, InstanceMask, SemanticLayout
from .files import canvas_from_uint8, canvas_to_uint8, save_canvas
from .index import DatasetIndex, DatasetRecord, save_index

__all__ = ["CANONICAL_COLORS", "synth_palette", "synth_dataset", "rasterize_shape",
           "canonical_color"]

# Class color anchors in [-1, 1], pairwise distinct, away from the clip range.
CANONICAL_COLORS: tuple[tuple[float, float, float], ...] = (
    (0.7, -0.7, -0.7),   # red
    (-0.7, 0.7, -0.7),   # green
    (-0.7, -0.7, 0.7),   # blue
    (0.7, 0.7, -0.7),    # yellow
    (0.7, -0.7, 0.7),    # magenta
    (-0.7, 0.7, 0.7),    # cyan
)
_COLOR_NAMES = ("red", "green", "blue", "yellow", "magenta", "cyan")
_SHAPE_KINDS = ("circle", "triangle", "rectangle")

NOISE_SIGMA = 0.04


def canonical_color(class_id: int) -> np.ndarray:
    return np.array(CANONICAL_COLORS[class_id], dtype=np.float32)


def synth_palette(n_classes: int) -> ClassPalette:
    if not 1 <= n_classes <= len(CANONICAL_COLORS):
        raise InvalidInputError(
            f"n_classes must be in [1, {len(CANONICAL_COLORS)}], got {n_classes}"
        )
    names = tuple(
        f"{_COLOR_NAMES[k]}-{_SHAPE_KINDS[k % 3]}" for k in range(n_classes)
    )
    colors = tuple(
        tuple(int(round((c + 1) / 2 * 255)) for c in CANONICAL_COLORS[k])
        for k in range(n_classes)
    )
    return ClassPalette(class_names=names, colors=colors)


def rasterize_shape(kind: str, params: dict, size: int) -> np.ndarray:
    """Binary size x size map of the shape. Shared by the generator and by
    tests that re-derive pixel counts."""
    ys, xs = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    if kind == "circle":
        cy, cx, r = params["cy"], params["cx"], params["r"]
        inside = (ys - cy) ** 2 + (xs - cx) ** 2 <= r**2
    elif kind == "rectangle":
        cy, cx, hh, hw = params["cy"], params["cx"], params["hh"], params["hw"]
        inside = (np.abs(ys - cy) <= hh) & (np.abs(xs - cx) <= hw)
    elif kind == "triangle":
        cy, cx, a, b = params["cy"], params["cx"], params["a"], params["b"]
        apex_y, base_y = cy - a, cy + a
        span = (ys - apex_y) / (base_y - apex_y) * b
        inside = (ys >= apex_y) & (ys <= base_y) & (np.abs(xs - cx) <= span)
    else:
        raise InvalidInputError(f"unknown shape kind {kind!r}")
    return inside.astype(np.uint8)


def _sample_shape(rng: np.random.Generator, class_id: int, size: int) -> tuple[str, dict]:
    kind = _SHAPE_KINDS[class_id % 3]
    lo, hi = max(3, size // 10), max(4, size // 5)
    margin = hi + 1
    cy = float(rng.integers(margin, size - margin))
    cx = float(rng.integers(margin, size - margin))
    if kind == "circle":
        params = {"cy": cy, "cx": cx, "r": float(rng.integers(lo, hi))}
    elif kind == "rectangle":
        params = {
            "cy": cy, "cx": cx,
            "hh": float(rng.integers(lo, hi)),
            "hw": float(rng.integers(lo, hi)),
        }
    else:
        params = {
            "cy": cy, "cx": cx,
            "a": float(rng.integers(lo, hi)),
            "b": float(rng.integers(lo, hi)),
        }
    return kind, params


def _gradient_background(rng: np.random.Generator, size: int) -> np.ndarray:
    base = rng.uniform(-0.6, 0.2)
    c1 = np.clip(base + rng.uniform(-0.15, 0.15, size=3), -1, 1)
    c2 = np.clip(base + rng.uniform(-0.15, 0.15, size=3), -1, 1)
    angle = rng.uniform(0, 2 * np.pi)
    ys, xs = np.meshgrid(np.linspace(0, 1, size), np.linspace(0, 1, size), indexing="ij")
    t = (np.cos(angle) * xs + np.sin(angle) * ys)
    t = (t - t.min()) / max(t.max() - t.min(), 1e-9)
    return (c1[None, None, :] * (1 - t[:, :, None]) + c2[None, None, :] * t[:, :, None]).astype(
        np.float32
    )


def synth_dataset(n_images: int, size: int, n_classes: int, seed: int,
                  out_dir: str | Path | None = None) -> DatasetIndex:
    """Generate the dataset; deterministic given seed. With out_dir, images and
    layouts are written to disk and the index references those files."""
    palette = synth_palette(n_classes)
    rng = np.random.default_rng(seed)
    image_dir = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        image_dir = out_dir / "images"
        image_dir.mkdir(parents=True, exist_ok=True)

    records: list[DatasetRecord] = []
    for i in range(n_images):
        img = _gradient_background(rng, size)
        n_inst = int(rng.integers(1, 4))
        instances: list[InstanceMask] = []
        meta_shapes: list[dict] = []
        occupied = np.zeros((size, size), dtype=np.uint8)
        for _ in range(n_inst):
            placed = None
            for _attempt in range(30):
                class_id = int(rng.integers(n_classes))
                kind, params = _sample_shape(rng, class_id, size)
                shape = rasterize_shape(kind, params, size)
                if shape.sum() >= 4 and not np.any(shape & occupied):
                    placed = (class_id, kind, params, shape)
                    break
            if placed is None:
                continue
            class_id, kind, params, shape = placed
            occupied |= shape
            color = canonical_color(class_id)
            noise = rng.normal(0.0, NOISE_SIGMA, size=(size, size, 3)).astype(np.float32)
            fill = np.clip(color[None, None, :] + noise, -1, 1)
            img = np.where(shape[:, :, None] == 1, fill, img)
            data = np.zeros((size, size, n_classes), dtype=np.uint8)
            data[:, :, class_id] = shape
            instances.append(InstanceMask(data=data, class_id=class_id))
            meta_shapes.append({"kind": kind, "class_id": class_id, "params": params})

        layout = SemanticLayout(instances=tuple(instances), height=size, width=size,
                                n_classes=n_classes)
        # Quantize through the 8-bit path so in-memory and on-disk pipelines agree.
        canvas = canvas_from_uint8(canvas_to_uint8(img))
        meta = {"shapes": meta_shapes}
        if image_dir is not None:
            path = image_dir / f"{i:05d}.png"
            save_canvas(path, canvas)
            records.append(DatasetRecord(layout=layout, image_path=path, meta=meta))
        else:
            records.append(DatasetRecord(layout=layout, meta=meta, _image=canvas))

    index = DatasetIndex(records=records, palette=palette)
    if out_dir is not None:
        save_index(index, out_dir)
    return index
