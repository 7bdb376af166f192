"""Canvas and layout file I/O.

Project-wide pixel convention: canvases are H x W x 3 float32 in [-1, 1].
8-bit PNG value k maps to k/255*2-1; saving rounds back, so load(save(x)) is
exact for canvases that originated from 8-bit data.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import InvalidInputError
from ..layout import InstanceMask, SemanticLayout, bbox_of, occupancy_of
from .rle import decode_rle, encode_rle

__all__ = [
    "canvas_from_uint8",
    "canvas_to_uint8",
    "load_canvas",
    "save_canvas",
    "load_layout",
    "save_layout",
    "layout_to_dict",
    "layout_from_dict",
]


def canvas_from_uint8(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float32)
    return arr / 255.0 * 2.0 - 1.0


def canvas_to_uint8(canvas: np.ndarray) -> np.ndarray:
    canvas = np.asarray(canvas, dtype=np.float32)
    scaled = (np.clip(canvas, -1.0, 1.0) + 1.0) / 2.0 * 255.0
    return np.rint(scaled).astype(np.uint8)


def load_canvas(path: str | Path) -> np.ndarray:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"))
    return canvas_from_uint8(arr)


def save_canvas(path: str | Path, canvas: np.ndarray) -> None:
    Image.fromarray(canvas_to_uint8(canvas), mode="RGB").save(path, format="PNG")


def layout_to_dict(layout: SemanticLayout, palette_names: tuple[str, ...] | None = None) -> dict:
    instances = []
    for inst in layout.instances:
        occ = occupancy_of(inst)
        box = bbox_of(occ)
        instances.append(
            {
                "class_id": inst.class_id,
                "rle": encode_rle(occ),
                "bbox": [box.row_min, box.row_max, box.col_min, box.col_max],
            }
        )
    doc = {
        "height": layout.height,
        "width": layout.width,
        "n_classes": layout.n_classes,
        "instances": instances,
    }
    if palette_names is not None:
        doc["palette"] = list(palette_names)
    return doc


def layout_from_dict(doc: dict) -> SemanticLayout:
    try:
        h, w, n = int(doc["height"]), int(doc["width"]), int(doc["n_classes"])
        entries = doc["instances"]
    except KeyError as exc:
        raise InvalidInputError(f"layout document missing field {exc}") from exc
    instances = []
    for entry in entries:
        class_id = int(entry["class_id"])
        channel = decode_rle(entry["rle"], h, w)
        data = np.zeros((h, w, n), dtype=np.uint8)
        data[:, :, class_id] = channel
        instances.append(InstanceMask(data=data, class_id=class_id))
    return SemanticLayout(instances=tuple(instances), height=h, width=w, n_classes=n)


def save_layout(path: str | Path, layout: SemanticLayout,
                palette_names: tuple[str, ...] | None = None) -> None:
    Path(path).write_text(json.dumps(layout_to_dict(layout, palette_names), indent=1))


def load_layout(path: str | Path) -> SemanticLayout:
    return layout_from_dict(json.loads(Path(path).read_text()))
