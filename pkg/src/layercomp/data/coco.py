"""COCO-style annotation ingestion.

Consumes the standard instances schema (images / annotations / categories with
polygon or RLE segmentation), keeps only images containing at least one
instance of the requested classes, and resizes both images (bilinear) and
masks (nearest-neighbor) to size x size. Missing image files are skipped and
counted; malformed documents raise a parse error.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from ..errors import InvalidInputError
from ..layout import ClassPalette, InstanceMask, SemanticLayout
from .files import canvas_from_uint8, save_canvas
from .index import DatasetIndex, DatasetRecord, save_index

__all__ = ["ingest_coco", "segmentation_to_mask"]

logger = logging.getLogger(__name__)

# Display colors for ingested classes, cycled when more classes than entries.
_DISPLAY_COLORS = (
    (230, 80, 60), (90, 190, 90), (70, 120, 220),
    (230, 200, 60), (200, 80, 200), (80, 200, 210),
)


def _decode_uncompressed_rle(counts: list[int], h: int, w: int) -> np.ndarray:
    # COCO RLE runs are column-major, starting with the zero run.
    flat = np.zeros(h * w, dtype=np.uint8)
    pos, value = 0, 0
    for c in counts:
        if value:
            flat[pos : pos + c] = 1
        pos += c
        value ^= 1
    if pos != h * w:
        raise InvalidInputError(f"RLE counts cover {pos} pixels, expected {h * w}")
    return flat.reshape((w, h)).T


def _decode_compressed_rle(counts: str, h: int, w: int) -> np.ndarray:
    # pycocotools LEB128-style string encoding.
    decoded: list[int] = []
    pos = 0
    data = counts.encode("ascii")
    while pos < len(data):
        value, k, more = 0, 0, True
        while more:
            c = data[pos] - 48
            value |= (c & 0x1F) << (5 * k)
            more = bool(c & 0x20)
            pos += 1
            k += 1
        if value & (1 << (5 * k - 1)):
            value -= 1 << (5 * k)
        if len(decoded) > 2:
            value += decoded[-2]
        decoded.append(value)
    return _decode_uncompressed_rle(decoded, h, w)


def _rasterize_polygons(polygons: list[list[float]], h: int, w: int) -> np.ndarray:
    img = Image.new("L", (w, h), 0)
    draw = ImageDraw.Draw(img)
    for poly in polygons:
        if len(poly) >= 6:
            draw.polygon([tuple(p) for p in zip(poly[0::2], poly[1::2])], fill=1)
    return np.asarray(img, dtype=np.uint8)


def segmentation_to_mask(segmentation, h: int, w: int) -> np.ndarray:
    """Rasterize a COCO segmentation field (polygon list or RLE dict) to H x W binary."""
    if isinstance(segmentation, list):
        return _rasterize_polygons(segmentation, h, w)
    if isinstance(segmentation, dict):
        size = segmentation.get("size", [h, w])
        counts = segmentation["counts"]
        if isinstance(counts, str):
            mask = _decode_compressed_rle(counts, size[0], size[1])
        else:
            mask = _decode_uncompressed_rle(list(counts), size[0], size[1])
        return mask
    raise InvalidInputError(f"unsupported segmentation type {type(segmentation).__name__}")


def _resize_mask(mask: np.ndarray, size: int) -> np.ndarray:
    img = Image.fromarray(mask * 255, mode="L").resize((size, size), Image.NEAREST)
    return (np.asarray(img) > 0).astype(np.uint8)


def _resize_image(arr: np.ndarray, size: int) -> np.ndarray:
    return np.asarray(
        Image.fromarray(arr, mode="RGB").resize((size, size), Image.BILINEAR)
    )


def ingest_coco(annotation_file: str | Path, image_dir: str | Path,
                class_filter: list[str], size: int,
                out_dir: str | Path) -> DatasetIndex:
    if not class_filter:
        raise InvalidInputError("class_filter must list at least one class name")
    try:
        doc = json.loads(Path(annotation_file).read_text())
        images = {img["id"]: img for img in doc["images"]}
        categories = {cat["name"]: cat["id"] for cat in doc["categories"]}
        annotations = doc["annotations"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InvalidInputError(f"malformed annotation document: {exc}") from exc

    missing = [name for name in class_filter if name not in categories]
    if missing:
        raise InvalidInputError(f"classes not present in annotations: {missing}")
    cat_to_channel = {categories[name]: k for k, name in enumerate(class_filter)}
    n_classes = len(class_filter)

    by_image: dict[int, list[dict]] = {}
    for ann in annotations:
        if ann.get("category_id") in cat_to_channel:
            by_image.setdefault(ann["image_id"], []).append(ann)

    image_dir = Path(image_dir)
    out_dir = Path(out_dir)
    out_images = out_dir / "images"
    out_images.mkdir(parents=True, exist_ok=True)

    palette = ClassPalette(
        class_names=tuple(class_filter),
        colors=tuple(_DISPLAY_COLORS[k % len(_DISPLAY_COLORS)] for k in range(n_classes)),
    )

    records: list[DatasetRecord] = []
    skipped_missing = 0
    for image_id, anns in sorted(by_image.items()):
        info = images.get(image_id)
        if info is None:
            raise InvalidInputError(f"annotation references unknown image id {image_id}")
        src = image_dir / info["file_name"]
        if not src.exists():
            skipped_missing += 1
            logger.warning("skipping missing image file %s", src)
            continue
        h, w = int(info["height"]), int(info["width"])
        with Image.open(src) as img:
            arr = np.asarray(img.convert("RGB"))

        instances = []
        for ann in anns:
            mask = segmentation_to_mask(ann["segmentation"], h, w)
            mask = _resize_mask(mask, size)
            if mask.sum() == 0:
                continue
            data = np.zeros((size, size, n_classes), dtype=np.uint8)
            data[:, :, cat_to_channel[ann["category_id"]]] = mask
            instances.append(
                InstanceMask(data=data, class_id=cat_to_channel[ann["category_id"]])
            )
        if not instances:
            continue

        dst = out_images / f"{image_id:012d}.png"
        save_canvas(dst, canvas_from_uint8(_resize_image(arr, size)))
        layout = SemanticLayout(instances=tuple(instances), height=size, width=size,
                                n_classes=n_classes)
        records.append(DatasetRecord(layout=layout, image_path=dst))

    if skipped_missing:
        logger.warning("skipped %d images with missing files", skipped_missing)
    index = DatasetIndex(records=records, palette=palette)
    save_index(index, out_dir)
    return index
