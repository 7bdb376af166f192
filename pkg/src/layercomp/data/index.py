"""Dataset index and training-sample selection."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import InvalidInputError
from ..layout import ClassPalette, SemanticLayout
from .files import load_canvas, load_layout, save_layout

__all__ = ["DatasetRecord", "DatasetIndex", "TrainingSample", "sample_fg_batch",
           "save_index", "load_index"]


@dataclass
class DatasetRecord:
    """One image with its layout. The canvas is loaded lazily and cached."""

    layout: SemanticLayout
    image_path: Path | None = None
    meta: dict | None = None
    _image: np.ndarray | None = field(default=None, repr=False)

    @property
    def image(self) -> np.ndarray:
        if self._image is None:
            if self.image_path is None:
                raise InvalidInputError("record has neither cached image nor path")
            self._image = load_canvas(self.image_path)
        return self._image


@dataclass
class DatasetIndex:
    """Immutable-after-construction list of records plus the class palette."""

    records: list[DatasetRecord]
    palette: ClassPalette

    def __len__(self) -> int:
        return len(self.records)

    @property
    def n_classes(self) -> int:
        return self.palette.n_classes


@dataclass(frozen=True)
class TrainingSample:
    """A real image, its full layout, and one picked foreground instance."""

    image: np.ndarray
    layout: SemanticLayout
    picked_index: int

    def __post_init__(self):
        if not 0 <= self.picked_index < len(self.layout):
            raise InvalidInputError(
                f"picked_index {self.picked_index} outside [0, {len(self.layout)})"
            )


def sample_fg_batch(index: DatasetIndex, batch: int, rng: np.random.Generator,
                    flip: bool = False) -> list[TrainingSample]:
    """Draw `batch` samples: image uniform over records with T >= 1, instance
    uniform within the image."""
    eligible = [r for r in index.records if len(r.layout) >= 1]
    if not eligible:
        raise InvalidInputError("no record has a foreground instance")
    samples = []
    for _ in range(batch):
        rec = eligible[int(rng.integers(len(eligible)))]
        picked = int(rng.integers(len(rec.layout)))
        image, layout = rec.image, rec.layout
        if flip and rng.random() < 0.5:
            image = image[:, ::-1].copy()
            layout = _flip_layout(layout)
        samples.append(TrainingSample(image=image, layout=layout, picked_index=picked))
    return samples


def _flip_layout(layout: SemanticLayout) -> SemanticLayout:
    from ..layout import InstanceMask

    flipped = tuple(
        InstanceMask(data=inst.data[:, ::-1].copy(), class_id=inst.class_id)
        for inst in layout.instances
    )
    return SemanticLayout(instances=flipped, height=layout.height,
                          width=layout.width, n_classes=layout.n_classes)


def save_index(index: DatasetIndex, out_dir: str | Path) -> Path:
    """Write index.json referencing per-image layout files (written alongside)."""
    out_dir = Path(out_dir)
    layout_dir = out_dir / "layouts"
    layout_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for i, rec in enumerate(index.records):
        layout_file = layout_dir / f"{i:05d}.json"
        save_layout(layout_file, rec.layout, index.palette.class_names)
        if rec.image_path is None:
            raise InvalidInputError("cannot save an index with in-memory-only images")
        entry = {
            "image": str(Path(rec.image_path).relative_to(out_dir)),
            "layout": str(layout_file.relative_to(out_dir)),
        }
        if rec.meta is not None:
            entry["meta"] = rec.meta
        records.append(entry)
    doc = {
        "palette": {
            "class_names": list(index.palette.class_names),
            "colors": [list(c) for c in index.palette.colors],
        },
        "records": records,
    }
    index_file = out_dir / "index.json"
    index_file.write_text(json.dumps(doc, indent=1))
    return index_file


def load_index(data_dir: str | Path) -> DatasetIndex:
    data_dir = Path(data_dir)
    doc = json.loads((data_dir / "index.json").read_text())
    palette = ClassPalette(
        class_names=tuple(doc["palette"]["class_names"]),
        colors=tuple(tuple(c) for c in doc["palette"]["colors"]),
    )
    records = []
    for entry in doc["records"]:
        records.append(
            DatasetRecord(
                layout=load_layout(data_dir / entry["layout"]),
                image_path=data_dir / entry["image"],
                meta=entry.get("meta"),
            )
        )
    return DatasetIndex(records=records, palette=palette)
