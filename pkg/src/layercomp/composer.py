"""Sequential scene composition: background first, then one object per step.

A session records the background source, the ordered object steps with their
noise seeds, and every intermediate canvas. All randomness enters through
integer seeds expanded to standard-normal vectors by numpy's default
generator, so a serialized session replays bit-exactly against the same
checkpoints.

Compositing modes: `raw` keeps the full generator output as the next canvas;
`hard` (default) pastes the generator output only inside the object's
bounding box, preserving every pixel outside it exactly.
"""

from __future__ import annotations

import base64
import io
import itertools
import json
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data.files import canvas_from_uint8, canvas_to_uint8, save_canvas
from .data.rle import decode_rle, encode_rle
from .errors import (
    CheckpointError,
    ConfigHashMismatchError,
    EmptyMaskError,
    InvalidInputError,
)
from .layout import (
    AffineTransform,
    BBox,
    InstanceMask,
    SemanticLayout,
    apply_affine,
    bbox_mask,
    bbox_of,
    mask_out,
    occupancy_of,
)
from .nets import (
    BackgroundGenerator,
    ForegroundGenerator,
    MaskGenerator,
    bg_inference,
    fg_forward,
    load_net,
    mask_gen_forward,
)

__all__ = [
    "expand_seed", "ComposerEngine", "CompositionStep", "CompositionSession",
    "compose", "save_session", "load_session", "run_experiment", "EXPERIMENTS",
]

MODES = ("hard", "raw")


def expand_seed(seed: int, z_dim: int) -> np.ndarray:
    """Deterministic noise vector for an integer seed."""
    return np.random.default_rng(int(seed)).standard_normal(z_dim).astype(np.float32)


class ComposerEngine:
    """Immutable bundle of loaded generator networks shared across sessions."""

    def __init__(self, bg: BackgroundGenerator | None = None,
                 fg: ForegroundGenerator | None = None,
                 maskgen: MaskGenerator | None = None,
                 checkpoint_info: dict | None = None):
        if bg is None and fg is None and maskgen is None:
            raise InvalidInputError("engine needs at least one network")
        self.bg = bg
        self.fg = fg
        self.maskgen = maskgen
        self.checkpoint_info = checkpoint_info or {}
        cfgs = [n.cfg for n in (bg, fg, maskgen) if n is not None]
        sizes = {c.image_size for c in cfgs}
        classes = {c.n_classes for c in cfgs}
        if len(sizes) != 1 or len(classes) != 1:
            raise InvalidInputError("checkpoints disagree on image size or class count")
        self.image_size = sizes.pop()
        self.n_classes = classes.pop()
        for net in (bg, fg, maskgen):
            if net is not None:
                net.eval()

    @classmethod
    def from_checkpoints(cls, bg_path: str | Path | None = None,
                         fg_path: str | Path | None = None,
                         mask_path: str | Path | None = None) -> "ComposerEngine":
        nets, info = {}, {}
        for name, path, expected in (("bg", bg_path, "bg"), ("fg", fg_path, "fg"),
                                     ("maskgen", mask_path, "maskgen")):
            if path is None:
                nets[name] = None
                continue
            net, step, kind = load_net(path)
            if kind != expected:
                raise CheckpointError(f"{path} holds a {kind!r} network, expected {expected!r}")
            nets[name] = net
            info[name] = {"config_hash": net.cfg.hash(), "step": step, "kind": kind}
        return cls(bg=nets["bg"], fg=nets["fg"], maskgen=nets["maskgen"],
                   checkpoint_info=info)

    def _require(self, name: str):
        net = getattr(self, name)
        if net is None:
            raise InvalidInputError(f"no {name} checkpoint loaded")
        return net


@dataclass
class CompositionStep:
    object_id: str
    mask: InstanceMask
    class_id: int
    noise_seed: int
    bbox: BBox
    from_bbox: BBox | None = None
    transforms: list[AffineTransform] = field(default_factory=list)


class CompositionSession:
    def __init__(self, engine: ComposerEngine, mode: str = "hard",
                 background: dict | None = None, session_id: str | None = None):
        if mode not in MODES:
            raise InvalidInputError(f"mode must be one of {MODES}, got {mode!r}")
        self.engine = engine
        self.mode = mode
        self.session_id = session_id or uuid.uuid4().hex[:12]
        self.steps: list[CompositionStep] = []
        self._counter = itertools.count(1)
        background = background or {"kind": "generate", "seed": 0}
        self.background = self._resolve_background(background)
        self.canvases: list[np.ndarray] = [self._render_background()]

    # -- background ---------------------------------------------------------

    def _resolve_background(self, background: dict) -> dict:
        kind = background.get("kind")
        size = self.engine.image_size
        if kind == "generate":
            return {"kind": "generate", "seed": int(background["seed"])}
        if kind == "upload":
            image = np.asarray(background["image"], dtype=np.float32)
            if image.shape != (size, size, 3):
                raise InvalidInputError(
                    f"uploaded background is {image.shape}, session needs {(size, size, 3)}"
                )
            # quantize so the serialized PNG replays to identical floats
            return {"kind": "upload", "image": canvas_from_uint8(canvas_to_uint8(image))}
        raise InvalidInputError(f"unknown background kind {kind!r}")

    def _render_background(self) -> np.ndarray:
        if self.background["kind"] == "upload":
            return self.background["image"].copy()
        bg = self.engine._require("bg")
        z0 = expand_seed(self.background["seed"], bg.cfg.z_dim)
        return bg_inference(bg, z0)

    # -- step execution -----------------------------------------------------

    def _validate_mask(self, mask: InstanceMask) -> None:
        size = self.engine.image_size
        if mask.shape != (size, size, self.engine.n_classes):
            raise InvalidInputError(
                f"mask shape {mask.shape} does not match session "
                f"{(size, size, self.engine.n_classes)}"
            )

    def _run_step(self, prev: np.ndarray, step: CompositionStep) -> np.ndarray:
        fg = self.engine._require("fg")
        occ = occupancy_of(step.mask)
        masked = mask_out(prev, occ)
        z = expand_seed(step.noise_seed, fg.cfg.z_dim)
        gen = fg_forward(fg, masked, step.mask, z)
        if self.mode == "raw":
            return gen
        box_occ = bbox_mask(step.bbox, prev.shape[0], prev.shape[1])
        return np.where(box_occ[:, :, None] == 1, gen, prev).astype(np.float32)

    def _replay_from(self, index: int) -> None:
        del self.canvases[index + 1:]
        for step in self.steps[index:]:
            self.canvases.append(self._run_step(self.canvases[-1], step))

    # -- public operations --------------------------------------------------

    @property
    def canvas(self) -> np.ndarray:
        return self.canvases[-1]

    def object_ids(self) -> list[str]:
        return [s.object_id for s in self.steps]

    def find(self, object_id: str) -> int:
        for i, step in enumerate(self.steps):
            if step.object_id == object_id:
                return i
        raise InvalidInputError(f"unknown object {object_id!r}")

    def add_object(self, mask: InstanceMask, seed: int,
                   from_bbox: BBox | None = None) -> np.ndarray:
        self._validate_mask(mask)
        step = CompositionStep(
            object_id=f"obj-{next(self._counter)}",
            mask=mask, class_id=mask.class_id, noise_seed=int(seed),
            bbox=bbox_of(occupancy_of(mask)), from_bbox=from_bbox,
        )
        self.steps.append(step)
        self.canvases.append(self._run_step(self.canvases[-1], step))
        return self.canvas

    def add_object_from_bbox(self, box: BBox, class_id: int, seed: int) -> np.ndarray:
        maskgen = self.engine._require("maskgen")
        mask = mask_gen_forward(maskgen, box, class_id,
                                expand_seed(seed, maskgen.cfg.z_dim))
        return self.add_object(mask, seed, from_bbox=box)

    def resample_object(self, object_id: str, new_seed: int) -> np.ndarray:
        i = self.find(object_id)
        self.steps[i].noise_seed = int(new_seed)
        self._replay_from(i)
        return self.canvas

    def reorder(self, new_order: list[str]) -> np.ndarray:
        if sorted(new_order) != sorted(self.object_ids()) or \
                len(new_order) != len(self.steps):
            raise InvalidInputError(
                f"order {new_order} is not a permutation of {self.object_ids()}"
            )
        by_id = {s.object_id: s for s in self.steps}
        new_steps = [by_id[oid] for oid in new_order]
        first_change = 0
        while first_change < len(self.steps) and \
                new_steps[first_change] is self.steps[first_change]:
            first_change += 1
        self.steps = new_steps
        self._replay_from(first_change)
        return self.canvas

    def transform_object(self, object_id: str, t: AffineTransform) -> np.ndarray:
        i = self.find(object_id)
        step = self.steps[i]
        new_mask = apply_affine(step.mask, t)
        step.mask = new_mask
        step.bbox = bbox_of(occupancy_of(new_mask))
        step.transforms.append(t)
        self._replay_from(i)
        return self.canvas

    def replay_all(self) -> None:
        """Recompute every canvas from the recorded state."""
        self.canvases = [self._render_background()]
        self._replay_from(0)


def compose(engine: ComposerEngine, layout: SemanticLayout,
            seeds: int | list[int], mode: str = "hard") -> np.ndarray:
    """One-shot layout-to-image: background, then each instance in order.

    An integer seed is split into one background seed plus one per instance;
    a list supplies them explicitly (length = instances + 1).
    """
    n = len(layout.instances)
    if isinstance(seeds, (int, np.integer)):
        seed_list = [int(s) for s in
                     np.random.default_rng(int(seeds)).integers(0, 2 ** 31 - 1, size=n + 1)]
    else:
        seed_list = [int(s) for s in seeds]
        if len(seed_list) != n + 1:
            raise InvalidInputError(f"need {n + 1} seeds, got {len(seed_list)}")
    session = CompositionSession(engine, mode=mode,
                                 background={"kind": "generate", "seed": seed_list[0]})
    for mask, seed in zip(layout.instances, seed_list[1:]):
        session.add_object(mask, seed)
    return session.canvas


# -- serialization ----------------------------------------------------------


def _canvas_to_png_b64(canvas: np.ndarray) -> str:
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(canvas_to_uint8(canvas)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _canvas_from_png_b64(payload: str) -> np.ndarray:
    from PIL import Image

    raw = base64.b64decode(payload.encode("ascii"))
    arr = np.asarray(Image.open(io.BytesIO(raw)).convert("RGB"), dtype=np.uint8)
    return canvas_from_uint8(arr)


def session_to_dict(session: CompositionSession) -> dict:
    if session.background["kind"] == "generate":
        background = {"kind": "generate", "seed": session.background["seed"]}
    else:
        background = {"kind": "upload",
                      "png_base64": _canvas_to_png_b64(session.background["image"])}
    size = session.engine.image_size
    return {
        "session_id": session.session_id,
        "mode": session.mode,
        "height": size,
        "width": size,
        "n_classes": session.engine.n_classes,
        "checkpoints": session.engine.checkpoint_info,
        "background": background,
        "steps": [
            {
                "object_id": s.object_id,
                "class_id": s.class_id,
                "seed": s.noise_seed,
                "mask_rle": encode_rle(occupancy_of(s.mask)),
                "from_bbox": ([s.from_bbox.row_min, s.from_bbox.col_min,
                               s.from_bbox.row_max, s.from_bbox.col_max]
                              if s.from_bbox is not None else None),
                "transforms": [
                    {"dx": t.dx, "dy": t.dy, "rotation": t.rotation, "scale": t.scale}
                    for t in s.transforms
                ],
            }
            for s in session.steps
        ],
    }


def save_session(session: CompositionSession, path: str | Path) -> None:
    Path(path).write_text(json.dumps(session_to_dict(session), indent=1))


def session_from_dict(engine: ComposerEngine, doc: dict,
                      strict_checkpoints: bool = True) -> CompositionSession:
    size = engine.image_size
    if doc["height"] != size or doc["width"] != size or \
            doc["n_classes"] != engine.n_classes:
        raise InvalidInputError("session geometry does not match loaded checkpoints")
    if strict_checkpoints and doc.get("checkpoints"):
        for name, info in doc["checkpoints"].items():
            current = engine.checkpoint_info.get(name)
            if current is None or current["config_hash"] != info["config_hash"]:
                raise ConfigHashMismatchError(
                    f"session was recorded against a different {name} checkpoint"
                )
    bg = doc["background"]
    if bg["kind"] == "upload":
        background = {"kind": "upload", "image": _canvas_from_png_b64(bg["png_base64"])}
    else:
        background = {"kind": "generate", "seed": bg["seed"]}
    session = CompositionSession(engine, mode=doc["mode"], background=background,
                                 session_id=doc["session_id"])
    max_counter = 0
    for s in doc["steps"]:
        occ = decode_rle(s["mask_rle"], size, size)
        if occ.sum() == 0:
            raise EmptyMaskError("stored step has an empty mask")
        data = np.zeros((size, size, engine.n_classes), dtype=np.uint8)
        data[:, :, s["class_id"]] = occ
        mask = InstanceMask(data=data, class_id=s["class_id"])
        fb = s.get("from_bbox")
        step = CompositionStep(
            object_id=s["object_id"], mask=mask, class_id=s["class_id"],
            noise_seed=s["seed"], bbox=bbox_of(occ),
            from_bbox=(BBox(row_min=fb[0], col_min=fb[1], row_max=fb[2], col_max=fb[3])
                       if fb else None),
            transforms=[AffineTransform(**t) for t in s.get("transforms", [])],
        )
        session.steps.append(step)
        suffix = s["object_id"].rsplit("-", 1)[-1]
        if suffix.isdigit():
            max_counter = max(max_counter, int(suffix))
    session._counter = itertools.count(max_counter + 1)
    session._replay_from(0)
    return session


def load_session(engine: ComposerEngine, path: str | Path,
                 strict_checkpoints: bool = True) -> CompositionSession:
    try:
        doc = json.loads(Path(path).read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InvalidInputError(f"session file {path} is not valid JSON: {exc}") from exc
    return session_from_dict(engine, doc,
                             strict_checkpoints=strict_checkpoints)


# -- experiment scripts -----------------------------------------------------


def _template_mask(size: int, n_classes: int, class_id: int = 0,
                   center: tuple[int, int] | None = None,
                   half: int | None = None) -> InstanceMask:
    cy, cx = center or (size // 2, size // 2)
    half = half or size // 6
    data = np.zeros((size, size, n_classes), dtype=np.uint8)
    r0, r1 = max(cy - half, 0), min(cy + half, size - 1)
    c0, c1 = max(cx - half, 0), min(cx + half, size - 1)
    data[r0:r1 + 1, c0:c1 + 1, class_id] = 1
    return InstanceMask(data=data, class_id=class_id)


def _grid_row(canvases: list[np.ndarray]) -> np.ndarray:
    return np.concatenate(canvases, axis=1)


def _write_grid(rows: list[list[np.ndarray]], out_dir: Path, name: str) -> list[Path]:
    paths = []
    for i, row in enumerate(rows):
        p = out_dir / f"{name}_row{i:02d}.png"
        save_canvas(p, _grid_row(row))
        paths.append(p)
    combined = out_dir / f"{name}.png"
    save_canvas(combined, np.concatenate([_grid_row(r) for r in rows], axis=0))
    paths.append(combined)
    return paths


def _exp_affine(engine: ComposerEngine, out_dir: Path, seed: int, n_cols: int) -> list[Path]:
    size = engine.image_size
    base = _template_mask(size, engine.n_classes)
    offsets = np.linspace(-size // 4, size // 4, n_cols).astype(int)
    rotations = np.linspace(-60, 60, n_cols)
    scales = np.linspace(0.6, 1.4, n_cols)
    rows = []
    for params in (
        [AffineTransform(dx=int(d), dy=0, rotation=0.0, scale=1.0) for d in offsets],
        [AffineTransform(dx=0, dy=0, rotation=float(r), scale=1.0) for r in rotations],
        [AffineTransform(dx=0, dy=0, rotation=0.0, scale=float(s)) for s in scales],
    ):
        row = []
        for t in params:
            session = CompositionSession(engine, background={"kind": "generate", "seed": seed})
            session.add_object(apply_affine(base, t), seed + 1)
            row.append(session.canvas)
        rows.append(row)
    return _write_grid(rows, out_dir, "affine")


def _exp_occlusion(engine: ComposerEngine, out_dir: Path, seed: int, n_rows: int) -> list[Path]:
    size = engine.image_size
    left = _template_mask(size, engine.n_classes, class_id=0,
                          center=(size // 2, size // 4))
    right_class = min(1, engine.n_classes - 1)
    right = _template_mask(size, engine.n_classes, class_id=right_class,
                           center=(size // 2, 3 * size // 4))
    max_shift = size // 4
    rows = []
    for i in range(n_rows):
        shift = int(round(max_shift * i / max(n_rows - 1, 1)))
        session = CompositionSession(engine, background={"kind": "generate", "seed": seed})
        session.add_object(apply_affine(left, AffineTransform(
            dx=shift, dy=0, rotation=0.0, scale=1.0)) if shift else left, seed + 1)
        session.add_object(apply_affine(right, AffineTransform(
            dx=-shift, dy=0, rotation=0.0, scale=1.0)) if shift else right, seed + 2)
        rows.append([session.canvas])
    return _write_grid(rows, out_dir, "occlusion")


def _exp_order(engine: ComposerEngine, out_dir: Path, seed: int) -> list[Path]:
    size = engine.image_size
    a = _template_mask(size, engine.n_classes, class_id=0,
                       center=(size // 2, size // 2 - size // 8))
    b_class = min(1, engine.n_classes - 1)
    b = _template_mask(size, engine.n_classes, class_id=b_class,
                       center=(size // 2, size // 2 + size // 8))
    rows = []
    for masks in ((a, b), (b, a)):
        session = CompositionSession(engine, background={"kind": "generate", "seed": seed})
        for j, m in enumerate(masks):
            session.add_object(m, seed + 1 + j)
        rows.append([c.copy() for c in session.canvases])
    return _write_grid(rows, out_dir, "order")


def _exp_variation(engine: ComposerEngine, out_dir: Path, seed: int, n_cols: int) -> list[Path]:
    size = engine.image_size
    mask = _template_mask(size, engine.n_classes)
    row = []
    for k in range(n_cols):
        session = CompositionSession(engine, background={"kind": "generate", "seed": seed})
        session.add_object(mask, seed + 1 + k)
        row.append(session.canvas)
    return _write_grid([row], out_dir, "variation")


def _exp_edit(engine: ComposerEngine, out_dir: Path, seed: int,
              photo: np.ndarray | None) -> list[Path]:
    size = engine.image_size
    if photo is None:
        ramp = np.linspace(-0.5, 0.5, size, dtype=np.float32)
        photo = np.stack([np.tile(ramp, (size, 1))] * 3, axis=2)
    session = CompositionSession(engine, background={"kind": "upload", "image": photo})
    before = session.canvas.copy()
    session.add_object(_template_mask(size, engine.n_classes), seed + 1)
    return _write_grid([[before, session.canvas]], out_dir, "edit")


def _exp_bbox(engine: ComposerEngine, out_dir: Path, seed: int, n_cols: int) -> list[Path]:
    size = engine.image_size
    rows = []
    for class_id in range(min(engine.n_classes, 2)):
        row = []
        for k in range(n_cols):
            half = size // 8 + k * size // 16
            c = size // 2
            box = BBox(row_min=max(c - half, 0), col_min=max(c - half, 0),
                       row_max=min(c + half, size - 1), col_max=min(c + half, size - 1))
            session = CompositionSession(engine,
                                         background={"kind": "generate", "seed": seed})
            session.add_object_from_bbox(box, class_id, seed + 1 + k)
            row.append(session.canvas)
        rows.append(row)
    return _write_grid(rows, out_dir, "bbox")


EXPERIMENTS = ("affine", "occlusion", "order", "variation", "edit", "bbox")


def run_experiment(name: str, engine: ComposerEngine, out_dir: str | Path,
                   seed: int = 0, n_cols: int = 5, n_rows: int = 5,
                   photo: np.ndarray | None = None) -> list[Path]:
    """Emit the named scenario's image grid; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if name == "affine":
        return _exp_affine(engine, out, seed, n_cols)
    if name == "occlusion":
        return _exp_occlusion(engine, out, seed, n_rows)
    if name == "order":
        return _exp_order(engine, out, seed)
    if name == "variation":
        return _exp_variation(engine, out, seed, n_cols)
    if name == "edit":
        return _exp_edit(engine, out, seed, photo)
    if name == "bbox":
        return _exp_bbox(engine, out, seed, n_cols)
    raise InvalidInputError(f"unknown experiment {name!r}; choose from {EXPERIMENTS}")
