"""HTTP facade over composition sessions.

Sessions live in memory behind per-session locks; mutations are strictly
serialized per session and bump a canvas version. With a session directory
configured, every mutation writes the session file through, and startup
replays the stored sessions so a restart reproduces canvases bit-exactly
against the same checkpoints. Masks cross the wire as RLE strings, canvases
as PNG.
"""

from __future__ import annotations

import base64
import io
import logging
import threading
from pathlib import Path
from typing import Literal

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .composer import ComposerEngine, CompositionSession, load_session, save_session, session_to_dict
from .data.files import canvas_from_uint8, canvas_to_uint8
from .data.rle import decode_rle, encode_rle
from .errors import (
    EmptyMaskError,
    InvalidInputError,
    LayerCompError,
    OutOfFrameError,
)
from .layout import AffineTransform, BBox, InstanceMask, occupancy_of

logger = logging.getLogger(__name__)

__all__ = ["create_app"]

MAX_UPLOAD_BYTES = 4 * 1024 * 1024


class BackgroundSpec(BaseModel):
    kind: Literal["generate", "upload"]
    seed: int | None = None
    image: str | None = None  # base64-encoded PNG


class CreateSessionBody(BaseModel):
    width: int
    height: int
    mode: Literal["hard", "raw"]
    background: BackgroundSpec


class BBoxBody(BaseModel):
    row_min: int
    col_min: int
    row_max: int
    col_max: int


class AddObjectBody(BaseModel):
    class_id: int
    mask_rle: str | None = None
    bbox: BBoxBody | None = None
    seed: int | None = None


class SeedBody(BaseModel):
    seed: int


class TransformBody(BaseModel):
    dx: int = 0
    dy: int = 0
    rot: float = 0.0
    scale: float = 1.0


class OrderBody(BaseModel):
    ids: list[str]


class _Entry:
    def __init__(self, session: CompositionSession):
        self.session = session
        self.lock = threading.Lock()
        self.version = 1


def _http_error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"detail": message})


def _png_bytes(canvas: np.ndarray) -> bytes:
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(canvas_to_uint8(canvas)).save(buf, format="PNG")
    return buf.getvalue()


def create_app(engine: ComposerEngine, session_dir: str | Path | None = None,
               max_upload_bytes: int = MAX_UPLOAD_BYTES) -> FastAPI:
    app = FastAPI(title="layercomp service")
    store: dict[str, _Entry] = {}
    store_lock = threading.Lock()
    sess_dir = Path(session_dir) if session_dir is not None else None

    if sess_dir is not None:
        sess_dir.mkdir(parents=True, exist_ok=True)
        for path in sorted(sess_dir.glob("*.json")):
            try:
                session = load_session(engine, path)
                store[session.session_id] = _Entry(session)
            except LayerCompError as exc:
                logger.warning("skipping session file %s: %s", path, exc)

    def _persist(session: CompositionSession) -> None:
        if sess_dir is not None:
            save_session(session, sess_dir / f"{session.session_id}.json")

    def _entry(session_id: str) -> _Entry | None:
        with store_lock:
            return store.get(session_id)

    @app.exception_handler(RequestValidationError)
    async def _validation_handler(request: Request, exc: RequestValidationError):
        return _http_error(400, str(exc.errors()))

    @app.exception_handler(InvalidInputError)
    async def _invalid_handler(request: Request, exc: InvalidInputError):
        return _http_error(400, str(exc))

    @app.exception_handler(OutOfFrameError)
    async def _frame_handler(request: Request, exc: OutOfFrameError):
        return _http_error(400, str(exc))

    @app.exception_handler(EmptyMaskError)
    async def _empty_handler(request: Request, exc: EmptyMaskError):
        return _http_error(422, str(exc))

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        size = engine.image_size
        if body.width != size or body.height != size:
            raise InvalidInputError(
                f"loaded checkpoints generate {size}x{size}; "
                f"got {body.width}x{body.height}"
            )
        if body.background.kind == "generate":
            if body.background.seed is None:
                raise InvalidInputError("generate background needs a seed")
            background = {"kind": "generate", "seed": body.background.seed}
        else:
            payload = body.background.image
            if payload is None:
                raise InvalidInputError("upload background needs an image")
            if len(payload) > max_upload_bytes:
                return _http_error(413, f"upload exceeds {max_upload_bytes} bytes")
            from PIL import Image

            try:
                raw = base64.b64decode(payload.encode("ascii"), validate=True)
                arr = np.asarray(Image.open(io.BytesIO(raw)).convert("RGB"),
                                 dtype=np.uint8)
            except Exception as exc:
                raise InvalidInputError(f"undecodable upload: {exc}") from exc
            background = {"kind": "upload", "image": canvas_from_uint8(arr)}
        session = CompositionSession(engine, mode=body.mode, background=background)
        entry = _Entry(session)
        with store_lock:
            store[session.session_id] = entry
        _persist(session)
        return {"session_id": session.session_id,
                "canvas_url": f"/sessions/{session.session_id}/canvas",
                "canvas_version": entry.version}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        entry = _entry(session_id)
        if entry is None:
            return _http_error(404, f"unknown session {session_id}")
        with entry.lock:
            doc = session_to_dict(entry.session)
            doc["canvas_version"] = entry.version
            doc["objects"] = [
                {"object_id": s.object_id, "class_id": s.class_id,
                 "seed": s.noise_seed,
                 "bbox": {"row_min": s.bbox.row_min, "col_min": s.bbox.col_min,
                          "row_max": s.bbox.row_max, "col_max": s.bbox.col_max}}
                for s in entry.session.steps
            ]
            return doc

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str):
        with store_lock:
            entry = store.pop(session_id, None)
        if entry is None:
            return _http_error(404, f"unknown session {session_id}")
        if sess_dir is not None:
            (sess_dir / f"{session_id}.json").unlink(missing_ok=True)
        return {"deleted": session_id}

    @app.get("/sessions/{session_id}/canvas")
    def get_canvas(session_id: str, step: int | None = None):
        entry = _entry(session_id)
        if entry is None:
            return _http_error(404, f"unknown session {session_id}")
        with entry.lock:
            canvases = entry.session.canvases
            index = len(canvases) - 1 if step is None else step
            if not 0 <= index < len(canvases):
                return _http_error(404, f"step {step} out of range 0..{len(canvases) - 1}")
            payload = _png_bytes(canvases[index])
        return Response(content=payload, media_type="image/png")

    @app.post("/sessions/{session_id}/objects")
    def add_object(session_id: str, body: AddObjectBody):
        entry = _entry(session_id)
        if entry is None:
            return _http_error(404, f"unknown session {session_id}")
        size = engine.image_size
        if not 0 <= body.class_id < engine.n_classes:
            raise InvalidInputError(
                f"class_id {body.class_id} out of range [0, {engine.n_classes})"
            )
        seed = (int(body.seed) if body.seed is not None
                else int(np.random.default_rng().integers(0, 2 ** 31 - 1)))
        with entry.lock:
            session = entry.session
            if body.mask_rle is not None:
                occ = decode_rle(body.mask_rle, size, size)
                if occ.sum() == 0:
                    raise EmptyMaskError("mask_rle decodes to an empty mask")
                data = np.zeros((size, size, engine.n_classes), dtype=np.uint8)
                data[:, :, body.class_id] = occ
                mask = InstanceMask(data=data, class_id=body.class_id)
                session.add_object(mask, seed)
            elif body.bbox is not None:
                box = BBox(row_min=body.bbox.row_min, col_min=body.bbox.col_min,
                           row_max=body.bbox.row_max, col_max=body.bbox.col_max)
                session.add_object_from_bbox(box, body.class_id, seed)
            else:
                raise InvalidInputError("provide mask_rle or bbox")
            step = session.steps[-1]
            entry.version += 1
            _persist(session)
            return {"object_id": step.object_id,
                    "canvas_version": entry.version,
                    "seed": step.noise_seed,
                    "mask_rle": encode_rle(occupancy_of(step.mask)),
                    "bbox": {"row_min": step.bbox.row_min, "col_min": step.bbox.col_min,
                             "row_max": step.bbox.row_max, "col_max": step.bbox.col_max}}

    @app.post("/sessions/{session_id}/objects/{object_id}/resample")
    def resample(session_id: str, object_id: str, body: SeedBody):
        entry = _entry(session_id)
        if entry is None:
            return _http_error(404, f"unknown session {session_id}")
        with entry.lock:
            session = entry.session
            if object_id not in session.object_ids():
                return _http_error(404, f"unknown object {object_id}")
            session.resample_object(object_id, body.seed)
            entry.version += 1
            _persist(session)
            return {"canvas_version": entry.version}

    @app.post("/sessions/{session_id}/objects/{object_id}/transform")
    def transform(session_id: str, object_id: str, body: TransformBody):
        entry = _entry(session_id)
        if entry is None:
            return _http_error(404, f"unknown session {session_id}")
        t = AffineTransform(dx=body.dx, dy=body.dy, rotation=body.rot, scale=body.scale)
        with entry.lock:
            session = entry.session
            if object_id not in session.object_ids():
                return _http_error(404, f"unknown object {object_id}")
            session.transform_object(object_id, t)
            entry.version += 1
            _persist(session)
            step = session.steps[session.find(object_id)]
            return {"canvas_version": entry.version,
                    "mask_rle": encode_rle(occupancy_of(step.mask)),
                    "bbox": {"row_min": step.bbox.row_min, "col_min": step.bbox.col_min,
                             "row_max": step.bbox.row_max, "col_max": step.bbox.col_max}}

    @app.put("/sessions/{session_id}/order")
    def reorder(session_id: str, body: OrderBody):
        entry = _entry(session_id)
        if entry is None:
            return _http_error(404, f"unknown session {session_id}")
        with entry.lock:
            session = entry.session
            if sorted(body.ids) != sorted(session.object_ids()) or \
                    len(body.ids) != len(session.steps):
                return _http_error(
                    409, f"ids {body.ids} are not a permutation of {session.object_ids()}"
                )
            session.reorder(body.ids)
            entry.version += 1
            _persist(session)
            return {"canvas_version": entry.version, "order": session.object_ids()}

    return app
