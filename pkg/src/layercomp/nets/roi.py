"""Differentiable bilinear crop-and-resize over pixel boxes.

Samples a uniform out_h x out_w grid spanning the (inclusive) box with
corner-aligned coordinates, so a full-frame box at the input resolution is an
exact identity and a 1-pixel box yields a constant output. The op is linear in
the image values and autograd-differentiable with respect to them.
"""

from __future__ import annotations

import torch

from ..errors import InvalidInputError
from ..layout import BBox

__all__ = ["bilinear_roi", "bilinear_roi_batch"]


def _grid_coords(lo: int, hi: int, n: int, dtype, device) -> torch.Tensor:
    if n == 1:
        return torch.full((1,), (lo + hi) / 2.0, dtype=dtype, device=device)
    step = (hi - lo) / (n - 1)
    return lo + step * torch.arange(n, dtype=dtype, device=device)


def bilinear_roi(image: torch.Tensor, box: BBox, out_h: int, out_w: int) -> torch.Tensor:
    """Crop `box` from a C x H x W (or H x W) tensor and resample to out_h x out_w."""
    squeeze = image.dim() == 2
    if squeeze:
        image = image.unsqueeze(0)
    if image.dim() != 3:
        raise InvalidInputError(f"expected C x H x W, got shape {tuple(image.shape)}")
    _, h, w = image.shape
    if box.row_max >= h or box.col_max >= w:
        raise InvalidInputError(f"box {box} exceeds image {h}x{w}")
    if not image.dtype.is_floating_point:
        image = image.float()

    ys = _grid_coords(box.row_min, box.row_max, out_h, image.dtype, image.device)
    xs = _grid_coords(box.col_min, box.col_max, out_w, image.dtype, image.device)

    y0 = ys.floor().long().clamp(0, h - 1)
    x0 = xs.floor().long().clamp(0, w - 1)
    y1 = (y0 + 1).clamp(max=h - 1)
    x1 = (x0 + 1).clamp(max=w - 1)
    wy = (ys - y0).reshape(1, out_h, 1)
    wx = (xs - x0).reshape(1, 1, out_w)

    v00 = image[:, y0[:, None], x0[None, :]]
    v01 = image[:, y0[:, None], x1[None, :]]
    v10 = image[:, y1[:, None], x0[None, :]]
    v11 = image[:, y1[:, None], x1[None, :]]

    top = v00 * (1 - wx) + v01 * wx
    bottom = v10 * (1 - wx) + v11 * wx
    out = top * (1 - wy) + bottom * wy
    return out.squeeze(0) if squeeze else out


def bilinear_roi_batch(images: torch.Tensor, boxes: list[BBox],
                       out_h: int, out_w: int) -> torch.Tensor:
    """Per-sample boxes over a B x C x H x W tensor."""
    if images.dim() != 4 or len(boxes) != images.shape[0]:
        raise InvalidInputError("need B x C x H x W images and one box per sample")
    return torch.stack(
        [bilinear_roi(images[i], boxes[i], out_h, out_w) for i in range(images.shape[0])]
    )
