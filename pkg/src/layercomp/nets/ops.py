"""Single-sample inference wrappers over the torch networks.

These accept the library's numpy conventions (canvases H x W x 3 in [-1,1],
masks H x W x N uint8, noise as 1-D float vectors), run the network in eval
mode without gradients, and convert back. Deterministic for fixed weights and
inputs: power-iteration state is never advanced outside training mode.
"""

from __future__ import annotations

import numpy as np
import torch

from ..errors import InvalidInputError
from ..layout import BBox, InstanceMask, bbox_mask
from .discriminators import ConditionalDiscriminator, LocalDiscriminator
from .generators import BackgroundGenerator, ForegroundGenerator, MaskGenerator

__all__ = [
    "bg_forward", "bg_inference", "fg_forward", "mask_gen_forward",
    "disc_global_forward", "disc_local_forward",
    "canvas_to_tensor", "tensor_to_canvas", "mask_to_tensor", "noise_to_tensor",
]


def canvas_to_tensor(canvas: np.ndarray) -> torch.Tensor:
    if canvas.ndim != 3 or canvas.shape[2] != 3:
        raise InvalidInputError(f"expected H x W x 3 canvas, got {canvas.shape}")
    arr = np.ascontiguousarray(canvas.transpose(2, 0, 1), dtype=np.float32)
    return torch.from_numpy(arr).unsqueeze(0)


def tensor_to_canvas(t: torch.Tensor) -> np.ndarray:
    return t.squeeze(0).detach().cpu().numpy().transpose(1, 2, 0).astype(np.float32)


def mask_to_tensor(mask: InstanceMask | np.ndarray) -> torch.Tensor:
    arr = mask.data if isinstance(mask, InstanceMask) else mask
    out = np.ascontiguousarray(arr.transpose(2, 0, 1), dtype=np.float32)
    return torch.from_numpy(out).unsqueeze(0)


def noise_to_tensor(z: np.ndarray, z_dim: int) -> torch.Tensor:
    z = np.asarray(z, dtype=np.float32).reshape(-1)
    if z.shape[0] != z_dim:
        raise InvalidInputError(f"noise length {z.shape[0]} != z_dim {z_dim}")
    return torch.from_numpy(z).unsqueeze(0)


def bg_forward(g: BackgroundGenerator, z0: np.ndarray,
               m_agg: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    g.eval()
    with torch.no_grad():
        x0, x0p = g(noise_to_tensor(z0, g.cfg.z_dim), mask_to_tensor(m_agg))
    return tensor_to_canvas(x0), tensor_to_canvas(x0p)


def bg_inference(g: BackgroundGenerator, z0: np.ndarray) -> np.ndarray:
    g.eval()
    with torch.no_grad():
        x0, _ = g.branch1(noise_to_tensor(z0, g.cfg.z_dim))
    return tensor_to_canvas(x0)


def fg_forward(g: ForegroundGenerator, masked_canvas: np.ndarray,
               mask: InstanceMask, z: np.ndarray) -> np.ndarray:
    g.eval()
    with torch.no_grad():
        out = g(canvas_to_tensor(masked_canvas), mask_to_tensor(mask),
                noise_to_tensor(z, g.cfg.z_dim))
    return tensor_to_canvas(out)


def mask_gen_forward(g: MaskGenerator, box: BBox, class_id: int,
                     z: np.ndarray) -> InstanceMask:
    cfg = g.cfg
    if not 0 <= class_id < cfg.n_classes:
        raise InvalidInputError(f"class_id {class_id} out of range [0, {cfg.n_classes})")
    h = w = cfg.image_size
    if box.row_max >= h or box.col_max >= w:
        raise InvalidInputError(f"box {box} exceeds {h}x{w} frame")
    box_arr = bbox_mask(box, h, w)
    box_t = torch.from_numpy(box_arr.astype(np.float32)).reshape(1, 1, h, w)
    onehot = torch.zeros(1, cfg.n_classes)
    onehot[0, class_id] = 1.0
    g.eval()
    with torch.no_grad():
        probs = g(box_t, onehot, noise_to_tensor(z, cfg.z_dim))[0, 0].numpy()
    binary = (probs >= 0.5).astype(np.uint8)
    if binary.sum() == 0:
        # at least one pixel so the result is a valid instance mask: the
        # most confident location inside the box
        inside = np.where(box_arr == 1, probs, -1.0)
        r, c = np.unravel_index(np.argmax(inside), inside.shape)
        binary[r, c] = 1
    data = np.zeros((h, w, cfg.n_classes), dtype=np.uint8)
    data[:, :, class_id] = binary
    return InstanceMask(data=data, class_id=class_id)


def disc_global_forward(d: ConditionalDiscriminator, image: np.ndarray,
                        m_agg: np.ndarray) -> float:
    d.eval()
    with torch.no_grad():
        score, _ = d(canvas_to_tensor(image), mask_to_tensor(m_agg))
    return float(score.item())


def disc_local_forward(d: LocalDiscriminator, image: np.ndarray,
                       m_agg: np.ndarray, box: BBox) -> float:
    d.eval()
    with torch.no_grad():
        score, _ = d(canvas_to_tensor(image), mask_to_tensor(m_agg), [box])
    return float(score.item())
