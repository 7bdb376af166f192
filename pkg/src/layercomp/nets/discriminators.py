"""Discriminator networks. All weights are spectrally normalized.

ConditionalDiscriminator scores an image conditioned on a layout map via
channel concatenation and also returns its intermediate block features for
the feature-matching loss. LocalDiscriminator crops a per-sample box from
both the image and the conditioning map, rescales to the full resolution,
and applies the same conditional core. MaskCropDiscriminator scores mask
crops conditioned on the object class.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..layout import BBox
from .blocks import DiscBlock, DiscBlockFirst
from .config import NetConfig
from .roi import bilinear_roi_batch
from .sn import SNLinear

__all__ = ["ConditionalDiscriminator", "LocalDiscriminator", "MaskCropDiscriminator"]


class _DiscCore(nn.Module):
    """Residual downsampling stack -> pooled feature -> scalar score."""

    def __init__(self, in_ch: int, cfg: NetConfig):
        super().__init__()
        n = cfg.n_disc_blocks
        widths = [cfg.base_channels * min(2 ** k, 8) for k in range(n)]
        blocks: list[nn.Module] = [DiscBlockFirst(in_ch, widths[0])]
        for k in range(1, n):
            blocks.append(DiscBlock(widths[k - 1], widths[k]))
        self.blocks = nn.ModuleList(blocks)
        self.fc = SNLinear(widths[-1], 1)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, list[torch.Tensor]]:
        feats = []
        h = x
        for block in self.blocks:
            h = block(h)
            feats.append(h)
        pooled = F.relu(h).sum(dim=(2, 3))
        feats.append(pooled)
        return self.fc(pooled).squeeze(1), feats


class ConditionalDiscriminator(nn.Module):
    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.cfg = cfg
        self.core = _DiscCore(3 + cfg.n_classes, cfg)

    def forward(self, image: torch.Tensor,
                cond: torch.Tensor) -> tuple[torch.Tensor, list[torch.Tensor]]:
        """image B x 3 x H x W, cond B x N x H x W -> (scores B, features)."""
        return self.core(torch.cat([image, cond], dim=1))


class LocalDiscriminator(nn.Module):
    """Box-focused discriminator: crop, rescale to image_size, then score."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.cfg = cfg
        self.core = _DiscCore(3 + cfg.n_classes, cfg)

    def forward(self, image: torch.Tensor, cond: torch.Tensor,
                boxes: list[BBox]) -> tuple[torch.Tensor, list[torch.Tensor]]:
        size = self.cfg.local_crop_size
        im = bilinear_roi_batch(image, boxes, size, size)
        cd = bilinear_roi_batch(cond, boxes, size, size)
        assert im.shape[-1] == size and im.shape[-2] == size
        return self.core(torch.cat([im, cd], dim=1))


class MaskCropDiscriminator(nn.Module):
    """Scores an object-mask crop conditioned on the object class."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.cfg = cfg
        self.core = _DiscCore(1 + cfg.n_classes, cfg)

    def forward(self, mask_map: torch.Tensor, class_onehot: torch.Tensor,
                boxes: list[BBox]) -> tuple[torch.Tensor, list[torch.Tensor]]:
        size = self.cfg.local_crop_size
        crop = bilinear_roi_batch(mask_map, boxes, size, size)
        cond = class_onehot.unsqueeze(-1).unsqueeze(-1).expand(-1, -1, size, size)
        return self.core(torch.cat([crop, cond], dim=1))
