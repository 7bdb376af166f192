"""Generator networks.

BackgroundGenerator: dual branch. Branch 1 decodes a noise vector into a
canvas; branch 2 consumes the aggregated layout map together with branch 1's
bottleneck features and emits a layout-consistent variant. Only branch 1 runs
at inference time.

ForegroundGenerator: inpainting network over a masked canvas. Separate scene
and mask encoder pathways, noise injected at the encoder output and again
mid-decoder, U-Net skips from the scene encoder into the decoder.

MaskGenerator: conditional box-and-class to object-mask network whose output
probabilities are zero outside the box by construction.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ContractError
from .blocks import EncBlock, GenBlock, channel_widths
from .config import NetConfig

__all__ = ["BackgroundGenerator", "ForegroundGenerator", "MaskGenerator"]


def _tile(vec: torch.Tensor, h: int, w: int) -> torch.Tensor:
    """Broadcast a B x C vector to a B x C x h x w map."""
    return vec.unsqueeze(-1).unsqueeze(-1).expand(-1, -1, h, w)


class _Encoder(nn.Module):
    """Initial conv plus n_blocks residual downsampling stages.

    Keeps per-stage outputs so callers can take U-Net skips; index 0 is the
    full-resolution feature, the last entry is the bottleneck.
    """

    def __init__(self, in_ch: int, widths: list[int]):
        super().__init__()
        n = len(widths) - 1
        self.conv_in = nn.Conv2d(in_ch, widths[n], 3, padding=1)
        self.blocks = nn.ModuleList(
            EncBlock(widths[n - i], widths[n - i - 1]) for i in range(n)
        )

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        feats = [self.conv_in(x)]
        for block in self.blocks:
            feats.append(block(feats[-1]))
        return feats


class _ToCanvas(nn.Module):
    def __init__(self, in_ch: int, out_ch: int = 3):
        super().__init__()
        self.norm = nn.InstanceNorm2d(in_ch, affine=True)
        self.conv = nn.Conv2d(in_ch, out_ch, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.tanh(self.conv(F.relu(self.norm(x))))


class BackgroundGenerator(nn.Module):
    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.cfg = cfg
        ch = channel_widths(cfg.base_channels, cfg.n_blocks)
        s = cfg.bottleneck_size
        self.fc = nn.Linear(cfg.z_dim, ch[0] * s * s)
        self.blocks1 = nn.ModuleList(
            GenBlock(ch[i], ch[i + 1], upsample=True) for i in range(cfg.n_blocks)
        )
        self.out1 = _ToCanvas(ch[-1])
        self.enc2 = _Encoder(cfg.n_classes, ch)
        self.fuse2 = nn.Conv2d(2 * ch[0], ch[0], 1)
        self.blocks2 = nn.ModuleList(
            GenBlock(ch[i], ch[i + 1], upsample=True) for i in range(cfg.n_blocks)
        )
        self.out2 = _ToCanvas(ch[-1])

    def branch1(self, z: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """z (B x z_dim) -> (canvas, bottleneck feature tapped by branch 2)."""
        s = self.cfg.bottleneck_size
        deep = self.fc(z).view(z.shape[0], -1, s, s)
        h = deep
        for block in self.blocks1:
            h = block(h)
        return self.out1(h), deep

    def forward(self, z: torch.Tensor, m_agg: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Returns (x0_hat, x0_hat_prime); m_agg is B x N x H x W."""
        x0, deep = self.branch1(z)
        enc = self.enc2(m_agg)[-1]
        h = self.fuse2(torch.cat([enc, deep], dim=1))
        for block in self.blocks2:
            h = block(h)
        return x0, self.out2(h)


class ForegroundGenerator(nn.Module):
    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.cfg = cfg
        ch = channel_widths(cfg.base_channels, cfg.n_blocks)
        n = cfg.n_blocks
        self.scene_enc = _Encoder(3, ch)
        self.mask_enc = _Encoder(cfg.n_classes, ch)
        self.z_fc_bottom = nn.Linear(cfg.z_dim, ch[0])
        self.mid = n // 2
        self.z_fc_mid = nn.Linear(cfg.z_dim, ch[self.mid])
        self.fuse = nn.Conv2d(3 * ch[0], ch[0], 1)
        blocks = []
        in_ch = ch[0]
        for i in range(n):
            c = in_ch + (ch[self.mid] if i == self.mid else 0)
            blocks.append(GenBlock(c, ch[i + 1], upsample=True))
            in_ch = 2 * ch[i + 1]  # decoder output + scene-encoder skip
        self.blocks = nn.ModuleList(blocks)
        self.out = _ToCanvas(2 * ch[n])

    def forward(self, masked_canvas: torch.Tensor, mask: torch.Tensor,
                z: torch.Tensor) -> torch.Tensor:
        """Inputs B x 3 x H x W, B x N x H x W, B x z_dim -> B x 3 x H x W.

        The canvas must already be zeroed under the mask's occupancy.
        """
        occ = mask.amax(dim=1, keepdim=True)
        if bool((masked_canvas * occ != 0).any()):
            raise ContractError("canvas not masked out under the instance occupancy")
        scene_feats = self.scene_enc(masked_canvas)
        mask_bottom = self.mask_enc(mask)[-1]
        s = scene_feats[-1].shape[-1]
        z_bottom = _tile(self.z_fc_bottom(z), s, s)
        h = self.fuse(torch.cat([scene_feats[-1], mask_bottom, z_bottom], dim=1))
        n = self.cfg.n_blocks
        for i, block in enumerate(self.blocks):
            if i == self.mid:
                h = torch.cat([h, _tile(self.z_fc_mid(z), h.shape[-2], h.shape[-1])], dim=1)
            h = block(h)
            h = torch.cat([h, scene_feats[n - 1 - i]], dim=1)
        return self.out(h)


class MaskGenerator(nn.Module):
    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.cfg = cfg
        ch = channel_widths(cfg.base_channels, cfg.n_blocks)
        self.enc = _Encoder(1 + cfg.n_classes, ch)
        self.z_fc = nn.Linear(cfg.z_dim, ch[0])
        self.fuse = nn.Conv2d(2 * ch[0], ch[0], 1)
        self.blocks = nn.ModuleList(
            GenBlock(ch[i], ch[i + 1], upsample=True) for i in range(cfg.n_blocks)
        )
        self.norm_out = nn.InstanceNorm2d(ch[-1], affine=True)
        self.conv_out = nn.Conv2d(ch[-1], 1, 3, padding=1)

    def forward(self, box_map: torch.Tensor, class_onehot: torch.Tensor,
                z: torch.Tensor) -> torch.Tensor:
        """box_map B x 1 x H x W, class_onehot B x N, z B x z_dim -> B x 1 x H x W.

        Output is a probability map, identically zero outside box_map.
        """
        h, w = box_map.shape[-2:]
        x = torch.cat([box_map, _tile(class_onehot, h, w)], dim=1)
        bottom = self.enc(x)[-1]
        s = bottom.shape[-1]
        h_t = self.fuse(torch.cat([bottom, _tile(self.z_fc(z), s, s)], dim=1))
        for block in self.blocks:
            h_t = block(h_t)
        logits = self.conv_out(F.relu(self.norm_out(h_t)))
        return torch.sigmoid(logits) * box_map
