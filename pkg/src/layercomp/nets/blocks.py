"""Residual building blocks for the generators and discriminators.

Generator blocks use instance normalization and nearest-neighbor upsampling;
discriminator blocks use spectrally normalized convolutions and average-pool
downsampling. Both keep a learned 1x1 shortcut whenever channel count or
resolution changes.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .sn import SNConv2d

__all__ = ["GenBlock", "EncBlock", "DiscBlock", "DiscBlockFirst", "channel_widths"]


def channel_widths(base: int, n_blocks: int) -> list[int]:
    """Widths from the bottleneck (index 0) to full resolution, capped at 8x base."""
    return [base * min(2 ** (n_blocks - i), 8) for i in range(n_blocks + 1)]


class GenBlock(nn.Module):
    """Pre-activation residual block: IN -> ReLU -> (up) -> conv, twice."""

    def __init__(self, in_ch: int, out_ch: int, upsample: bool = False):
        super().__init__()
        self.upsample = upsample
        self.norm1 = nn.InstanceNorm2d(in_ch, affine=True)
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.norm2 = nn.InstanceNorm2d(out_ch, affine=True)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.learn_skip = in_ch != out_ch or upsample
        if self.learn_skip:
            self.conv_skip = nn.Conv2d(in_ch, out_ch, 1)

    def _shortcut(self, x: torch.Tensor) -> torch.Tensor:
        if self.upsample:
            x = F.interpolate(x, scale_factor=2, mode="nearest")
        if self.learn_skip:
            x = self.conv_skip(x)
        return x

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = F.relu(self.norm1(x))
        if self.upsample:
            h = F.interpolate(h, scale_factor=2, mode="nearest")
        h = self.conv1(h)
        h = self.conv2(F.relu(self.norm2(h)))
        return h + self._shortcut(x)


class EncBlock(nn.Module):
    """Generator-side residual encoder block with 2x average-pool downsampling."""

    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        self.norm1 = nn.InstanceNorm2d(in_ch, affine=True)
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.norm2 = nn.InstanceNorm2d(out_ch, affine=True)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.conv_skip = nn.Conv2d(in_ch, out_ch, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.relu(self.norm1(x)))
        h = F.avg_pool2d(self.conv2(F.relu(self.norm2(h))), 2)
        return h + self.conv_skip(F.avg_pool2d(x, 2))


class DiscBlock(nn.Module):
    """Spectrally normalized residual block with optional 2x downsampling."""

    def __init__(self, in_ch: int, out_ch: int, downsample: bool = True):
        super().__init__()
        self.downsample = downsample
        self.conv1 = SNConv2d(in_ch, out_ch, 3, padding=1)
        self.conv2 = SNConv2d(out_ch, out_ch, 3, padding=1)
        self.learn_skip = in_ch != out_ch or downsample
        if self.learn_skip:
            self.conv_skip = SNConv2d(in_ch, out_ch, 1)

    def _shortcut(self, x: torch.Tensor) -> torch.Tensor:
        if self.learn_skip:
            x = self.conv_skip(x)
        if self.downsample:
            x = F.avg_pool2d(x, 2)
        return x

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.relu(x))
        h = self.conv2(F.relu(h))
        if self.downsample:
            h = F.avg_pool2d(h, 2)
        return h + self._shortcut(x)


class DiscBlockFirst(nn.Module):
    """Input block: convs before any activation, pool-then-project shortcut."""

    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        self.conv1 = SNConv2d(in_ch, out_ch, 3, padding=1)
        self.conv2 = SNConv2d(out_ch, out_ch, 3, padding=1)
        self.conv_skip = SNConv2d(in_ch, out_ch, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = F.avg_pool2d(self.conv2(F.relu(self.conv1(x))), 2)
        return h + self.conv_skip(F.avg_pool2d(x, 2))
