"""Pluggable feature providers and segmenters for the evaluation metrics.

Every provider carries a name that ends up in evaluation reports, so numbers
computed with different feature spaces are never silently compared.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..data import DatasetIndex
from ..data.synth import CANONICAL_COLORS
from ..errors import InvalidInputError
from .iou import layout_to_labels

__all__ = [
    "RandomProjectionProvider",
    "SyntheticClassifierProvider",
    "ColorPrototypeSegmenter",
    "SyntheticSegmenter",
]


def _stack(images) -> np.ndarray:
    arr = np.asarray(images, dtype=np.float32)
    if arr.ndim != 4 or arr.shape[-1] != 3:
        raise InvalidInputError(f"expected n x H x W x 3 images, got {arr.shape}")
    return arr


class RandomProjectionProvider:
    """Fixed Gaussian projection of raw pixels; training-free baseline."""

    kind = "random-projection"

    def __init__(self, dim: int = 64, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self.name = f"random-projection-d{dim}-s{seed}"
        self._matrix: np.ndarray | None = None

    def extract(self, images) -> np.ndarray:
        arr = _stack(images)
        flat = arr.reshape(arr.shape[0], -1)
        if self._matrix is None or self._matrix.shape[0] != flat.shape[1]:
            rng = np.random.default_rng(self.seed)
            self._matrix = rng.standard_normal((flat.shape[1], self.dim)).astype(
                np.float32
            ) / np.sqrt(flat.shape[1])
        return flat @ self._matrix


class _ClassifierNet(nn.Module):
    def __init__(self, n_classes: int, dim: int):
        super().__init__()
        self.conv = nn.Sequential(
            nn.Conv2d(3, 16, 3, stride=2, padding=1), nn.ReLU(),
            nn.Conv2d(16, 32, 3, stride=2, padding=1), nn.ReLU(),
            nn.Conv2d(32, 64, 3, stride=2, padding=1), nn.ReLU(),
        )
        self.fc_feat = nn.Linear(64, dim)
        self.fc_out = nn.Linear(dim, n_classes)

    def features(self, x: torch.Tensor) -> torch.Tensor:
        h = self.conv(x).mean(dim=(2, 3))
        return self.fc_feat(h)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc_out(F.relu(self.features(x)))


class SyntheticClassifierProvider:
    """Small conv net trained on a dataset to predict class presence.

    The penultimate layer is the feature embedding. Deterministic for a fixed
    seed; call fit() before extract().
    """

    kind = "trained-on-synthetic"

    def __init__(self, dim: int = 64, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self.name = f"synthetic-classifier-d{dim}-s{seed}"
        self._net: _ClassifierNet | None = None

    def fit(self, index: DatasetIndex, steps: int = 300, batch: int = 16,
            lr: float = 1e-3) -> "SyntheticClassifierProvider":
        n_classes = index.records[0].layout.n_classes
        torch.manual_seed(self.seed)
        net = _ClassifierNet(n_classes, self.dim)
        opt = torch.optim.Adam(net.parameters(), lr=lr)
        rng = np.random.default_rng(self.seed)
        images = np.stack([r.image for r in index.records]).astype(np.float32)
        presence = np.zeros((len(index.records), n_classes), dtype=np.float32)
        for i, rec in enumerate(index.records):
            for inst in rec.layout.instances:
                presence[i, inst.class_id] = 1.0
        for _ in range(steps):
            picks = rng.integers(0, len(index.records), size=batch)
            x = torch.from_numpy(images[picks].transpose(0, 3, 1, 2).copy())
            y = torch.from_numpy(presence[picks])
            loss = F.binary_cross_entropy_with_logits(net(x), y)
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()
        net.eval()
        self._net = net
        return self

    def extract(self, images) -> np.ndarray:
        if self._net is None:
            raise InvalidInputError("provider not fitted; call fit() first")
        arr = _stack(images)
        feats = []
        with torch.no_grad():
            for start in range(0, arr.shape[0], 64):
                x = torch.from_numpy(arr[start:start + 64].transpose(0, 3, 1, 2).copy())
                feats.append(self._net.features(x).numpy())
        return np.concatenate(feats, axis=0)


class ColorPrototypeSegmenter:
    """Labels each pixel by its nearest canonical class color.

    Pixels farther than the threshold from every prototype are background (0);
    class c maps to label c + 1.
    """

    def __init__(self, n_classes: int, threshold: float = 0.35):
        if n_classes > len(CANONICAL_COLORS):
            raise InvalidInputError(f"only {len(CANONICAL_COLORS)} canonical colors exist")
        self.n_classes = n_classes
        self.threshold = threshold
        self.name = f"color-prototype-k{n_classes}-t{threshold}"
        self._prototypes = np.asarray(CANONICAL_COLORS[:n_classes], dtype=np.float32)

    def segment(self, images) -> np.ndarray:
        arr = _stack(images)
        # mean absolute channel distance to each prototype
        dists = np.abs(arr[:, :, :, None, :] - self._prototypes[None, None, None]).mean(axis=-1)
        nearest = dists.argmin(axis=-1)
        best = dists.min(axis=-1)
        return np.where(best <= self.threshold, nearest + 1, 0).astype(np.int32)


class _SegmenterNet(nn.Module):
    def __init__(self, n_labels: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(3, 16, 3, padding=1), nn.ReLU(),
            nn.Conv2d(16, 16, 3, padding=1), nn.ReLU(),
            nn.Conv2d(16, n_labels, 1),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class SyntheticSegmenter:
    """Small per-pixel classifier trained on a dataset's layout labels."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.name = f"synthetic-segmenter-s{seed}"
        self._net: _SegmenterNet | None = None

    def fit(self, index: DatasetIndex, steps: int = 200, batch: int = 8,
            lr: float = 2e-3) -> "SyntheticSegmenter":
        n_labels = index.records[0].layout.n_classes + 1
        torch.manual_seed(self.seed)
        net = _SegmenterNet(n_labels)
        opt = torch.optim.Adam(net.parameters(), lr=lr)
        rng = np.random.default_rng(self.seed)
        images = np.stack([r.image for r in index.records]).astype(np.float32)
        labels = np.stack([layout_to_labels(r.layout) for r in index.records])
        for _ in range(steps):
            picks = rng.integers(0, len(index.records), size=batch)
            x = torch.from_numpy(images[picks].transpose(0, 3, 1, 2).copy())
            y = torch.from_numpy(labels[picks].astype(np.int64))
            loss = F.cross_entropy(net(x), y)
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()
        net.eval()
        self._net = net
        return self

    def segment(self, images) -> np.ndarray:
        if self._net is None:
            raise InvalidInputError("segmenter not fitted; call fit() first")
        arr = _stack(images)
        outs = []
        with torch.no_grad():
            for start in range(0, arr.shape[0], 32):
                x = torch.from_numpy(arr[start:start + 32].transpose(0, 3, 1, 2).copy())
                outs.append(self._net(x).argmax(dim=1).numpy().astype(np.int32))
        return np.concatenate(outs, axis=0)
