"""Fréchet distance between feature Gaussians of two image sets."""

from __future__ import annotations

from .stats import fit_gaussian, frechet_distance

__all__ = ["fid"]


def fid(real_images, fake_images, provider) -> float:
    real_stats = fit_gaussian(provider.extract(real_images))
    fake_stats = fit_gaussian(provider.extract(fake_images))
    return frechet_distance(real_stats, fake_stats)
