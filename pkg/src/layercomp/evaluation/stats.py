"""Gaussian moment fitting and the Fréchet distance between fitted Gaussians.

The matrix square root of the covariance product is computed by
eigendecomposition of the symmetrized product with negative eigenvalues
clamped at zero; a small diagonal jitter is retried on failure before a
numerical-stability error is raised.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError, NumericalStabilityError

__all__ = ["GaussianStats", "fit_gaussian", "product_sqrt", "frechet_distance"]

_SYM_TOL = 1e-8
_RESIDUAL_TOL = 1e-5
_JITTERS = (0.0, 1e-10, 1e-8, 1e-6)


@dataclass(frozen=True)
class GaussianStats:
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64).reshape(-1)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if sigma.shape != (mu.shape[0], mu.shape[0]):
            raise InvalidInputError(
                f"sigma shape {sigma.shape} does not match mu length {mu.shape[0]}"
            )
        if np.abs(sigma - sigma.T).max(initial=0.0) > _SYM_TOL:
            raise InvalidInputError("covariance is not symmetric within tolerance")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", (sigma + sigma.T) / 2.0)

    @property
    def dim(self) -> int:
        return self.mu.shape[0]


def fit_gaussian(features: np.ndarray) -> GaussianStats:
    """Sample mean and unbiased sample covariance of n x d feature rows."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2:
        raise InvalidInputError(f"expected n x d features, got shape {feats.shape}")
    n, d = feats.shape
    if n < 2:
        raise InvalidInputError(f"need at least 2 feature rows, got {n}")
    mu = feats.mean(axis=0)
    sigma = np.cov(feats, rowvar=False, ddof=1).reshape(d, d)
    return GaussianStats(mu=mu, sigma=sigma)


def _psd_sqrt(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(M^{1/2}, pseudo-inverse of M^{1/2}) for a symmetric PSD matrix."""
    vals, vecs = np.linalg.eigh((mat + mat.T) / 2.0)
    vals = np.clip(vals, 0.0, None)
    roots = np.sqrt(vals)
    cutoff = roots.max(initial=0.0) * 1e-12
    inv_roots = np.where(roots > cutoff, 1.0 / np.where(roots > 0, roots, 1.0), 0.0)
    half = (vecs * roots) @ vecs.T
    half_pinv = (vecs * inv_roots) @ vecs.T
    return half, half_pinv


def _symmetrized_root(s1: np.ndarray, s2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(A^{1/2}, S1^{1/2} stuff) where A = S1^{1/2} S2 S1^{1/2}; returns (a_half, r)."""
    s1_half, s1_half_pinv = _psd_sqrt(s1)
    inner = s1_half @ s2 @ s1_half
    a_half, _ = _psd_sqrt(inner)
    r = s1_half @ a_half @ s1_half_pinv
    return a_half, r


def product_sqrt(s1: np.ndarray, s2: np.ndarray) -> np.ndarray:
    """R with R @ R = S1 @ S2 for symmetric PSD inputs."""
    s1 = np.asarray(s1, dtype=np.float64)
    s2 = np.asarray(s2, dtype=np.float64)
    product = s1 @ s2
    norm = np.linalg.norm(product)
    eye = np.eye(s1.shape[0])
    for jitter in _JITTERS:
        a = s1 + jitter * eye
        b = s2 + jitter * eye
        _, r = _symmetrized_root(a, b)
        residual = np.linalg.norm(r @ r - product)
        if residual <= _RESIDUAL_TOL * max(norm, 1.0):
            return r
    raise NumericalStabilityError(
        f"matrix root residual {residual:.3e} exceeds tolerance "
        f"(|S1S2|_F = {norm:.3e}, dim = {s1.shape[0]})"
    )


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """d^2 = |mu1 - mu2|^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}), clamped at 0."""
    if a.dim != b.dim:
        raise InvalidInputError(f"dimension mismatch {a.dim} vs {b.dim}")
    mean_term = float(np.sum((a.mu - b.mu) ** 2))
    scale = max(float(np.trace(a.sigma) + np.trace(b.sigma)), 1.0)
    for jitter in _JITTERS:
        eye = np.eye(a.dim)
        s1 = a.sigma + jitter * eye
        s2 = b.sigma + jitter * eye
        a_half, _ = _symmetrized_root(s1, s2)
        trace_root = float(np.trace(a_half))
        d2 = mean_term + float(np.trace(s1) + np.trace(s2)) - 2.0 * trace_root
        if d2 > -1e-6 * scale and np.isfinite(d2):
            return max(d2, 0.0)
    raise NumericalStabilityError(
        f"Frechet distance {d2:.3e} is negative beyond tolerance; "
        f"likely ill-conditioned covariances (dim = {a.dim})"
    )
