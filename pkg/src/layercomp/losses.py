"""Training objectives for the background, foreground, and mask models.

Norm terms are realized as mean-squared error over kept pixel-channels.
Adversarial terms use the non-saturating logistic form, computed via softplus
so extreme scores cannot overflow. Feature matching is the L1 distance
between batch-mean discriminator features, summed over layers.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .errors import InvalidInputError, TrainingDivergenceError

__all__ = [
    "LossWeights", "masked_l2", "adv_loss_d", "adv_loss_g",
    "feature_matching", "bg_total", "fg_rec_loss", "fg_total", "mask_gen_loss",
]

_EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    lambda_r_bg: float = 100.0
    lambda_fm_bg: float = 1.0
    lambda_l: float = 0.1
    lambda_r_fg: float = 1e-5
    lambda_fm_fg: float = 1.0
    lambda_ce: float = 10.0
    lambda_adv_mask: float = 1.0

    def __post_init__(self):
        for name, value in vars(self).items():
            if value < 0:
                raise InvalidInputError(f"{name} must be non-negative, got {value}")

    def to_dict(self) -> dict:
        return dict(vars(self))

    @classmethod
    def from_dict(cls, d: dict) -> "LossWeights":
        return cls(**d)


def _as_keep(keep: torch.Tensor, like: torch.Tensor) -> torch.Tensor:
    if keep.dim() == 2:
        keep = keep.unsqueeze(0).unsqueeze(0)
    elif keep.dim() == 3:
        keep = keep.unsqueeze(1)
    return keep.to(like.dtype)


def _check_finite(value: torch.Tensor, name: str) -> torch.Tensor:
    if not bool(torch.isfinite(value).all()):
        raise TrainingDivergenceError(f"non-finite {name}")
    return value


def masked_l2(a: torch.Tensor, b: torch.Tensor, keep: torch.Tensor) -> torch.Tensor:
    """Mean squared difference over pixel-channels where keep == 0.

    Pixels with keep == 1 contribute nothing, in value or in gradient. All
    pixels masked out yields 0.
    """
    if a.shape != b.shape:
        raise InvalidInputError(f"shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")
    w = (1.0 - _as_keep(keep, a)).expand_as(a)
    count = w.sum()
    if count.item() == 0:
        return torch.zeros((), dtype=a.dtype, device=a.device)
    return (((a - b) * w) ** 2).sum() / count


def adv_loss_d(real_scores: torch.Tensor, fake_scores: torch.Tensor) -> torch.Tensor:
    """-E[log sigmoid(real)] - E[log(1 - sigmoid(fake))], overflow-safe."""
    _check_finite(real_scores, "real scores")
    _check_finite(fake_scores, "fake scores")
    return F.softplus(-real_scores).mean() + F.softplus(fake_scores).mean()


def adv_loss_g(fake_scores: torch.Tensor) -> torch.Tensor:
    """Non-saturating generator loss: -E[log sigmoid(fake)]."""
    _check_finite(fake_scores, "fake scores")
    return F.softplus(-fake_scores).mean()


def feature_matching(real_feats: list[torch.Tensor],
                     fake_feats: list[torch.Tensor]) -> torch.Tensor:
    if len(real_feats) != len(fake_feats):
        raise InvalidInputError("feature lists differ in layer count")
    total = None
    for rf, ff in zip(real_feats, fake_feats):
        term = (rf.mean(dim=0) - ff.mean(dim=0)).abs().sum()
        total = term if total is None else total + term
    if total is None:
        raise InvalidInputError("empty feature lists")
    return total


def bg_total(adv: torch.Tensor, rec: torch.Tensor, fm: torch.Tensor,
             w: LossWeights) -> torch.Tensor:
    return adv + w.lambda_r_bg * rec + w.lambda_fm_bg * fm


def fg_rec_loss(gen_out: torch.Tensor, x: torch.Tensor,
                box_occ: torch.Tensor) -> torch.Tensor:
    """Penalizes deviation from x only outside the bounding box."""
    return masked_l2(gen_out, x, box_occ)


def fg_total(global_adv: torch.Tensor, local_adv: torch.Tensor,
             rec: torch.Tensor, fm: torch.Tensor, w: LossWeights) -> torch.Tensor:
    return global_adv + w.lambda_l * local_adv + w.lambda_r_fg * rec + w.lambda_fm_fg * fm


def mask_gen_loss(pred_probs: torch.Tensor, true_mask: torch.Tensor,
                  box_map: torch.Tensor, adv_term: torch.Tensor,
                  w: LossWeights) -> tuple[torch.Tensor, torch.Tensor]:
    """Returns (total, ce) where ce is the in-box binary cross-entropy mean."""
    box = _as_keep(box_map, pred_probs)
    n_inside = box.sum()
    if n_inside.item() == 0:
        ce = torch.zeros((), dtype=pred_probs.dtype, device=pred_probs.device)
    else:
        p = pred_probs.clamp(_EPS, 1.0 - _EPS)
        t = true_mask.to(pred_probs.dtype)
        pixel_ce = -(t * torch.log(p) + (1.0 - t) * torch.log(1.0 - p))
        ce = (pixel_ce * box).sum() / n_inside
    return w.lambda_ce * ce + w.lambda_adv_mask * adv_term, ce
