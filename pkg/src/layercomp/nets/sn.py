"""Spectral normalization via power iteration.

Each weight is reshaped to 2-D (out x rest) and divided by a power-iteration
estimate of its largest singular value. The layer wrappers keep the iteration
vectors as buffers so they travel with checkpoints and one iteration runs per
training forward; standalone verification uses more iterations.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

__all__ = ["PowerIterationState", "spectral_normalize", "SNConv2d", "SNLinear"]

_EPS = 1e-12


class PowerIterationState:
    """Left/right singular-vector estimates for one weight matrix."""

    def __init__(self, u: torch.Tensor, v: torch.Tensor):
        self.u = u
        self.v = v

    @classmethod
    def for_weight(cls, weight: torch.Tensor,
                   generator: torch.Generator | None = None) -> "PowerIterationState":
        out_dim = weight.shape[0]
        rest = weight.reshape(out_dim, -1).shape[1]
        u = torch.randn(out_dim, generator=generator, dtype=weight.dtype)
        v = torch.randn(rest, generator=generator, dtype=weight.dtype)
        return cls(F.normalize(u, dim=0, eps=_EPS), F.normalize(v, dim=0, eps=_EPS))


def spectral_normalize(weight: torch.Tensor, state: PowerIterationState,
                       n_iterations: int = 1, update: bool = True) -> torch.Tensor:
    """Return weight / sigma_max-estimate; advance the power iteration in place.

    A zero weight matrix is returned unchanged (the epsilon guard keeps the
    division from blowing up).
    """
    w = weight.reshape(weight.shape[0], -1)
    u, v = state.u, state.v
    if update:
        with torch.no_grad():
            for _ in range(n_iterations):
                v = F.normalize(torch.mv(w.t(), u), dim=0, eps=_EPS)
                u = F.normalize(torch.mv(w, v), dim=0, eps=_EPS)
            state.u.copy_(u)
            state.v.copy_(v)
    # clones so later in-place state updates can't invalidate this graph
    sigma = torch.dot(state.u.clone(), torch.mv(w, state.v.clone()))
    if float(sigma.detach().abs()) < _EPS:
        return weight * 0.0
    return weight / sigma


class _SNMixin:
    def _init_sn(self):
        state = PowerIterationState.for_weight(self.weight)
        self.register_buffer("weight_u", state.u)
        self.register_buffer("weight_v", state.v)

    def _normalized_weight(self) -> torch.Tensor:
        state = PowerIterationState(self.weight_u, self.weight_v)
        return spectral_normalize(self.weight, state, n_iterations=1,
                                  update=self.training)


class SNConv2d(nn.Conv2d, _SNMixin):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._init_sn()

    def forward(self, x):
        return self._conv_forward(x, self._normalized_weight(), self.bias)


class SNLinear(nn.Linear, _SNMixin):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._init_sn()

    def forward(self, x):
        return F.linear(x, self._normalized_weight(), self.bias)
