"""Network configuration shared by generators, discriminators and checkpoints."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

from ..errors import InvalidInputError

__all__ = ["NetConfig"]


@dataclass(frozen=True)
class NetConfig:
    image_size: int = 128
    n_classes: int = 6
    z_dim: int = 128
    base_channels: int = 64
    n_blocks: int = 5
    local_crop_size: int | None = None

    def __post_init__(self):
        if self.z_dim < 1:
            raise InvalidInputError("z_dim must be >= 1")
        if self.image_size & (self.image_size - 1) != 0:
            raise InvalidInputError(f"image_size {self.image_size} is not a power of two")
        if self.image_size % (1 << self.n_blocks) != 0 or self.bottleneck_size < 4:
            raise InvalidInputError(
                f"image_size {self.image_size} incompatible with {self.n_blocks} downsamples"
            )
        if self.local_crop_size is None:
            object.__setattr__(self, "local_crop_size", self.image_size)

    @property
    def bottleneck_size(self) -> int:
        return self.image_size >> self.n_blocks

    @property
    def n_disc_blocks(self) -> int:
        # one fewer downsampling stage than the generators, minimum two
        return max(self.n_blocks - 1, 2)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "NetConfig":
        return cls(**doc)

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]
