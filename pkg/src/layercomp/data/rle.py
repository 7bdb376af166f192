"""Run-length encoding for binary masks.

Internal wire/file format: the H x W mask is flattened row-major and stored as
comma-separated run lengths, alternating zero-runs and one-runs, starting with
the zero-run (which may be 0). Example: a 2x2 mask [[0,1],[1,1]] -> "1,3".
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError

__all__ = ["encode_rle", "decode_rle"]


def encode_rle(mask: np.ndarray) -> str:
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise InvalidInputError(f"RLE encodes 2-D masks, got shape {mask.shape}")
    flat = (mask.reshape(-1) != 0).astype(np.uint8)
    if flat.size == 0:
        return ""
    boundaries = np.flatnonzero(np.diff(flat)) + 1
    runs = np.diff(np.concatenate(([0], boundaries, [flat.size])))
    counts = runs.tolist()
    if flat[0] == 1:
        counts = [0] + counts
    return ",".join(str(c) for c in counts)


def decode_rle(rle: str, height: int, width: int) -> np.ndarray:
    total = height * width
    if rle == "":
        counts = []
    else:
        try:
            counts = [int(c) for c in rle.split(",")]
        except ValueError as exc:
            raise InvalidInputError(f"malformed RLE string: {rle!r}") from exc
    if any(c < 0 for c in counts) or sum(counts) != total:
        raise InvalidInputError(
            f"RLE counts sum to {sum(counts)}, expected {total} for {height}x{width}"
        )
    flat = np.zeros(total, dtype=np.uint8)
    pos = 0
    value = 0
    for count in counts:
        if value:
            flat[pos : pos + count] = 1
        pos += count
        value ^= 1
    return flat.reshape(height, width)
