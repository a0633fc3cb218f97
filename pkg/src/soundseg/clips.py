"""Frame sequences. Still images are clips with T = 1."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .errors import ShapeError


@dataclass(frozen=True)
class FrameClip:
    """Normalized frames, shape [T, 3, H0, W0]."""

    frames: torch.Tensor

    def __post_init__(self):
        f = torch.as_tensor(self.frames, dtype=torch.float32)
        if f.ndim != 4 or f.shape[1] != 3:
            raise ShapeError(f"frames must be [T, 3, H0, W0], got {tuple(f.shape)}")
        if f.shape[0] < 1 or f.shape[2] < 1 or f.shape[3] < 1:
            raise ShapeError("frame count and spatial dims must be positive")
        object.__setattr__(self, "frames", f)

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def height(self) -> int:
        return int(self.frames.shape[2])

    @property
    def width(self) -> int:
        return int(self.frames.shape[3])

    @classmethod
    def from_image(cls, array: np.ndarray) -> "FrameClip":
        """Build a single-frame clip from an HxWx3 uint8 or float image."""
        a = np.asarray(array)
        if a.ndim != 3 or a.shape[2] != 3:
            raise ShapeError(f"expected HxWx3 image, got shape {a.shape}")
        if a.dtype == np.uint8:
            a = a.astype(np.float32) / 255.0
        return cls(frames=torch.from_numpy(np.ascontiguousarray(a.transpose(2, 0, 1)))[None])
