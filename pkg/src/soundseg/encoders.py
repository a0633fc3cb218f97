"""Frozen feature extractors: a 3-scale visual pyramid and a pooled audio
embedding.  Toy convolutional backbones ship by default; any module with
the same output contract can be plugged in instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .audio import AudioClip
from .clips import FrameClip
from .errors import ShapeError


@dataclass(frozen=True)
class FeaturePyramid:
    """Three levels at strides 8 / 16 / 32."""

    levels: tuple  # (f1, f2, f3), each [T, C_l, H_l, W_l]

    def __post_init__(self):
        levels = tuple(self.levels)
        if len(levels) != 3:
            raise ShapeError(f"expected 3 pyramid levels, got {len(levels)}")
        t = levels[0].shape[0]
        for a, b in zip(levels, levels[1:]):
            if b.shape[0] != t:
                raise ShapeError("all levels must share the frame dimension")
            if a.shape[2] != 2 * b.shape[2] or a.shape[3] != 2 * b.shape[3]:
                raise ShapeError("spatial dims must halve per level")
        object.__setattr__(self, "levels", levels)

    @property
    def num_frames(self) -> int:
        return int(self.levels[0].shape[0])


@dataclass(frozen=True)
class AudioEmbedding:
    """One pooled vector per frame index, shape [T, C_a]."""

    vectors: torch.Tensor

    def __post_init__(self):
        v = torch.as_tensor(self.vectors)
        if v.ndim != 2 or v.shape[0] < 1:
            raise ShapeError(f"vectors must be [T, C_a], got {tuple(v.shape)}")
        if not torch.all(torch.isfinite(v)):
            raise ShapeError("audio embedding must be finite")
        object.__setattr__(self, "vectors", v)


def _conv_block(c_in, c_out, stride):
    return nn.Sequential(
        nn.Conv2d(c_in, c_out, kernel_size=3, stride=stride, padding=1),
        nn.GroupNorm(1, c_out),
        nn.ReLU(inplace=True),
    )


class ToyVisualBackbone(nn.Module):
    """Strided conv pyramid: stem at /4 then stages at /8, /16, /32.

    Stands in for a pretrained pyramid network; outputs satisfy the
    FeaturePyramid contract for any input divisible by 32.
    """

    def __init__(self, channels=(32, 64, 128, 256)):
        super().__init__()
        c0, c1, c2, c3 = channels
        self.stem = nn.Sequential(_conv_block(3, c0, 2), _conv_block(c0, c0, 2))
        self.stage1 = _conv_block(c0, c1, 2)
        self.stage2 = _conv_block(c1, c2, 2)
        self.stage3 = _conv_block(c2, c3, 2)
        self.out_channels = (c1, c2, c3)

    def forward(self, frames: torch.Tensor):
        x = self.stem(frames)
        f1 = self.stage1(x)
        f2 = self.stage2(f1)
        f3 = self.stage3(f2)
        return f1, f2, f3


class ToyAudioBackbone(nn.Module):
    """Three conv blocks over the spectrogram, spatial mean pool to C_a."""

    def __init__(self, c_a: int = 128):
        super().__init__()
        self.blocks = nn.Sequential(
            _conv_block(1, 32, 2),
            _conv_block(32, 64, 2),
            _conv_block(64, c_a, 2),
        )
        self.out_channels = c_a

    def forward(self, spectrograms: torch.Tensor):
        x = self.blocks(spectrograms[:, None])  # [T, 1, H_a, W_a]
        return x.mean(dim=(2, 3))


def encode_visual(clip: FrameClip, backbone: nn.Module) -> FeaturePyramid:
    if clip.height % 32 or clip.width % 32:
        raise ShapeError(
            f"frame size {clip.height}x{clip.width} must be divisible by 32"
        )
    dtype = next(backbone.parameters()).dtype
    return FeaturePyramid(levels=tuple(backbone(clip.frames.to(dtype))))


def encode_audio(spec: AudioClip, backbone: nn.Module) -> AudioEmbedding:
    dtype = next(backbone.parameters()).dtype
    x = torch.as_tensor(spec.spectrograms).to(dtype)
    return AudioEmbedding(vectors=backbone(x))
