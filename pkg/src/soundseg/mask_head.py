"""Pixel decoder, dynamic-convolution mask prediction, and inference-time
selection of the highest-scoring sounding query.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .encoders import AudioEmbedding, FeaturePyramid
from .errors import ShapeError
from .fusion import FusedPyramid, QueryEmbeddings
from .masks import BinaryMask, bilinear_resize


@dataclass(frozen=True)
class MaskFeatures:
    maps: torch.Tensor  # [T, C_m, H_m, W_m]

    def __post_init__(self):
        m = torch.as_tensor(self.maps)
        if m.ndim != 4:
            raise ShapeError(f"mask features must be [T, C_m, H_m, W_m], got {tuple(m.shape)}")
        object.__setattr__(self, "maps", m)


@dataclass(frozen=True)
class KernelBank:
    kernels: torch.Tensor  # [N_q, C_m]
    biases: torch.Tensor  # [N_q]

    def __post_init__(self):
        k = torch.as_tensor(self.kernels)
        b = torch.as_tensor(self.biases)
        if k.ndim != 2 or b.ndim != 1 or k.shape[0] != b.shape[0]:
            raise ShapeError("kernel bank needs one kernel and one bias per query")
        object.__setattr__(self, "kernels", k)
        object.__setattr__(self, "biases", b)


@dataclass(frozen=True)
class MaskLogits:
    logits: torch.Tensor  # [N_q, T, H_lr, W_lr]
    sounding_scores: torch.Tensor  # [N_q]

    def __post_init__(self):
        l = torch.as_tensor(self.logits)
        s = torch.as_tensor(self.sounding_scores)
        if l.ndim != 4:
            raise ShapeError(f"logits must be [N_q, T, H, W], got {tuple(l.shape)}")
        if s.ndim != 1 or s.shape[0] != l.shape[0]:
            raise ShapeError("need one sounding score per query")
        object.__setattr__(self, "logits", l)
        object.__setattr__(self, "sounding_scores", s)

    @property
    def num_queries(self) -> int:
        return int(self.logits.shape[0])


class PixelDecoder(nn.Module):
    """Top-down FPN over the fused levels with laterals from the raw
    pyramid, plus one residual cross-attention injecting the audio vector
    into the finest map.  Output stride defaults to 4.
    """

    def __init__(self, visual_channels, audio_channels: int, c_av: int, c_m: int = 64, heads: int = 4, mask_stride: int = 4):
        super().__init__()
        if mask_stride not in (1, 2, 4, 8):
            raise ShapeError(f"mask_stride must be a power of two <= 8, got {mask_stride}")
        self.c_m = c_m
        self.mask_stride = mask_stride
        self.fused_proj = nn.ModuleList(nn.Conv2d(c_av, c_m, 1) for _ in range(3))
        self.lateral = nn.ModuleList(nn.Conv2d(c, c_m, 1) for c in visual_channels)
        self.out_conv = nn.Conv2d(c_m, c_m, 3, padding=1)
        self.audio_proj = nn.Linear(audio_channels, c_m)
        self.audio_attn = nn.MultiheadAttention(c_m, heads, dropout=0.0, batch_first=True)

    def forward(self, pyramid: FeaturePyramid, audio: AudioEmbedding, fused: FusedPyramid) -> MaskFeatures:
        x = self.fused_proj[2](fused.levels[2]) + self.lateral[2](pyramid.levels[2])
        for lvl in (1, 0):
            x = F.interpolate(x, scale_factor=2, mode="bilinear", align_corners=False)
            x = x + self.fused_proj[lvl](fused.levels[lvl]) + self.lateral[lvl](pyramid.levels[lvl])
        # the top-down pathway ends at stride 8; upsample the rest of the way
        for _ in range((8 // self.mask_stride).bit_length() - 1):
            x = F.interpolate(x, scale_factor=2, mode="bilinear", align_corners=False)
        x = self.out_conv(x)

        t, c, h, w = x.shape
        tokens = x.flatten(2).transpose(1, 2)  # [T, HW, C_m]
        kv = self.audio_proj(audio.vectors)[:, None, :]
        update, _ = self.audio_attn(tokens, kv, kv)
        tokens = tokens + update
        return MaskFeatures(maps=tokens.transpose(1, 2).reshape(t, c, h, w))


class KernelHead(nn.Module):
    """Two-layer MLP mapping each query to a 1x1 kernel plus bias."""

    def __init__(self, dim: int, c_m: int):
        super().__init__()
        self.mlp = nn.Sequential(
            nn.Linear(dim, dim), nn.ReLU(inplace=True), nn.Linear(dim, c_m + 1)
        )

    def forward(self, queries: QueryEmbeddings) -> KernelBank:
        out = self.mlp(queries.outputs)
        return KernelBank(kernels=out[:, :-1], biases=out[:, -1])


def generate_kernels(queries: QueryEmbeddings, head: KernelHead) -> KernelBank:
    return head(queries)


def dynamic_convolve(features: MaskFeatures, kernels: KernelBank) -> torch.Tensor:
    """Per-query 1x1 convolution of the mask features; returns [N_q, T, H, W]."""
    if features.maps.shape[1] != kernels.kernels.shape[1]:
        raise ShapeError(
            f"feature channels {features.maps.shape[1]} != kernel width {kernels.kernels.shape[1]}"
        )
    logits = torch.einsum("qc,tchw->qthw", kernels.kernels, features.maps)
    return logits + kernels.biases[:, None, None, None]


class SoundingHead(nn.Module):
    """Linear map from query embedding to a raw sounding logit."""

    def __init__(self, dim: int):
        super().__init__()
        self.linear = nn.Linear(dim, 1)

    def forward(self, queries: QueryEmbeddings) -> torch.Tensor:
        return self.linear(queries.outputs)[:, 0]


def score_sounding(queries: QueryEmbeddings, head: SoundingHead) -> torch.Tensor:
    return head(queries)


def select_and_upsample(pred: MaskLogits, h0: int, w0: int, threshold: float = 0.5):
    """Pick the query with the highest sounding score (ties: lowest index),
    bilinearly upsample its logits to (h0, w0), sigmoid, and binarize.

    Returns (list of per-frame BinaryMask, winner index).
    """
    scores = pred.sounding_scores.detach().cpu().numpy()
    winner = int(np.argmax(scores))  # np.argmax returns the first maximum
    logits = pred.logits[winner].detach().cpu().numpy()
    masks = []
    for frame in logits:
        up = bilinear_resize(frame.astype(np.float64), h0, w0)
        prob = 1.0 / (1.0 + np.exp(-up))
        masks.append(BinaryMask((prob >= threshold).astype(np.uint8)))
    return masks, winner
