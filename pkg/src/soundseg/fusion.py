"""Audio-visual fusion and the multimodal transformer.

Early fusion attends visual tokens (queries) to the single per-frame audio
vector (key/value), separately at each pyramid scale.  The fused maps are
then flattened, position-encoded, self-attended, and decoded against a
bank of audio-initialized queries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn

from .encoders import AudioEmbedding, FeaturePyramid
from .errors import ShapeError


@dataclass(frozen=True)
class FusedPyramid:
    """Three maps sharing channel width C_av."""

    levels: tuple  # each [T, C_av, H_l, W_l]

    def __post_init__(self):
        levels = tuple(self.levels)
        if len(levels) != 3:
            raise ShapeError(f"expected 3 fused levels, got {len(levels)}")
        c = levels[0].shape[1]
        if any(l.shape[1] != c for l in levels):
            raise ShapeError("fused levels must share channel width")
        object.__setattr__(self, "levels", levels)

    @property
    def num_frames(self) -> int:
        return int(self.levels[0].shape[0])

    @property
    def channels(self) -> int:
        return int(self.levels[0].shape[1])


@dataclass(frozen=True)
class QueryEmbeddings:
    outputs: torch.Tensor  # [N_q, D]

    def __post_init__(self):
        o = torch.as_tensor(self.outputs)
        if o.ndim != 2:
            raise ShapeError(f"query outputs must be [N_q, D], got {tuple(o.shape)}")
        if not torch.all(torch.isfinite(o)):
            raise ShapeError("query outputs must be finite")
        object.__setattr__(self, "outputs", o)


class AudioVisualFusion(nn.Module):
    """Per-scale cross-attention; visual tokens query the audio vector."""

    def __init__(self, visual_channels, audio_channels: int, c_av: int, heads: int = 8):
        super().__init__()
        self.c_av = c_av
        self.visual_proj = nn.ModuleList(
            nn.Conv2d(c, c_av, kernel_size=1) for c in visual_channels
        )
        self.audio_proj = nn.Sequential(
            nn.Linear(audio_channels, c_av), nn.ReLU(inplace=True), nn.Linear(c_av, c_av)
        )
        self.attn = nn.ModuleList(
            nn.MultiheadAttention(c_av, heads, dropout=0.0, batch_first=True)
            for _ in visual_channels
        )

    def forward(self, pyramid: FeaturePyramid, audio: AudioEmbedding) -> FusedPyramid:
        t = pyramid.num_frames
        if audio.vectors.shape[0] != t:
            raise ShapeError(
                f"audio has {audio.vectors.shape[0]} segments, clip has {t} frames"
            )
        kv = self.audio_proj(audio.vectors)[:, None, :]  # [T, 1, C_av]
        fused = []
        for level, proj, attn in zip(pyramid.levels, self.visual_proj, self.attn):
            v = proj(level)  # [T, C_av, H, W]
            _, c, h, w = v.shape
            tokens = v.flatten(2).transpose(1, 2)  # [T, HW, C_av]
            update, _ = attn(tokens, kv, kv)
            tokens = tokens + update
            fused.append(tokens.transpose(1, 2).reshape(t, c, h, w))
        return FusedPyramid(levels=tuple(fused))


def sinusoidal_encoding(positions: torch.Tensor, dim: int) -> torch.Tensor:
    """Standard fixed sine/cosine encoding; positions [N] -> [N, dim]."""
    half = dim // 2
    freqs = torch.exp(
        -math.log(10000.0) * torch.arange(half, dtype=torch.float32) / max(half, 1)
    )
    angles = positions.float()[:, None] * freqs[None, :]
    enc = torch.zeros(positions.shape[0], dim)
    enc[:, 0::2] = torch.sin(angles)
    enc[:, 1::2] = torch.cos(angles[:, : dim - half])
    return enc


class MultimodalEncoder(nn.Module):
    """Self-attention over all fused tokens with (t, x, y) position codes."""

    def __init__(self, c_av: int, heads: int = 8, num_layers: int = 3, temporal_encoding: bool = True):
        super().__init__()
        self.c_av = c_av
        self.temporal_encoding = temporal_encoding
        self.pos_proj = nn.Linear(3 * c_av, c_av)
        self.layers = nn.ModuleList(
            nn.TransformerEncoderLayer(
                d_model=c_av,
                nhead=heads,
                dim_feedforward=4 * c_av,
                dropout=0.0,
                batch_first=True,
            )
            for _ in range(num_layers)
        )

    def positional_tokens(self, fused: FusedPyramid) -> torch.Tensor:
        """[N_tokens, C_av] position encoding in flattening order."""
        t = fused.num_frames
        parts = []
        for level in fused.levels:
            _, _, h, w = level.shape
            tt, yy, xx = torch.meshgrid(
                torch.arange(t), torch.arange(h), torch.arange(w), indexing="ij"
            )
            pe_t = sinusoidal_encoding(tt.reshape(-1), self.c_av)
            if not self.temporal_encoding:
                pe_t = torch.zeros_like(pe_t)
            pe_y = sinusoidal_encoding(yy.reshape(-1), self.c_av)
            pe_x = sinusoidal_encoding(xx.reshape(-1), self.c_av)
            parts.append(torch.cat([pe_t, pe_x, pe_y], dim=1))
        return self.pos_proj(torch.cat(parts, dim=0).to(self.pos_proj.weight.dtype))

    @staticmethod
    def flatten(fused: FusedPyramid) -> torch.Tensor:
        """Concatenate all levels and frames into [N_tokens, C_av]."""
        parts = []
        for level in fused.levels:
            t, c, h, w = level.shape
            parts.append(level.permute(0, 2, 3, 1).reshape(t * h * w, c))
        return torch.cat(parts, dim=0)

    @staticmethod
    def unflatten(tokens: torch.Tensor, fused: FusedPyramid) -> FusedPyramid:
        out = []
        offset = 0
        for level in fused.levels:
            t, c, h, w = level.shape
            n = t * h * w
            out.append(tokens[offset : offset + n].reshape(t, h, w, c).permute(0, 3, 1, 2))
            offset += n
        return FusedPyramid(levels=tuple(out))

    def forward(self, fused: FusedPyramid) -> FusedPyramid:
        tokens = self.flatten(fused) + self.positional_tokens(fused)
        x = tokens[None]  # single-sequence batch
        for layer in self.layers:
            x = layer(x)
        return self.unflatten(x[0], fused)


class AudioQueryBank(nn.Module):
    """N_q queries: shared audio-derived content plus per-query positions.

    With audio_conditioned=False the content is a constant zero vector,
    which ablates the audio pathway into the decoder queries.
    """

    def __init__(self, num_queries: int, audio_channels: int, dim: int, audio_conditioned: bool = True):
        super().__init__()
        if num_queries < 1:
            raise ShapeError("need at least one query")
        self.num_queries = num_queries
        self.audio_conditioned = audio_conditioned
        self.content_proj = nn.Linear(audio_channels, dim)
        self.position_embeddings = nn.Parameter(torch.randn(num_queries, dim) * 0.02)

    def build(self, audio: AudioEmbedding) -> torch.Tensor:
        if self.audio_conditioned:
            content = self.content_proj(audio.vectors.mean(dim=0))
        else:
            content = torch.zeros(self.position_embeddings.shape[1])
        return content[None, :] + self.position_embeddings


class _QueryDecoderLayer(nn.Module):
    def __init__(self, dim: int, kv_dim: int, heads: int):
        super().__init__()
        self.self_attn = nn.MultiheadAttention(dim, heads, dropout=0.0, batch_first=True)
        self.cross_attn = nn.MultiheadAttention(
            dim, heads, kdim=kv_dim, vdim=kv_dim, dropout=0.0, batch_first=True
        )
        self.norm1 = nn.LayerNorm(dim)
        self.norm2 = nn.LayerNorm(dim)
        self.norm3 = nn.LayerNorm(dim)
        self.ffn = nn.Sequential(
            nn.Linear(dim, 4 * dim), nn.ReLU(inplace=True), nn.Linear(4 * dim, dim)
        )

    def forward(self, queries: torch.Tensor, memory: torch.Tensor) -> torch.Tensor:
        q = self.norm1(queries + self.self_attn(queries, queries, queries)[0])
        q = self.norm2(q + self.cross_attn(q, memory, memory)[0])
        return self.norm3(q + self.ffn(q))


class QueryDecoder(nn.Module):
    """Stack of self/cross/FFN layers over the query bank."""

    def __init__(self, dim: int, kv_dim: int, heads: int = 8, num_layers: int = 3):
        super().__init__()
        self.layers = nn.ModuleList(
            _QueryDecoderLayer(dim, kv_dim, heads) for _ in range(num_layers)
        )

    def forward(self, queries: torch.Tensor, fused: FusedPyramid) -> QueryEmbeddings:
        memory = MultimodalEncoder.flatten(fused)[None]
        x = queries[None]
        for layer in self.layers:
            x = layer(x, memory)
        return QueryEmbeddings(outputs=x[0])
