"""End-to-end sounding-object segmenter: frozen encoders, audio-visual
fusion, query decoding, and the dynamic-convolution mask head.
"""

from __future__ import annotations

import torch
from torch import nn

from .audio import AudioClip
from .clips import FrameClip
from .config import ModelConfig
from .encoders import (
    ToyAudioBackbone,
    ToyVisualBackbone,
    encode_audio,
    encode_visual,
)
from .fusion import (
    AudioQueryBank,
    AudioVisualFusion,
    MultimodalEncoder,
    QueryDecoder,
)
from .mask_head import KernelHead, MaskLogits, PixelDecoder, SoundingHead, dynamic_convolve


class SoundingObjectSegmenter(nn.Module):
    """Predicts per-query mask logits and sounding scores for one clip."""

    def __init__(self, cfg: ModelConfig = ModelConfig(), visual_backbone=None, audio_backbone=None):
        super().__init__()
        self.cfg = cfg
        self.visual_backbone = visual_backbone or ToyVisualBackbone(cfg.visual_channels)
        self.audio_backbone = audio_backbone or ToyAudioBackbone(cfg.c_a)
        # Backbones stay frozen; only the fusion/decoder/head stack trains.
        for p in self.visual_backbone.parameters():
            p.requires_grad_(False)
        for p in self.audio_backbone.parameters():
            p.requires_grad_(False)

        vis_ch = self.visual_backbone.out_channels
        aud_ch = self.audio_backbone.out_channels
        self.avff = AudioVisualFusion(vis_ch, aud_ch, cfg.c_av, cfg.heads)
        self.mm_encoder = MultimodalEncoder(
            cfg.c_av, cfg.heads, cfg.l_enc, temporal_encoding=cfg.temporal_encoding
        )
        self.query_bank = AudioQueryBank(
            cfg.num_queries, aud_ch, cfg.dim, audio_conditioned=cfg.audio_queries
        )
        self.query_decoder = QueryDecoder(cfg.dim, cfg.c_av, cfg.heads, cfg.l_dec)
        self.pixel_decoder = PixelDecoder(
            vis_ch, aud_ch, cfg.c_av, cfg.c_m, heads=min(4, cfg.heads), mask_stride=cfg.mask_stride
        )
        self.kernel_head = KernelHead(cfg.dim, cfg.c_m)
        self.sounding_head = SoundingHead(cfg.dim)

    def forward(self, clip: FrameClip, spec: AudioClip) -> MaskLogits:
        pyramid = encode_visual(clip, self.visual_backbone)
        audio = encode_audio(spec, self.audio_backbone)
        fused = self.avff(pyramid, audio)
        fused = self.mm_encoder(fused)
        queries = self.query_decoder(self.query_bank.build(audio), fused)
        features = self.pixel_decoder(pyramid, audio, fused)
        logits = dynamic_convolve(features, self.kernel_head(queries))
        scores = self.sounding_head(queries)
        return MaskLogits(logits=logits, sounding_scores=scores)

    def trainable_parameters(self):
        """Parameters updated by the optimizer; excludes frozen backbones."""
        return [p for p in self.parameters() if p.requires_grad]

    def frozen_parameters(self):
        return [p for p in self.parameters() if not p.requires_grad]


def build_model(cfg: ModelConfig, seed: int = 0) -> SoundingObjectSegmenter:
    """Seeded construction so two builds share identical initial weights."""
    torch.manual_seed(seed)
    return SoundingObjectSegmenter(cfg)
