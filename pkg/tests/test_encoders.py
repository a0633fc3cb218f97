import numpy as np
import pytest
import torch

from soundseg.audio import log_mel_spectrogram
from soundseg.clips import FrameClip
from soundseg.encoders import (
    AudioEmbedding,
    FeaturePyramid,
    ToyAudioBackbone,
    ToyVisualBackbone,
    encode_audio,
    encode_visual,
)
from soundseg.errors import ShapeError


@pytest.fixture(scope="module")
def visual_backbone():
    torch.manual_seed(0)
    return ToyVisualBackbone()


@pytest.fixture(scope="module")
def audio_backbone():
    torch.manual_seed(0)
    return ToyAudioBackbone()


def test_pyramid_shapes_224(visual_backbone):
    clip = FrameClip(torch.rand(1, 3, 224, 224))
    pyr = encode_visual(clip, visual_backbone)
    c1, c2, c3 = visual_backbone.out_channels
    assert tuple(pyr.levels[0].shape) == (1, c1, 28, 28)
    assert tuple(pyr.levels[1].shape) == (1, c2, 14, 14)
    assert tuple(pyr.levels[2].shape) == (1, c3, 7, 7)


def test_pyramid_frame_batching(visual_backbone):
    clip = FrameClip(torch.rand(5, 3, 64, 64))
    pyr = encode_visual(clip, visual_backbone)
    assert all(level.shape[0] == 5 for level in pyr.levels)


def test_identical_frames_identical_features(visual_backbone):
    frame = torch.rand(1, 3, 64, 64)
    clip = FrameClip(torch.cat([frame, frame]))
    pyr = encode_visual(clip, visual_backbone)
    for level in pyr.levels:
        assert torch.allclose(level[0], level[1])


def test_divisibility_check(visual_backbone):
    with pytest.raises(ShapeError):
        encode_visual(FrameClip(torch.rand(1, 3, 60, 64)), visual_backbone)


def test_pyramid_shape_contract_random_sizes(visual_backbone):
    rng = np.random.default_rng(1)
    for _ in range(5):
        h = int(rng.integers(1, 5)) * 32
        w = int(rng.integers(1, 5)) * 32
        pyr = encode_visual(FrameClip(torch.rand(1, 3, h, w)), visual_backbone)
        assert tuple(pyr.levels[0].shape[2:]) == (h // 8, w // 8)
        assert tuple(pyr.levels[2].shape[2:]) == (h // 32, w // 32)


def test_audio_embedding_per_segment(audio_backbone):
    clip = log_mel_spectrogram(np.zeros(3 * 16000), 16000)
    emb = encode_audio(clip, audio_backbone)
    assert tuple(emb.vectors.shape) == (3, audio_backbone.out_channels)


def test_identical_segments_identical_vectors(audio_backbone):
    clip = log_mel_spectrogram(np.zeros(2 * 16000), 16000)
    emb = encode_audio(clip, audio_backbone)
    assert torch.allclose(emb.vectors[0], emb.vectors[1])


def test_distinct_inputs_distinct_embeddings(audio_backbone):
    sr = 16000
    silence = log_mel_spectrogram(np.zeros(sr), sr)
    sine = log_mel_spectrogram(np.sin(2 * np.pi * 440 * np.arange(sr) / sr), sr)
    a = encode_audio(silence, audio_backbone).vectors
    b = encode_audio(sine, audio_backbone).vectors
    assert torch.norm(a - b) > 0


def test_encoders_deterministic(visual_backbone, audio_backbone):
    clip = FrameClip(torch.rand(1, 3, 64, 64))
    a = encode_visual(clip, visual_backbone)
    b = encode_visual(clip, visual_backbone)
    for x, y in zip(a.levels, b.levels):
        assert torch.equal(x, y)


def test_pyramid_type_validation():
    with pytest.raises(ShapeError):
        FeaturePyramid(levels=(torch.rand(1, 8, 8, 8), torch.rand(1, 8, 4, 4)))
    with pytest.raises(ShapeError):
        FeaturePyramid(
            levels=(torch.rand(1, 8, 8, 8), torch.rand(1, 8, 4, 4), torch.rand(1, 8, 3, 3))
        )


def test_audio_embedding_validation():
    with pytest.raises(ShapeError):
        AudioEmbedding(vectors=torch.tensor([[float("nan"), 0.0]]))
