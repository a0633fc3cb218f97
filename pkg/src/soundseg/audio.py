"""Log-mel spectrogram extraction.

Convention: 0.96 s segments hopped at 1.0 s, each rendered as 96 STFT
frames (25 ms Hann window, 10 ms hop) x 64 mel bands between 125 and
7500 Hz (HTK mel scale).
"""

from __future__ import annotations

import wave
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, TooShort

#: Hard floor: waveforms shorter than this many seconds are rejected.
MIN_WAVEFORM_SECONDS = 0.1

STFT_WINDOW_SECONDS = 0.025
STFT_HOP_SECONDS = 0.010
MEL_MIN_HZ = 125.0
MEL_MAX_HZ = 7500.0


@dataclass(frozen=True)
class SpectrogramConfig:
    sample_rate_hz: int = 16000
    n_mels: int = 64
    frames_per_segment: int = 96
    segment_seconds: float = 0.96
    hop_seconds: float = 1.0
    eps: float = 1e-6


@dataclass(frozen=True)
class AudioClip:
    """Per-segment log-mel spectrograms, one segment per paired frame."""

    spectrograms: np.ndarray  # [T, H_a, W_a]
    sample_rate_hz: int

    def __post_init__(self):
        s = np.asarray(self.spectrograms, dtype=np.float32)
        if s.ndim != 3 or s.shape[0] < 1:
            raise ShapeError(f"spectrograms must be [T, H_a, W_a], got {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ShapeError("spectrograms must be finite")
        object.__setattr__(self, "spectrograms", s)

    @property
    def num_segments(self) -> int:
        return self.spectrograms.shape[0]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_band_edges(n_mels: int, fmin: float = MEL_MIN_HZ, fmax: float = MEL_MAX_HZ) -> np.ndarray:
    """n_mels + 2 edge frequencies, equally spaced on the mel scale."""
    return mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))


def _mel_filterbank(n_mels: int, n_fft: int, sample_rate: int) -> np.ndarray:
    edges = mel_band_edges(n_mels)
    fft_freqs = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)
    bank = np.zeros((n_mels, len(fft_freqs)))
    for b in range(n_mels):
        lo, ctr, hi = edges[b], edges[b + 1], edges[b + 2]
        up = (fft_freqs - lo) / (ctr - lo)
        down = (hi - fft_freqs) / (hi - ctr)
        bank[b] = np.maximum(0.0, np.minimum(up, down))
    return bank


def _stft_magnitude(waveform: np.ndarray, window: int, hop: int, n_fft: int) -> np.ndarray:
    n_frames = 1 + (len(waveform) - window) // hop
    win = np.hanning(window)
    frames = np.stack(
        [waveform[i * hop : i * hop + window] * win for i in range(n_frames)]
    )
    return np.abs(np.fft.rfft(frames, n=n_fft, axis=1))


def log_mel_spectrogram(waveform, sample_rate_hz: int, cfg: SpectrogramConfig = SpectrogramConfig()) -> AudioClip:
    """Segment a waveform into per-second log-mel spectrograms.

    Waveforms shorter than one segment (but at least MIN_WAVEFORM_SECONDS)
    are zero-padded to a single segment; anything shorter raises TooShort.
    """
    wav = np.asarray(waveform, dtype=np.float64).ravel()
    if sample_rate_hz != cfg.sample_rate_hz:
        raise ShapeError(
            f"sample rate {sample_rate_hz} != configured {cfg.sample_rate_hz}"
        )
    if len(wav) < MIN_WAVEFORM_SECONDS * sample_rate_hz:
        raise TooShort(
            f"waveform of {len(wav) / sample_rate_hz:.3f}s is below the "
            f"{MIN_WAVEFORM_SECONDS}s minimum"
        )

    seg_samples = int(round(cfg.segment_seconds * sample_rate_hz))
    hop_samples = int(round(cfg.hop_seconds * sample_rate_hz))
    if len(wav) < seg_samples:
        wav = np.pad(wav, (0, seg_samples - len(wav)))
    num_segments = 1 + (len(wav) - seg_samples) // hop_samples

    window = int(round(STFT_WINDOW_SECONDS * sample_rate_hz))
    stft_hop = int(round(STFT_HOP_SECONDS * sample_rate_hz))
    n_fft = 1 << (window - 1).bit_length()

    # Enough STFT frames for frames_per_segment per segment.
    frames_needed = cfg.frames_per_segment + (num_segments - 1) * int(
        round(cfg.hop_seconds / STFT_HOP_SECONDS)
    )
    samples_needed = (frames_needed - 1) * stft_hop + window
    if len(wav) < samples_needed:
        wav = np.pad(wav, (0, samples_needed - len(wav)))

    magnitude = _stft_magnitude(wav, window, stft_hop, n_fft)
    bank = _mel_filterbank(cfg.n_mels, n_fft, sample_rate_hz)
    mel = magnitude @ bank.T  # [frames, n_mels]
    logmel = np.log(mel + cfg.eps)

    frames_per_hop = int(round(cfg.hop_seconds / STFT_HOP_SECONDS))
    segments = np.stack(
        [
            logmel[t * frames_per_hop : t * frames_per_hop + cfg.frames_per_segment]
            for t in range(num_segments)
        ]
    )
    return AudioClip(spectrograms=segments.astype(np.float32), sample_rate_hz=sample_rate_hz)


def write_wav(path, waveform, sample_rate_hz: int) -> None:
    """Write mono 16-bit PCM."""
    pcm = np.clip(np.asarray(waveform, dtype=np.float64), -1.0, 1.0)
    pcm = (pcm * 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(sample_rate_hz)
        w.writeframes(pcm.tobytes())


def read_wav(path):
    """Read mono 16-bit PCM; returns (waveform in [-1, 1], sample_rate)."""
    with wave.open(str(path), "rb") as w:
        if w.getsampwidth() != 2 or w.getnchannels() != 1:
            raise ShapeError("only mono 16-bit PCM WAV files are supported")
        sr = w.getframerate()
        data = np.frombuffer(w.readframes(w.getnframes()), dtype="<i2")
    return data.astype(np.float64) / 32767.0, sr
