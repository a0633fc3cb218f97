"""Training loop, triplet data loading, and checkpointing.

Set AVS_DETERMINISTIC=1 to force single-threaded deterministic kernels.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import random
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .audio import AudioClip, SpectrogramConfig, log_mel_spectrogram, read_wav
from .clips import FrameClip
from .config import ModelConfig, RunConfig
from .errors import DivergenceError
from .masks import BinaryMask, rle_decode
from .model import SoundingObjectSegmenter, build_model
from .objective import training_loss
from .synthesis import DatasetManifest

log = logging.getLogger(__name__)


def setup_determinism(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)
    if os.environ.get("AVS_DETERMINISTIC") == "1":
        torch.use_deterministic_algorithms(True)
        torch.set_num_threads(1)


@dataclass
class LoadedSample:
    clip: FrameClip
    spec: AudioClip
    mask: BinaryMask
    canonical_class: str
    id: str


class TripletDataset:
    """Loads manifest samples from disk, caching decoded media."""

    def __init__(self, manifest: DatasetManifest, root, spectrogram_cfg: SpectrogramConfig = SpectrogramConfig()):
        self.manifest = manifest
        self.root = Path(root)
        self.cfg = spectrogram_cfg
        self._image_cache = {}
        self._audio_cache = {}

    def _image(self, uri: str) -> FrameClip:
        if uri not in self._image_cache:
            arr = np.asarray(Image.open(self.root / uri).convert("RGB"))
            self._image_cache[uri] = FrameClip.from_image(arr)
        return self._image_cache[uri]

    def _audio(self, uri: str) -> AudioClip:
        if uri not in self._audio_cache:
            wav, sr = read_wav(self.root / uri)
            self._audio_cache[uri] = log_mel_spectrogram(wav, sr, self.cfg)
        return self._audio_cache[uri]

    def load(self, sample) -> LoadedSample:
        return LoadedSample(
            clip=self._image(sample.image_uri),
            spec=self._audio(sample.audio_uri),
            mask=rle_decode(sample.mask),
            canonical_class=sample.canonical_class,
            id=sample.id,
        )

    def split(self, name: str) -> list:
        return self.manifest.split_samples(name)


# ---------------------------------------------------------------------------
# Checkpoints: a zip holding the config snapshot, the seed, and one
# little-endian float32 array per parameter/buffer.
# ---------------------------------------------------------------------------

def save_checkpoint(path, model: SoundingObjectSegmenter, config: RunConfig, seed: int) -> None:
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        meta = {
            "config": config.to_dict(),
            "seed": seed,
            "arrays": {},
        }
        state = model.state_dict()
        for name, tensor in state.items():
            arr = tensor.detach().cpu().numpy().astype("<f4")
            meta["arrays"][name] = list(arr.shape)
            zf.writestr(f"weights/{name}.bin", arr.tobytes())
        zf.writestr("meta.json", json.dumps(meta, sort_keys=True))


def load_checkpoint(path):
    """Rebuild the model from an archive; returns (model, RunConfig, seed)."""
    with zipfile.ZipFile(path) as zf:
        meta = json.loads(zf.read("meta.json"))
        cfg = _config_from_dict(meta["config"])
        model = build_model(cfg.model, seed=meta["seed"])
        state = {}
        for name, shape in meta["arrays"].items():
            raw = zf.read(f"weights/{name}.bin")
            arr = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
            state[name] = torch.from_numpy(arr)
        model.load_state_dict(state)
    return model, cfg, meta["seed"]


def _config_from_dict(d: dict) -> RunConfig:
    from .audio import SpectrogramConfig
    from .config import DataConfig, OptimConfig
    from .objective import CostConfig

    def build(cls, sub):
        fields = {f.name for f in dataclasses.fields(cls)}
        kwargs = {k: v for k, v in sub.items() if k in fields}
        for k, v in kwargs.items():
            if isinstance(v, list):
                kwargs[k] = tuple(v)
        return cls(**kwargs)

    return RunConfig(
        model=build(ModelConfig, d["model"]),
        optim=build(OptimConfig, d["optim"]),
        loss=build(CostConfig, d["loss"]),
        audio=build(SpectrogramConfig, d["audio"]),
        data=build(DataConfig, d["data"]),
        seed=d.get("seed", 0),
    )


@dataclass
class TrainResult:
    model: SoundingObjectSegmenter
    losses: list
    steps: int


def train(
    config: RunConfig,
    manifest: DatasetManifest,
    root,
    model: SoundingObjectSegmenter = None,
    max_steps: int = None,
    log_every: int = 50,
) -> TrainResult:
    """Minimize the composite matching loss over the manifest's train split.

    Backbones stay frozen; raises DivergenceError on non-finite loss.
    """
    setup_determinism(config.seed)
    if model is None:
        model = build_model(config.model, seed=config.seed)
    dataset = TripletDataset(manifest, root, config.audio)
    samples = dataset.split("train")
    if not samples:
        raise ValueError("manifest has no train samples")

    optimizer = torch.optim.AdamW(
        model.trainable_parameters(), lr=config.optim.lr, weight_decay=config.optim.weight_decay
    )
    rng = random.Random(config.seed)
    batch = max(1, config.optim.batch_size)
    if max_steps is None:
        max_steps = config.optim.max_steps
    if not max_steps:
        steps_per_epoch = max(1, len(samples) // batch)
        max_steps = config.optim.epochs * steps_per_epoch

    model.train()
    losses = []
    for step in range(max_steps):
        chosen = [samples[rng.randrange(len(samples))] for _ in range(batch)]
        optimizer.zero_grad()
        total = 0.0
        for s in chosen:
            loaded = dataset.load(s)
            pred = model(loaded.clip, loaded.spec)
            loss = training_loss(pred, loaded.mask, config.loss) / batch
            loss.backward()
            total += float(loss.detach())
        if not np.isfinite(total):
            raise DivergenceError(f"loss became non-finite at step {step}")
        optimizer.step()
        losses.append(total)
        if log_every and step % log_every == 0:
            log.info("step %d loss %.4f", step, total)
    model.eval()
    return TrainResult(model=model, losses=losses, steps=max_steps)
