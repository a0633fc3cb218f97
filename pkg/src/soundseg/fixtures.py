"""Procedural desk-scale fixtures: drawn shape images with exact masks and
synthesized per-class tones, emitted in the adapter formats the synthesis
pipeline accepts.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .audio import write_wav
from .errors import ShapeError
from .masks import BinaryMask, rle_encode

VISUAL_DATASET = "fixture_visual"
AUDIO_DATASET = "fixture_audio"

SHAPE_CLASSES = ("disk", "square", "triangle", "ring")

#: Distinct tone frequency per shape class (Hz), well separated in mel space.
DEFAULT_AUDIO_SIGNATURES = {
    "disk": 300.0,
    "square": 1000.0,
    "triangle": 2500.0,
    "ring": 5500.0,
}

_FILL = {
    "disk": (0.85, 0.25, 0.20),
    "square": (0.20, 0.75, 0.30),
    "triangle": (0.25, 0.35, 0.90),
    "ring": (0.90, 0.80, 0.20),
}


@dataclass(frozen=True)
class FixtureSpec:
    canvas: int = 64
    classes: tuple = ("disk", "square")
    audio_signatures: dict = field(default_factory=lambda: dict(DEFAULT_AUDIO_SIGNATURES))
    instances_per_image: tuple = (1, 1)
    clips_per_class: int = 4
    style: str = "synthetic"  # or "real": different rendering of the same shapes
    sample_rate_hz: int = 16000

    def __post_init__(self):
        if self.canvas % 32:
            raise ShapeError("canvas must be divisible by 32")
        lo, hi = self.instances_per_image
        if not 1 <= lo <= hi <= len(self.classes):
            raise ShapeError("instances_per_image must fit within the class list")
        missing = [c for c in self.classes if c not in self.audio_signatures]
        if missing:
            raise ShapeError(f"classes without an audio signature: {missing}")
        if self.style not in ("synthetic", "real"):
            raise ShapeError(f"unknown style {self.style!r}")


def _raster(cls: str, canvas: int, cy: float, cx: float, r: float) -> np.ndarray:
    yy, xx = np.mgrid[0:canvas, 0:canvas].astype(np.float64)
    dy, dx = yy - cy, xx - cx
    if cls == "disk":
        return (dy**2 + dx**2 <= r**2).astype(np.uint8)
    if cls == "square":
        return ((np.abs(dy) <= r) & (np.abs(dx) <= r)).astype(np.uint8)
    if cls == "triangle":
        # upward triangle inscribed in the radius-r box
        inside = (dy <= r) & (dy >= -r) & (np.abs(dx) <= (dy + r) / 2)
        return inside.astype(np.uint8)
    if cls == "ring":
        d2 = dy**2 + dx**2
        return ((d2 <= r**2) & (d2 >= (0.55 * r) ** 2)).astype(np.uint8)
    raise ShapeError(f"unknown shape class {cls!r}")


def _render(canvas: int, instances, style: str, rng) -> np.ndarray:
    if style == "synthetic":
        img = np.full((canvas, canvas, 3), 0.20) + rng.normal(0, 0.02, (canvas, canvas, 3))
    else:
        grad = np.linspace(0.10, 0.40, canvas)[:, None, None]
        img = np.broadcast_to(grad, (canvas, canvas, 3)).copy()
        img += rng.normal(0, 0.05, (canvas, canvas, 3))
    for cls, mask in instances:
        fill = np.asarray(_FILL[cls])
        if style == "real":
            fill = np.clip(fill * 0.8 + 0.12, 0, 1)
        jitter = rng.normal(0, 0.03, 3)
        img[mask.astype(bool)] = np.clip(fill + jitter, 0, 1)
    return np.clip(img, 0, 1)


def _tone(freq: float, sr: int, rng, style: str) -> np.ndarray:
    t = np.arange(sr) / sr  # 1.0 s clips
    phase = rng.uniform(0, 2 * np.pi)
    wav = 0.5 * np.sin(2 * np.pi * freq * t + phase)
    wav += 0.1 * np.sin(2 * np.pi * 2 * freq * t + phase)  # one harmonic
    noise_level = 0.01 if style == "synthetic" else 0.03
    wav += rng.normal(0, noise_level, len(t))
    return np.clip(wav, -1, 1)


def generate_fixtures(spec: FixtureSpec, n: int, seed: int, out_dir) -> dict:
    """Write n images (with exact instance masks) plus an audio pool.

    Returns the paths of the emitted annotation files.  Deterministic in
    (spec, n, seed).
    """
    if n < 1:
        raise ShapeError("need n >= 1")
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "audio").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    images, annotations = [], []
    categories = [{"id": i + 1, "name": c} for i, c in enumerate(spec.classes)]
    cat_id = {c["name"]: c["id"] for c in categories}
    ann_id = 1
    lo, hi = spec.instances_per_image
    for img_idx in range(n):
        k = int(rng.integers(lo, hi + 1))
        classes = list(rng.choice(spec.classes, size=k, replace=False))
        instances = []
        for slot, cls in enumerate(classes):
            # one horizontal slot per instance keeps shapes disjoint
            slot_w = spec.canvas / k
            r = rng.uniform(0.22, 0.38) * slot_w
            cx = slot * slot_w + rng.uniform(r + 1, slot_w - r - 1)
            cy = rng.uniform(r + 1, spec.canvas - r - 1)
            instances.append((cls, _raster(cls, spec.canvas, cy, cx, r)))
        img = _render(spec.canvas, instances, spec.style, rng)
        name = f"images/img_{img_idx:05d}.png"
        Image.fromarray((img * 255).astype(np.uint8)).save(out / name)
        images.append(
            {"id": img_idx + 1, "file_name": name, "height": spec.canvas, "width": spec.canvas}
        )
        for cls, mask in instances:
            annotations.append(
                {
                    "id": ann_id,
                    "image_id": img_idx + 1,
                    "category_id": cat_id[cls],
                    "segmentation": rle_encode(BinaryMask(mask)).to_json(),
                }
            )
            ann_id += 1

    visual_json = out / "visual_annotations.json"
    with open(visual_json, "w", encoding="utf-8") as f:
        json.dump(
            {"images": images, "annotations": annotations, "categories": categories},
            f,
            sort_keys=True,
        )

    audio_rows = []
    for cls in spec.classes:
        for i in range(spec.clips_per_class):
            wav = _tone(spec.audio_signatures[cls], spec.sample_rate_hz, rng, spec.style)
            name = f"audio/{cls}_{i:03d}.wav"
            write_wav(out / name, wav, spec.sample_rate_hz)
            audio_rows.append({"audio_uri": name, "label": f"{cls} tone", "duration_s": "1.0"})

    audio_csv = out / "audio_annotations.csv"
    with open(audio_csv, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["audio_uri", "label", "duration_s"])
        writer.writeheader()
        writer.writerows(audio_rows)

    return {
        "visual_json": str(visual_json),
        "audio_csv": str(audio_csv),
        "images_dir": str(out / "images"),
        "audio_dir": str(out / "audio"),
    }
