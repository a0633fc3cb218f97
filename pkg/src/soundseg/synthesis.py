"""Triplet dataset construction: collect visual and audio pools from
source-format adapters, join them by canonical class, and emit a
train/test manifest.

Pairing is one triplet per mask instance; the audio partner is drawn
uniformly (seeded, with replacement) from the same-class audio pool.
"""

from __future__ import annotations

import csv
import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyJoin, ParseError
from .masks import BinaryMask, MaskRLE, rle_encode
from .ontology import AliasTable, NO_MATCH

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1


@dataclass(frozen=True)
class ImageMaskRecord:
    image_uri: str
    mask: MaskRLE
    source_dataset: str
    source_label: str
    canonical_class: str
    image_size: tuple  # (H0, W0)


@dataclass(frozen=True)
class AudioClipRecord:
    audio_uri: str
    source_dataset: str
    source_label: str
    canonical_class: str
    duration_s: float


@dataclass(frozen=True)
class TripletSample:
    id: str
    image_uri: str
    mask: MaskRLE
    audio_uri: str
    canonical_class: str
    split: str = "train"


@dataclass
class DatasetManifest:
    samples: list
    class_counts: dict
    seed: int

    def split_samples(self, split: str) -> list:
        return [s for s in self.samples if s.split == split]


@dataclass
class CollectResult:
    records: list = field(default_factory=list)
    n_unresolved: int = 0
    n_malformed: int = 0

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


# ---------------------------------------------------------------------------
# Source-format adapters.  Each yields raw dicts with the keys consumed by
# collect_visual / collect_audio; malformed records raise ParseError, which
# the collectors turn into skip-and-count.
# ---------------------------------------------------------------------------

def iter_coco_instances(path, dataset: str = "lvis"):
    """COCO/LVIS-style instance JSON with uncompressed RLE segmentations."""
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    images = {im["id"]: im for im in doc.get("images", [])}
    categories = {c["id"]: c["name"] for c in doc.get("categories", [])}
    for ann in doc.get("annotations", []):
        yield {
            "kind": "visual",
            "dataset": dataset,
            "ann": ann,
            "images": images,
            "categories": categories,
        }


def _parse_coco_visual(raw) -> ImageMaskRecord:
    ann = raw["ann"]
    try:
        image = raw["images"][ann["image_id"]]
        label = raw["categories"][ann["category_id"]]
        seg = ann["segmentation"]
        rle = MaskRLE.from_json(seg)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad annotation {ann.get('id')!r}: {exc}") from exc
    h, w = int(image["height"]), int(image["width"])
    if (rle.height, rle.width) != (h, w):
        raise ParseError(f"mask size {rle.height}x{rle.width} != image {h}x{w}")
    if sum(rle.counts) != h * w:
        raise ParseError("RLE counts do not cover the image")
    return ImageMaskRecord(
        image_uri=str(image["file_name"]),
        mask=rle,
        source_dataset=raw["dataset"],
        source_label=label,
        canonical_class="",  # filled by the collector
        image_size=(h, w),
    )


def iter_openimages_csv(path, dataset: str = "openimages"):
    """Open Images-style CSV: image_uri,mask_path,label,height,width.

    Mask files are PNGs with nonzero pixels inside the object.
    """
    base = Path(path).parent
    with open(path, encoding="utf-8", newline="") as f:
        for i, row in enumerate(csv.DictReader(f), start=2):
            yield {"kind": "visual_csv", "dataset": dataset, "row": row, "base": base, "line": i}


def _parse_openimages_visual(raw) -> ImageMaskRecord:
    row, base = raw["row"], raw["base"]
    try:
        h, w = int(row["height"]), int(row["width"])
        mask_path = base / row["mask_path"]
        from PIL import Image

        grid = (np.asarray(Image.open(mask_path).convert("L")) > 0).astype(np.uint8)
    except (KeyError, TypeError, ValueError, OSError) as exc:
        raise ParseError(str(exc), line=raw.get("line")) from exc
    if grid.shape != (h, w):
        raise ParseError(f"mask file shape {grid.shape} != ({h}, {w})", line=raw.get("line"))
    return ImageMaskRecord(
        image_uri=row["image_uri"],
        mask=rle_encode(BinaryMask(grid)),
        source_dataset=raw["dataset"],
        source_label=row["label"],
        canonical_class="",
        image_size=(h, w),
    )


def iter_audio_csv(path, dataset: str = "vggsound"):
    """Audio CSV: audio_uri,label,duration_s."""
    with open(path, encoding="utf-8", newline="") as f:
        for i, row in enumerate(csv.DictReader(f), start=2):
            yield {"kind": "audio", "dataset": dataset, "row": row, "line": i}


def _parse_audio(raw) -> AudioClipRecord:
    row = raw["row"]
    try:
        duration = float(row["duration_s"])
        uri = row["audio_uri"]
        label = row["label"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(str(exc), line=raw.get("line")) from exc
    if duration <= 0:
        raise ParseError(f"non-positive duration {duration}", line=raw.get("line"))
    return AudioClipRecord(
        audio_uri=uri,
        source_dataset=raw["dataset"],
        source_label=label,
        canonical_class="",
        duration_s=duration,
    )


_VISUAL_PARSERS = {"visual": _parse_coco_visual, "visual_csv": _parse_openimages_visual}


def collect_visual(records, table: AliasTable) -> CollectResult:
    """Keep one ImageMaskRecord per object instance whose label resolves."""
    result = CollectResult()
    for raw in records:
        parser = _VISUAL_PARSERS.get(raw.get("kind"))
        if parser is None:
            result.n_malformed += 1
            continue
        try:
            rec = parser(raw)
        except ParseError as exc:
            log.debug("skipping malformed visual annotation: %s", exc)
            result.n_malformed += 1
            continue
        canonical = table.resolve(rec.source_dataset, rec.source_label)
        if canonical is NO_MATCH:
            result.n_unresolved += 1
            continue
        result.records.append(
            ImageMaskRecord(
                image_uri=rec.image_uri,
                mask=rec.mask,
                source_dataset=rec.source_dataset,
                source_label=rec.source_label,
                canonical_class=canonical,
                image_size=rec.image_size,
            )
        )
    return result


def collect_audio(records, table: AliasTable) -> CollectResult:
    result = CollectResult()
    for raw in records:
        if raw.get("kind") != "audio":
            result.n_malformed += 1
            continue
        try:
            rec = _parse_audio(raw)
        except ParseError as exc:
            log.debug("skipping malformed audio annotation: %s", exc)
            result.n_malformed += 1
            continue
        canonical = table.resolve(rec.source_dataset, rec.source_label)
        if canonical is NO_MATCH:
            result.n_unresolved += 1
            continue
        result.records.append(
            AudioClipRecord(
                audio_uri=rec.audio_uri,
                source_dataset=rec.source_dataset,
                source_label=rec.source_label,
                canonical_class=canonical,
                duration_s=rec.duration_s,
            )
        )
    return result


def compose_triplets(visual, audio, seed: int) -> list:
    """One triplet per visual instance whose class has at least one audio clip.

    Inputs are sorted before seeded sampling so that collection order
    (possibly parallel) does not affect the result.
    """
    visual = sorted(visual, key=lambda r: (r.image_uri, r.canonical_class, r.mask.counts))
    audio_by_class = {}
    for a in sorted(audio, key=lambda r: r.audio_uri):
        audio_by_class.setdefault(a.canonical_class, []).append(a)

    shared = {v.canonical_class for v in visual} & set(audio_by_class)
    if not shared:
        raise EmptyJoin("no canonical class present in both visual and audio pools")

    rng = random.Random(seed)
    triplets = []
    for idx, v in enumerate(visual):
        pool = audio_by_class.get(v.canonical_class)
        if not pool:
            continue
        partner = rng.choice(pool)
        triplets.append(
            TripletSample(
                id=f"t{idx:06d}",
                image_uri=v.image_uri,
                mask=v.mask,
                audio_uri=partner.audio_uri,
                canonical_class=v.canonical_class,
                split="train",
            )
        )
    return triplets


def split_manifest(samples, test_fraction: float, seed: int) -> DatasetManifest:
    """Per-class stratified split; a class never loses its last train sample."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    by_class = {}
    for s in samples:
        by_class.setdefault(s.canonical_class, []).append(s)

    rng = random.Random(seed)
    out = []
    for cls in sorted(by_class):
        group = sorted(by_class[cls], key=lambda s: s.id)
        rng.shuffle(group)
        n_test = min(round(test_fraction * len(group)), len(group) - 1)
        n_test = max(n_test, 0)
        for i, s in enumerate(group):
            split = "test" if i < n_test else "train"
            out.append(
                TripletSample(
                    id=s.id,
                    image_uri=s.image_uri,
                    mask=s.mask,
                    audio_uri=s.audio_uri,
                    canonical_class=s.canonical_class,
                    split=split,
                )
            )
    out.sort(key=lambda s: s.id)
    counts = {}
    for s in out:
        counts[s.canonical_class] = counts.get(s.canonical_class, 0) + 1
    return DatasetManifest(samples=out, class_counts=counts, seed=seed)


# ---------------------------------------------------------------------------
# Manifest persistence: JSONL with a header line.
# ---------------------------------------------------------------------------

def write_manifest(manifest: DatasetManifest, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        header = {
            "version": MANIFEST_VERSION,
            "seed": manifest.seed,
            "class_counts": manifest.class_counts,
        }
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for s in manifest.samples:
            rec = {
                "id": s.id,
                "image_uri": s.image_uri,
                "mask": s.mask.to_json(),
                "audio_uri": s.audio_uri,
                "class": s.canonical_class,
                "split": s.split,
            }
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def read_manifest(path) -> DatasetManifest:
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise ParseError("empty manifest file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad header: {exc}", line=1) from exc
    samples = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            samples.append(
                TripletSample(
                    id=rec["id"],
                    image_uri=rec["image_uri"],
                    mask=MaskRLE.from_json(rec["mask"]),
                    audio_uri=rec["audio_uri"],
                    canonical_class=rec["class"],
                    split=rec["split"],
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ParseError(f"bad manifest record: {exc}", line=lineno) from exc
    return DatasetManifest(
        samples=samples,
        class_counts={k: int(v) for k, v in header.get("class_counts", {}).items()},
        seed=int(header.get("seed", 0)),
    )
