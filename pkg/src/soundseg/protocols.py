"""Experiment drivers: evaluation, zero-shot transfer, data-efficient
finetuning sweeps, open-set class splits, and the audio-selectivity probe.
"""

from __future__ import annotations

import json
import logging
import random
from pathlib import Path

import torch

from .config import RunConfig
from .errors import TooFewClasses
from .masks import rle_decode
from .metrics import EvalAccumulator, aggregate, f_measure, iou
from .mask_head import select_and_upsample
from .model import SoundingObjectSegmenter, build_model
from .synthesis import DatasetManifest
from .train import TripletDataset, train

log = logging.getLogger(__name__)


def evaluate(model: SoundingObjectSegmenter, manifest: DatasetManifest, root, config: RunConfig, split: str = "test") -> dict:
    """Per-class and mean M_J / M_F over one split of a manifest."""
    dataset = TripletDataset(manifest, root, config.audio)
    samples = dataset.split(split)
    if not samples:
        return {"num_samples": 0, "miou": None, "mf": None, "per_class": {}}
    acc = EvalAccumulator()
    model.eval()
    with torch.no_grad():
        for s in samples:
            loaded = dataset.load(s)
            pred = model(loaded.clip, loaded.spec)
            masks, _ = select_and_upsample(
                pred, loaded.mask.height, loaded.mask.width, config.model.threshold
            )
            acc.add(s.canonical_class, iou(masks[0], loaded.mask), f_measure(masks[0], loaded.mask))
    return aggregate(acc)


def run_zero_shot(model: SoundingObjectSegmenter, eval_manifest: DatasetManifest, root, config: RunConfig, split: str = "test") -> dict:
    """Evaluate a trained model on a manifest it never saw."""
    report = evaluate(model, eval_manifest, root, config, split=split)
    if report["num_samples"] == 0:
        report["warning"] = "zero evaluable samples (no class overlap?)"
    return report


def _stratified_subsample(samples, fraction: float, seed: int):
    by_class = {}
    for s in samples:
        by_class.setdefault(s.canonical_class, []).append(s)
    rng = random.Random(seed)
    out = []
    for cls in sorted(by_class):
        group = sorted(by_class[cls], key=lambda s: s.id)
        rng.shuffle(group)
        n = max(1, round(fraction * len(group))) if fraction > 0 else 0
        out.extend(group[:n])
    return sorted(out, key=lambda s: s.id)


def run_finetune_sweep(
    pretrained: SoundingObjectSegmenter,
    real_manifest: DatasetManifest,
    root,
    config: RunConfig,
    fractions=(0.0, 0.1, 0.2, 0.3, 1.0),
    finetune_steps: int = 200,
) -> list:
    """For each fraction: finetune on that much of the real train split and
    evaluate on the real test split, once starting from the pretrained
    weights and once from scratch.  Fraction 0 is direct evaluation.

    Returns rows: {fraction, arm, miou, mf}.
    """
    rows = []
    train_samples = real_manifest.split_samples("train")
    for fraction in fractions:
        for arm, base in (("with_pretraining", pretrained), ("without_pretraining", None)):
            model = _clone_model(base, config) if base is not None else build_model(config.model, seed=config.seed)
            if fraction > 0:
                subset = _stratified_subsample(train_samples, fraction, config.seed)
                sub_manifest = DatasetManifest(
                    samples=subset + real_manifest.split_samples("test"),
                    class_counts=real_manifest.class_counts,
                    seed=config.seed,
                )
                train(config, sub_manifest, root, model=model, max_steps=finetune_steps)
            report = evaluate(model, real_manifest, root, config, split="test")
            rows.append(
                {
                    "fraction": fraction,
                    "arm": arm,
                    "miou": report["miou"],
                    "mf": report["mf"],
                    "num_samples": report["num_samples"],
                }
            )
            log.info("sweep fraction=%s arm=%s miou=%s", fraction, arm, report["miou"])
    return rows


def _clone_model(model: SoundingObjectSegmenter, config: RunConfig) -> SoundingObjectSegmenter:
    clone = build_model(config.model, seed=config.seed)
    clone.load_state_dict(model.state_dict())
    return clone


def make_openset_split(manifest: DatasetManifest, n_seen: int, seed: int):
    """Class-disjoint partition into (seen, unseen) manifests."""
    classes = sorted({s.canonical_class for s in manifest.samples})
    if n_seen >= len(classes):
        raise TooFewClasses(f"need n_seen < {len(classes)}, got {n_seen}")
    rng = random.Random(seed)
    shuffled = classes[:]
    rng.shuffle(shuffled)
    seen = set(shuffled[:n_seen])

    def subset(keep):
        samples = [s for s in manifest.samples if (s.canonical_class in seen) == keep]
        counts = {}
        for s in samples:
            counts[s.canonical_class] = counts.get(s.canonical_class, 0) + 1
        return DatasetManifest(samples=samples, class_counts=counts, seed=seed)

    return subset(True), subset(False)


def audio_selectivity_eval(
    model: SoundingObjectSegmenter,
    manifest: DatasetManifest,
    root,
    config: RunConfig,
    visual_annotations_path,
    split: str = "test",
    limit: int = None,
) -> dict:
    """Fraction of samples where the prediction overlaps the sounding
    object more than the silent object sharing its image.

    Needs the fixture annotation file to recover the silent instance masks.
    """
    ann_path = Path(visual_annotations_path)
    if not ann_path.is_absolute():
        ann_path = Path(root) / ann_path
    with open(ann_path, encoding="utf-8") as f:
        doc = json.load(f)
    images_by_name = {im["file_name"]: im["id"] for im in doc["images"]}
    anns_by_image = {}
    for ann in doc["annotations"]:
        anns_by_image.setdefault(ann["image_id"], []).append(ann)

    from .masks import MaskRLE

    dataset = TripletDataset(manifest, root, config.audio)
    samples = dataset.split(split)
    if limit:
        samples = samples[:limit]
    wins = 0
    total = 0
    model.eval()
    with torch.no_grad():
        for s in samples:
            image_id = images_by_name.get(s.image_uri)
            if image_id is None:
                continue
            anns = anns_by_image.get(image_id, [])
            sounding = rle_decode(s.mask)
            silent = None
            for ann in anns:
                m = rle_decode(MaskRLE.from_json(ann["segmentation"]))
                if m != sounding:
                    silent = m
                    break
            if silent is None:
                continue
            loaded = dataset.load(s)
            pred = model(loaded.clip, loaded.spec)
            masks, _ = select_and_upsample(
                pred, sounding.height, sounding.width, config.model.threshold
            )
            if iou(masks[0], sounding) > iou(masks[0], silent):
                wins += 1
            total += 1
    return {
        "num_samples": total,
        "selectivity": (wins / total) if total else None,
        "wins": wins,
    }
