"""Region (IoU) and contour (F-measure) metrics with per-class aggregation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyAccumulator, ShapeError
from .masks import BinaryMask


def iou(pred: BinaryMask, gt: BinaryMask) -> float:
    """Intersection over union; 1.0 when both masks are empty."""
    if pred.grid.shape != gt.grid.shape:
        raise ShapeError(f"shape mismatch {pred.grid.shape} vs {gt.grid.shape}")
    p = pred.grid.astype(bool)
    g = gt.grid.astype(bool)
    union = np.logical_or(p, g).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(p, g).sum() / union)


def f_measure(pred: BinaryMask, gt: BinaryMask, beta2: float = 1.0) -> float:
    """F-beta over pixel precision/recall.

    Conventions: both empty -> 1.0; exactly one empty -> 0.0.
    """
    if pred.grid.shape != gt.grid.shape:
        raise ShapeError(f"shape mismatch {pred.grid.shape} vs {gt.grid.shape}")
    p = pred.grid.astype(bool)
    g = gt.grid.astype(bool)
    if not p.any() and not g.any():
        return 1.0
    if not p.any() or not g.any():
        return 0.0
    tp = np.logical_and(p, g).sum()
    if tp == 0:
        return 0.0
    precision = tp / p.sum()
    recall = tp / g.sum()
    return float((1 + beta2) * precision * recall / (beta2 * precision + recall))


@dataclass
class EvalAccumulator:
    per_sample_iou: list = field(default_factory=list)
    per_sample_f: list = field(default_factory=list)
    per_class: dict = field(default_factory=dict)

    def add(self, cls: str, iou_value: float, f_value: float) -> None:
        self.per_sample_iou.append(iou_value)
        self.per_sample_f.append(f_value)
        bucket = self.per_class.setdefault(cls, ([], []))
        bucket[0].append(iou_value)
        bucket[1].append(f_value)

    def __len__(self):
        return len(self.per_sample_iou)


def aggregate(acc: EvalAccumulator) -> dict:
    """Overall and per-class means plus sample counts."""
    if len(acc) == 0:
        raise EmptyAccumulator("no samples accumulated")
    report = {
        "num_samples": len(acc),
        "miou": float(np.mean(acc.per_sample_iou)),
        "mf": float(np.mean(acc.per_sample_f)),
        "per_class": {},
    }
    for cls in sorted(acc.per_class):
        ious, fs = acc.per_class[cls]
        report["per_class"][cls] = {
            "miou": float(np.mean(ious)),
            "mf": float(np.mean(fs)),
            "num_samples": len(ious),
        }
    return report
