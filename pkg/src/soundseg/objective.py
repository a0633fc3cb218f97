"""Query-to-ground-truth matching and the composite training cost:
dice + focal on the matched query, sounding BCE on every query.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
from torch.nn import functional as F

from .errors import ShapeError
from .mask_head import MaskLogits
from .masks import BinaryMask, resize_mask


@dataclass(frozen=True)
class CostConfig:
    lambda_dice: float = 1.0
    lambda_focal: float = 2.0
    lambda_sound: float = 1.0
    focal_gamma: float = 2.0
    focal_alpha: float = 0.25
    dice_eps: float = 1e-6

    def __post_init__(self):
        if min(self.lambda_dice, self.lambda_focal, self.lambda_sound) < 0:
            raise ValueError("cost weights must be non-negative")
        if self.dice_eps <= 0:
            raise ValueError("dice_eps must be positive")


@dataclass(frozen=True)
class MatchResult:
    winner_index: int
    per_query_costs: tuple  # of (dice, focal, sound) triples
    total_cost: float
    per_query_totals: tuple = field(default_factory=tuple)


def _target_tensor(target, like: torch.Tensor) -> torch.Tensor:
    """Stack BinaryMasks (or accept a [T,H,W] tensor) as float targets.

    Targets are cast to the logits dtype: BCE-with-logits follows the target
    dtype, which would silently quantize a float64 loss otherwise.
    """
    if isinstance(target, torch.Tensor):
        t = target
    elif isinstance(target, BinaryMask):
        t = torch.from_numpy(target.grid)[None]
    else:
        t = torch.stack([torch.from_numpy(m.grid) for m in target])
    if tuple(t.shape) != tuple(like.shape):
        raise ShapeError(f"target shape {tuple(t.shape)} != logits shape {tuple(like.shape)}")
    return t.to(like.dtype)


def dice_cost(logits: torch.Tensor, target, cfg: CostConfig = CostConfig()) -> torch.Tensor:
    """Soft dice, averaged over frames: 1 - (2*sum(p*y)+eps)/(sum(p)+sum(y)+eps)."""
    if logits.ndim != 3:
        raise ShapeError(f"logits must be [T, H, W], got {tuple(logits.shape)}")
    y = _target_tensor(target, logits)
    p = torch.sigmoid(logits)
    inter = (p * y).sum(dim=(1, 2))
    denom = p.sum(dim=(1, 2)) + y.sum(dim=(1, 2))
    return (1.0 - (2.0 * inter + cfg.dice_eps) / (denom + cfg.dice_eps)).mean()


def focal_cost(logits: torch.Tensor, target, cfg: CostConfig = CostConfig()) -> torch.Tensor:
    """Mean per-pixel binary focal loss with alpha class balancing."""
    if logits.ndim != 3:
        raise ShapeError(f"logits must be [T, H, W], got {tuple(logits.shape)}")
    y = _target_tensor(target, logits)
    # log p_t computed stably from logits
    log_pt = -F.binary_cross_entropy_with_logits(logits, y, reduction="none")
    pt = torch.exp(log_pt)
    alpha_t = cfg.focal_alpha * y + (1.0 - cfg.focal_alpha) * (1.0 - y)
    return (-alpha_t * (1.0 - pt) ** cfg.focal_gamma * log_pt).mean()


def sound_cost(score: torch.Tensor, label: float) -> torch.Tensor:
    """Binary cross-entropy with logits on a single sounding score."""
    score = torch.as_tensor(score)
    if not score.is_floating_point():
        score = score.float()
    target = torch.full_like(score, float(label))
    return F.binary_cross_entropy_with_logits(score, target)


def resize_targets(gt, h: int, w: int) -> torch.Tensor:
    """Resize ground-truth masks to the logit resolution (threshold 0.5)."""
    if isinstance(gt, BinaryMask):
        gt = [gt]
    resized = [resize_mask(m, h, w, threshold=0.5) for m in gt]
    return torch.stack([torch.from_numpy(m.grid).float() for m in resized])


def match(pred: MaskLogits, gt, cfg: CostConfig = CostConfig()) -> MatchResult:
    """Argmin of the composite cost over queries; ties go to the lowest index.

    The sounding label is 1 at matching time: a matched query should claim
    "sounding".
    """
    h, w = int(pred.logits.shape[2]), int(pred.logits.shape[3])
    target = resize_targets(gt, h, w)
    per_query = []
    totals = []
    with torch.no_grad():
        for i in range(pred.num_queries):
            d = float(dice_cost(pred.logits[i], target, cfg))
            f = float(focal_cost(pred.logits[i], target, cfg))
            s = float(sound_cost(pred.sounding_scores[i], 1.0))
            per_query.append((d, f, s))
            totals.append(cfg.lambda_dice * d + cfg.lambda_focal * f + cfg.lambda_sound * s)
    winner = int(np.argmin(np.asarray(totals)))
    return MatchResult(
        winner_index=winner,
        per_query_costs=tuple(per_query),
        total_cost=totals[winner],
        per_query_totals=tuple(totals),
    )


def training_loss(pred: MaskLogits, gt, cfg: CostConfig = CostConfig()) -> torch.Tensor:
    """Dice + focal on the matched query; sounding BCE over all queries
    (label 1 for the matched query, 0 for the rest), lambda-weighted.
    """
    result = match(pred, gt, cfg)
    h, w = int(pred.logits.shape[2]), int(pred.logits.shape[3])
    target = resize_targets(gt, h, w)
    i = result.winner_index
    seg = cfg.lambda_dice * dice_cost(pred.logits[i], target, cfg)
    seg = seg + cfg.lambda_focal * focal_cost(pred.logits[i], target, cfg)
    labels = torch.zeros_like(pred.sounding_scores)
    labels[i] = 1.0
    sound = F.binary_cross_entropy_with_logits(pred.sounding_scores, labels)
    return seg + cfg.lambda_sound * sound
