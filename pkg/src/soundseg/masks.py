"""Binary masks, their run-length codec, and bilinear resizing.

RLE follows the COCO uncompressed convention: column-major scan order,
counts alternate zero-runs and one-runs, always starting with the run of
zeros (possibly empty).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import LengthMismatch, ShapeError


@dataclass(frozen=True)
class BinaryMask:
    """A 0/1 mask with the same spatial size as the frame it annotates."""

    grid: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid)
        if g.ndim != 2:
            raise ShapeError(f"mask must be 2-D, got shape {g.shape}")
        if g.size == 0:
            raise ShapeError("mask must be non-empty")
        vals = np.unique(g)
        if not np.all(np.isin(vals, (0, 1))):
            raise ShapeError("mask values must be 0 or 1")
        object.__setattr__(self, "grid", g.astype(np.uint8))

    @property
    def height(self) -> int:
        return self.grid.shape[0]

    @property
    def width(self) -> int:
        return self.grid.shape[1]

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.grid.shape == other.grid.shape and bool(np.all(self.grid == other.grid))


@dataclass(frozen=True)
class MaskRLE:
    """Column-major run-length encoding, leading zero-run."""

    height: int
    width: int
    counts: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.height <= 0 or self.width <= 0:
            raise ShapeError("RLE size must be positive")
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts):
            raise LengthMismatch("RLE counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    def to_json(self) -> dict:
        return {"size": [self.height, self.width], "counts": list(self.counts)}

    @classmethod
    def from_json(cls, obj: dict) -> "MaskRLE":
        h, w = obj["size"]
        return cls(height=int(h), width=int(w), counts=tuple(obj["counts"]))


def rle_encode(mask: BinaryMask) -> MaskRLE:
    """Encode a mask losslessly; column-major scan, leading zero-run."""
    flat = mask.grid.ravel(order="F")
    counts = []
    current = 0  # scan always starts counting zeros
    run = 0
    for v in flat:
        if v == current:
            run += 1
        else:
            counts.append(run)
            current = v
            run = 1
    counts.append(run)
    return MaskRLE(height=mask.height, width=mask.width, counts=tuple(counts))


def rle_decode(rle: MaskRLE) -> BinaryMask:
    """Exact inverse of :func:`rle_encode`."""
    total = sum(rle.counts)
    if total != rle.height * rle.width:
        raise LengthMismatch(
            f"counts sum to {total}, expected {rle.height * rle.width}"
        )
    flat = np.zeros(total, dtype=np.uint8)
    pos = 0
    val = 0
    for c in rle.counts:
        flat[pos : pos + c] = val
        pos += c
        val ^= 1
    grid = flat.reshape((rle.height, rle.width), order="F")
    return BinaryMask(grid)


def bilinear_resize(array: np.ndarray, h: int, w: int) -> np.ndarray:
    """Bilinear resampling of a 2-D float array using half-pixel centers.

    Identical output size returns an exact copy.
    """
    src = np.asarray(array, dtype=np.float64)
    if src.ndim != 2:
        raise ShapeError(f"expected 2-D array, got shape {src.shape}")
    sh, sw = src.shape
    ys = (np.arange(h) + 0.5) * (sh / h) - 0.5
    xs = (np.arange(w) + 0.5) * (sw / w) - 0.5
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    wy = ys - y0
    wx = xs - x0
    y0c = np.clip(y0, 0, sh - 1)
    y1c = np.clip(y0 + 1, 0, sh - 1)
    x0c = np.clip(x0, 0, sw - 1)
    x1c = np.clip(x0 + 1, 0, sw - 1)
    wy = wy[:, None]
    wx = wx[None, :]
    top = src[np.ix_(y0c, x0c)] * (1 - wx) + src[np.ix_(y0c, x1c)] * wx
    bot = src[np.ix_(y1c, x0c)] * (1 - wx) + src[np.ix_(y1c, x1c)] * wx
    return top * (1 - wy) + bot * wy


def resize_mask(mask: BinaryMask, h: int, w: int, threshold: float = 0.5) -> BinaryMask:
    """Bilinearly interpolate a mask and re-binarize at ``threshold``.

    Values >= threshold map to 1.
    """
    if h <= 0 or w <= 0:
        raise ShapeError("target size must be positive")
    if not 0.0 < threshold < 1.0:
        raise ShapeError("threshold must lie in (0, 1)")
    field_ = bilinear_resize(mask.grid.astype(np.float64), h, w)
    return BinaryMask((field_ >= threshold).astype(np.uint8))
