"""
Road-mask extraction by adaptive thresholding of background images.

A pixel T with local mean mu and local standard deviation sigma is marked
as road iff

    (mu - k1*sigma) / k2  <=  T  <=  (mu + k1*sigma) / (k1 + k2)

applied exactly as printed in the source method; k1 and k2 come from the
video-sorting step. Candidate boxes that do not overlap the mask are later
rejected as off-road (parked) vehicles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidBBox, InvalidParam
from .media import BBox, Frame

DEFAULT_BLOCK = 31
DEFAULT_MIN_OVERLAP = 0.2


@dataclass(frozen=True)
class Mask:
    """Binary road mask; bits is a (height, width) array of 0/1."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.ndim != 2:
            raise DimensionMismatch(f"mask must be 2-D, got shape {arr.shape}")
        object.__setattr__(self, "bits", arr.astype(np.uint8) != 0)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def to_frame(self) -> Frame:
        return Frame(np.where(self.bits, 255, 0).astype(np.uint8))


@dataclass(frozen=True)
class MaskParams:
    k1: float
    k2: float
    block: int = DEFAULT_BLOCK

    def __post_init__(self):
        if self.k1 <= 0 or self.k2 <= 0:
            raise InvalidParam(f"k1 and k2 must be positive, got ({self.k1}, {self.k2})")
        if self.block < 3 or self.block % 2 == 0:
            raise InvalidParam(f"block must be odd and >= 3, got {self.block}")


def local_stats(frame: Frame, block: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel mean and population std over the block x block neighborhood.

    Neighborhoods are truncated at the image borders, so edge statistics are
    taken over the pixels that actually exist.
    """
    if block % 2 == 0 or block < 1:
        raise InvalidParam(f"block must be odd and >= 1, got {block}")
    h, w = frame.pixels.shape
    if block > min(h, w):
        raise InvalidParam(f"block {block} exceeds image side {min(h, w)}")
    r = block // 2
    x = frame.pixels.astype(np.float64)

    def box_sum(img: np.ndarray) -> np.ndarray:
        # summed-area table with a zero border row/column
        sat = np.zeros((h + 1, w + 1))
        sat[1:, 1:] = img.cumsum(0).cumsum(1)
        ys, xs = np.arange(h), np.arange(w)
        y0 = np.clip(ys - r, 0, h)[:, None]
        y1 = np.clip(ys + r + 1, 0, h)[:, None]
        x0 = np.clip(xs - r, 0, w)[None, :]
        x1 = np.clip(xs + r + 1, 0, w)[None, :]
        return sat[y1, x1] - sat[y0, x1] - sat[y1, x0] + sat[y0, x0]

    counts = box_sum(np.ones((h, w)))
    mean = box_sum(x) / counts
    var = box_sum(x * x) / counts - mean * mean
    return mean, np.sqrt(np.clip(var, 0.0, None))


def adaptive_road_mask(background: Frame, params: MaskParams) -> Mask:
    mu, sigma = local_stats(background, params.block)
    t = background.pixels.astype(np.float64)
    lower = (mu - params.k1 * sigma) / params.k2
    upper = (mu + params.k1 * sigma) / (params.k1 + params.k2)
    return Mask((lower <= t) & (t <= upper))


def mask_union(masks: list[Mask]) -> Mask:
    if not masks:
        raise DimensionMismatch("union of zero masks")
    shape = masks[0].bits.shape
    acc = np.zeros(shape, dtype=bool)
    for m in masks:
        if m.bits.shape != shape:
            raise DimensionMismatch(f"mask shapes differ: {shape} vs {m.bits.shape}")
        acc |= m.bits
    return Mask(acc)


def bbox_on_road(bbox: BBox, mask: Mask, min_overlap: float = DEFAULT_MIN_OVERLAP) -> bool:
    """True iff at least min_overlap of the box area lies on road pixels."""
    if not 0.0 < min_overlap <= 1.0:
        raise InvalidParam(f"min_overlap must be in (0, 1], got {min_overlap}")
    if bbox.x2 > mask.width or bbox.y2 > mask.height:
        raise InvalidBBox(
            f"box ({bbox.x},{bbox.y},{bbox.w},{bbox.h}) outside {mask.width}x{mask.height} mask"
        )
    road = int(mask.bits[bbox.y : bbox.y2, bbox.x : bbox.x2].sum())
    return road / bbox.area >= min_overlap


def calibrate_mask_params(
    scene: Frame,
    road_truth: np.ndarray,
    k1_grid: np.ndarray | None = None,
    k2_grid: np.ndarray | None = None,
    block: int = DEFAULT_BLOCK,
    min_recall: float = 0.95,
    max_false_positive: float = 0.05,
) -> list[tuple[float, float, float, float]]:
    """Grid-search (k1, k2) against a known road layout.

    road_truth is a boolean array marking the true road pixels. Returns all
    (k1, k2, recall, off_road_fpr) cells meeting both targets, best recall
    first. Local statistics are computed once; each cell is two threshold
    comparisons.
    """
    if k1_grid is None:
        k1_grid = np.arange(0.25, 4.01, 0.25)
    if k2_grid is None:
        k2_grid = np.arange(0.1, 3.01, 0.1)
    truth = np.asarray(road_truth, dtype=bool)
    if truth.shape != scene.pixels.shape:
        raise DimensionMismatch("road_truth shape differs from scene")
    mu, sigma = local_stats(scene, block)
    t = scene.pixels.astype(np.float64)
    n_road = truth.sum()
    n_off = (~truth).sum()
    passing: list[tuple[float, float, float, float]] = []
    for k1 in k1_grid:
        for k2 in k2_grid:
            bits = ((mu - k1 * sigma) / k2 <= t) & (t <= (mu + k1 * sigma) / (k1 + k2))
            recall = bits[truth].sum() / n_road if n_road else 0.0
            fpr = bits[~truth].sum() / n_off if n_off else 0.0
            if recall >= min_recall and fpr <= max_false_positive:
                passing.append((round(float(k1), 4), round(float(k2), 4),
                                float(recall), float(fpr)))
    passing.sort(key=lambda c: (-c[2], c[3]))
    return passing
