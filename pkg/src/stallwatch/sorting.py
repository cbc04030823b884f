"""
Video sorting: lighting/weather class from the average pixel histogram,
road type from the number of distinct traffic flow directions.

The class drives the per-video pipeline parameters (background window
length and the road-mask constants k1/k2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.signal import find_peaks as _scipy_find_peaks

from .errors import EmptyInput, InsufficientData
from .media import Detection, FrameSequence

# Peak detection defaults; the histogram signatures (night near 0-50,
# day around 100-150, snow around 200-250) need only coarse peaks.
SMOOTH_RADIUS = 5
MIN_PROMINENCE = 0.005

# Direction estimation defaults.
GATE_FRACTION = 0.1      # association gate as a fraction of frame width
MIN_MOVE_PX = 2.0        # displacements below this are treated as stationary
SUPPORT_FRACTION = 0.05  # a direction bin must hold this share of vectors

SHORT_WINDOW_S = 30.0
LONG_WINDOW_S = 300.0


class LightingClass(str, Enum):
    DAY = "day"
    NIGHT = "night"
    SNOW = "snow"


class RoadType(str, Enum):
    FREEWAY = "freeway"
    INTERSECTION = "intersection"


# Road-mask constants per lighting class. Calibrated by grid search on the
# synthetic textured road scene (see roadmask.calibrate_mask_params and
# tests/test_acceptance.py); overridable via the pipeline config.
DEFAULT_K1K2 = {
    LightingClass.DAY: (2.0, 0.6),
    LightingClass.NIGHT: (2.0, 0.6),
    LightingClass.SNOW: (2.0, 0.6),
}


@dataclass(frozen=True)
class Histogram:
    """256-bin average pixel-frequency distribution, normalized to sum 1."""

    bins: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bins, dtype=np.float64)
        if arr.shape != (256,):
            raise ValueError(f"histogram must have 256 bins, got {arr.shape}")
        if (arr < 0).any():
            raise ValueError("histogram bins must be non-negative")
        if abs(arr.sum() - 1.0) > 1e-9:
            raise ValueError(f"histogram mass {arr.sum()} != 1")
        object.__setattr__(self, "bins", arr)


@dataclass(frozen=True)
class VideoCategory:
    video_id: str
    lighting: LightingClass
    road_type: RoadType
    background_window: float
    k1: float
    k2: float

    def to_obj(self) -> dict:
        return {
            "video_id": self.video_id,
            "lighting": self.lighting.value,
            "road_type": self.road_type.value,
            "background_window_s": self.background_window,
            "k1": self.k1,
            "k2": self.k2,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "VideoCategory":
        return cls(
            video_id=obj["video_id"],
            lighting=LightingClass(obj["lighting"]),
            road_type=RoadType(obj["road_type"]),
            background_window=float(obj["background_window_s"]),
            k1=float(obj["k1"]),
            k2=float(obj["k2"]),
        )


def average_histogram(seq: FrameSequence, stride: int = 1) -> Histogram:
    """Mean per-frame pixel-frequency distribution over every stride-th frame."""
    if seq.frame_count == 0:
        raise EmptyInput(f"{seq.video_id}: no frames")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    total = np.zeros(256, dtype=np.float64)
    n = 0
    for i in range(0, seq.frame_count, stride):
        pixels = seq.frame(i).pixels
        total += np.bincount(pixels.ravel(), minlength=256) / pixels.size
        n += 1
    avg = total / n
    return Histogram(avg / avg.sum())


def _smooth(bins: np.ndarray, radius: int) -> np.ndarray:
    """Moving average with window 2*radius+1, truncated at the ends."""
    if radius == 0:
        return bins.copy()
    kernel = np.ones(2 * radius + 1)
    sums = np.convolve(bins, kernel, mode="same")
    counts = np.convolve(np.ones_like(bins), kernel, mode="same")
    return sums / counts


def find_histogram_peaks(
    hist: Histogram,
    smooth_radius: int = SMOOTH_RADIUS,
    min_prominence: float = MIN_PROMINENCE,
) -> list[tuple[int, float]]:
    """Local maxima of the smoothed histogram with prominence >= min_prominence.

    Prominence is the height above the higher of the two flanking minima.
    Returns (bin_index, smoothed_mass) pairs sorted by bin index.
    """
    if smooth_radius < 0:
        raise ValueError("smooth_radius must be >= 0")
    if not 0.0 < min_prominence < 1.0:
        raise ValueError("min_prominence must be in (0, 1)")
    smoothed = _smooth(hist.bins, smooth_radius)
    # pad so that maxima at bin 0 / 255 are still detected
    padded = np.concatenate(([-1.0], smoothed, [-1.0]))
    idx, _ = _scipy_find_peaks(padded, prominence=min_prominence)
    return [(int(i) - 1, float(smoothed[i - 1])) for i in sorted(idx)]


def classify_lighting(
    hist: Histogram,
    smooth_radius: int = SMOOTH_RADIUS,
    min_prominence: float = MIN_PROMINENCE,
) -> LightingClass:
    """Histogram-signature classifier.

    Night: the dominant peak sits in [0, 50]. Snow: at least two peaks whose
    mass-weighted mean bin lands in [200, 250]. Anything else is day, the
    default class.
    """
    peaks = find_histogram_peaks(hist, smooth_radius, min_prominence)
    if not peaks:
        return LightingClass.DAY
    dominant_bin = max(peaks, key=lambda p: p[1])[0]
    if dominant_bin <= 50:
        return LightingClass.NIGHT
    if len(peaks) >= 2:
        mass = sum(m for _, m in peaks)
        mean_bin = sum(b * m for b, m in peaks) / mass
        if 200.0 <= mean_bin <= 250.0:
            return LightingClass.SNOW
    return LightingClass.DAY


def estimate_directions(
    detections: list[Detection],
    frame_width: int,
    gate_fraction: float = GATE_FRACTION,
    min_move_px: float = MIN_MOVE_PX,
    support_fraction: float = SUPPORT_FRACTION,
) -> int:
    """Count distinct traffic-flow directions from per-frame detections.

    Centroids are associated frame-to-frame by nearest neighbour within a
    displacement gate; moving displacement vectors are quantized into 8
    equal angle bins and bins holding at least ``support_fraction`` of all
    vectors count as a direction.
    """
    by_frame: dict[int, list[tuple[float, float]]] = {}
    for det in detections:
        by_frame.setdefault(det.frame_index, []).append(det.centroid)
    frames = sorted(by_frame)
    if len(frames) < 2:
        raise InsufficientData(f"detections span {len(frames)} frame(s), need >= 2")

    gate = gate_fraction * frame_width
    bin_counts = np.zeros(8, dtype=np.int64)
    total = 0
    for prev, cur in zip(frames, frames[1:]):
        targets = np.asarray(by_frame[cur], dtype=np.float64)
        for cx, cy in by_frame[prev]:
            deltas = targets - (cx, cy)
            dists = np.hypot(deltas[:, 0], deltas[:, 1])
            j = int(np.argmin(dists))
            if dists[j] > gate:
                continue
            dx, dy = deltas[j]
            mag = dists[j]
            if mag < min_move_px:
                continue
            angle = math.atan2(dy, dx) % (2 * math.pi)
            bin_counts[int(angle / (math.pi / 4)) % 8] += 1
            total += 1
    if total == 0:
        return 0
    return int(np.count_nonzero(bin_counts / total >= support_fraction))


def classify_road_type(direction_count: int) -> RoadType:
    if direction_count < 0:
        raise ValueError(f"direction count must be >= 0, got {direction_count}")
    return RoadType.INTERSECTION if direction_count > 2 else RoadType.FREEWAY


def background_window_for(lighting: LightingClass, road_type: RoadType) -> float:
    """Short window only for the ideal case: daylight freeway."""
    if lighting is not LightingClass.DAY or road_type is RoadType.INTERSECTION:
        return LONG_WINDOW_S
    return SHORT_WINDOW_S


def sort_video(
    seq: FrameSequence,
    detections: list[Detection],
    stride: int = 30,
    k1k2_table: dict[LightingClass, tuple[float, float]] | None = None,
) -> VideoCategory:
    """Classify one video and derive its pipeline parameters."""
    table = k1k2_table if k1k2_table is not None else DEFAULT_K1K2
    lighting = classify_lighting(average_histogram(seq, stride))
    road_type = classify_road_type(estimate_directions(detections, seq.width))
    k1, k2 = table[lighting]
    return VideoCategory(
        video_id=seq.video_id,
        lighting=lighting,
        road_type=road_type,
        background_window=background_window_for(lighting, road_type),
        k1=k1,
        k2=k2,
    )
