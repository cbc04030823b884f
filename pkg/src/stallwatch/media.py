"""
Frame, detection and interval I/O.

All image data is 8-bit grayscale. Frames live on disk as binary PGM (P5,
maxval 255), detections as JSON-Lines, ground truth and predictions as CSV.
Every reader validates its input and raises a typed error from
:mod:`stallwatch.errors` instead of crashing on malformed bytes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidBBox,
    InvalidInterval,
    MissingMetadata,
    ParseError,
    SequenceGap,
    UnsupportedFormat,
)


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in pixel coordinates, (x, y) is the top-left corner."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise InvalidBBox(f"box sides must be positive, got w={self.w} h={self.h}")
        if self.x < 0 or self.y < 0:
            raise InvalidBBox(f"box origin must be non-negative, got ({self.x}, {self.y})")

    @property
    def area(self) -> int:
        return self.w * self.h

    @property
    def x2(self) -> int:
        return self.x + self.w

    @property
    def y2(self) -> int:
        return self.y + self.h


@dataclass(frozen=True)
class Detection:
    """One detected object on one frame."""

    frame_index: int
    class_label: str
    score: float
    bbox: BBox

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ParseError(f"detection score {self.score} outside [0, 1]")
        if self.frame_index < 0:
            raise ParseError(f"negative frame index {self.frame_index}")

    @property
    def centroid(self) -> tuple[float, float]:
        return (self.bbox.x + self.bbox.w / 2.0, self.bbox.y + self.bbox.h / 2.0)


@dataclass(frozen=True)
class GroundTruthEntry:
    video_id: str
    start: float
    end: float

    def __post_init__(self):
        if self.start < 0:
            raise InvalidInterval(f"start {self.start} < 0")
        if self.end <= self.start:
            raise InvalidInterval(f"end {self.end} must exceed start {self.start}")


@dataclass(frozen=True)
class AnomalyEvent:
    """A confirmed stalled-vehicle event with its temporal extent."""

    video_id: str
    start: float
    end: float
    bbox: BBox
    confidence: float

    def __post_init__(self):
        if not (0.0 <= self.start < self.end):
            raise InvalidInterval(f"bad event interval [{self.start}, {self.end}]")
        if not (0.0 <= self.confidence <= 1.0):
            raise InvalidInterval(f"confidence {self.confidence} outside [0, 1]")


class Frame:
    """Single grayscale image; pixels are a (height, width) uint8 array."""

    __slots__ = ("pixels",)

    def __init__(self, pixels: np.ndarray):
        arr = np.asarray(pixels)
        if arr.ndim != 2:
            raise DimensionMismatch(f"frame must be 2-D, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.min(initial=0) < 0 or arr.max(initial=0) > 255:
                raise ParseError("pixel values outside [0, 255]")
            arr = arr.astype(np.uint8)
        self.pixels = arr

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Frame):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __repr__(self) -> str:
        return f"Frame({self.width}x{self.height})"


# ---------------------------------------------------------------------------
# PGM frames
# ---------------------------------------------------------------------------

def write_frame(frame: Frame, path: str | Path) -> None:
    header = f"P5\n{frame.width} {frame.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + frame.pixels.tobytes())


def _pgm_header_tokens(data: bytes, count: int) -> tuple[list[int], int]:
    """Read `count` whitespace-separated integer tokens, honoring '#' comments.

    Returns the tokens and the offset of the first raster byte.
    """
    tokens: list[int] = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i] == ord("#"):
            while i < n and data[i] != ord("\n"):
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace() and data[i] != ord("#"):
            i += 1
        if i == start:
            raise ParseError("truncated PGM header")
        try:
            tokens.append(int(data[start:i]))
        except ValueError as exc:
            raise ParseError(f"non-numeric PGM header token {data[start:i]!r}") from exc
    # exactly one whitespace byte separates the header from the raster
    if i >= n:
        raise ParseError("PGM header not followed by raster data")
    if not data[i : i + 1].isspace():
        raise ParseError("PGM maxval not followed by whitespace")
    return tokens, i + 1


def read_frame(path: str | Path) -> Frame:
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise ParseError(f"bad magic {data[:2]!r}, expected P5")
    try:
        (width, height, maxval), offset = _pgm_header_tokens(data[2:], 3)
    except ParseError:
        raise
    offset += 2
    if maxval != 255:
        raise UnsupportedFormat(f"only maxval 255 supported, got {maxval}")
    if width <= 0 or height <= 0:
        raise ParseError(f"bad dimensions {width}x{height}")
    expected = width * height
    raster = data[offset : offset + expected]
    if len(raster) < expected:
        raise ParseError(f"truncated raster: {len(raster)} of {expected} bytes")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return Frame(pixels.copy())


# ---------------------------------------------------------------------------
# Frame sequences
# ---------------------------------------------------------------------------

FRAME_NAME = "frame_{:06d}.pgm"


@dataclass
class FrameSequence:
    """Lazy, read-only view of a directory of numbered PGM frames."""

    video_id: str
    fps: float
    frame_count: int
    width: int
    height: int
    directory: Path = field(repr=False)

    @property
    def duration(self) -> float:
        return self.frame_count / self.fps

    def timestamp(self, index: int) -> float:
        return index / self.fps

    def frame_path(self, index: int) -> Path:
        return self.directory / FRAME_NAME.format(index)

    def frame(self, index: int) -> Frame:
        if not 0 <= index < self.frame_count:
            raise IndexError(f"frame {index} outside [0, {self.frame_count})")
        f = read_frame(self.frame_path(index))
        if f.width != self.width or f.height != self.height:
            raise DimensionMismatch(
                f"frame {index} is {f.width}x{f.height}, meta says {self.width}x{self.height}"
            )
        return f


def open_sequence(dir_path: str | Path) -> FrameSequence:
    directory = Path(dir_path)
    meta_path = directory / "meta.json"
    if not meta_path.is_file():
        raise MissingMetadata(f"no meta.json in {directory}")
    try:
        meta = json.loads(meta_path.read_text())
        seq = FrameSequence(
            video_id=str(meta["video_id"]),
            fps=float(meta["fps"]),
            frame_count=int(meta["frame_count"]),
            width=int(meta["width"]),
            height=int(meta["height"]),
            directory=directory,
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"bad meta.json in {directory}: {exc}") from exc
    if seq.fps <= 0:
        raise ParseError(f"fps must be positive, got {seq.fps}")
    if seq.frame_count < 0:
        raise ParseError(f"negative frame_count {seq.frame_count}")
    for i in range(seq.frame_count):
        if not seq.frame_path(i).is_file():
            raise SequenceGap(f"missing frame {i} in {directory}")
    return seq


def write_sequence_meta(directory: str | Path, video_id: str, fps: float,
                        frame_count: int, width: int, height: int) -> None:
    meta = {
        "video_id": video_id,
        "fps": fps,
        "frame_count": frame_count,
        "width": width,
        "height": height,
    }
    Path(directory, "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")


# ---------------------------------------------------------------------------
# Detections (JSON-Lines)
# ---------------------------------------------------------------------------

def _detection_from_obj(obj: dict, where: str) -> Detection:
    try:
        frame_index = obj["frame"]
        class_label = obj["class"]
        score = obj["score"]
        bx, by, bw, bh = obj["bbox"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{where}: malformed detection record: {exc}") from exc
    if not isinstance(frame_index, int) or isinstance(frame_index, bool):
        raise ParseError(f"{where}: frame index must be an integer")
    if not isinstance(score, (int, float)) or not (0.0 <= float(score) <= 1.0):
        raise ParseError(f"{where}: score {score!r} outside [0, 1]")
    if bw <= 0 or bh <= 0:
        raise InvalidBBox(f"{where}: non-positive box sides ({bw}, {bh})")
    return Detection(
        frame_index=frame_index,
        class_label=str(class_label),
        score=float(score),
        bbox=BBox(int(bx), int(by), int(bw), int(bh)),
    )


def read_detections(path: str | Path) -> list[Detection]:
    out: list[Detection] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{where}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise ParseError(f"{where}: expected a JSON object")
            out.append(_detection_from_obj(obj, where))
    return out


def detection_to_obj(det: Detection) -> dict:
    return {
        "frame": det.frame_index,
        "class": det.class_label,
        "score": det.score,
        "bbox": [det.bbox.x, det.bbox.y, det.bbox.w, det.bbox.h],
    }


def write_detections(detections: list[Detection], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for det in detections:
            fh.write(json.dumps(detection_to_obj(det), sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Ground truth and predictions (CSV)
# ---------------------------------------------------------------------------

GT_HEADER = ["video_id", "start_seconds", "end_seconds"]
PRED_HEADER = GT_HEADER + ["confidence"]


def read_ground_truth(path: str | Path) -> list[GroundTruthEntry]:
    out: list[GroundTruthEntry] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != GT_HEADER:
            raise ParseError(f"{path}: expected header {','.join(GT_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                start, end = float(row[1]), float(row[2])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: non-numeric field: {exc}") from exc
            out.append(GroundTruthEntry(video_id=row[0], start=start, end=end))
    return out


def write_ground_truth(entries: list[GroundTruthEntry], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(GT_HEADER)
        for e in entries:
            writer.writerow([e.video_id, f"{e.start:g}", f"{e.end:g}"])


def read_predictions(path: str | Path) -> list[AnomalyEvent]:
    """Predictions CSV; boxes are not carried, a 1x1 placeholder is used."""
    out: list[AnomalyEvent] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != PRED_HEADER:
            raise ParseError(f"{path}: expected header {','.join(PRED_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ParseError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                start, end, conf = float(row[1]), float(row[2]), float(row[3])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: non-numeric field: {exc}") from exc
            out.append(AnomalyEvent(video_id=row[0], start=start, end=end,
                                    bbox=BBox(0, 0, 1, 1), confidence=conf))
    return out


def write_predictions(events: list[AnomalyEvent], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PRED_HEADER)
        for e in events:
            writer.writerow([e.video_id, f"{e.start:.6f}", f"{e.end:.6f}", f"{e.confidence:.4f}"])
