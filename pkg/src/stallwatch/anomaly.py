"""
Anomaly extraction and confirmation.

A vehicle that survives the background median is a candidate; candidates off
the road mask are discarded as parked. The rest are confirmed by how often
foreground detections overlap them: the first and last overlapping frames
give the event's start and end.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .background import BackgroundFrame, background_stream
from .detector import DetectorHandle
from .media import AnomalyEvent, BBox, Detection, Frame, FrameSequence
from .roadmask import Mask, MaskParams, adaptive_road_mask, bbox_on_road, mask_union
from .sorting import VideoCategory

logger = logging.getLogger(__name__)


def iou(a: BBox, b: BBox) -> float:
    ix = min(a.x2, b.x2) - max(a.x, b.x)
    iy = min(a.y2, b.y2) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class DecisionParams:
    """All thresholds of the confirmation decision tree."""

    score_min: float = 0.5
    area_min: float = 0.001          # fraction of frame area
    iou_support: float = 0.3
    iou_merge: float = 0.5
    min_support_seconds: float = 1.0  # converted to frames at the video fps
    min_support_density: float = 0.3
    min_windows: int = 2

    def min_support_frames(self, fps: float) -> int:
        return max(1, int(round(self.min_support_seconds * fps)))


@dataclass
class Candidate:
    """A background-detected vehicle under scrutiny."""

    bbox: BBox
    score: float
    first_seen: float       # window start, seconds
    windows_seen: int = 1


@dataclass(frozen=True)
class SupportProfile:
    """Frames where some foreground detection overlaps the candidate box."""

    candidate: Candidate
    supporting_frames: tuple[int, ...]   # sorted, unique


def extract_candidates(
    bg_detections: list[tuple[float, list[Detection]]],
    mask: Mask,
    params: DecisionParams,
    frame_area: int,
    min_overlap: float,
) -> list[Candidate]:
    """Gate background detections on score, area and road-mask overlap."""
    out: list[Candidate] = []
    for window_start, dets in bg_detections:
        for det in dets:
            if det.score < params.score_min:
                continue
            if det.bbox.area < params.area_min * frame_area:
                continue
            if not bbox_on_road(det.bbox, mask, min_overlap):
                continue
            out.append(Candidate(bbox=det.bbox, score=det.score,
                                 first_seen=window_start))
    return out


def merge_candidates(cands: list[Candidate], iou_merge: float) -> list[Candidate]:
    """Greedy clustering in first_seen order; a stalled car recurring across
    windows collapses to one candidate with windows_seen incremented."""
    merged: list[Candidate] = []
    for cand in sorted(cands, key=lambda c: (c.first_seen, c.bbox.x, c.bbox.y)):
        for m in merged:
            if iou(cand.bbox, m.bbox) >= iou_merge:
                m.windows_seen += 1
                if cand.score > m.score:
                    m.score = cand.score
                    m.bbox = cand.bbox
                break
        else:
            merged.append(replace(cand))
    return merged


def support_profile(cand: Candidate, foreground: list[Detection],
                    iou_support: float) -> SupportProfile:
    frames = sorted({
        d.frame_index for d in foreground
        if iou(cand.bbox, d.bbox) >= iou_support
    })
    return SupportProfile(candidate=cand, supporting_frames=tuple(frames))


def decide(
    cand: Candidate,
    profile: SupportProfile,
    params: DecisionParams,
    fps: float,
    video_id: str,
    n_windows: int | None = None,
) -> AnomalyEvent | None:
    """Confirmation: enough overlapping frames, dense enough, persistent
    across windows. Returns None on rejection."""
    frames = profile.supporting_frames
    if len(frames) < params.min_support_frames(fps):
        return None
    first, last = frames[0], frames[-1]
    density = len(frames) / (last - first + 1)
    if density < params.min_support_density:
        return None
    # a short video cannot contain more windows than it has
    need_windows = params.min_windows
    if n_windows is not None:
        need_windows = min(need_windows, n_windows)
    if cand.windows_seen < need_windows:
        return None
    start = first / fps
    end = last / fps
    if end <= start:
        end = start + 1.0 / fps
    return AnomalyEvent(video_id=video_id, start=start, end=end,
                        bbox=cand.bbox, confidence=cand.score)


def coalesce_events(events: list[AnomalyEvent], iou_merge: float) -> list[AnomalyEvent]:
    """Merge accepted events that overlap in time and in space."""
    out: list[AnomalyEvent] = []
    for ev in sorted(events, key=lambda e: (e.start, e.end)):
        merged = False
        for i, kept in enumerate(out):
            if ev.start <= kept.end and kept.start <= ev.end \
                    and iou(ev.bbox, kept.bbox) >= iou_merge:
                best = kept if kept.confidence >= ev.confidence else ev
                out[i] = AnomalyEvent(
                    video_id=kept.video_id,
                    start=min(kept.start, ev.start),
                    end=max(kept.end, ev.end),
                    bbox=best.bbox,
                    confidence=max(kept.confidence, ev.confidence),
                )
                merged = True
                break
        if not merged:
            out.append(ev)
    return out


def detect_anomalies(
    seq: FrameSequence,
    category: VideoCategory,
    foreground: list[Detection],
    handle: DetectorHandle,
    params: DecisionParams,
    mask_params: MaskParams,
    min_overlap: float,
    fraction: float = 0.10,
    seed: int = 0,
    backgrounds: list[BackgroundFrame] | None = None,
    bg_paths: list | None = None,
    sink=None,
) -> list[AnomalyEvent]:
    """Full per-video flow: backgrounds, masks, candidates, confirmation.

    `backgrounds` may be passed in when already computed by an earlier stage;
    `bg_paths` gives their on-disk locations for detectors that need files.
    `sink(bg, mask, window_detections)` is called per window for artifact
    persistence. A detector failure skips that window with a warning.
    """
    if backgrounds is None:
        backgrounds = background_stream(seq, category, fraction, seed)

    masks: list[Mask] = []
    per_window: list[tuple[float, list[Detection]]] = []
    for i, bg in enumerate(backgrounds):
        mask = adaptive_road_mask(bg.frame, mask_params)
        masks.append(mask)
        try:
            dets = handle.detect(bg_paths[i] if bg_paths is not None else bg.frame)
        except Exception as exc:
            logger.warning("%s: detector failed on window at %.1fs: %s",
                           seq.video_id, bg.window_start, exc)
            dets = []
        per_window.append((bg.window_start, dets))
        if sink is not None:
            sink(bg, mask, dets)

    road = mask_union(masks)
    cands = extract_candidates(per_window, road, params,
                               frame_area=seq.width * seq.height,
                               min_overlap=min_overlap)
    cands = merge_candidates(cands, params.iou_merge)

    events = []
    for cand in cands:
        profile = support_profile(cand, foreground, params.iou_support)
        ev = decide(cand, profile, params, seq.fps, seq.video_id,
                    n_windows=len(backgrounds))
        if ev is not None:
            events.append(ev)
    return coalesce_events(events, params.iou_merge)
