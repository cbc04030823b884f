"""
Deterministic synthetic traffic scenes for end-to-end validation.

Scenes are flat rectangles: textured road bands on a plain background,
moving vehicle rectangles, optional stalls and off-road parked distractors.
The pipeline's math only ever sees pixels-vs-median and boxes, so nothing
fancier is needed. Every output (frames, foreground detections, ground
truth) is byte-identical for a given spec and seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidSpec
from .media import (
    BBox,
    Detection,
    Frame,
    GroundTruthEntry,
    write_detections,
    write_frame,
    write_ground_truth,
    write_sequence_meta,
)
from .sorting import LightingClass

SCENE_FILE = "scene.json"
FOREGROUND_FILE = "foreground.jsonl"


@dataclass(frozen=True)
class RoadBand:
    x: int
    y: int
    w: int
    h: int
    intensity: float
    texture_sigma: float


@dataclass(frozen=True)
class ParkedVehicle:
    x: int
    y: int
    w: int
    h: int
    intensity: float
    class_label: str = "car"

    @property
    def bbox(self) -> BBox:
        return BBox(self.x, self.y, self.w, self.h)


@dataclass(frozen=True)
class VehicleSpec:
    """A rectangle moving along one axis, optionally frozen during a stall.

    ``lane`` is the fixed cross-axis coordinate (y for horizontal movers,
    x for vertical ones); ``start`` is the moving coordinate at spawn time.
    """

    width: int
    height: int
    intensity: float
    speed: float            # px/s, > 0
    spawn: float            # seconds
    axis: str               # "h" or "v"
    lane: int
    direction: int          # +1 or -1
    start: float
    stall: tuple[float, float] | None = None
    class_label: str = "car"

    def moving_coord(self, t: float) -> float:
        """Position along the travel axis at time t (before visibility clip)."""
        if self.stall is None:
            travel = t - self.spawn
        else:
            s0, s1 = self.stall
            travel = (min(t, s0) - self.spawn) + max(0.0, t - s1)
        return self.start + self.direction * self.speed * travel

    def box_at(self, t: float, frame_w: int, frame_h: int) -> BBox | None:
        """Box if the vehicle is spawned and fully inside the frame, else None."""
        if t < self.spawn:
            return None
        pos = int(round(self.moving_coord(t)))
        if self.axis == "h":
            x, y = pos, self.lane
        else:
            x, y = self.lane, pos
        if x < 0 or y < 0 or x + self.width > frame_w or y + self.height > frame_h:
            return None
        return BBox(x, y, self.width, self.height)

    def stall_box(self, frame_w: int, frame_h: int) -> BBox | None:
        if self.stall is None:
            return None
        return self.box_at(self.stall[0], frame_w, frame_h)


@dataclass(frozen=True)
class SceneSpec:
    video_id: str
    duration: float
    fps: float
    width: int
    height: int
    lighting: LightingClass
    offroad_intensity: float
    bands: tuple[RoadBand, ...]
    vehicles: tuple[VehicleSpec, ...] = ()
    offroad_parked: tuple[ParkedVehicle, ...] = ()
    noise_sigma: float = 1.5
    seed: int = 0

    @property
    def frame_count(self) -> int:
        return int(round(self.duration * self.fps))

    def to_obj(self) -> dict:
        return {
            "video_id": self.video_id,
            "duration": self.duration,
            "fps": self.fps,
            "width": self.width,
            "height": self.height,
            "lighting": self.lighting.value,
            "offroad_intensity": self.offroad_intensity,
            "bands": [vars(b) for b in self.bands],
            "vehicles": [
                {
                    "width": v.width, "height": v.height, "intensity": v.intensity,
                    "speed": v.speed, "spawn": v.spawn, "axis": v.axis,
                    "lane": v.lane, "direction": v.direction, "start": v.start,
                    "stall": list(v.stall) if v.stall else None,
                    "class": v.class_label,
                }
                for v in self.vehicles
            ],
            "offroad_parked": [
                {"x": p.x, "y": p.y, "w": p.w, "h": p.h,
                 "intensity": p.intensity, "class": p.class_label}
                for p in self.offroad_parked
            ],
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "SceneSpec":
        return cls(
            video_id=obj["video_id"],
            duration=float(obj["duration"]),
            fps=float(obj["fps"]),
            width=int(obj["width"]),
            height=int(obj["height"]),
            lighting=LightingClass(obj["lighting"]),
            offroad_intensity=float(obj["offroad_intensity"]),
            bands=tuple(RoadBand(**b) for b in obj["bands"]),
            vehicles=tuple(
                VehicleSpec(
                    width=v["width"], height=v["height"], intensity=v["intensity"],
                    speed=v["speed"], spawn=v["spawn"], axis=v["axis"],
                    lane=v["lane"], direction=v["direction"], start=v["start"],
                    stall=tuple(v["stall"]) if v["stall"] else None,
                    class_label=v["class"],
                )
                for v in obj["vehicles"]
            ),
            offroad_parked=tuple(
                ParkedVehicle(x=p["x"], y=p["y"], w=p["w"], h=p["h"],
                              intensity=p["intensity"], class_label=p["class"])
                for p in obj["offroad_parked"]
            ),
            noise_sigma=float(obj["noise_sigma"]),
            seed=int(obj["seed"]),
        )


def load_scene(path: str | Path) -> SceneSpec:
    return SceneSpec.from_obj(json.loads(Path(path).read_text()))


def _validate(spec: SceneSpec) -> None:
    if spec.duration <= 0 or spec.fps <= 0:
        raise InvalidSpec("duration and fps must be positive")
    for v in spec.vehicles:
        if v.width > spec.width or v.height > spec.height:
            raise InvalidSpec(f"vehicle {v.width}x{v.height} larger than frame")
        if v.axis not in ("h", "v"):
            raise InvalidSpec(f"vehicle axis must be 'h' or 'v', got {v.axis!r}")
        if v.speed <= 0:
            raise InvalidSpec("vehicle speed must be positive")
        if v.stall is not None:
            s0, s1 = v.stall
            if not (0 <= s0 < s1 <= spec.duration):
                raise InvalidSpec(f"stall ({s0}, {s1}) outside video duration")
            if v.stall_box(spec.width, spec.height) is None:
                raise InvalidSpec("stalled vehicle not fully inside frame")
    if spec.lighting is LightingClass.NIGHT and spec.offroad_intensity > 50:
        raise InvalidSpec("night scene baseline must stay in the 0-50 range")
    if spec.lighting is LightingClass.SNOW and spec.offroad_intensity < 200:
        raise InvalidSpec("snow scene baseline must sit in the 200-250 range")


def static_boxes(spec: SceneSpec) -> list[tuple[BBox, float, str]]:
    """All boxes that are stationary at some point: stalls plus parked."""
    out: list[tuple[BBox, float, str]] = []
    for v in spec.vehicles:
        box = v.stall_box(spec.width, spec.height)
        if box is not None:
            out.append((box, v.intensity, v.class_label))
    for p in spec.offroad_parked:
        out.append((p.bbox, p.intensity, p.class_label))
    return out


def _base_canvas(spec: SceneSpec, rng: np.random.Generator) -> np.ndarray:
    """Static content: background, textured bands, parked vehicles."""
    canvas = np.full((spec.height, spec.width), spec.offroad_intensity, dtype=np.float32)
    for band in spec.bands:
        patch = np.full((band.h, band.w), band.intensity, dtype=np.float32)
        if band.texture_sigma > 0:
            patch += rng.normal(0.0, band.texture_sigma, size=patch.shape).astype(np.float32)
        canvas[band.y : band.y + band.h, band.x : band.x + band.w] = patch
    for p in spec.offroad_parked:
        canvas[p.y : p.y + p.h, p.x : p.x + p.w] = p.intensity
    return canvas


def render_frame(spec: SceneSpec, base: np.ndarray, t: float,
                 rng: np.random.Generator) -> tuple[Frame, list[BBox]]:
    canvas = base.copy()
    boxes: list[BBox] = []
    for v in spec.vehicles:
        box = v.box_at(t, spec.width, spec.height)
        if box is None:
            continue
        canvas[box.y : box.y2, box.x : box.x2] = v.intensity
        boxes.append(box)
    if spec.noise_sigma > 0:
        canvas += spec.noise_sigma * rng.standard_normal(canvas.shape, dtype=np.float32)
    return Frame(np.clip(np.rint(canvas), 0, 255).astype(np.uint8)), boxes


def generate(spec: SceneSpec, out_dir: str | Path) -> list[GroundTruthEntry]:
    """Render a scene to a frame directory; returns its ground-truth stalls.

    Writes meta.json, frame_NNNNNN.pgm, foreground.jsonl (oracle detections
    for every visible vehicle on every frame, score 1.0) and scene.json.
    """
    _validate(spec)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    base = _base_canvas(spec, rng)

    foreground: list[Detection] = []
    n = spec.frame_count
    for i in range(n):
        frame, boxes = render_frame(spec, base, i / spec.fps, rng)
        write_frame(frame, out / f"frame_{i:06d}.pgm")
        for j, v in enumerate(spec.vehicles):
            box = v.box_at(i / spec.fps, spec.width, spec.height)
            if box is not None:
                foreground.append(
                    Detection(frame_index=i, class_label=v.class_label,
                              score=1.0, bbox=box)
                )
        for p in spec.offroad_parked:
            foreground.append(
                Detection(frame_index=i, class_label=p.class_label,
                          score=1.0, bbox=p.bbox)
            )

    write_sequence_meta(out, spec.video_id, spec.fps, n, spec.width, spec.height)
    write_detections(foreground, out / FOREGROUND_FILE)
    (out / SCENE_FILE).write_text(json.dumps(spec.to_obj(), sort_keys=True, indent=2) + "\n")

    return [
        GroundTruthEntry(video_id=spec.video_id, start=v.stall[0], end=v.stall[1])
        for v in spec.vehicles
        if v.stall is not None
    ]


# ---------------------------------------------------------------------------
# Standard acceptance corpus
# ---------------------------------------------------------------------------

# Scene palettes per lighting class. Road vehicles are darker than the road
# so a stalled vehicle baked into a background image still satisfies the
# road-mask inequality; parked distractors are near the off-road level so
# they never do. Road bands are narrower than twice the mask block radius,
# keeping local contrast high across the whole band.
PALETTES = {
    LightingClass.DAY: dict(road=70.0, offroad=190.0, vehicle=25.0, parked=175.0,
                            texture=5.0),
    LightingClass.NIGHT: dict(road=15.0, offroad=45.0, vehicle=5.0, parked=38.0,
                              texture=2.5),
    LightingClass.SNOW: dict(road=110.0, offroad=240.0, vehicle=40.0, parked=225.0,
                             texture=4.0),
}

CORPUS_WIDTH = 320
CORPUS_HEIGHT = 240
CORPUS_FPS = 10.0
CORPUS_DURATION = 300.0

BAND_H = 24
VEH_W, VEH_H = 16, 6
SPEED = 30.0

# lane offsets inside a band: stall lane has no through traffic, so a
# stalled box never collects foreground support before the stall begins
STALL_LANE = 2
FWD_LANE = 9
BWD_LANE = 16


def _traffic(axis: str, band_origin: int, extent: int, veh: dict,
             duration: float, phase: float) -> list[VehicleSpec]:
    """Opposing flows in the two through lanes of one band."""
    w, h = (VEH_W, VEH_H) if axis == "h" else (VEH_H, VEH_W)
    length = w if axis == "h" else h
    out = []
    for direction, lane_off, offset in ((1, FWD_LANE, phase), (-1, BWD_LANE, phase + 11.0)):
        start = 1.0 if direction == 1 else float(extent - length - 1)
        t = offset
        while t < duration - 5.0:
            out.append(
                VehicleSpec(width=w, height=h, intensity=veh["vehicle"],
                            speed=SPEED, spawn=t, axis=axis,
                            lane=band_origin + lane_off, direction=direction,
                            start=start)
            )
            t += 25.0
    return out


def _stall_vehicle(axis: str, band_origin: int, veh: dict,
                   stall: tuple[float, float], stall_pos: float) -> VehicleSpec:
    w, h = (VEH_W, VEH_H) if axis == "h" else (VEH_H, VEH_W)
    travel = (stall_pos - 1.0) / SPEED
    return VehicleSpec(
        width=w, height=h, intensity=veh["vehicle"], speed=SPEED,
        spawn=stall[0] - travel, axis=axis, lane=band_origin + STALL_LANE,
        direction=1, start=1.0, stall=stall,
    )


def make_scene(
    video_id: str,
    lighting: LightingClass,
    intersection: bool,
    stall: tuple[float, float] | None,
    parked: bool,
    seed: int,
    duration: float = CORPUS_DURATION,
    fps: float = CORPUS_FPS,
) -> SceneSpec:
    pal = PALETTES[lighting]
    band_y = (CORPUS_HEIGHT - BAND_H) // 2
    bands = [RoadBand(0, band_y, CORPUS_WIDTH, BAND_H, pal["road"], pal["texture"])]
    vehicles = _traffic("h", band_y, CORPUS_WIDTH, pal, duration, phase=2.0)
    if intersection:
        band_x = (CORPUS_WIDTH - BAND_H) // 2
        bands.append(RoadBand(band_x, 0, BAND_H, CORPUS_HEIGHT, pal["road"], pal["texture"]))
        vehicles += _traffic("v", band_x, CORPUS_HEIGHT, pal, duration, phase=8.0)
    if stall is not None:
        vehicles.append(_stall_vehicle("h", band_y, pal, stall, stall_pos=60.0))
    parked_list = (
        [ParkedVehicle(x=40, y=30, w=VEH_W, h=VEH_H, intensity=pal["parked"])]
        if parked else []
    )
    return SceneSpec(
        video_id=video_id,
        duration=duration,
        fps=fps,
        width=CORPUS_WIDTH,
        height=CORPUS_HEIGHT,
        lighting=lighting,
        offroad_intensity=pal["offroad"],
        bands=tuple(bands),
        vehicles=tuple(vehicles),
        offroad_parked=tuple(parked_list),
        seed=seed,
    )


# (name, lighting, intersection, stall interval, parked distractor).
# Day freeways run on 30 s background windows so their stall can be short;
# everything else gets a single 300 s window and needs the vehicle static
# for most of it.
CORPUS_PRESETS: list[tuple[str, LightingClass, bool, tuple[float, float] | None, bool]] = [
    ("day_freeway_stall", LightingClass.DAY, False, (100.0, 250.0), False),
    ("day_freeway_clean", LightingClass.DAY, False, None, False),
    ("day_freeway_parked", LightingClass.DAY, False, None, True),
    ("day_intersection_stall", LightingClass.DAY, True, (40.0, 280.0), False),
    ("day_intersection_parked", LightingClass.DAY, True, None, True),
    ("night_freeway_stall", LightingClass.NIGHT, False, (40.0, 280.0), False),
    ("night_freeway_clean", LightingClass.NIGHT, False, None, False),
    ("night_intersection_stall", LightingClass.NIGHT, True, (40.0, 280.0), False),
    ("snow_freeway_stall", LightingClass.SNOW, False, (40.0, 280.0), False),
    ("snow_freeway_parked", LightingClass.SNOW, False, None, True),
    ("snow_intersection_clean", LightingClass.SNOW, True, None, False),
    ("snow_intersection_stall", LightingClass.SNOW, True, (40.0, 280.0), False),
]


def corpus_specs(seed: int = 0) -> list[SceneSpec]:
    return [
        make_scene(name, lighting, intersection, stall, parked,
                   seed=seed * 1000 + i)
        for i, (name, lighting, intersection, stall, parked) in enumerate(CORPUS_PRESETS)
    ]


def corpus(out_dir: str | Path, seed: int = 0,
           specs: list[SceneSpec] | None = None) -> Path:
    """Generate the full synthetic corpus: videos/<id>/... plus gt.csv."""
    root = Path(out_dir)
    videos = root / "videos"
    videos.mkdir(parents=True, exist_ok=True)
    gt: list[GroundTruthEntry] = []
    for spec in specs if specs is not None else corpus_specs(seed):
        gt.extend(generate(spec, videos / spec.video_id))
    write_ground_truth(gt, root / "gt.csv")
    return root
