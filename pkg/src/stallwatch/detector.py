"""
Uniform interface to the object detector that scans background images.

Three kinds of handle:

* ``oracle``       -- knows a synthetic scene's geometry and reports the
                      stationary rectangles actually present in an image;
                      anchors end-to-end tests with zero detector noise.
* ``precomputed``  -- reads ``<frame_stem>.det.jsonl`` next to (or in a
                      configured directory for) each frame.
* ``external``     -- a child process speaking a line protocol: we write
                      one line ``{"image": "<path>"}``, it replies one line
                      ``{"detections": [{"class": ..., "score": ...,
                      "bbox": [x, y, w, h]}, ...]}``. On startup the bridge
                      sends ``{"ping": 1}`` and expects ``{"ready": true}``.

Detections are filtered to the configured vehicle classes.
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DetectorTimeout, MissingDetections, ProtocolError
from .media import Frame, read_detections, read_frame, _detection_from_obj, Detection
from .synth import SceneSpec, static_boxes

DEFAULT_VEHICLE_CLASSES = frozenset({"car", "truck", "bus"})
DEFAULT_TIMEOUT_S = 30.0
ORACLE_MATCH_TOLERANCE = 6.0


class DetectorHandle:
    """Base class; subclasses implement `_detect_raw`."""

    vehicle_classes: frozenset[str] = DEFAULT_VEHICLE_CLASSES

    def detect(self, frame_path_or_id) -> list[Detection]:
        dets = self._detect_raw(frame_path_or_id)
        return [d for d in dets if d.class_label in self.vehicle_classes]

    def _detect_raw(self, frame_path_or_id) -> list[Detection]:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@dataclass
class OracleDetector(DetectorHandle):
    """Reports a scene's stationary rectangles present in a given image.

    A stationary box counts as present when the image patch matches the
    vehicle's intensity to within a small tolerance; moving vehicles are
    erased by the background median and therefore never match.
    """

    scene: SceneSpec
    tolerance: float = ORACLE_MATCH_TOLERANCE
    vehicle_classes: frozenset[str] = DEFAULT_VEHICLE_CLASSES

    def _detect_raw(self, frame_path_or_id) -> list[Detection]:
        frame = (frame_path_or_id if isinstance(frame_path_or_id, Frame)
                 else read_frame(frame_path_or_id))
        out = []
        for box, intensity, label in static_boxes(self.scene):
            patch = frame.pixels[box.y : box.y2, box.x : box.x2].astype(np.float64)
            if np.abs(patch - intensity).mean() <= self.tolerance:
                out.append(Detection(frame_index=0, class_label=label,
                                     score=1.0, bbox=box))
        return out


@dataclass
class PrecomputedDetector(DetectorHandle):
    """Reads `<frame_stem>.det.jsonl` from `directory` (or beside the frame)."""

    directory: Path | None = None
    vehicle_classes: frozenset[str] = DEFAULT_VEHICLE_CLASSES

    def _detect_raw(self, frame_path_or_id) -> list[Detection]:
        frame_path = Path(frame_path_or_id)
        base = self.directory if self.directory is not None else frame_path.parent
        det_path = base / (frame_path.stem + ".det.jsonl")
        if not det_path.is_file():
            raise MissingDetections(f"no detection file {det_path}")
        return read_detections(det_path)


class ExternalProcessDetector(DetectorHandle):
    """Child process behind the one-line-request / one-line-response protocol."""

    def __init__(self, command: list[str], timeout: float = DEFAULT_TIMEOUT_S,
                 vehicle_classes: frozenset[str] = DEFAULT_VEHICLE_CLASSES):
        self.timeout = timeout
        self.vehicle_classes = vehicle_classes
        self._proc = subprocess.Popen(
            command, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True,
            bufsize=1,
        )
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        self._handshake()

    def _pump(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _roundtrip(self, request: dict) -> dict:
        assert self._proc.stdin is not None
        try:
            self._proc.stdin.write(json.dumps(request) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolError(f"detector process is gone: {exc}") from exc
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            self.close()
            raise DetectorTimeout(f"no response within {self.timeout}s")
        if line is None:
            raise ProtocolError("detector process closed its output")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"invalid response line: {exc}") from exc
        if not isinstance(obj, dict):
            raise ProtocolError("response must be a JSON object")
        return obj

    def _handshake(self) -> None:
        reply = self._roundtrip({"ping": 1})
        if reply.get("ready") is not True:
            raise ProtocolError(f"bad handshake reply: {reply}")

    def _detect_raw(self, frame_path_or_id) -> list[Detection]:
        reply = self._roundtrip({"image": str(frame_path_or_id)})
        if "detections" not in reply or not isinstance(reply["detections"], list):
            raise ProtocolError(f"response missing detections list: {reply}")
        out = []
        for i, obj in enumerate(reply["detections"]):
            if not isinstance(obj, dict):
                raise ProtocolError(f"detection {i} is not an object")
            try:
                out.append(_detection_from_obj({"frame": 0, **obj}, f"response[{i}]"))
            except Exception as exc:
                raise ProtocolError(f"malformed detection {i}: {exc}") from exc
        return out

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                if self._proc.stdin:
                    self._proc.stdin.close()
                self._proc.terminate()
                self._proc.wait(timeout=5)
            except Exception:
                self._proc.kill()
