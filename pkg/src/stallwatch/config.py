"""
Single JSON configuration for every tunable in the pipeline, with full
defaults embedded so the effective config can always be dumped and audited.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .anomaly import DecisionParams
from .errors import ConfigError
from .roadmask import DEFAULT_BLOCK, DEFAULT_MIN_OVERLAP, MaskParams
from .sorting import DEFAULT_K1K2, LightingClass


@dataclass(frozen=True)
class DetectorConfig:
    kind: str = "oracle"                 # oracle | precomputed | external
    command: tuple[str, ...] = ()        # external: argv of the child process
    directory: str | None = None         # precomputed: detection file dir
    timeout: float = 30.0

    def validate(self) -> None:
        if self.kind not in ("oracle", "precomputed", "external"):
            raise ConfigError(f"unknown detector kind {self.kind!r}")
        if self.kind == "external" and not self.command:
            raise ConfigError("external detector needs a command")


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    background_fraction: float = 0.10
    histogram_stride: int = 30
    mask_min_overlap: float = DEFAULT_MIN_OVERLAP
    mask_block: int = DEFAULT_BLOCK
    # (k1, k2) per lighting class, keyed by the class value
    k1k2: dict = field(default_factory=lambda: {
        cls.value: list(DEFAULT_K1K2[cls]) for cls in LightingClass
    })
    decision: DecisionParams = field(default_factory=DecisionParams)
    vehicle_classes: tuple[str, ...] = ("car", "truck", "bus")
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    jobs: int = 1

    def validate(self) -> None:
        if not 0.0 < self.background_fraction <= 1.0:
            raise ConfigError(f"background_fraction {self.background_fraction} outside (0, 1]")
        if self.histogram_stride < 1:
            raise ConfigError("histogram_stride must be >= 1")
        if not 0.0 < self.mask_min_overlap <= 1.0:
            raise ConfigError(f"mask_min_overlap {self.mask_min_overlap} outside (0, 1]")
        if self.mask_block < 3 or self.mask_block % 2 == 0:
            raise ConfigError(f"mask_block must be odd and >= 3, got {self.mask_block}")
        for cls in LightingClass:
            if cls.value not in self.k1k2:
                raise ConfigError(f"k1k2 missing class {cls.value!r}")
            k1, k2 = self.k1k2[cls.value]
            if k1 <= 0 or k2 <= 0:
                raise ConfigError(f"k1/k2 must be positive for {cls.value}")
        d = self.decision
        for name in ("score_min", "iou_support", "iou_merge", "min_support_density"):
            v = getattr(d, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"decision.{name} {v} outside [0, 1]")
        if d.area_min < 0 or d.min_windows < 1 or d.min_support_seconds <= 0:
            raise ConfigError("bad decision-tree thresholds")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        self.detector.validate()

    def mask_params(self, lighting: LightingClass) -> MaskParams:
        k1, k2 = self.k1k2[lighting.value]
        return MaskParams(k1=k1, k2=k2, block=self.mask_block)

    def to_obj(self) -> dict:
        return {
            "seed": self.seed,
            "background_fraction": self.background_fraction,
            "histogram_stride": self.histogram_stride,
            "mask_min_overlap": self.mask_min_overlap,
            "mask_block": self.mask_block,
            "k1k2": {k: list(v) for k, v in self.k1k2.items()},
            "decision": vars(self.decision).copy(),
            "vehicle_classes": list(self.vehicle_classes),
            "detector": {
                "kind": self.detector.kind,
                "command": list(self.detector.command),
                "directory": self.detector.directory,
                "timeout": self.detector.timeout,
            },
            "jobs": self.jobs,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "PipelineConfig":
        defaults = cls()
        try:
            det_obj = obj.get("detector", {})
            cfg = cls(
                seed=int(obj.get("seed", defaults.seed)),
                background_fraction=float(obj.get("background_fraction",
                                                  defaults.background_fraction)),
                histogram_stride=int(obj.get("histogram_stride",
                                             defaults.histogram_stride)),
                mask_min_overlap=float(obj.get("mask_min_overlap",
                                               defaults.mask_min_overlap)),
                mask_block=int(obj.get("mask_block", defaults.mask_block)),
                k1k2={**defaults.k1k2, **obj.get("k1k2", {})},
                decision=DecisionParams(**{**vars(defaults.decision),
                                           **obj.get("decision", {})}),
                vehicle_classes=tuple(obj.get("vehicle_classes",
                                              defaults.vehicle_classes)),
                detector=DetectorConfig(
                    kind=det_obj.get("kind", "oracle"),
                    command=tuple(det_obj.get("command", ())),
                    directory=det_obj.get("directory"),
                    timeout=float(det_obj.get("timeout", 30.0)),
                ),
                jobs=int(obj.get("jobs", defaults.jobs)),
            )
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        cfg.validate()
        return cfg

    def to_json(self) -> str:
        return json.dumps(self.to_obj(), sort_keys=True, indent=2)

    @classmethod
    def from_json_file(cls, path: str | Path) -> "PipelineConfig":
        try:
            obj = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(obj, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        return cls.from_obj(obj)

    def content_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_obj(), sort_keys=True).encode()
        ).hexdigest()
