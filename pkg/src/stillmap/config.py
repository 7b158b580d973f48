"""One-file pipeline configuration, overridable by CLI flags.

The file is YAML with nested sections; unknown keys are rejected so typos
fail loudly. The effective configuration is echoed into every output
directory for reproducibility.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .detection import ClusterParams, DynamicClassSet
from .geometry import RangeSpec
from .ground import GroundParams
from .mapping import IcpParams, MappingConfig
from .removal import DEFAULT_BOUNDS, RemovalConfig
from .scancontext import ScanContextConfig


@dataclass
class PipelineConfig:
    scans: str = ""
    poses: str = ""
    detections: str = ""
    out: str = "out"
    workers: int = 1
    bounds: RangeSpec = DEFAULT_BOUNDS
    removal_enabled: bool = True
    margin: float = 0.1
    classes: DynamicClassSet = field(default_factory=DynamicClassSet)
    fallback_detector: bool = False
    degenerate_policy: str = "skip"
    ground: GroundParams = field(default_factory=GroundParams)
    cluster: ClusterParams = field(default_factory=ClusterParams)
    icp: IcpParams = field(default_factory=IcpParams)
    scan_context: ScanContextConfig = field(default_factory=ScanContextConfig)
    min_fitness: float = 0.3
    loop_closure: bool = True
    keep_frames: bool = True

    def removal_config(self) -> RemovalConfig:
        return RemovalConfig(
            bounds=self.bounds,
            margin=self.margin,
            classes=self.classes,
            ground=self.ground,
            cluster=self.cluster,
            fallback=self.fallback_detector,
            degenerate_policy=self.degenerate_policy,
            enabled=self.removal_enabled,
        )

    def mapping_config(self) -> MappingConfig:
        return MappingConfig(
            icp=self.icp,
            scan_context=self.scan_context,
            min_fitness=self.min_fitness,
            loop_closure=self.loop_closure,
            keep_frames=self.keep_frames,
        )


def _build_section(cls, mapping, section: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(mapping) - names
    if unknown:
        raise ValueError(f"unknown keys in '{section}': {sorted(unknown)}")
    return cls(**mapping)


_TOP_LEVEL = {
    "scans",
    "poses",
    "detections",
    "out",
    "workers",
    "range",
    "removal",
    "ground",
    "cluster",
    "icp",
    "scan_context",
    "mapping",
}

_REMOVAL_KEYS = {
    "enabled",
    "margin",
    "classes",
    "min_score",
    "fallback_detector",
    "degenerate_policy",
}

_MAPPING_KEYS = {"min_fitness", "loop_closure", "keep_frames"}


def config_from_mapping(raw: dict) -> PipelineConfig:
    unknown = set(raw) - _TOP_LEVEL
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    cfg = PipelineConfig()

    for key in ("scans", "poses", "detections", "out"):
        if key in raw:
            setattr(cfg, key, str(raw[key]))
    if "workers" in raw:
        cfg.workers = int(raw["workers"])

    if "range" in raw:
        sec = dict(raw["range"])
        unknown = set(sec) - {"min", "max"}
        if unknown:
            raise ValueError(f"unknown keys in 'range': {sorted(unknown)}")
        cfg.bounds = RangeSpec(sec["min"], sec["max"])

    if "removal" in raw:
        sec = dict(raw["removal"])
        unknown = set(sec) - _REMOVAL_KEYS
        if unknown:
            raise ValueError(f"unknown keys in 'removal': {sorted(unknown)}")
        cfg.removal_enabled = bool(sec.get("enabled", cfg.removal_enabled))
        cfg.margin = float(sec.get("margin", cfg.margin))
        cfg.fallback_detector = bool(sec.get("fallback_detector", cfg.fallback_detector))
        cfg.degenerate_policy = str(sec.get("degenerate_policy", cfg.degenerate_policy))
        labels = sec.get("classes", sorted(cfg.classes.labels))
        min_score = float(sec.get("min_score", cfg.classes.min_score))
        cfg.classes = DynamicClassSet(frozenset(labels), min_score)

    for key, cls, attr in (
        ("ground", GroundParams, "ground"),
        ("cluster", ClusterParams, "cluster"),
        ("icp", IcpParams, "icp"),
        ("scan_context", ScanContextConfig, "scan_context"),
    ):
        if key in raw:
            setattr(cfg, attr, _build_section(cls, dict(raw[key]), key))

    if "mapping" in raw:
        sec = dict(raw["mapping"])
        unknown = set(sec) - _MAPPING_KEYS
        if unknown:
            raise ValueError(f"unknown keys in 'mapping': {sorted(unknown)}")
        cfg.min_fitness = float(sec.get("min_fitness", cfg.min_fitness))
        cfg.loop_closure = bool(sec.get("loop_closure", cfg.loop_closure))
        cfg.keep_frames = bool(sec.get("keep_frames", cfg.keep_frames))
    return cfg


def config_to_mapping(cfg: PipelineConfig) -> dict:
    return {
        "scans": cfg.scans,
        "poses": cfg.poses,
        "detections": cfg.detections,
        "out": cfg.out,
        "workers": cfg.workers,
        "range": {
            "min": [float(v) for v in cfg.bounds.min_bound],
            "max": [float(v) for v in cfg.bounds.max_bound],
        },
        "removal": {
            "enabled": cfg.removal_enabled,
            "margin": cfg.margin,
            "classes": sorted(cfg.classes.labels),
            "min_score": cfg.classes.min_score,
            "fallback_detector": cfg.fallback_detector,
            "degenerate_policy": cfg.degenerate_policy,
        },
        "ground": dataclasses.asdict(cfg.ground),
        "cluster": dataclasses.asdict(cfg.cluster),
        "icp": dataclasses.asdict(cfg.icp),
        "scan_context": dataclasses.asdict(cfg.scan_context),
        "mapping": {
            "min_fitness": cfg.min_fitness,
            "loop_closure": cfg.loop_closure,
            "keep_frames": cfg.keep_frames,
        },
    }


def load_config(path) -> PipelineConfig:
    with open(path) as f:
        raw = yaml.safe_load(f)
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config must be a mapping")
    return config_from_mapping(raw)


def save_config(cfg: PipelineConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(config_to_mapping(cfg), sort_keys=False))
