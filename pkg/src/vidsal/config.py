"""Pipeline configuration with flat dotted keys (``section.name``) for files and overrides."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .low_level import DEFAULT_LF_WEIGHTS
from .mid_level import DEFAULT_MF_WEIGHTS


@dataclass
class FlowSection:
    pyramid_levels: int = 3
    scale_factor: float = 0.5
    smoothness_alpha: float = 15.0
    iterations_per_level: int = 100
    presmooth_sigma: float = 1.0


@dataclass
class SegmentationSection:
    # None: ceil(N/300), ceil(N/600), ceil(N/1200) for N pixels
    scale_targets: list | None = None
    compactness: float = 10.0
    n_iter: int = 10
    max_iter: int = 150
    drift: float = 0.2


@dataclass
class LowLevelSection:
    weights: list = field(default_factory=lambda: list(DEFAULT_LF_WEIGHTS))
    sigma_spdst: float = 0.2
    color_mode: str = "joint"
    orientation_bins: int = 16
    gabor_gamma: float = 0.5
    gabor_wavelength: float = 8.0
    gabor_sigma_ratio: float = 0.56


@dataclass
class MidLevelSection:
    weights: list = field(default_factory=lambda: list(DEFAULT_MF_WEIGHTS))
    sigma_cen: float = 0.3
    sigma_clr: float = 10.0
    sigma_bgr: float = 1.0
    bndcon: str = "soft"
    objectness_windows: int = 1000
    objectness_seed: int = 0
    objectness_dir: str | None = None


@dataclass
class FusionSection:
    alpha: float = 0.5
    # "all" or a list of 1-based scale levels
    levels: Any = "all"
    atw: bool = True
    atw_max_window: int = 10
    atw_lambda: float = 2.0
    sigma_tpdst: float = 10.0
    mca_iterations: int = 5
    mca_coupling: float = 0.15
    mca_delta: float = 1e-4
    mca_lambda: str = "logodds"


@dataclass
class OutputSection:
    debug: bool = False


@dataclass
class PipelineConfig:
    flow: FlowSection = field(default_factory=FlowSection)
    segmentation: SegmentationSection = field(default_factory=SegmentationSection)
    low_level: LowLevelSection = field(default_factory=LowLevelSection)
    mid_level: MidLevelSection = field(default_factory=MidLevelSection)
    fusion: FusionSection = field(default_factory=FusionSection)
    output: OutputSection = field(default_factory=OutputSection)

    # ---- flat view

    def to_flat(self) -> dict[str, Any]:
        out = {}
        for sec in dataclasses.fields(self):
            section = getattr(self, sec.name)
            for f in dataclasses.fields(section):
                out[f"{sec.name}.{f.name}"] = getattr(section, f.name)
        return out

    @classmethod
    def from_flat(cls, flat: dict[str, Any]) -> "PipelineConfig":
        return cls().with_overrides(flat)

    def with_overrides(self, flat: dict[str, Any]) -> "PipelineConfig":
        cfg = dataclasses.replace(
            self, **{s.name: dataclasses.replace(getattr(self, s.name)) for s in dataclasses.fields(self)}
        )
        known = self.to_flat()
        for key, value in flat.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            sec, name = key.split(".", 1)
            setattr(getattr(cfg, sec), name, _coerce(value, known[key], key))
        cfg.validate()
        return cfg

    def validate(self) -> None:
        lw, mw = self.low_level.weights, self.mid_level.weights
        if len(lw) != 5 or abs(sum(lw) - 1.0) > 1e-9:
            raise ConfigError("low_level.weights must be 5 values summing to 1")
        if len(mw) != 4 or abs(sum(mw) - 1.0) > 1e-9:
            raise ConfigError("mid_level.weights must be 4 values summing to 1")
        if min(lw) < 0 or min(mw) < 0:
            raise ConfigError("feature weights must be non-negative")
        sigmas = {
            "low_level.sigma_spdst": self.low_level.sigma_spdst,
            "mid_level.sigma_cen": self.mid_level.sigma_cen,
            "mid_level.sigma_clr": self.mid_level.sigma_clr,
            "mid_level.sigma_bgr": self.mid_level.sigma_bgr,
            "fusion.sigma_tpdst": self.fusion.sigma_tpdst,
            "low_level.gabor_sigma_ratio": self.low_level.gabor_sigma_ratio,
            "flow.presmooth_sigma": self.flow.presmooth_sigma,
        }
        for key, val in sigmas.items():
            if not val > 0:
                raise ConfigError(f"{key} must be > 0")
        if not 0.0 <= self.fusion.alpha <= 1.0:
            raise ConfigError("fusion.alpha must lie in [0, 1]")
        if self.fusion.atw_max_window < 1 or self.fusion.mca_iterations < 1:
            raise ConfigError("fusion.atw_max_window and fusion.mca_iterations must be >= 1")
        if self.fusion.mca_lambda not in ("logodds", "odds"):
            raise ConfigError("fusion.mca_lambda must be 'logodds' or 'odds'")
        if self.mid_level.bndcon not in ("soft", "literal"):
            raise ConfigError("mid_level.bndcon must be 'soft' or 'literal'")
        if self.low_level.color_mode not in ("joint", "per-channel"):
            raise ConfigError("low_level.color_mode must be 'joint' or 'per-channel'")
        if self.low_level.orientation_bins not in (8, 16):
            raise ConfigError("low_level.orientation_bins must be 8 or 16")
        targets = self.segmentation.scale_targets
        if targets is not None and (len(targets) == 0 or min(targets) < 1):
            raise ConfigError("segmentation.scale_targets must be positive")
        self.scale_indices(3 if targets is None else len(targets))

    def scale_indices(self, n_scales: int) -> list[int]:
        """0-based indices of the scale levels taking part in fusion."""
        levels = self.fusion.levels
        if levels == "all":
            return list(range(n_scales))
        if isinstance(levels, int):
            levels = [levels]
        idx = sorted({int(v) - 1 for v in levels})
        if not idx or idx[0] < 0 or idx[-1] >= n_scales:
            raise ConfigError(f"fusion.levels {self.fusion.levels!r} outside 1..{n_scales}")
        return idx

    def hash(self) -> str:
        blob = json.dumps(self.to_flat(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _coerce(value, default, key):
    if isinstance(default, bool):
        if isinstance(value, str):
            low = value.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ConfigError(f"{key}: expected a boolean, got {value!r}")
        return bool(value)
    if isinstance(default, int) and not isinstance(value, bool) and isinstance(value, (int, float)):
        if float(value) != int(value):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return int(value)
    if isinstance(default, float) and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(default, list) and isinstance(value, (list, tuple)):
        return [float(v) if isinstance(v, float) else v for v in value]
    if isinstance(default, (int, float)) and isinstance(value, str):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    return value


def parse_value(text: str):
    """Value of a ``key=value`` override: JSON when it parses, else the raw string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    flat: dict[str, Any] = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object of dotted keys")
        flat.update(data)
    flat.update(overrides or {})
    return PipelineConfig.from_flat(flat)
