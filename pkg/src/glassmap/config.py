"""Pipeline configuration: one TOML file, one section per stage.

Every tunable threshold of the pipeline appears exactly once here; unknown
sections or keys are configuration errors (exit code 3 in the CLI).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .classify import ClassifyParams
from .detect import DetectParams
from .errors import ConfigError
from .geometry import BoundaryParams, RansacParams
from .registry import RegistryParams


@dataclass(frozen=True)
class SimOverrides:
    sigma_r_m: float | None = None  # overrides the scene's range noise when set


@dataclass(frozen=True)
class PipelineConfig:
    detect: DetectParams = DetectParams()
    ransac: RansacParams = RansacParams()
    boundary: BoundaryParams = BoundaryParams()
    classify: ClassifyParams = ClassifyParams()
    registry: RegistryParams = RegistryParams()
    sim: SimOverrides = SimOverrides()


_SCHEMA = {
    "detect": {
        "eps_range_m": float,
        "gap_threshold_m": float,
        "intensity_low": float,
        "intensity_max": float,
        "min_run_len": int,
    },
    "geometry": {
        "ransac_inlier_dist_m": float,
        "min_inliers": int,
        "loop_threshold": int,
        "max_iters": int,
        "seed": int,
        "frame_search_dist_m": float,
        "frame_gap_cols": int,
    },
    "classify": {
        "glass_dist_m": float,
        "trace_window_cells": int,
        "min_outside_points": int,
    },
    "registry": {
        "merge_angle_deg": float,
        "merge_dist_m": float,
        "lookup_range_m": float,
    },
    "sim": {
        "sigma_r_m": float,
    },
}


def _section(data: dict, name: str) -> dict:
    raw = data.get(name, {})
    schema = _SCHEMA[name]
    out = {}
    for key, value in raw.items():
        if key not in schema:
            raise ConfigError(f"unknown key [{name}] {key}")
        try:
            out[key] = schema[key](value)
        except (TypeError, ValueError):
            raise ConfigError(f"bad value for [{name}] {key}: {value!r}") from None
    return out


def load_config(path=None) -> PipelineConfig:
    """Load a TOML config; missing file sections fall back to defaults."""
    if path is None:
        return PipelineConfig()
    try:
        data = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    for name in data:
        if name not in _SCHEMA:
            raise ConfigError(f"unknown config section [{name}]")

    d = _section(data, "detect")
    detect = DetectParams(
        eps_range=d.get("eps_range_m", DetectParams.eps_range),
        gap_threshold=d.get("gap_threshold_m", DetectParams.gap_threshold),
        intensity_low=d.get("intensity_low", DetectParams.intensity_low),
        intensity_max=d.get("intensity_max", DetectParams.intensity_max),
        min_run_len=d.get("min_run_len", DetectParams.min_run_len),
    )
    g = _section(data, "geometry")
    ransac = RansacParams(
        inlier_dist=g.get("ransac_inlier_dist_m", RansacParams.inlier_dist),
        min_inliers=g.get("min_inliers", RansacParams.min_inliers),
        loop_threshold=g.get("loop_threshold", RansacParams.loop_threshold),
        max_iters=g.get("max_iters", RansacParams.max_iters),
        seed=g.get("seed", RansacParams.seed),
    )
    boundary = BoundaryParams(
        frame_search_dist=g.get("frame_search_dist_m", BoundaryParams.frame_search_dist),
        frame_gap=g.get("frame_gap_cols", BoundaryParams.frame_gap),
    )
    c = _section(data, "classify")
    classify = ClassifyParams(
        glass_dist=c.get("glass_dist_m", ClassifyParams.glass_dist),
        trace_window=c.get("trace_window_cells", ClassifyParams.trace_window),
        min_outside_points=c.get("min_outside_points", ClassifyParams.min_outside_points),
    )
    r = _section(data, "registry")
    registry = RegistryParams(
        merge_angle=math.radians(r["merge_angle_deg"]) if "merge_angle_deg" in r
        else RegistryParams.merge_angle,
        merge_dist=r.get("merge_dist_m", RegistryParams.merge_dist),
        lookup_range=r.get("lookup_range_m", RegistryParams.lookup_range),
    )
    s = _section(data, "sim")
    sim = SimOverrides(sigma_r_m=s.get("sigma_r_m"))

    return PipelineConfig(
        detect=detect, ransac=ransac, boundary=boundary,
        classify=classify, registry=registry, sim=sim,
    )
