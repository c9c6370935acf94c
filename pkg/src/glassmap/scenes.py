"""Scene file loading and the canonical simulation scenes.

Scene files are TOML with `[sensor]`, `[optics]`, `[noise]` tables and
repeated `[[pane]]` / `[[surface]]` / `[[box]]` tables.  A `[[box]]` is sugar
for the four side faces of an axis-aligned column.  Three canonical scenes
ship with the package: a classroom with a window and a pillar (dual-return
territory), a corridor with a glass railing, and a hall with floor-to-ceiling
glass on both sides (intensity-peak territory).
"""

from __future__ import annotations

import math
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

import numpy as np

from .cloud import DEFAULT_RING_COUNT, DEFAULT_STEP_AZIMUTH
from .errors import ConfigError
from .sim import NoiseModel, Optics, Pane, RectSurface, Scene, SensorRig

CANONICAL = ("classroom", "glass_railing", "corridor")


def box_side_surfaces(center, half_x, half_y, z0, z1, albedo, name="box") -> list[RectSurface]:
    """Four vertical faces of an axis-aligned column spanning z0..z1."""
    cx, cy = float(center[0]), float(center[1])
    cz = 0.5 * (z0 + z1)
    hz = 0.5 * (z1 - z0)
    return [
        RectSurface(center=[cx + half_x, cy, cz], u=[0, 1, 0], v=[0, 0, 1],
                    half_u=half_y, half_v=hz, albedo=albedo, name=f"{name}+x"),
        RectSurface(center=[cx - half_x, cy, cz], u=[0, 1, 0], v=[0, 0, 1],
                    half_u=half_y, half_v=hz, albedo=albedo, name=f"{name}-x"),
        RectSurface(center=[cx, cy + half_y, cz], u=[1, 0, 0], v=[0, 0, 1],
                    half_u=half_x, half_v=hz, albedo=albedo, name=f"{name}+y"),
        RectSurface(center=[cx, cy - half_y, cz], u=[1, 0, 0], v=[0, 0, 1],
                    half_u=half_x, half_v=hz, albedo=albedo, name=f"{name}-y"),
    ]


def _sensor_from_table(t: dict) -> SensorRig:
    el = None
    if "elevation_span_deg" in t:
        lo, hi = t["elevation_span_deg"]
        el = np.radians(np.linspace(lo, hi, int(t.get("rings", DEFAULT_RING_COUNT))))
    return SensorRig(
        position=np.asarray(t.get("position", [0.0, 0.0, 0.0]), dtype=float),
        yaw=math.radians(t.get("yaw_deg", 0.0)),
        ring_count=int(t.get("rings", DEFAULT_RING_COUNT)),
        step_azimuth=float(t.get("step_mrad", DEFAULT_STEP_AZIMUTH * 1e3)) * 1e-3,
        elevations=el,
        max_range=float(t.get("max_range_m", 100.0)),
        yaw_jitter=float(t.get("yaw_jitter_mrad", 0.0)) * 1e-3,
    )


def _optics_from_table(t: dict) -> Optics:
    return Optics(
        i0=float(t.get("i0", 255.0)),
        cos_power=float(t.get("cos_power", 8.0)),
        cutoff=math.radians(t.get("cutoff_deg", 45.0)),
        falloff_ref=float(t.get("falloff_ref_m", 1.0)),
        detect_threshold=float(t.get("detect_threshold", 5.0)),
        min_echo_sep=float(t.get("min_echo_sep_m", 0.15)),
    )


def _pane_from_table(t: dict) -> Pane:
    return Pane(
        center=t["center"], u=t["u"], v=t["v"],
        half_u=float(t["half_u"]), half_v=float(t["half_v"]),
        tau=float(t["tau"]), rho=float(t["rho"]), delta=float(t["delta"]),
        frame_width=float(t.get("frame_width_m", 0.1)),
        frame_albedo=float(t.get("frame_albedo", 0.6)),
        cos_power=float(t["cos_power"]) if "cos_power" in t else None,
        name=t.get("name", ""),
    )


def _surface_from_table(t: dict) -> RectSurface:
    return RectSurface(
        center=t["center"], u=t["u"], v=t["v"],
        half_u=float(t["half_u"]), half_v=float(t["half_v"]),
        albedo=float(t["albedo"]), name=t.get("name", ""),
    )


def scene_from_toml(text: str, name: str = "") -> Scene:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"bad scene file: {e}") from None
    surfaces: list[RectSurface] = [_surface_from_table(t) for t in data.get("surface", [])]
    for t in data.get("box", []):
        surfaces.extend(
            box_side_surfaces(
                t["center"], float(t["half_x"]), float(t["half_y"]),
                float(t["z0"]), float(t["z1"]), float(t["albedo"]),
                name=t.get("name", "box"),
            )
        )
    noise_t = data.get("noise", {})
    return Scene(
        panes=tuple(_pane_from_table(t) for t in data.get("pane", [])),
        surfaces=tuple(surfaces),
        optics=_optics_from_table(data.get("optics", {})),
        sensor=_sensor_from_table(data.get("sensor", {})),
        noise=NoiseModel(
            sigma_r=float(noise_t.get("sigma_r_m", 0.02)),
            p_edge=float(noise_t.get("p_edge", 0.0)),
        ),
        name=name or data.get("name", ""),
    )


def load_scene(name_or_path) -> Scene:
    """Load a scene by canonical name or TOML file path."""
    name = str(name_or_path)
    if name in CANONICAL:
        text = resources.files("glassmap").joinpath(f"scenes/{name}.toml").read_text()
        return scene_from_toml(text, name=name)
    p = Path(name_or_path)
    if not p.exists():
        raise ConfigError(
            f"scene {name!r} is neither a canonical name {CANONICAL} nor a file"
        )
    return scene_from_toml(p.read_text(encoding="utf-8"), name=p.stem)
