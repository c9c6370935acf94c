"""Persistence of detected panes in the map frame.

Poses come from an external source (a TUM-style trajectory file); panes are
transformed into the map frame at registration, merged with co-planar
overlapping entries, and can be projected back into any later sensor frame
when detection fails for a scan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .cloud import TWO_PI, GridGeometry
from .errors import MalformedInputError
from .geometry import GlassPane, Plane
from .sim import SensorRig

_Z = np.array([0.0, 0.0, 1.0])
_X = np.array([1.0, 0.0, 0.0])


@dataclass(frozen=True)
class Pose:
    """Rigid transform sensor->map: p_map = R(q) p_sensor + t."""

    translation: np.ndarray
    quaternion: np.ndarray  # (qx, qy, qz, qw)
    frame_id: str = "map"

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=float)
        q = np.asarray(self.quaternion, dtype=float)
        if t.shape != (3,) or q.shape != (4,):
            raise MalformedInputError("pose needs a 3-vector translation and 4-vector quaternion")
        n = float(np.linalg.norm(q))
        if abs(n - 1.0) > 1e-6:
            raise MalformedInputError(f"quaternion norm {n:.8f} is not 1")
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "quaternion", q / n)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), np.array([0.0, 0.0, 0.0, 1.0]))

    def rotation(self) -> np.ndarray:
        x, y, z, w = self.quaternion
        return np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ])

    def to_map(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.rotation().T + self.translation

    def to_sensor(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.translation) @ self.rotation()


def plane_to_map(plane: Plane, pose: Pose) -> Plane:
    n_m = pose.rotation() @ plane.normal
    d_m = plane.d - float(n_m @ pose.translation)
    return Plane(n_m[0], n_m[1], n_m[2], d_m)


def plane_to_sensor(plane: Plane, pose: Pose) -> Plane:
    n_s = pose.rotation().T @ plane.normal
    d_s = plane.d + float(plane.normal @ pose.translation)
    return Plane(n_s[0], n_s[1], n_s[2], d_s)


def _local_axes(plane: Plane) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic in-plane axes for a map-frame plane."""
    n = plane.normal
    ref = _Z if abs(float(n @ _Z)) < 0.99 else _X
    u = np.cross(ref, n)
    u = u / np.linalg.norm(u)
    return u, np.cross(n, u)


@dataclass(frozen=True)
class RegistryPane:
    """One persisted pane: map-frame plane plus a pane-local bounding rect."""

    plane: Plane
    u_min: float
    u_max: float
    v_min: float
    v_max: float
    inlier_count: int
    observations: int = 1
    last_seen: int = 0

    def anchor(self) -> np.ndarray:
        return -self.plane.d * self.plane.normal

    def corners_map(self) -> np.ndarray:
        u, v = _local_axes(self.plane)
        p0 = self.anchor()
        return np.array([
            p0 + self.u_min * u + self.v_min * v,
            p0 + self.u_max * u + self.v_min * v,
            p0 + self.u_max * u + self.v_max * v,
            p0 + self.u_min * u + self.v_max * v,
        ])

    def center_map(self) -> np.ndarray:
        u, v = _local_axes(self.plane)
        return (
            self.anchor()
            + 0.5 * (self.u_min + self.u_max) * u
            + 0.5 * (self.v_min + self.v_max) * v
        )


@dataclass(frozen=True)
class RegistryParams:
    merge_angle: float = math.radians(5.0)
    merge_dist: float = 0.1     # m between parallel planes
    lookup_range: float = 50.0  # m from sensor origin to pane center


@dataclass
class PaneRegistry:
    """Single-writer collection of map-frame panes."""

    params: RegistryParams = field(default_factory=RegistryParams)
    panes: list[RegistryPane] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.panes)


def _rect_of_corners(plane: Plane, corners_map: np.ndarray):
    u, v = _local_axes(plane)
    rel = corners_map - (-plane.d * plane.normal)
    us = rel @ u
    vs = rel @ v
    return float(us.min()), float(us.max()), float(vs.min()), float(vs.max())


def _mergeable(a: RegistryPane, b: RegistryPane, params: RegistryParams) -> bool:
    if a.plane.angle_to(b.plane) > params.merge_angle:
        return False
    # parallel planes: compare offsets with normals sign-aligned
    s = 1.0 if float(a.plane.normal @ b.plane.normal) >= 0 else -1.0
    if abs(a.plane.d - s * b.plane.d) > params.merge_dist:
        return False
    # overlap of the rects, evaluated in a's local frame
    bu_min, bu_max, bv_min, bv_max = _rect_of_corners(a.plane, b.corners_map())
    return not (
        bu_max < a.u_min or bu_min > a.u_max or bv_max < a.v_min or bv_min > a.v_max
    )


def _merge(a: RegistryPane, b: RegistryPane, scan_id: int) -> RegistryPane:
    wa = max(a.inlier_count, 1)
    wb = max(b.inlier_count, 1)
    s = 1.0 if float(a.plane.normal @ b.plane.normal) >= 0 else -1.0
    n = wa * a.plane.normal + wb * s * b.plane.normal
    n = n / np.linalg.norm(n)
    d = (wa * a.plane.d + wb * s * b.plane.d) / (wa + wb)
    plane = Plane(n[0], n[1], n[2], d)
    bu_min, bu_max, bv_min, bv_max = _rect_of_corners(plane, b.corners_map())
    au_min, au_max, av_min, av_max = _rect_of_corners(plane, a.corners_map())
    return RegistryPane(
        plane=plane,
        u_min=min(au_min, bu_min),
        u_max=max(au_max, bu_max),
        v_min=min(av_min, bv_min),
        v_max=max(av_max, bv_max),
        inlier_count=max(wa, wb),
        observations=a.observations + b.observations,
        last_seen=scan_id,
    )


def register_pane(
    registry: PaneRegistry,
    pane: GlassPane,
    pose: Pose,
    scan_id: int = 0,
) -> PaneRegistry:
    """Transform a sensor-frame pane into the map frame and insert/merge it."""
    if pane.corners is None:
        raise MalformedInputError("pane has no boundary corners to register")
    plane_m = plane_to_map(pane.plane, pose)
    corners_m = pose.to_map(pane.corners)
    u_min, u_max, v_min, v_max = _rect_of_corners(plane_m, corners_m)
    entry = RegistryPane(
        plane=plane_m,
        u_min=u_min, u_max=u_max, v_min=v_min, v_max=v_max,
        inlier_count=pane.inlier_count,
        observations=1,
        last_seen=scan_id,
    )
    for i, existing in enumerate(registry.panes):
        if _mergeable(existing, entry, registry.params):
            registry.panes[i] = _merge(existing, entry, scan_id)
            return registry
    registry.panes.append(entry)
    return registry


def _azimuth_window(az: np.ndarray) -> tuple[float, float]:
    """Smallest unwrapped [left, right] interval covering the given azimuths."""
    az = np.sort(az % TWO_PI)
    gaps = np.diff(np.concatenate([az, [az[0] + TWO_PI]]))
    k = int(np.argmax(gaps))
    left = float(az[(k + 1) % az.size])
    right = float(az[k])
    if right < left:
        right += TWO_PI
    return left, right


def lookup_panes(
    registry: PaneRegistry,
    pose: Pose,
    sensor: SensorRig | None = None,
) -> list[GlassPane]:
    """Project registry panes into the given sensor pose.

    Ring/azimuth bounds are reconstructed from the stored rectangle corners
    against the sensor's elevation table; panes whose center is beyond
    lookup_range are skipped.
    """
    sensor = sensor or SensorRig()
    geom = sensor.geometry
    out = []
    for entry in registry.panes:
        center_s = pose.to_sensor(entry.center_map())
        if float(np.linalg.norm(center_s)) > registry.params.lookup_range:
            continue
        plane_s = plane_to_sensor(entry.plane, pose)
        corners_s = pose.to_sensor(entry.corners_map())
        az = np.arctan2(corners_s[:, 1], corners_s[:, 0])
        left, right = _azimuth_window(az)
        el = np.arctan2(corners_s[:, 2], np.hypot(corners_s[:, 0], corners_s[:, 1]))
        rings = np.argmin(np.abs(el[:, None] - sensor.elevations[None, :]), axis=1)
        out.append(
            GlassPane(
                plane=plane_s,
                left_az=left,
                right_az=right,
                lower_ring=int(rings.min()),
                upper_ring=int(rings.max()),
                inlier_count=entry.inlier_count,
                source="registry",
                corners=corners_s,
            )
        )
    return out


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def write_poses(path, poses: dict[int, Pose]) -> None:
    lines = []
    for scan_id in sorted(poses):
        p = poses[scan_id]
        t = p.translation
        q = p.quaternion
        lines.append(
            f"{scan_id} {t[0]:.6f} {t[1]:.6f} {t[2]:.6f} "
            f"{q[0]:.9f} {q[1]:.9f} {q[2]:.9f} {q[3]:.9f}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_poses(path) -> dict[int, Pose]:
    """Parse a per-scan pose file: `scan_id tx ty tz qx qy qz qw` lines."""
    poses = {}
    for i, raw in enumerate(Path(path).read_text(encoding="ascii").splitlines(), 1):
        raw = raw.strip()
        if not raw or raw.startswith("#"):
            continue
        tok = raw.split()
        if len(tok) != 8:
            raise MalformedInputError(f"pose line {i}: expected 8 fields, got {len(tok)}")
        try:
            scan_id = int(tok[0])
            vals = [float(t) for t in tok[1:]]
        except ValueError as e:
            raise MalformedInputError(f"pose line {i}: {e}") from None
        q = np.asarray(vals[3:7])
        nq = np.linalg.norm(q)
        if nq == 0:
            raise MalformedInputError(f"pose line {i}: zero quaternion")
        poses[scan_id] = Pose(np.asarray(vals[0:3]), q / nq)
    return poses


def write_registry(path, registry: PaneRegistry) -> None:
    lines = []
    for e in registry.panes:
        p = e.plane
        lines.append(
            f"pane {p.a:.9f} {p.b:.9f} {p.c:.9f} {p.d:.6f} "
            f"{e.u_min:.6f} {e.u_max:.6f} {e.v_min:.6f} {e.v_max:.6f} {e.observations}"
        )
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="ascii")


def read_registry(path, params: RegistryParams | None = None) -> PaneRegistry:
    reg = PaneRegistry(params=params or RegistryParams())
    for i, raw in enumerate(Path(path).read_text(encoding="ascii").splitlines(), 1):
        raw = raw.strip()
        if not raw:
            continue
        tok = raw.split()
        if tok[0] != "pane" or len(tok) != 10:
            raise MalformedInputError(f"registry line {i}: malformed entry")
        a, b, c, d, u0, u1, v0, v1 = (float(t) for t in tok[1:9])
        reg.panes.append(
            RegistryPane(
                plane=Plane(a, b, c, d),
                u_min=u0, u_max=u1, v_min=v0, v_max=v1,
                inlier_count=0,
                observations=int(tok[9]),
            )
        )
    return reg
