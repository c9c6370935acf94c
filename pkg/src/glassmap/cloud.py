"""Core point-cloud data types: single returns, organized ring x azimuth grids,
and dual-return scans.

An organized cloud is a fixed-size 2D grid indexed by (ring, column) where
ring is the laser channel id and column is the azimuth bin.  Cells without a
return carry an explicit validity flag; coordinates of invalid cells are NaN
so accidental use is loud.  All types are immutable after construction and
safe to share between threads.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import MalformedInputError

TWO_PI = 2.0 * math.pi

# HDL-32E-style defaults: 32 channels, ~2251 azimuth steps per revolution.
DEFAULT_RING_COUNT = 32
DEFAULT_COLUMN_COUNT = 2251
# 2.79 mrad nominal step; the exact value is chosen so that a full revolution
# is an integer number of columns (ceil(2*pi/step) == 2251).
DEFAULT_STEP_AZIMUTH = TWO_PI / DEFAULT_COLUMN_COUNT
# Channel elevations spanning -30.67 deg .. +10.67 deg, bottom ring first.
DEFAULT_ELEVATION_SPAN_DEG = (-30.67, 10.67)


def columns_for_step(step_azimuth: float) -> int:
    """Number of azimuth bins for a given angular step (ceil of a revolution).

    A small epsilon guards against 2*pi/step landing a hair above an integer
    due to rounding when the step was itself derived from a column count.
    """
    if step_azimuth <= 0:
        raise ValueError("step_azimuth must be positive")
    return int(math.ceil(TWO_PI / step_azimuth - 1e-9))


def default_ring_elevations(ring_count: int = DEFAULT_RING_COUNT) -> np.ndarray:
    """Evenly spaced channel elevations in radians, bottom ring first."""
    lo, hi = DEFAULT_ELEVATION_SPAN_DEG
    return np.radians(np.linspace(lo, hi, ring_count))


class ReturnChannel(enum.Enum):
    STRONGEST = "strongest"
    LAST = "last"


@dataclass(frozen=True)
class RawReturn:
    """One lidar return in the sensor frame.

    azimuth is in radians in [0, 2*pi); intensity is the sensor's unitless
    0..255 value; ring is the channel id.
    """

    x: float
    y: float
    z: float
    intensity: float
    ring: int
    azimuth: float
    return_channel: ReturnChannel = ReturnChannel.STRONGEST

    @property
    def range(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


@dataclass(frozen=True)
class GridGeometry:
    """Shape of the organized grid plus the channel elevation table."""

    ring_count: int = DEFAULT_RING_COUNT
    step_azimuth: float = DEFAULT_STEP_AZIMUTH

    @property
    def column_count(self) -> int:
        return columns_for_step(self.step_azimuth)

    def column_of(self, azimuth: float | np.ndarray):
        """Azimuth (radians, any real) -> column index via floor binning."""
        az = np.asarray(azimuth, dtype=float) % TWO_PI
        col = np.floor(az / self.step_azimuth).astype(np.int64)
        # Guard the az == 2*pi - eps edge rounding into column_count.
        return np.minimum(col, self.column_count - 1)

    def azimuth_of(self, column: int | np.ndarray):
        """Column index -> azimuth of the bin center."""
        return (np.asarray(column, dtype=float) + 0.5) * self.step_azimuth


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class OrganizedCloud:
    """Ring x column grid of returns with an explicit validity mask.

    xyz is (rings, cols, 3) in meters, intensity is (rings, cols); both are
    NaN / 0 where valid is False.
    """

    xyz: np.ndarray
    intensity: np.ndarray
    valid: np.ndarray
    step_azimuth: float = DEFAULT_STEP_AZIMUTH

    def __post_init__(self):
        xyz = np.asarray(self.xyz, dtype=float)
        inten = np.asarray(self.intensity, dtype=float)
        valid = np.asarray(self.valid, dtype=bool)
        if xyz.ndim != 3 or xyz.shape[2] != 3:
            raise MalformedInputError(f"xyz must be (rings, cols, 3), got {xyz.shape}")
        if inten.shape != xyz.shape[:2] or valid.shape != xyz.shape[:2]:
            raise MalformedInputError("intensity/valid shape does not match xyz grid")
        expected_cols = columns_for_step(self.step_azimuth)
        if xyz.shape[1] != expected_cols:
            raise MalformedInputError(
                f"grid has {xyz.shape[1]} columns but step_azimuth implies {expected_cols}"
            )
        object.__setattr__(self, "xyz", _readonly(xyz))
        object.__setattr__(self, "intensity", _readonly(inten))
        object.__setattr__(self, "valid", _readonly(valid))

    @property
    def ring_count(self) -> int:
        return self.xyz.shape[0]

    @property
    def column_count(self) -> int:
        return self.xyz.shape[1]

    @property
    def geometry(self) -> GridGeometry:
        return GridGeometry(self.ring_count, self.step_azimuth)

    def ranges(self) -> np.ndarray:
        """(rings, cols) Euclidean range; NaN where invalid."""
        return np.linalg.norm(self.xyz, axis=2)

    def points(self) -> np.ndarray:
        """(n, 3) array of the valid points, row-major grid order."""
        return self.xyz[self.valid]

    def cells(self) -> np.ndarray:
        """(n, 2) array of (ring, col) for the valid points, matching points()."""
        r, c = np.nonzero(self.valid)
        return np.column_stack([r, c])

    def valid_count(self) -> int:
        return int(self.valid.sum())

    @staticmethod
    def empty(geometry: GridGeometry = GridGeometry()) -> "OrganizedCloud":
        r, c = geometry.ring_count, geometry.column_count
        return OrganizedCloud(
            xyz=np.full((r, c, 3), np.nan),
            intensity=np.zeros((r, c)),
            valid=np.zeros((r, c), dtype=bool),
            step_azimuth=geometry.step_azimuth,
        )

    def ring_elevations(self) -> np.ndarray:
        """Mean elevation angle (radians) per ring over valid cells; NaN if empty."""
        rng = self.ranges()
        with np.errstate(invalid="ignore"):
            sin_el = np.where(self.valid, self.xyz[:, :, 2] / rng, np.nan)
        counts = self.valid.sum(axis=1)
        sums = np.nansum(np.arcsin(np.clip(sin_el, -1.0, 1.0)), axis=1)
        out = np.full(self.ring_count, np.nan)
        nz = counts > 0
        out[nz] = sums[nz] / counts[nz]
        return out


def _returns_to_arrays(returns: Iterable[RawReturn]):
    rows = [(p.x, p.y, p.z, p.intensity, p.ring, p.azimuth) for p in returns]
    if not rows:
        return (np.empty((0, 3)), np.empty(0), np.empty(0, dtype=np.int64), np.empty(0))
    a = np.asarray(rows, dtype=float)
    return a[:, 0:3], a[:, 3], a[:, 4].astype(np.int64), a[:, 5]


def organize_scan(
    returns: Iterable[RawReturn],
    geometry: GridGeometry = GridGeometry(),
) -> OrganizedCloud:
    """Bin unordered returns into the organized grid.

    Placement is (ring, floor(azimuth / step_azimuth)).  When two returns land
    in the same cell the higher-intensity one wins.  A ring id outside
    [0, ring_count) rejects the whole scan.
    """
    xyz, inten, ring, azimuth = _returns_to_arrays(returns)
    return organize_arrays(xyz, inten, ring, azimuth, geometry)


def organize_arrays(
    xyz: np.ndarray,
    intensity: np.ndarray,
    ring: np.ndarray,
    azimuth: np.ndarray,
    geometry: GridGeometry = GridGeometry(),
) -> OrganizedCloud:
    """Array-input fast path of organize_scan; same contract."""
    xyz = np.asarray(xyz, dtype=float).reshape(-1, 3)
    intensity = np.asarray(intensity, dtype=float).ravel()
    ring = np.asarray(ring).astype(np.int64).ravel()
    azimuth = np.asarray(azimuth, dtype=float).ravel()
    n = xyz.shape[0]
    if not (intensity.size == ring.size == azimuth.size == n):
        raise MalformedInputError("organize_arrays: mismatched input lengths")

    cloud = OrganizedCloud.empty(geometry)
    if n == 0:
        return cloud

    if ring.min() < 0 or ring.max() >= geometry.ring_count:
        bad = int(ring[(ring < 0) | (ring >= geometry.ring_count)][0])
        raise MalformedInputError(
            f"ring id {bad} outside [0, {geometry.ring_count})"
        )

    col = geometry.column_of(azimuth)
    grid_xyz = np.array(cloud.xyz)
    grid_int = np.array(cloud.intensity)
    grid_valid = np.array(cloud.valid)

    # Stable sort by intensity so the strongest return of a colliding cell is
    # written last and wins.
    order = np.argsort(intensity, kind="stable")
    r, c = ring[order], col[order]
    grid_xyz[r, c] = xyz[order]
    grid_int[r, c] = intensity[order]
    grid_valid[r, c] = True

    return OrganizedCloud(grid_xyz, grid_int, grid_valid, geometry.step_azimuth)


@dataclass(frozen=True)
class DualScan:
    """Paired strongest/last organized clouds from one sensor revolution."""

    strongest: OrganizedCloud
    last: OrganizedCloud
    scan_id: int = 0
    timestamp: float = 0.0

    def __post_init__(self):
        s, l = self.strongest, self.last
        if (
            s.ring_count != l.ring_count
            or s.column_count != l.column_count
            or not math.isclose(s.step_azimuth, l.step_azimuth, rel_tol=1e-12)
        ):
            raise MalformedInputError("strongest/last grids have mixed geometries")

    @property
    def geometry(self) -> GridGeometry:
        return self.strongest.geometry

    def validate(self, eps_range: float = 0.01) -> None:
        """Check the echo-ordering invariant: last is never nearer than
        strongest by more than eps_range on cells where both exist."""
        both = self.strongest.valid & self.last.valid
        rs = self.strongest.ranges()
        rl = self.last.ranges()
        bad = both & (rl < rs - eps_range)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise MalformedInputError(
                f"last return nearer than strongest at cell ({r}, {c}): "
                f"{rl[r, c]:.4f} < {rs[r, c]:.4f} - {eps_range}"
            )

    def ring_elevations(self) -> np.ndarray:
        """Per-ring elevation table pooled over both channels."""
        es = self.strongest.ring_elevations()
        el = self.last.ring_elevations()
        return np.where(np.isnan(es), el, es)


def split_dual_returns(
    stream: Iterable[RawReturn],
    geometry: GridGeometry = GridGeometry(),
    scan_id: int = 0,
    timestamp: float = 0.0,
) -> DualScan:
    """Split an interleaved return stream into aligned strongest/last grids."""
    strongest = []
    last = []
    for p in stream:
        (strongest if p.return_channel is ReturnChannel.STRONGEST else last).append(p)
    return DualScan(
        strongest=organize_scan(strongest, geometry),
        last=organize_scan(last, geometry),
        scan_id=scan_id,
        timestamp=timestamp,
    )
