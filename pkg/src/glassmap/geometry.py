"""Plane fitting, pane boundary estimation and mirror-back reflection.

Planes are stored normalized as (a, b, c, d) with |(a,b,c)| = 1 and d > 0
(sign-flipped at construction when needed); the plane equation is
a*x + b*y + c*z + d = 0.  Reflecting a point across such a plane is the
Householder map p - 2 (N.p + d) N, which is its own inverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .cloud import TWO_PI, DualScan, GridGeometry

if TYPE_CHECKING:  # pragma: no cover
    from .detect import GlassEvidence

_UNIT_TOL = 1e-9


@dataclass(frozen=True)
class Plane:
    """Normalized infinite plane a*x + b*y + c*z + d = 0 with d >= 0.

    d == 0 is tolerated (the sign of the normal is then kept as given); every
    fitted plane in the pipeline has d > 0.
    """

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        n = math.sqrt(self.a * self.a + self.b * self.b + self.c * self.c)
        if n < 1e-12:
            raise ValueError("plane normal must be nonzero")
        a, b, c, d = self.a / n, self.b / n, self.c / n, self.d / n
        if d < 0:
            a, b, c, d = -a, -b, -c, -d
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)

    @property
    def normal(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c])

    @classmethod
    def from_normal_point(cls, normal: Sequence[float], point: Sequence[float]) -> "Plane":
        n = np.asarray(normal, dtype=float)
        return cls(n[0], n[1], n[2], -float(n @ np.asarray(point, dtype=float)))

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        """N.p + d; positive on the side of the coordinate origin when d > 0."""
        p = np.asarray(points, dtype=float)
        return p @ self.normal + self.d

    def distance(self, points: np.ndarray) -> np.ndarray:
        return np.abs(self.signed_distance(points))

    def angle_to(self, other: "Plane") -> float:
        """Angle between the two normals in radians, folded to [0, pi/2]."""
        c = abs(float(np.clip(self.normal @ other.normal, -1.0, 1.0)))
        return math.acos(c)


def reflect_point(p: Sequence[float], plane: Plane) -> np.ndarray:
    """Mirror a single point across the plane: p - 2 (N.p + d) N."""
    p = np.asarray(p, dtype=float)
    return p - 2.0 * (float(p @ plane.normal) + plane.d) * plane.normal


def mirror_points(points: np.ndarray, plane: Plane) -> np.ndarray:
    """Elementwise reflect_point over an (n, 3) array; order preserved."""
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    return p - 2.0 * (p @ plane.normal + plane.d)[:, None] * plane.normal


@dataclass(frozen=True)
class RansacParams:
    inlier_dist: float = 0.05      # m, point-to-plane acceptance distance
    min_inliers: int = 30
    loop_threshold: int = 50       # keep extracting planes while this many points remain
    max_iters: int = 500           # sampling budget per plane
    seed: int = 0


def _tls_plane(points: np.ndarray) -> Plane | None:
    """Total-least-squares plane through points via SVD; None if degenerate."""
    centroid = points.mean(axis=0)
    q = points - centroid
    # smallest right singular vector = direction of least variance
    _, s, vt = np.linalg.svd(q, full_matrices=False)
    normal = vt[-1]
    if s[-2] < 1e-12:  # rank < 2: collinear points, no unique plane
        return None
    return Plane.from_normal_point(normal, centroid)


def fit_planes_ransac(
    points: np.ndarray,
    params: RansacParams = RansacParams(),
    rng: np.random.Generator | None = None,
) -> list[tuple[Plane, np.ndarray]]:
    """Iteratively extract planes from a point set with RANSAC.

    Returns a list of (plane, inlier_indices) where the indices point into the
    input array.  Each accepted plane is refined by total least squares on its
    consensus set and its inliers are removed before the next extraction; the
    loop continues while more than loop_threshold points remain.  Deterministic
    for a fixed seed.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if rng is None:
        rng = np.random.default_rng(params.seed)

    results: list[tuple[Plane, np.ndarray]] = []
    remaining = np.arange(points.shape[0])

    while remaining.size > params.loop_threshold:
        sub = points[remaining]
        n = sub.shape[0]
        if n < 3:
            break

        best_count = 0
        best_mask = None
        iters_needed = params.max_iters
        it = 0
        while it < min(iters_needed, params.max_iters):
            it += 1
            idx = rng.choice(n, size=3, replace=False)
            p0, p1, p2 = sub[idx]
            nrm = np.cross(p1 - p0, p2 - p0)
            norm = np.linalg.norm(nrm)
            if norm < 1e-12:  # collinear sample, try again
                continue
            nrm = nrm / norm
            dist = np.abs((sub - p0) @ nrm)
            mask = dist <= params.inlier_dist
            count = int(mask.sum())
            if count > best_count:
                best_count = count
                best_mask = mask
                # standard adaptive stopping: 99% chance of one clean sample
                w = count / n
                if w >= 1.0:
                    break
                denom = math.log(max(1e-12, 1.0 - w**3))
                iters_needed = min(params.max_iters, int(math.ceil(math.log(0.01) / denom)))

        if best_mask is None or best_count < params.min_inliers:
            break

        refined = _tls_plane(sub[best_mask])
        if refined is None:
            break
        # re-gate against the refined plane so reported inliers match it
        final_mask = refined.distance(sub) <= params.inlier_dist
        if int(final_mask.sum()) < params.min_inliers:
            break
        refined = _tls_plane(sub[final_mask]) or refined
        final_mask = refined.distance(sub) <= params.inlier_dist

        inliers = remaining[final_mask]
        results.append((refined, inliers))
        remaining = remaining[~final_mask]

    return results


class PaneSource:
    INTENSITY_PEAK = "intensity_peak"
    DUAL_RETURN = "dual_return"


@dataclass(frozen=True)
class GlassPane:
    """A detected plane bounded to a rectangular pane in scan coordinates.

    left_az <= right_az in unwrapped radians (right_az may exceed 2*pi when
    the pane straddles the azimuth seam).  corners are the four boundary
    ray/plane intersections in the sensor frame, ordered
    (left,lower), (right,lower), (right,upper), (left,upper).
    """

    plane: Plane
    left_az: float
    right_az: float
    lower_ring: int
    upper_ring: int
    inlier_count: int
    source: str
    corners: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self):
        if self.left_az > self.right_az:
            raise ValueError("left_az must not exceed right_az (unwrapped)")
        if self.lower_ring > self.upper_ring:
            raise ValueError("lower_ring must not exceed upper_ring")
        if self.corners is not None:
            c = np.asarray(self.corners, dtype=float)
            c.setflags(write=False)
            object.__setattr__(self, "corners", c)

    def contains_cell(self, ring, col, geometry: GridGeometry):
        """Vectorized test whether grid cells fall inside the pane bounds."""
        ring = np.asarray(ring)
        az = geometry.azimuth_of(col)
        width = self.right_az - self.left_az
        offs = (az - self.left_az) % TWO_PI
        in_az = offs <= width + 1e-12
        return (ring >= self.lower_ring) & (ring <= self.upper_ring) & in_az


@dataclass(frozen=True)
class BoundaryParams:
    frame_search_dist: float = 0.10  # m, how near the infinite plane a frame point must be
    frame_gap: int = 5               # columns to search beyond the glass run


def _contiguous_column_run(cols: np.ndarray, column_count: int) -> tuple[int, int]:
    """Unwrap a circular set of columns into one contiguous [left, right] run.

    The cut is placed at the largest circular gap, so a run straddling the
    0/2*pi seam comes back with right >= column_count.
    """
    u = np.unique(cols)
    if u.size == 1:
        return int(u[0]), int(u[0])
    gaps = np.diff(u)
    wrap_gap = (u[0] + column_count) - u[-1]
    k = int(np.argmax(gaps))
    if wrap_gap >= gaps[k]:
        return int(u[0]), int(u[-1])
    # run starts after the largest interior gap and wraps
    return int(u[k + 1]), int(u[k] + column_count)


def _beam_direction(azimuth: float, elevation: float) -> np.ndarray:
    ce = math.cos(elevation)
    return np.array([ce * math.cos(azimuth), ce * math.sin(azimuth), math.sin(elevation)])


def _ray_plane_point(plane: Plane, direction: np.ndarray) -> np.ndarray:
    denom = float(direction @ plane.normal)
    if abs(denom) < 1e-9:
        return direction * 0.0
    t = -plane.d / denom
    return direction * max(t, 0.0)


def pane_corners(
    plane: Plane,
    left_az: float,
    right_az: float,
    lower_ring: int,
    upper_ring: int,
    elevations: np.ndarray,
) -> np.ndarray:
    """Intersect the four boundary rays with the plane (sensor frame)."""
    el_lo = float(elevations[lower_ring])
    el_hi = float(elevations[upper_ring])
    rays = [
        _beam_direction(left_az, el_lo),
        _beam_direction(right_az, el_lo),
        _beam_direction(right_az, el_hi),
        _beam_direction(left_az, el_hi),
    ]
    return np.array([_ray_plane_point(plane, r) for r in rays])


def find_boundary(
    plane: Plane,
    scan: DualScan,
    evidence: "GlassEvidence",
    params: BoundaryParams = BoundaryParams(),
    inlier_dist: float = 0.05,
    source: str = PaneSource.DUAL_RETURN,
) -> GlassPane | None:
    """Bound an infinite fitted plane to a pane using frame evidence.

    Ring bounds are the extreme glass-bearing rings among this plane's inlier
    cells.  Azimuth bounds come from frame points: scan points near the
    infinite plane in the few columns just outside the glass run; if a side
    has no visible frame the bound falls back to the extreme glass column.
    Returns None when the plane has no glass-bearing cells (detector/fit
    mismatch).
    """
    geometry = scan.geometry
    cand_pts = evidence.glass_candidates
    cand_cells = evidence.candidate_cells
    if cand_pts.shape[0] == 0:
        return None

    on_plane = plane.distance(cand_pts) <= inlier_dist
    if not on_plane.any():
        return None
    cells = cand_cells[on_plane]
    rings = cells[:, 0]
    cols = cells[:, 1]

    lower_ring = int(rings.min())
    upper_ring = int(rings.max())
    left_col, right_col = _contiguous_column_run(cols, geometry.column_count)

    # Frame points: anything in either channel close to the infinite plane,
    # in the ring band of the pane, within frame_gap columns beyond the run.
    near_plane = np.zeros((geometry.ring_count, geometry.column_count), dtype=bool)
    for cloud in (scan.strongest, scan.last):
        d = plane.distance(np.nan_to_num(cloud.xyz.reshape(-1, 3), nan=1e6))
        near = (d <= params.frame_search_dist).reshape(geometry.ring_count, -1)
        near_plane |= near & cloud.valid
    ring_band = slice(max(0, lower_ring - 1), min(geometry.ring_count, upper_ring + 2))

    glass_cols = np.zeros(geometry.column_count, dtype=bool)
    glass_cols[cols % geometry.column_count] = True

    def frame_bound(edge_col: int, step: int) -> int | None:
        for off in range(1, params.frame_gap + 1):
            c = (edge_col + step * off) % geometry.column_count
            if glass_cols[c]:
                continue
            if near_plane[ring_band, c].any():
                return edge_col + step * off  # unwrapped
        return None

    lb = frame_bound(left_col, -1)
    rb = frame_bound(right_col, +1)
    left_az = geometry.azimuth_of(lb if lb is not None else left_col)
    right_az = geometry.azimuth_of(rb if rb is not None else right_col)
    if right_az < left_az:
        right_az += TWO_PI

    corners = pane_corners(
        plane, float(left_az), float(right_az), lower_ring, upper_ring,
        scan.ring_elevations(),
    )
    return GlassPane(
        plane=plane,
        left_az=float(left_az),
        right_az=float(right_az),
        lower_ring=lower_ring,
        upper_ring=upper_ring,
        inlier_count=int(on_plane.sum()),
        source=source,
        corners=corners,
    )
