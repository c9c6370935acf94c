"""Three-step point classifier: inside / glass / reflection / outside / unresolved.

Geometric pre-pass: points near an assigned pane's plane and inside its
boundary are glass; points on the sensor side (or whose beam misses every
pane boundary) are inside.  The remaining behind-pane points are resolved in
three steps:

  1. mirror the inside points through the pane; a behind-pane point farther
     along its beam than every mirrored inside point in its direction cone is
     an outside obstacle,
  2. mirror each still-unresolved behind point back to the inside and trace
     that direction; seeing another (non-glass) point beyond the mirrored
     position proves the original was outside,
  3. with the outside set known, a behind point whose direction cone contains
     a farther outside point is a reflection.

Whatever survives all three steps is unresolved.  Panes with too few
behind-pane points are ignored entirely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import labels
from .cloud import TWO_PI, DualScan, GridGeometry
from .geometry import GlassPane, mirror_points


@dataclass(frozen=True)
class ClassifyParams:
    glass_dist: float = 0.05       # m, point-to-pane membership distance
    trace_window: int = 1          # cells, half-width of the direction cone
    min_outside_points: int = 50   # behind-pane points needed to trust a pane


@dataclass(frozen=True)
class LabeledCloud:
    """Per-cell labels for both channels plus mirrored positions for R cells."""

    labels_strongest: np.ndarray    # (rings, cols) uint8 label codes
    labels_last: np.ndarray
    mirrored_strongest: np.ndarray  # (rings, cols, 3); NaN unless REFLECTION
    mirrored_last: np.ndarray
    panes: tuple[GlassPane, ...]
    scan: DualScan

    def counts(self) -> dict[str, int]:
        out = {}
        for code, ch in labels.CODE_TO_CHAR.items():
            if code == labels.NONE:
                continue
            out[ch] = int((self.labels_strongest == code).sum()
                          + (self.labels_last == code).sum())
        return out


def _complete_elevations(scan: DualScan) -> np.ndarray:
    """Per-ring elevation table with gaps filled by a linear fit."""
    el = scan.ring_elevations()
    known = ~np.isnan(el)
    if known.sum() >= 2:
        idx = np.arange(el.size)
        coef = np.polyfit(idx[known], el[known], 1)
        el = np.where(known, el, np.polyval(coef, idx))
    else:
        from .cloud import default_ring_elevations

        el = default_ring_elevations(el.size)
    return el


def _cell_of_points(points: np.ndarray, elevations: np.ndarray, geometry: GridGeometry):
    """Map free points to the (ring, col) of the beam that would see them.

    Also returns a coverage mask: points whose elevation falls outside the
    sensor's fan (beyond half a ring spacing from the nearest ring) have no
    matching beam and must not take part in direction tracing.
    """
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    horiz = np.hypot(x, y)
    el = np.arctan2(z, horiz)
    az = np.arctan2(y, x) % TWO_PI
    resid = np.abs(el[:, None] - elevations[None, :])
    ring = np.argmin(resid, axis=1)
    spacing = float(np.max(np.abs(np.diff(np.sort(elevations))))) if elevations.size > 1 else np.inf
    covered = resid[np.arange(ring.size), ring] <= 0.75 * spacing
    col = geometry.column_of(az)
    return ring, col, covered


def _cone_max(grid: np.ndarray, window: int) -> np.ndarray:
    """Per-cell max over the (2w+1)^2 neighborhood, wrapping in azimuth."""
    return ndimage.maximum_filter(
        grid, size=2 * window + 1, mode=("nearest", "wrap")
    )


def _cone_min_observed(grid: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell min over observed neighbors plus an any-observed mask.

    grid holds ranges with -inf marking unobserved cells.
    """
    observed = np.isfinite(grid)
    filled = np.where(observed, grid, np.inf)
    mn = ndimage.minimum_filter(filled, size=2 * window + 1, mode=("nearest", "wrap"))
    any_obs = _cone_max(observed.astype(float), window) > 0
    return mn, any_obs


def _max_range_grid(shape, cells_r, cells_c, ranges) -> np.ndarray:
    grid = np.full(shape, -np.inf)
    np.maximum.at(grid, (cells_r, cells_c), ranges)
    return grid


def classify_points(
    scan: DualScan,
    panes: tuple[GlassPane, ...] | list[GlassPane],
    params: ClassifyParams = ClassifyParams(),
) -> LabeledCloud:
    """Assign every valid cell of both channels one of I/G/R/O/U."""
    geom = scan.geometry
    shape = (geom.ring_count, geom.column_count)
    elevations = _complete_elevations(scan)

    clouds = (scan.strongest, scan.last)
    valid = [c.valid for c in clouds]
    ranges = [np.nan_to_num(c.ranges(), nan=np.inf) for c in clouds]
    label = [np.zeros(shape, dtype=np.uint8) for _ in clouds]
    mirrored = [np.full(shape + (3,), np.nan) for _ in clouds]

    panes = [p for p in panes]
    if not panes:
        for k in range(2):
            label[k][valid[k]] = labels.INSIDE
        return LabeledCloud(label[0], label[1], mirrored[0], mirrored[1], (), scan)

    ring_grid, col_grid = np.meshgrid(
        np.arange(geom.ring_count), np.arange(geom.column_count), indexing="ij"
    )

    def assign_panes(active: list[GlassPane]):
        """Nearest active pane crossed by each beam; -1 where none."""
        t_cross = np.full(shape + (len(active),), np.inf)
        # beam directions from grid angles (shared by both channels)
        az = geom.azimuth_of(col_grid)
        ce = np.cos(elevations)[:, None]
        dirs = np.stack(
            [ce * np.cos(az), ce * np.sin(az), np.broadcast_to(np.sin(elevations)[:, None], shape)],
            axis=2,
        )
        for i, pane in enumerate(active):
            inb = pane.contains_cell(ring_grid, col_grid, geom)
            denom = dirs @ pane.plane.normal
            with np.errstate(divide="ignore"):
                t = -pane.plane.d / denom
            crossing = inb & (t > 0)
            t_cross[:, :, i] = np.where(crossing, t, np.inf)
        best = np.argmin(t_cross, axis=2)
        none = ~np.isfinite(np.min(t_cross, axis=2))
        return np.where(none, -1, best)

    def label_prepass(pane_idx, active):
        """G / I / behind split per channel given the pane assignment."""
        behind = [np.zeros(shape, dtype=bool), np.zeros(shape, dtype=bool)]
        for k, cloud in enumerate(clouds):
            lab = label[k]
            lab[:] = 0
            no_pane = valid[k] & (pane_idx < 0)
            lab[no_pane] = labels.INSIDE
            for i, pane in enumerate(active):
                mine = valid[k] & (pane_idx == i)
                if not mine.any():
                    continue
                sd = pane.plane.signed_distance(
                    np.nan_to_num(cloud.xyz.reshape(-1, 3))
                ).reshape(shape)
                lab[mine & (np.abs(sd) <= params.glass_dist)] = labels.GLASS
                lab[mine & (sd > params.glass_dist)] = labels.INSIDE
                b = mine & (sd < -params.glass_dist)
                behind[k] |= b
        return behind

    # first pass: drop panes with too few behind-pane points
    pane_idx = assign_panes(panes)
    behind = label_prepass(pane_idx, panes)
    keep = []
    for i, pane in enumerate(panes):
        n_behind = int(
            ((pane_idx == i) & behind[0]).sum() + ((pane_idx == i) & behind[1]).sum()
        )
        if n_behind >= params.min_outside_points:
            keep.append(pane)
    if len(keep) != len(panes):
        panes = keep
        if not panes:
            for k in range(2):
                label[k][:] = 0
                label[k][valid[k]] = labels.INSIDE
            return LabeledCloud(label[0], label[1], mirrored[0], mirrored[1], (), scan)
        pane_idx = assign_panes(panes)
        behind = label_prepass(pane_idx, panes)

    w = params.trace_window
    margin = params.glass_dist

    # step 1: mirrored-inside envelope, per pane.  A behind point farther than
    # every mirrored inside point matching its direction is outside.  The
    # margin keeps true reflections, which land exactly on their own mirror
    # image, from tipping over the envelope through range noise.
    inside_pts = np.vstack([clouds[k].xyz[(label[k] == labels.INSIDE) & valid[k]] for k in range(2)])
    for i, pane in enumerate(panes):
        if inside_pts.shape[0] == 0:
            break
        m = mirror_points(inside_pts, pane.plane)
        mr = np.linalg.norm(m, axis=1)
        rr, cc, cov = _cell_of_points(m, elevations, geom)
        env = _cone_max(_max_range_grid(shape, rr[cov], cc[cov], mr[cov]), w)
        for k in range(2):
            b = behind[k] & (pane_idx == i)
            o = b & np.isfinite(env) & (ranges[k] > env + margin)
            label[k][o] = labels.OUTSIDE
            behind[k] &= ~o

    # step 2: mirror the unresolved behind points back inside and look past
    # them.  Every observed beam matching the mirrored direction must see
    # beyond the mirrored position (min over the cone): an exists-test would
    # falsely fire on grazing surfaces where range shifts metres per ring.
    nonglass = np.full(shape, -np.inf)
    for k in range(2):
        keep_k = valid[k] & (label[k] != labels.GLASS)
        nonglass = np.maximum(nonglass, np.where(keep_k, ranges[k], -np.inf))
    seen_min, seen_any = _cone_min_observed(nonglass, w)
    for i, pane in enumerate(panes):
        for k in range(2):
            b = behind[k] & (pane_idx == i)
            if not b.any():
                continue
            pts = clouds[k].xyz[b]
            m = mirror_points(pts, pane.plane)
            mr = np.linalg.norm(m, axis=1)
            rr, cc, cov = _cell_of_points(m, elevations, geom)
            o_flat = cov & seen_any[rr, cc] & (seen_min[rr, cc] > mr + margin)
            sel = np.zeros(shape, dtype=bool)
            br, bc = np.nonzero(b)
            sel[br[o_flat], bc[o_flat]] = True
            label[k][sel] = labels.OUTSIDE
            behind[k] &= ~sel

    # step 3: a behind point with a farther outside point in its cone is a reflection
    outside = np.full(shape, -np.inf)
    for k in range(2):
        o_k = label[k] == labels.OUTSIDE
        outside = np.maximum(outside, np.where(o_k, ranges[k], -np.inf))
    far_outside = _cone_max(outside, w)
    for i, pane in enumerate(panes):
        for k in range(2):
            b = behind[k] & (pane_idx == i)
            r_mask = b & (far_outside > ranges[k])
            if not r_mask.any():
                continue
            label[k][r_mask] = labels.REFLECTION
            behind[k] &= ~r_mask
            pts = clouds[k].xyz[r_mask]
            mirrored[k][r_mask] = mirror_points(pts, pane.plane)

    for k in range(2):
        label[k][behind[k]] = labels.UNRESOLVED

    return LabeledCloud(label[0], label[1], mirrored[0], mirrored[1], tuple(panes), scan)


def assemble_output(labeled: LabeledCloud) -> tuple[np.ndarray, np.ndarray]:
    """Flatten a labeled scan into the point set handed to mapping.

    Inside/glass/outside points keep their measured coordinates, reflections
    are replaced by their mirrored positions, unresolved points are dropped.
    Cells where both channels carry the identical echo are emitted once.
    Returns (points (n,3), label codes (n,)).
    """
    scan = labeled.scan
    s, l = scan.strongest, scan.last
    dup = s.valid & l.valid & np.all(s.xyz == l.xyz, axis=2)

    pts_out = []
    lab_out = []
    for cloud, lab, mir, skip_dup in (
        (s, labeled.labels_strongest, labeled.mirrored_strongest, None),
        (l, labeled.labels_last, labeled.mirrored_last, dup),
    ):
        emit = cloud.valid & (lab != labels.NONE) & (lab != labels.UNRESOLVED)
        if skip_dup is not None:
            emit &= ~skip_dup
        coords = np.where(
            (lab == labels.REFLECTION)[:, :, None], mir, cloud.xyz
        )
        pts_out.append(coords[emit])
        lab_out.append(lab[emit])
    return np.vstack(pts_out), np.concatenate(lab_out)
