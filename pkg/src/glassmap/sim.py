"""Ray-casting dual-return sensor simulator.

A scene is a set of rectangular glass panes (with transmittance tau, specular
reflectance rho and a diffuse residual delta) plus rectangular diffuse
surfaces.  Each beam can produce up to three echoes:

  1. the pane surface itself, intensity I0 * delta * g(theta) * falloff(r)
     where g(theta) = cos(theta)**k, gated to zero beyond a cutoff angle,
  2. a transmission echo from the first diffuse surface beyond the pane,
     attenuated by tau**2 (the pulse crosses the glass twice),
  3. a specular echo: the mirrored ray hits a diffuse surface in front of the
     glass, and the sensor reports a phantom point at the total path length
     along the original direction, attenuated by rho**2.

Echoes below the detection threshold are dropped.  The strongest/last channel
selection mimics dual-return hardware: the last (farthest) echo always
reports, and when the highest-intensity echo *is* the last one, the
second-strongest substitutes into the strongest channel.

The per-point ground truth (class, true surface position, pane id) makes the
simulator the oracle for every downstream test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import labels
from .cloud import (
    DEFAULT_RING_COUNT,
    DEFAULT_STEP_AZIMUTH,
    DualScan,
    GridGeometry,
    OrganizedCloud,
    default_ring_elevations,
)
from .geometry import Plane

_T_MIN = 1e-6  # smallest ray parameter accepted as a forward hit


# ---------------------------------------------------------------------------
# scene description
# ---------------------------------------------------------------------------

def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n < 1e-12:
        raise ValueError("zero-length axis vector")
    return v / n


@dataclass(frozen=True)
class RectSurface:
    """Diffuse rectangle: center, two orthonormal in-plane axes, half extents."""

    center: np.ndarray
    u: np.ndarray
    v: np.ndarray
    half_u: float
    half_v: float
    albedo: float
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "u", _unit(self.u))
        object.__setattr__(self, "v", _unit(self.v))
        if self.half_u <= 0 or self.half_v <= 0:
            raise ValueError("rectangle extents must be positive")
        if not 0.0 <= self.albedo <= 1.0:
            raise ValueError("albedo must be in [0, 1]")

    @property
    def normal(self) -> np.ndarray:
        return _unit(np.cross(self.u, self.v))


@dataclass(frozen=True)
class Pane:
    """Rectangular glass pane with a diffuse frame band around it.

    tau + rho + delta <= 1; the remainder is absorbed.  cos_power overrides
    the scene-level exponent of the surface-echo lobe when set.
    """

    center: np.ndarray
    u: np.ndarray
    v: np.ndarray
    half_u: float
    half_v: float
    tau: float
    rho: float
    delta: float
    frame_width: float = 0.1
    frame_albedo: float = 0.6
    cos_power: float | None = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "u", _unit(self.u))
        object.__setattr__(self, "v", _unit(self.v))
        if self.half_u <= 0 or self.half_v <= 0:
            raise ValueError("pane extents must be positive")
        for coeff in (self.tau, self.rho, self.delta):
            if not 0.0 <= coeff <= 1.0:
                raise ValueError("tau/rho/delta must be in [0, 1]")
        if self.tau + self.rho + self.delta > 1.0 + 1e-9:
            raise ValueError("tau + rho + delta must not exceed 1")

    @property
    def normal(self) -> np.ndarray:
        return _unit(np.cross(self.u, self.v))

    def plane_world(self) -> Plane:
        return Plane.from_normal_point(self.normal, self.center)


@dataclass(frozen=True)
class Optics:
    """Intensity model of the simulated sensor (self-consistent, not
    radiometrically calibrated).  falloff(r) = (ref / max(r, ref))**2."""

    i0: float = 255.0
    cos_power: float = 8.0
    cutoff: float = math.radians(45.0)
    falloff_ref: float = 1.0
    detect_threshold: float = 5.0
    min_echo_sep: float = 0.15

    def falloff(self, r):
        r = np.asarray(r, dtype=float)
        return (self.falloff_ref / np.maximum(r, self.falloff_ref)) ** 2


@dataclass(frozen=True)
class SensorRig:
    """Pose and beam pattern of the spinning sensor inside the scene."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    yaw: float = 0.0
    ring_count: int = DEFAULT_RING_COUNT
    step_azimuth: float = DEFAULT_STEP_AZIMUTH
    elevations: np.ndarray | None = None
    max_range: float = 100.0
    yaw_jitter: float = 0.0  # rad, 1-sigma per-scan yaw perturbation

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        el = self.elevations
        if el is None:
            el = default_ring_elevations(self.ring_count)
        el = np.asarray(el, dtype=float)
        if el.size != self.ring_count:
            raise ValueError("elevation table size must match ring_count")
        object.__setattr__(self, "elevations", el)

    @property
    def geometry(self) -> GridGeometry:
        return GridGeometry(self.ring_count, self.step_azimuth)


@dataclass(frozen=True)
class NoiseModel:
    sigma_r: float = 0.02  # m, Gaussian range noise per echo
    p_edge: float = 0.0    # probability of an edge-split double echo per beam


@dataclass(frozen=True)
class Scene:
    panes: tuple[Pane, ...] = ()
    surfaces: tuple[RectSurface, ...] = ()
    optics: Optics = Optics()
    sensor: SensorRig = SensorRig()
    noise: NoiseModel = NoiseModel()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "panes", tuple(self.panes))
        object.__setattr__(self, "surfaces", tuple(self.surfaces))


# ---------------------------------------------------------------------------
# ground truth containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Echo:
    range: float
    intensity: float
    truth_class: int           # labels.INSIDE / GLASS / REFLECTION / OUTSIDE
    truth_position: np.ndarray  # real surface point (sensor frame for scans)
    pane_id: int = -1


@dataclass(frozen=True)
class GroundTruth:
    """Per-cell truth aligned with a DualScan, plus the true pane planes.

    class_/pos_/pane_ grids follow (rings, cols); positions are noise-free
    sensor-frame coordinates of the real surface (for reflections: the real
    object, not the phantom).
    """

    class_strongest: np.ndarray
    class_last: np.ndarray
    pos_strongest: np.ndarray
    pos_last: np.ndarray
    pane_strongest: np.ndarray
    pane_last: np.ndarray
    planes: tuple[Plane, ...]        # true pane planes in the sensor frame
    scan_id: int = 0

    def channel(self, which: str):
        if which == "strongest":
            return self.class_strongest, self.pos_strongest, self.pane_strongest
        return self.class_last, self.pos_last, self.pane_last


# ---------------------------------------------------------------------------
# vectorized ray casting
# ---------------------------------------------------------------------------

def _ray_rect(origins, dirs, center, u, v, normal, half_u, half_v, hole=None):
    """Ray/rectangle intersection over ray bundles.

    Returns (t, cos_inc); t is +inf on misses.  `hole` = (hu, hv) cuts an
    inner rectangle out (used for pane frames).
    """
    denom = dirs @ normal
    with np.errstate(divide="ignore", invalid="ignore"):
        t = ((center - origins) @ normal) / denom
    p = origins + t[:, None] * dirs - center
    lu = p @ u
    lv = p @ v
    inside = (np.abs(lu) <= half_u) & (np.abs(lv) <= half_v)
    if hole is not None:
        inside &= ~((np.abs(lu) <= hole[0]) & (np.abs(lv) <= hole[1]))
    ok = (np.abs(denom) > 1e-12) & (t > _T_MIN) & inside
    return np.where(ok, t, np.inf), np.abs(denom)


def _diffuse_hits(scene: Scene, origins, dirs):
    """Nearest diffuse hit (plain surfaces and pane frames) per ray.

    Returns (t, cos_inc, albedo, t_second) with +inf t on misses; t_second is
    the next diffuse hit behind the first (for edge-split simulation).
    """
    n = dirs.shape[0]
    ts, coss, albs = [], [], []
    for s in scene.surfaces:
        t, c = _ray_rect(origins, dirs, s.center, s.u, s.v, s.normal, s.half_u, s.half_v)
        ts.append(t)
        coss.append(c)
        albs.append(s.albedo)
    for p in scene.panes:
        t, c = _ray_rect(
            origins, dirs, p.center, p.u, p.v, p.normal,
            p.half_u + p.frame_width, p.half_v + p.frame_width,
            hole=(p.half_u, p.half_v),
        )
        ts.append(t)
        coss.append(c)
        albs.append(p.frame_albedo)
    if not ts:
        inf = np.full(n, np.inf)
        return inf, np.zeros(n), np.zeros(n), inf

    tmat = np.stack(ts, axis=1)
    cmat = np.stack(coss, axis=1)
    amat = np.asarray(albs)

    order = np.argsort(tmat, axis=1)
    first = order[:, 0]
    rows = np.arange(n)
    t1 = tmat[rows, first]
    t2 = tmat[rows, order[:, 1]] if tmat.shape[1] > 1 else np.full(n, np.inf)
    return t1, cmat[rows, first], amat[first], t2


def _glass_hits(scene: Scene, origins, dirs):
    """Nearest glass-region pane hit per ray: (t, cos_inc, pane_index)."""
    n = dirs.shape[0]
    if not scene.panes:
        return np.full(n, np.inf), np.zeros(n), np.full(n, -1, dtype=np.int64)
    ts, coss = [], []
    for p in scene.panes:
        t, c = _ray_rect(origins, dirs, p.center, p.u, p.v, p.normal, p.half_u, p.half_v)
        ts.append(t)
        coss.append(c)
    tmat = np.stack(ts, axis=1)
    cmat = np.stack(coss, axis=1)
    idx = np.argmin(tmat, axis=1)
    rows = np.arange(n)
    t = tmat[rows, idx]
    return t, cmat[rows, idx], np.where(np.isfinite(t), idx, -1)


def _pane_lobe(scene: Scene, pane_idx, cos_inc):
    """g(theta) per ray given its pane index; cos**k gated at the cutoff."""
    k = np.full(pane_idx.shape, scene.optics.cos_power)
    for i, p in enumerate(scene.panes):
        if p.cos_power is not None:
            k[pane_idx == i] = p.cos_power
    cos_cut = math.cos(scene.optics.cutoff)
    g = np.where(cos_inc >= cos_cut, np.power(np.clip(cos_inc, 0.0, 1.0), k), 0.0)
    return g


def trace_bundle(scene: Scene, origins: np.ndarray, dirs: np.ndarray):
    """Trace N rays; return per-ray echo slot arrays (N, 3).

    Slots come back sorted by range; unused slots have range +inf and
    intensity 0.  Truth positions are world-frame real-surface points; the
    caller converts frames.
    """
    origins = np.asarray(origins, dtype=float).reshape(-1, 3)
    dirs = np.asarray(dirs, dtype=float).reshape(-1, 3)
    n = dirs.shape[0]
    opt = scene.optics

    t_dif, cos_dif, alb_dif, t_dif2 = _diffuse_hits(scene, origins, dirs)
    t_pane, cos_pane, pane_idx = _glass_hits(scene, origins, dirs)
    pane_first = t_pane < t_dif

    rng_e = np.full((n, 3), np.inf)
    int_e = np.zeros((n, 3))
    cls_e = np.zeros((n, 3), dtype=np.uint8)
    pid_e = np.full((n, 3), -1, dtype=np.int64)
    pos_e = np.full((n, 3, 3), np.nan)

    # direct diffuse echo (no pane in front): slot 1 reused for it
    direct = ~pane_first & np.isfinite(t_dif)
    rng_e[direct, 1] = t_dif[direct]
    int_e[direct, 1] = opt.i0 * alb_dif[direct] * cos_dif[direct] * opt.falloff(t_dif[direct])
    cls_e[direct, 1] = labels.INSIDE
    pos_e[direct, 1] = origins[direct] + t_dif[direct, None] * dirs[direct]

    if scene.panes and pane_first.any():
        m = pane_first
        deltas = np.array([p.delta for p in scene.panes])
        taus = np.array([p.tau for p in scene.panes])
        rhos = np.array([p.rho for p in scene.panes])

        g = _pane_lobe(scene, pane_idx, cos_pane)
        rng_e[m, 0] = t_pane[m]
        int_e[m, 0] = opt.i0 * deltas[pane_idx[m]] * g[m] * opt.falloff(t_pane[m])
        cls_e[m, 0] = labels.GLASS
        pid_e[m, 0] = pane_idx[m]
        pos_e[m, 0] = origins[m] + t_pane[m, None] * dirs[m]

        # transmission: first diffuse surface beyond the pane
        trans = m & np.isfinite(t_dif)
        rng_e[trans, 1] = t_dif[trans]
        int_e[trans, 1] = (
            opt.i0 * taus[pane_idx[trans]] ** 2
            * alb_dif[trans] * cos_dif[trans] * opt.falloff(t_dif[trans])
        )
        cls_e[trans, 1] = labels.OUTSIDE
        pid_e[trans, 1] = pane_idx[trans]
        pos_e[trans, 1] = origins[trans] + t_dif[trans, None] * dirs[trans]

        # specular: mirror the ray at the pane and look for a real object
        normals = np.array([p.normal for p in scene.panes])
        nrm = normals[np.clip(pane_idx, 0, None)]
        q = origins + t_pane[:, None] * dirs
        d_ref = dirs - 2.0 * np.sum(dirs * nrm, axis=1, keepdims=True) * nrm
        t_s, cos_s, alb_s, _ = _diffuse_hits(scene, q[m], d_ref[m])
        spec_ok = np.isfinite(t_s)
        mi = np.nonzero(m)[0][spec_ok]
        total = t_pane[mi] + t_s[spec_ok]
        rng_e[mi, 2] = total
        int_e[mi, 2] = (
            opt.i0 * rhos[pane_idx[mi]] ** 2
            * alb_s[spec_ok] * cos_s[spec_ok] * opt.falloff(total)
        )
        cls_e[mi, 2] = labels.REFLECTION
        pid_e[mi, 2] = pane_idx[mi]
        pos_e[mi, 2] = q[mi] + t_s[spec_ok, None] * d_ref[mi]

    # gate by detection threshold and max range
    int_e = np.minimum(int_e, opt.i0)
    drop = (int_e < opt.detect_threshold) | (rng_e > scene.sensor.max_range)
    rng_e[drop] = np.inf
    int_e[drop] = 0.0
    cls_e[drop] = labels.NONE
    pid_e[drop] = -1

    _sort_and_merge(rng_e, int_e, cls_e, pid_e, pos_e, opt.min_echo_sep)
    return rng_e, int_e, cls_e, pid_e, pos_e, (t_dif2, cos_dif, alb_dif)


def _sort_and_merge(rng_e, int_e, cls_e, pid_e, pos_e, min_sep):
    """Sort echo slots by range and collapse echoes closer than min_sep,
    keeping the stronger of each colliding pair.  Operates in place."""
    rows = np.arange(rng_e.shape[0])[:, None]

    def sort_slots():
        order = np.argsort(rng_e, axis=1)
        for arr in (rng_e, int_e, cls_e, pid_e, pos_e):
            arr[:] = arr[rows, order]

    def kill(mask, j):
        rng_e[mask, j] = np.inf
        int_e[mask, j] = 0.0
        cls_e[mask, j] = labels.NONE
        pid_e[mask, j] = -1

    sort_slots()
    # with at most 3 echoes two merge passes settle all collisions
    for _ in range(2):
        changed = False
        for j in range(1, rng_e.shape[1]):
            with np.errstate(invalid="ignore"):
                close = np.isfinite(rng_e[:, j]) & (rng_e[:, j] - rng_e[:, j - 1] < min_sep)
            if not close.any():
                continue
            changed = True
            j_weaker = int_e[:, j] <= int_e[:, j - 1]
            kill(close & j_weaker, j)
            kill(close & ~j_weaker, j - 1)
        if not changed:
            break
        sort_slots()


def trace_beam(scene: Scene, origin, direction) -> list[Echo]:
    """Trace a single beam; returns its echoes sorted by range.

    Thin wrapper over the vectorized core so both paths share one model.
    """
    d = _unit(direction)
    rng_e, int_e, cls_e, pid_e, pos_e, _ = trace_bundle(
        scene, np.asarray(origin, dtype=float)[None, :], d[None, :]
    )
    echoes = []
    for j in range(rng_e.shape[1]):
        if np.isfinite(rng_e[0, j]):
            echoes.append(
                Echo(
                    range=float(rng_e[0, j]),
                    intensity=float(int_e[0, j]),
                    truth_class=int(cls_e[0, j]),
                    truth_position=pos_e[0, j].copy(),
                    pane_id=int(pid_e[0, j]),
                )
            )
    return sorted(echoes, key=lambda e: e.range)


def select_returns(echoes: Sequence[Echo]) -> tuple[Echo | None, Echo | None]:
    """Dual-return channel selection for one beam.

    last = farthest echo; strongest = highest intensity, except when that is
    the last echo, in which case the second-strongest substitutes.  A single
    echo reports on both channels; no echoes, no returns.
    """
    if not echoes:
        return None, None
    last = max(echoes, key=lambda e: e.range)
    if len(echoes) == 1:
        return last, last
    by_intensity = sorted(echoes, key=lambda e: e.intensity, reverse=True)
    strongest = by_intensity[0]
    if strongest is last:
        strongest = by_intensity[1]
    return strongest, last


def _select_bulk(rng_e, int_e):
    """Vectorized select_returns over echo slot arrays.

    Returns (strongest_slot, last_slot) per ray; -1 where no echo.
    """
    n = rng_e.shape[0]
    has = np.isfinite(rng_e)
    count = has.sum(axis=1)
    any_echo = count > 0

    neg_rng = np.where(has, rng_e, -np.inf)
    last_slot = np.argmax(neg_rng, axis=1)
    neg_int = np.where(has, int_e, -np.inf)
    strongest_slot = np.argmax(neg_int, axis=1)

    # strongest==last with more than one echo: take the second strongest
    clash = (strongest_slot == last_slot) & (count > 1)
    if clash.any():
        neg_int2 = neg_int.copy()
        neg_int2[np.arange(n), strongest_slot] = -np.inf
        strongest_slot = np.where(clash, np.argmax(neg_int2, axis=1), strongest_slot)

    strongest_slot = np.where(any_echo, strongest_slot, -1)
    last_slot = np.where(any_echo, last_slot, -1)
    return strongest_slot, last_slot


def _yaw_matrix(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def simulate_scan(
    scene: Scene,
    sensor: SensorRig | None = None,
    sigma_r: float | None = None,
    seed: int = 0,
    scan_id: int = 0,
) -> tuple[DualScan, GroundTruth]:
    """Simulate one full revolution and return the scan plus its ground truth.

    Beams fire at column centers; ranges get Gaussian noise per echo (both
    channels of a shared echo see the same draw).  Deterministic per
    (scene, sensor, seed): rings use independent seeded substreams so the
    result does not depend on evaluation order.
    """
    sensor = sensor or scene.sensor
    sigma = scene.noise.sigma_r if sigma_r is None else sigma_r
    geom = sensor.geometry
    rings, cols = geom.ring_count, geom.column_count

    az = geom.azimuth_of(np.arange(cols))
    el = sensor.elevations
    ce, se = np.cos(el), np.sin(el)
    ca, sa = np.cos(az), np.sin(az)
    # sensor-frame beam directions, (rings, cols, 3)
    dirs_s = np.empty((rings, cols, 3))
    dirs_s[:, :, 0] = ce[:, None] * ca[None, :]
    dirs_s[:, :, 1] = ce[:, None] * sa[None, :]
    dirs_s[:, :, 2] = se[:, None]

    rot = _yaw_matrix(sensor.yaw)
    flat_dirs = dirs_s.reshape(-1, 3) @ rot.T
    origins = np.broadcast_to(sensor.position, flat_dirs.shape)

    rng_e, int_e, cls_e, pid_e, pos_e, extra = trace_bundle(scene, origins, flat_dirs)

    # per-ring seeded noise substreams
    noise = np.zeros((rings * cols, 3))
    if sigma > 0 or scene.noise.p_edge > 0:
        per_ring = [
            np.random.default_rng(np.random.SeedSequence(entropy=(seed, scan_id, r)))
            for r in range(rings)
        ]
        if sigma > 0:
            noise = np.concatenate(
                [g.normal(0.0, sigma, size=(cols, 3)) for g in per_ring], axis=0
            )
        if scene.noise.p_edge > 0:
            t_dif2, cos_dif, alb_dif = extra
            edge_draw = np.concatenate([g.random(cols) for g in per_ring])
            _apply_edge_split(scene, rng_e, int_e, cls_e, pos_e, origins, flat_dirs,
                              t_dif2, cos_dif, alb_dif, edge_draw)

    s_slot, l_slot = _select_bulk(rng_e, int_e)
    rows = np.arange(rings * cols)

    def channel_grids(slot):
        valid = slot >= 0
        sl = np.clip(slot, 0, None)
        r_clean = rng_e[rows, sl]
        r_noisy = r_clean + noise[rows, sl]
        xyz = dirs_s.reshape(-1, 3) * np.where(valid, r_noisy, np.nan)[:, None]
        inten = np.where(valid, int_e[rows, sl], 0.0)
        cls = np.where(valid, cls_e[rows, sl], labels.NONE).astype(np.uint8)
        pid = np.where(valid, pid_e[rows, sl], -1)
        # truth position in the sensor frame
        pos_w = pos_e[rows, sl]
        pos_s = (pos_w - sensor.position) @ rot
        pos_s[~valid] = np.nan
        return (
            OrganizedCloud(
                xyz.reshape(rings, cols, 3),
                inten.reshape(rings, cols),
                valid.reshape(rings, cols),
                geom.step_azimuth,
            ),
            cls.reshape(rings, cols),
            pos_s.reshape(rings, cols, 3),
            pid.reshape(rings, cols),
        )

    cloud_s, cls_s, pos_s, pid_s = channel_grids(s_slot)
    cloud_l, cls_l, pos_l, pid_l = channel_grids(l_slot)

    scan = DualScan(strongest=cloud_s, last=cloud_l, scan_id=scan_id)
    planes = tuple(_plane_to_sensor(p.plane_world(), rot, sensor.position) for p in scene.panes)
    truth = GroundTruth(
        class_strongest=cls_s, class_last=cls_l,
        pos_strongest=pos_s, pos_last=pos_l,
        pane_strongest=pid_s, pane_last=pid_l,
        planes=planes, scan_id=scan_id,
    )
    return scan, truth


def _apply_edge_split(scene, rng_e, int_e, cls_e, pos_e, origins, dirs,
                      t_dif2, cos_dif, alb_dif, edge_draw):
    """Duplicate single diffuse echoes onto the next surface behind them,
    emulating beams that straddle an obstacle edge.  Both echoes are real
    surfaces, so both keep class INSIDE."""
    opt = scene.optics
    single = (np.isfinite(rng_e).sum(axis=1) == 1) & (cls_e[:, 0] == labels.INSIDE)
    cand = single & np.isfinite(t_dif2) & (edge_draw < scene.noise.p_edge)
    cand &= t_dif2 <= scene.sensor.max_range
    cand &= t_dif2 - rng_e[:, 0] >= opt.min_echo_sep
    if not cand.any():
        return
    idx = np.nonzero(cand)[0]
    inten2 = opt.i0 * alb_dif[idx] * cos_dif[idx] * opt.falloff(t_dif2[idx])
    keep = inten2 >= opt.detect_threshold
    idx = idx[keep]
    rng_e[idx, 1] = t_dif2[idx]
    int_e[idx, 1] = inten2[keep]
    cls_e[idx, 1] = labels.INSIDE
    pos_e[idx, 1] = origins[idx] + t_dif2[idx, None] * dirs[idx]


def _plane_to_sensor(plane: Plane, rot: np.ndarray, position: np.ndarray) -> Plane:
    """Re-express a world-frame plane in the sensor frame (p_w = R p_s + t)."""
    n_w = plane.normal
    n_s = rot.T @ n_w
    d_s = plane.d + float(n_w @ position)
    return Plane(n_s[0], n_s[1], n_s[2], d_s)


def simulate_sequence(
    scene: Scene,
    n_scans: int,
    seed: int = 0,
    sigma_r: float | None = None,
) -> list[tuple[DualScan, GroundTruth, "np.ndarray"]]:
    """Simulate n_scans revolutions with optional per-scan yaw jitter.

    Returns (scan, truth, pose_row) triples where pose_row is the TUM-style
    (tx ty tz qx qy qz qw) of the sensor for that scan.
    """
    out = []
    base = scene.sensor
    for k in range(n_scans):
        yaw = base.yaw
        if base.yaw_jitter > 0:
            g = np.random.default_rng(np.random.SeedSequence(entropy=(seed, k, 0x59A3)))
            yaw = base.yaw + float(g.normal(0.0, base.yaw_jitter))
        sensor = replace(base, yaw=yaw)
        scan, truth = simulate_scan(scene, sensor, sigma_r=sigma_r, seed=seed, scan_id=k)
        half = yaw / 2.0
        pose_row = np.array([
            *sensor.position, 0.0, 0.0, math.sin(half), math.cos(half),
        ])
        out.append((scan, truth, pose_row))
    return out
