"""End-to-end per-scan processing and multi-scan orchestration.

Per scan: dual-return divergence + intensity peaks -> RANSAC planes per
detector -> pane boundaries -> classification (falling back to registry
panes when nothing is detected) -> mirroring -> registry update.  Scans can
be processed in a thread pool; results are re-serialized in scan order so
registry updates and outputs stay deterministic.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .classify import LabeledCloud, classify_points
from .cloud import DualScan
from .config import PipelineConfig
from .detect import GlassEvidence, detect_dual_divergence, detect_peak_points
from .geometry import (
    GlassPane,
    PaneSource,
    Plane,
    find_boundary,
    fit_planes_ransac,
)
from .registry import PaneRegistry, Pose, lookup_panes, register_pane
from .sim import SensorRig

log = logging.getLogger("glassmap")


@dataclass
class ScanResult:
    scan: DualScan
    labeled: LabeledCloud
    planes: list[tuple[Plane, str, int]]   # (plane, source, inlier count)
    panes: list[GlassPane]
    evidence: GlassEvidence
    elapsed_s: float = 0.0


def _scan_rng(config: PipelineConfig, scan_id: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=(config.ransac.seed, scan_id))
    )


def _sensor_for_scan(scan: DualScan) -> SensorRig:
    from .classify import _complete_elevations

    geom = scan.geometry
    return SensorRig(
        ring_count=geom.ring_count,
        step_azimuth=geom.step_azimuth,
        elevations=_complete_elevations(scan),
    )


def process_scan(
    scan: DualScan,
    config: PipelineConfig = PipelineConfig(),
    registry: PaneRegistry | None = None,
    pose: Pose | None = None,
) -> ScanResult:
    """Run detection, fitting, boundary finding and classification on one scan.

    Does not touch the registry; the caller registers the panes that survived
    classification (single-writer contract).
    """
    t0 = time.perf_counter()
    evidence = detect_dual_divergence(scan, config.detect)
    peak_pts = detect_peak_points(scan.strongest, config.detect)

    rng = _scan_rng(config, scan.scan_id)
    planes: list[tuple[Plane, str, int]] = []
    panes: list[GlassPane] = []
    for pts, source in (
        (evidence.glass_candidates, PaneSource.DUAL_RETURN),
        (peak_pts, PaneSource.INTENSITY_PEAK),
    ):
        for plane, inliers in fit_planes_ransac(pts, config.ransac, rng=rng):
            planes.append((plane, source, int(inliers.size)))
            pane = find_boundary(
                plane, scan, evidence, config.boundary,
                inlier_dist=config.ransac.inlier_dist, source=source,
            )
            if pane is not None:
                panes.append(pane)

    if not panes and registry is not None and pose is not None and len(registry):
        panes = lookup_panes(registry, pose, _sensor_for_scan(scan))

    labeled = classify_points(scan, panes, config.classify)
    elapsed = time.perf_counter() - t0
    log.info("scan %d: %.1f ms, %d planes, %d panes",
             scan.scan_id, elapsed * 1e3, len(planes), len(labeled.panes))
    return ScanResult(
        scan=scan, labeled=labeled, planes=planes, panes=panes,
        evidence=evidence, elapsed_s=elapsed,
    )


def run_scans(
    scans: list[DualScan],
    config: PipelineConfig = PipelineConfig(),
    poses: dict[int, Pose] | None = None,
    threads: int = 1,
) -> tuple[list[ScanResult], PaneRegistry]:
    """Process scans (optionally in parallel) and build the pane registry.

    Registry updates happen in scan order after each result is available, so
    the outcome is identical for any thread count.
    """
    registry = PaneRegistry(params=config.registry)
    results: list[ScanResult] = []

    def pose_of(scan: DualScan) -> Pose | None:
        if poses is None:
            return None
        return poses.get(scan.scan_id)

    if threads <= 1:
        for scan in scans:
            res = process_scan(scan, config, registry, pose_of(scan))
            _commit(res, registry, pose_of(scan))
            results.append(res)
        return results, registry

    # parallel: detection/classification in the pool, registry serially after.
    # Registry fallback inside process_scan sees the registry built so far,
    # which for parallel batches may lag; scans with detections are unaffected.
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [
            pool.submit(process_scan, scan, config, registry, pose_of(scan))
            for scan in scans
        ]
        for fut, scan in zip(futures, scans):
            res = fut.result()
            _commit(res, registry, pose_of(scan))
            results.append(res)
    return results, registry


def _commit(res: ScanResult, registry: PaneRegistry, pose: Pose | None) -> None:
    if pose is None:
        return
    for pane in res.labeled.panes:
        if pane.source == "registry":
            continue  # looked-up panes are already in the registry
        register_pane(registry, pane, pose, scan_id=res.scan.scan_id)
