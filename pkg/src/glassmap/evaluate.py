"""Evaluation against simulator ground truth: per-class position-conditioned
classification metrics and plane-fit quality, in the layout of the usual
point-classification and plane-fitting result tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import labels
from .classify import LabeledCloud
from .errors import MalformedInputError
from .geometry import Plane
from .sim import GroundTruth

_CLASS_ORDER = (labels.REFLECTION, labels.GLASS, labels.OUTSIDE, labels.INSIDE)
_CLASS_NAMES = {
    labels.REFLECTION: "Reflection",
    labels.GLASS: "Glass",
    labels.OUTSIDE: "Outside Obstacle",
    labels.INSIDE: "Inside Obstacle",
}


@dataclass
class ClassRow:
    count: int = 0
    frac_correct_010: float = 0.0
    frac_correct_015: float = 0.0
    frac_correct_tol: float = 0.0
    mean_err_correct: float = float("nan")
    stdev_err_correct: float = float("nan")
    mean_err_all: float = float("nan")
    stdev_err_all: float = float("nan")


@dataclass
class ClassMetrics:
    """Per-class fractions at fixed error gates plus error moments.

    Moments are reported both over correctly labeled points and over all
    points of the truth class (the table's population is ambiguous, so both
    variants are kept).
    """

    rows: dict[int, ClassRow]
    tol: float = 0.15

    def row(self, char: str) -> ClassRow:
        return self.rows[labels.CHAR_TO_CODE[char]]


class ClassificationAccumulator:
    """Pools per-point results over many scans before computing fractions."""

    def __init__(self, tol: float = 0.15):
        self.tol = tol
        self._err: dict[int, list[np.ndarray]] = {c: [] for c in _CLASS_ORDER}
        self._match: dict[int, list[np.ndarray]] = {c: [] for c in _CLASS_ORDER}

    def update(self, labeled: LabeledCloud, truth: GroundTruth) -> None:
        if labeled.scan.scan_id != truth.scan_id:
            raise MalformedInputError(
                f"scan id mismatch: labeled {labeled.scan.scan_id}, truth {truth.scan_id}"
            )
        scan = labeled.scan
        for cloud, lab, mir, (tcls, tpos, _) in (
            (scan.strongest, labeled.labels_strongest, labeled.mirrored_strongest,
             truth.channel("strongest")),
            (scan.last, labeled.labels_last, labeled.mirrored_last,
             truth.channel("last")),
        ):
            reported = np.where(
                (lab == labels.REFLECTION)[:, :, None], mir, cloud.xyz
            )
            err = np.linalg.norm(reported - tpos, axis=2)
            for cls in _CLASS_ORDER:
                sel = cloud.valid & (tcls == cls)
                if not sel.any():
                    continue
                self._err[cls].append(err[sel])
                self._match[cls].append(lab[sel] == cls)

    def result(self) -> ClassMetrics:
        rows = {}
        for cls in _CLASS_ORDER:
            if not self._err[cls]:
                rows[cls] = ClassRow()
                continue
            err = np.concatenate(self._err[cls])
            match = np.concatenate(self._match[cls])
            n = err.size
            correct_err = err[match]
            row = ClassRow(
                count=n,
                frac_correct_010=float((match & (err < 0.10)).sum() / n),
                frac_correct_015=float((match & (err < 0.15)).sum() / n),
                frac_correct_tol=float((match & (err < self.tol)).sum() / n),
                mean_err_all=float(np.mean(err)),
                stdev_err_all=float(np.std(err)),
            )
            if correct_err.size:
                row.mean_err_correct = float(np.mean(correct_err))
                row.stdev_err_correct = float(np.std(correct_err))
            rows[cls] = row
        return ClassMetrics(rows=rows, tol=self.tol)


def evaluate_classification(
    labeled: LabeledCloud, truth: GroundTruth, tol: float = 0.15
) -> ClassMetrics:
    """Single-scan convenience wrapper around the accumulator."""
    acc = ClassificationAccumulator(tol=tol)
    acc.update(labeled, truth)
    return acc.result()


@dataclass
class PlaneMetrics:
    mean_rms: float
    frac_rms_below: float        # fraction of evaluated scans with RMS < rms_gate
    mean_angle_deg: float
    detection_rate: float        # scans with >= 1 matched plane / scans seen
    scans: int = 0
    rms_gate: float = 0.08


class PlaneEvalAccumulator:
    """Per scan: match each true pane to the detected plane that fits its
    truth glass points best, pool the point-to-plane RMS and normal angles."""

    def __init__(self, rms_gate: float = 0.08):
        self.rms_gate = rms_gate
        self.scan_rms: list[float] = []
        self.scan_angles: list[float] = []
        self.misses = 0
        self.scans = 0

    @staticmethod
    def _truth_glass_points(truth: GroundTruth, scan) -> dict[int, np.ndarray]:
        """Noise-free glass surface points per pane id, pooled over channels."""
        out: dict[int, list[np.ndarray]] = {}
        for cloud, (tcls, tpos, tpid) in (
            (scan.strongest, truth.channel("strongest")),
            (scan.last, truth.channel("last")),
        ):
            sel = cloud.valid & (tcls == labels.GLASS)
            pids = tpid[sel]
            pts = tpos[sel]
            for pid in np.unique(pids):
                out.setdefault(int(pid), []).append(pts[pids == pid])
        return {pid: np.unique(np.vstack(chunks), axis=0) for pid, chunks in out.items()}

    def update(self, detected: list[Plane], truth: GroundTruth, scan) -> None:
        self.scans += 1
        by_pane = self._truth_glass_points(truth, scan)
        if not by_pane:
            return
        if not detected:
            self.misses += 1
            return
        rms_num = 0.0
        rms_den = 0
        angles = []
        for pid, pts in by_pane.items():
            best = min(detected, key=lambda pl: float(np.mean(pl.distance(pts) ** 2)))
            rms_num += float(np.sum(best.distance(pts) ** 2))
            rms_den += pts.shape[0]
            if 0 <= pid < len(truth.planes):
                angles.append(math.degrees(best.angle_to(truth.planes[pid])))
        self.scan_rms.append(math.sqrt(rms_num / rms_den))
        if angles:
            self.scan_angles.append(float(np.mean(angles)))

    def result(self) -> PlaneMetrics:
        evaluated = len(self.scan_rms)
        return PlaneMetrics(
            mean_rms=float(np.mean(self.scan_rms)) if evaluated else float("nan"),
            frac_rms_below=(
                float(np.mean(np.asarray(self.scan_rms) < self.rms_gate))
                if evaluated else 0.0
            ),
            mean_angle_deg=(
                float(np.mean(self.scan_angles)) if self.scan_angles else float("nan")
            ),
            detection_rate=(
                (self.scans - self.misses) / self.scans if self.scans else 0.0
            ),
            scans=self.scans,
            rms_gate=self.rms_gate,
        )


def evaluate_planes(detected: list[Plane], truth: GroundTruth, scan) -> PlaneMetrics:
    acc = PlaneEvalAccumulator()
    acc.update(detected, truth, scan)
    return acc.result()


# ---------------------------------------------------------------------------
# report rendering
# ---------------------------------------------------------------------------

def format_classification_table(metrics: ClassMetrics) -> str:
    lines = [
        "PointCloud Classification",
        f"{'Classified points':<18} {'% <0.1m':>8} {'% <0.15m':>9} {'Mean':>9} {'Stdev':>9}",
    ]
    for cls in _CLASS_ORDER:
        row = metrics.rows.get(cls) or ClassRow()
        lines.append(
            f"{_CLASS_NAMES[cls]:<18} {100 * row.frac_correct_010:>8.1f} "
            f"{100 * row.frac_correct_015:>9.1f} {row.mean_err_correct:>9.4f} "
            f"{row.stdev_err_correct:>9.4f}"
        )
    return "\n".join(lines)


def format_plane_table(per_scene: dict[str, PlaneMetrics]) -> str:
    lines = [
        "Plane Fitting",
        f"{'Average Error':<24} {'RMS':>8} {'% RMS<0.08':>11} {'Angular deg':>12}",
    ]
    for name, m in per_scene.items():
        lines.append(
            f"{name:<24} {m.mean_rms:>8.4f} {100 * m.frac_rms_below:>11.1f} "
            f"{m.mean_angle_deg:>12.2f}"
        )
    return "\n".join(lines)


def machine_block(metrics: ClassMetrics | None, planes: dict[str, PlaneMetrics]) -> str:
    """key=value lines for scripted consumption."""
    kv = []
    if metrics is not None:
        for cls in _CLASS_ORDER:
            row = metrics.rows.get(cls) or ClassRow()
            tag = labels.CODE_TO_CHAR[cls]
            kv.append(f"class.{tag}.count={row.count}")
            kv.append(f"class.{tag}.frac_correct_0.10={row.frac_correct_010:.6f}")
            kv.append(f"class.{tag}.frac_correct_0.15={row.frac_correct_015:.6f}")
            kv.append(f"class.{tag}.mean_err_correct={row.mean_err_correct:.6f}")
            kv.append(f"class.{tag}.mean_err_all={row.mean_err_all:.6f}")
    for name, m in planes.items():
        kv.append(f"plane.{name}.mean_rms={m.mean_rms:.6f}")
        kv.append(f"plane.{name}.frac_rms_below={m.frac_rms_below:.6f}")
        kv.append(f"plane.{name}.mean_angle_deg={m.mean_angle_deg:.6f}")
        kv.append(f"plane.{name}.detection_rate={m.detection_rate:.6f}")
    return "\n".join(kv)
