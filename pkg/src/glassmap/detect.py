"""Glass detectors: intensity-peak search on the horizontal ring and
strongest/last divergence analysis.

The peak detector walks the ring closest to zero elevation looking for
intensity runs that climb from below a low threshold past a high threshold
and fall back down, with no range gap inside the run; a candidate is kept
only if the vertical intensity profile through its apex column peaks the
same way.  The dual-return detector flags every beam whose strongest and
last ranges disagree: the nearer strongest-channel point is a glass
candidate, the farther one is kept for later classification.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cloud import DualScan, OrganizedCloud


@dataclass(frozen=True)
class DetectParams:
    eps_range: float = 0.01      # m, strongest/last ranges closer than this are "the same"
    gap_threshold: float = 0.3   # m, adjacent-point range jump that breaks a peak run
    intensity_low: float = 40.0
    intensity_max: float = 180.0
    min_run_len: int = 5


@dataclass(frozen=True)
class PeakCandidate:
    """A rise-then-fall intensity run on the horizontal ring."""

    points: np.ndarray        # (n, 3) run points in scan column order
    intensities: np.ndarray   # (n,)
    columns: np.ndarray       # (n,) grid columns of the run
    apex_index: int           # column of the maximum intensity
    ring: int


@dataclass(frozen=True)
class GlassEvidence:
    """Output of the dual-return divergence detector for one scan."""

    glass_candidates: np.ndarray   # (n, 3) nearer points of differing pairs (strongest cloud)
    candidate_cells: np.ndarray    # (n, 2) (ring, col) per candidate
    remain_points: np.ndarray      # (n, 3) the farther members
    degree_has_glass: np.ndarray   # (rings, cols) bool mask of candidate cells
    normal_points: np.ndarray      # (m, 3) beams with agreeing (or single) returns

    def __post_init__(self):
        for name in ("glass_candidates", "candidate_cells", "remain_points",
                     "degree_has_glass", "normal_points"):
            a = getattr(self, name)
            a.setflags(write=False)


def horizontal_ring(cloud: OrganizedCloud) -> int:
    """Ring whose mean |elevation| over valid cells is smallest."""
    el = cloud.ring_elevations()
    score = np.abs(el)
    if np.all(np.isnan(score)):
        return 0
    return int(np.nanargmin(score))


def _segments(valid: np.ndarray, ranges: np.ndarray, gap_threshold: float) -> list[np.ndarray]:
    """Split one ring into circular runs of valid cells without range gaps.

    Returns lists of column indices.  Segments that meet across the azimuth
    seam are merged so a pane straddling column 0 is still one run.
    """
    n = valid.size
    cols = np.nonzero(valid)[0]
    if cols.size == 0:
        return []
    # break between c and its valid successor when not adjacent or range jumps
    segments: list[list[int]] = [[int(cols[0])]]
    for c in cols[1:]:
        prev = segments[-1][-1]
        if c == prev + 1 and abs(ranges[c] - ranges[prev]) < gap_threshold:
            segments[-1].append(int(c))
        else:
            segments.append([int(c)])
    # circular merge: last segment wraps onto the first
    if len(segments) > 1:
        first, last = segments[0], segments[-1]
        if first[0] == 0 and last[-1] == n - 1 and abs(ranges[0] - ranges[n - 1]) < gap_threshold:
            segments[0] = last + first
            segments.pop()
    return [np.asarray(s) for s in segments]


def _peak_runs(intensity: np.ndarray, params: DetectParams) -> list[tuple[int, int, int]]:
    """Maximal strictly-rising-then-falling runs in a 1D intensity sequence.

    Returns (start, apex, end) index triples (inclusive) that satisfy the
    thresholds: the run starts below intensity_low, tops at or above
    intensity_max, falls back below intensity_low, and is long enough.
    """
    n = intensity.size
    runs = []
    i = 0
    while i < n - 1:
        if intensity[i + 1] <= intensity[i]:
            i += 1
            continue
        start = i
        while i < n - 1 and intensity[i + 1] > intensity[i]:
            i += 1
        apex = i
        while i < n - 1 and intensity[i + 1] < intensity[i]:
            i += 1
        end = i
        if (
            end > apex
            and intensity[start] < params.intensity_low
            and intensity[end] < params.intensity_low
            and intensity[apex] >= params.intensity_max
            and end - start + 1 >= params.min_run_len
        ):
            runs.append((start, apex, end))
        # a falling tail can be the rising head of nothing; resume at end
    return runs


def find_intensity_peaks(
    cloud: OrganizedCloud,
    params: DetectParams = DetectParams(),
    ring: int | None = None,
) -> list[PeakCandidate]:
    """Find candidate intensity peaks on the horizontal ring of the strongest cloud."""
    if ring is None:
        ring = horizontal_ring(cloud)
    valid = cloud.valid[ring]
    ranges = np.nan_to_num(cloud.ranges()[ring], nan=np.inf)
    candidates = []
    for seg in _segments(valid, ranges, params.gap_threshold):
        inten = cloud.intensity[ring][seg]
        for start, apex, end in _peak_runs(inten, params):
            cols = seg[start : end + 1] % cloud.column_count
            candidates.append(
                PeakCandidate(
                    points=cloud.xyz[ring][cols],
                    intensities=cloud.intensity[ring][cols],
                    columns=cols,
                    apex_index=int(seg[start + int(np.argmax(inten[start : end + 1]))] % cloud.column_count),
                    ring=ring,
                )
            )
    return candidates


def verify_peak_vertical(
    cloud: OrganizedCloud,
    candidate: PeakCandidate,
    params: DetectParams = DetectParams(),
    reach: int = 2,
) -> np.ndarray | None:
    """Check the vertical intensity profile through the apex column.

    Collects up to `reach` valid cells above and below the apex ring at the
    apex column and accepts the candidate iff the combined sequence strictly
    rises to the apex and strictly falls after it.  A side that exists in the
    grid must contribute at least one cell; at the grid edge the missing side
    is waived.  Returns the run points plus the vertical neighbors on
    acceptance, None on rejection.
    """
    r, c = candidate.ring, candidate.apex_index
    below = []
    for rr in range(r - 1, max(-1, r - reach - 1), -1):
        if rr < 0 or not cloud.valid[rr, c]:
            break
        below.append(rr)
    above = []
    for rr in range(r + 1, min(cloud.ring_count, r + reach + 1)):
        if not cloud.valid[rr, c]:
            break
        above.append(rr)

    if r > 0 and not below:
        return None
    if r < cloud.ring_count - 1 and not above:
        return None
    if not below and not above:
        return None

    inten = cloud.intensity
    apex_val = inten[r, c]
    seq_down = [apex_val] + [inten[rr, c] for rr in below]   # walking away downward
    seq_up = [apex_val] + [inten[rr, c] for rr in above]
    for seq in (seq_down, seq_up):
        for a, b in zip(seq, seq[1:]):
            if b >= a:
                return None

    vertical = cloud.xyz[below + above, c] if (below or above) else np.empty((0, 3))
    return np.vstack([candidate.points, vertical])


def detect_peak_points(
    cloud: OrganizedCloud,
    params: DetectParams = DetectParams(),
) -> np.ndarray:
    """All vertically verified peak points of one cloud, stacked into (n, 3)."""
    pts = []
    for cand in find_intensity_peaks(cloud, params):
        verified = verify_peak_vertical(cloud, cand, params)
        if verified is not None:
            pts.append(verified)
    if not pts:
        return np.empty((0, 3))
    return np.vstack(pts)


def detect_dual_divergence(
    scan: DualScan,
    params: DetectParams = DetectParams(),
) -> GlassEvidence:
    """Flag beams whose strongest and last returns disagree in range.

    Agreeing beams (and beams valid in only one channel) feed normal_points.
    For a differing beam the strongest-channel point (the nearer one) becomes
    a glass candidate, the last-channel point goes to remain_points, and the
    cell is marked in degree_has_glass.
    """
    s, l = scan.strongest, scan.last
    rs = s.ranges()
    rl = l.ranges()
    both = s.valid & l.valid
    differ = both & (np.abs(rs - rl) > params.eps_range)
    same = both & ~differ

    rings, cols = np.nonzero(differ)
    degree = np.zeros_like(differ)
    degree[rings, cols] = True

    normal = np.vstack([
        s.xyz[same],
        s.xyz[s.valid & ~l.valid],
        l.xyz[l.valid & ~s.valid],
        l.xyz[same],
    ]) if same.any() or (s.valid ^ l.valid).any() else np.empty((0, 3))

    return GlassEvidence(
        glass_candidates=s.xyz[differ],
        candidate_cells=np.column_stack([rings, cols]),
        remain_points=l.xyz[differ],
        degree_has_glass=degree,
        normal_points=normal,
    )
