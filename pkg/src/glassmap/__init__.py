"""Glass-plane detection and reflection mirroring for dual-return lidar scans."""

from . import labels
from .cloud import (
    DualScan,
    GridGeometry,
    OrganizedCloud,
    RawReturn,
    ReturnChannel,
    organize_scan,
    split_dual_returns,
)
from .detect import (
    DetectParams,
    GlassEvidence,
    PeakCandidate,
    detect_dual_divergence,
    find_intensity_peaks,
    verify_peak_vertical,
)
from .geometry import (
    BoundaryParams,
    GlassPane,
    Plane,
    RansacParams,
    find_boundary,
    fit_planes_ransac,
    mirror_points,
    reflect_point,
)
from .sim import (
    Echo,
    GroundTruth,
    NoiseModel,
    Optics,
    Pane,
    RectSurface,
    Scene,
    SensorRig,
    select_returns,
    simulate_scan,
    simulate_sequence,
    trace_beam,
)

__version__ = "0.1.0"
