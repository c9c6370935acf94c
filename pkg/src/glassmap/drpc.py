"""DRPC: a line-oriented ASCII container for dual-return organized scans.

Layout::

    DRPC 1
    rings <N> step_mrad <S> cols <C>
    fields ring col sx sy sz si lx ly lz li [label tlx tly tlz]
    <one record per beam with at least one valid return>
    checksum <crc32 of everything above, hex>

s* / l* are the strongest / last returns; a missing channel is written as
``nan nan nan 0``.  The optional label block carries one class letter
(I/G/R/O/U or ``-``) per beam plus a reference position (truth position for
simulator output, mirrored position for classified reflections), ``-`` when
absent.  Coordinates are meters in the sensor frame with 6 decimals.

Label semantics per beam: the strongest-channel point's label; the last
channel's label is only implied when both channels carry the same echo.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import labels
from .cloud import TWO_PI, DualScan, GridGeometry, OrganizedCloud, columns_for_step
from .errors import DrpcChecksumError, DrpcRecordError, DrpcVersionError

_VERSION = 1


@dataclass(frozen=True)
class DrpcContents:
    scan: DualScan
    label: np.ndarray | None = None      # (rings, cols) uint8 codes, NONE where absent
    ref_position: np.ndarray | None = None  # (rings, cols, 3), NaN where absent


def _project_beam_labels(source, scan: DualScan):
    """Collapse per-channel labels/positions to one per beam, strongest first."""
    from .classify import LabeledCloud
    from .sim import GroundTruth

    s_valid = scan.strongest.valid
    if isinstance(source, GroundTruth):
        lab = np.where(s_valid, source.class_strongest, source.class_last)
        pos = np.where(s_valid[:, :, None], source.pos_strongest, source.pos_last)
    elif isinstance(source, LabeledCloud):
        lab = np.where(s_valid, source.labels_strongest, source.labels_last)
        pos = np.where(
            s_valid[:, :, None], source.mirrored_strongest, source.mirrored_last
        )
    else:
        raise TypeError(f"unsupported label source: {type(source).__name__}")
    return lab.astype(np.uint8), pos


def write_drpc(scan: DualScan, path, label_source=None) -> None:
    """Serialize a scan (plus optional truth or classification labels)."""
    s, l = scan.strongest, scan.last
    geom = scan.geometry
    any_valid = s.valid | l.valid
    rr, cc = np.nonzero(any_valid)

    with_labels = label_source is not None
    if with_labels:
        lab, pos = _project_beam_labels(label_source, scan)

    lines = [
        f"DRPC {_VERSION}",
        f"rings {geom.ring_count} step_mrad {geom.step_azimuth * 1e3:.17g} cols {geom.column_count}",
        "fields ring col sx sy sz si lx ly lz li"
        + (" label tlx tly tlz" if with_labels else ""),
    ]

    def channel_cols(cloud: OrganizedCloud):
        v = cloud.valid[rr, cc]
        xyz = np.where(v[:, None], cloud.xyz[rr, cc], np.nan)
        inten = np.where(v, cloud.intensity[rr, cc], 0.0)
        return xyz, inten

    sxyz, sint = channel_cols(s)
    lxyz, lint = channel_cols(l)

    for i in range(rr.size):
        rec = (
            f"{rr[i]} {cc[i]} "
            f"{sxyz[i, 0]:.6f} {sxyz[i, 1]:.6f} {sxyz[i, 2]:.6f} {sint[i]:.6f} "
            f"{lxyz[i, 0]:.6f} {lxyz[i, 1]:.6f} {lxyz[i, 2]:.6f} {lint[i]:.6f}"
        )
        if with_labels:
            ch = labels.CODE_TO_CHAR.get(int(lab[rr[i], cc[i]]), "-")
            p = pos[rr[i], cc[i]]
            if np.all(np.isfinite(p)):
                rec += f" {ch} {p[0]:.6f} {p[1]:.6f} {p[2]:.6f}"
            else:
                rec += f" {ch} - - -"
        lines.append(rec)

    body = "\n".join(lines) + "\n"
    crc = zlib.crc32(body.encode("ascii"))
    Path(path).write_text(body + f"checksum {crc:08x}\n", encoding="ascii")


def read_drpc(path) -> DrpcContents:
    """Parse a DRPC file; raises a specific DrpcError subclass on any defect."""
    text = Path(path).read_text(encoding="ascii")
    lines = text.splitlines()
    if not lines:
        raise DrpcVersionError("empty file", line=1)

    head = lines[0].split()
    if len(head) != 2 or head[0] != "DRPC":
        raise DrpcVersionError(f"not a DRPC file: {lines[0]!r}", line=1)
    if head[1] != str(_VERSION):
        raise DrpcVersionError(f"unsupported version {head[1]}", line=1)

    if len(lines) < 3:
        raise DrpcRecordError("missing header lines", line=len(lines))
    g = lines[1].split()
    try:
        if g[0] != "rings" or g[2] != "step_mrad" or g[4] != "cols":
            raise ValueError
        rings = int(g[1])
        step = float(g[3]) * 1e-3
        cols = int(g[5])
    except (ValueError, IndexError):
        raise DrpcRecordError(f"bad geometry header: {lines[1]!r}", line=2) from None
    if columns_for_step(step) != cols:
        raise DrpcRecordError(
            f"cols {cols} inconsistent with step_mrad {g[3]}", line=2
        )

    fields = lines[2].split()
    base = ["fields", "ring", "col", "sx", "sy", "sz", "si", "lx", "ly", "lz", "li"]
    with_labels = fields == base + ["label", "tlx", "tly", "tlz"]
    if not with_labels and fields != base:
        raise DrpcRecordError(f"unsupported fields line: {lines[2]!r}", line=3)
    n_tokens = 10 + (4 if with_labels else 0)

    # checksum trailer is mandatory; verify before touching the records
    if not lines[-1].startswith("checksum "):
        raise DrpcChecksumError("missing checksum trailer", line=len(lines))
    body = "\n".join(lines[:-1]) + "\n"
    try:
        declared = int(lines[-1].split()[1], 16)
    except (ValueError, IndexError):
        raise DrpcChecksumError(f"malformed checksum line: {lines[-1]!r}", line=len(lines)) from None
    actual = zlib.crc32(body.encode("ascii"))
    if actual != declared:
        raise DrpcChecksumError(
            f"checksum mismatch: declared {declared:08x}, computed {actual:08x}",
            line=len(lines),
        )

    geom = GridGeometry(rings, step)
    shape = (rings, cols)
    s_xyz = np.full(shape + (3,), np.nan)
    s_int = np.zeros(shape)
    s_val = np.zeros(shape, dtype=bool)
    l_xyz = np.full(shape + (3,), np.nan)
    l_int = np.zeros(shape)
    l_val = np.zeros(shape, dtype=bool)
    lab = np.zeros(shape, dtype=np.uint8) if with_labels else None
    ref = np.full(shape + (3,), np.nan) if with_labels else None

    for idx, raw in enumerate(lines[3:-1]):
        lineno = idx + 4
        tok = raw.split()
        if len(tok) != n_tokens:
            raise DrpcRecordError(
                f"record {idx}: expected {n_tokens} tokens, got {len(tok)}", line=lineno
            )
        try:
            r = int(tok[0])
            c = int(tok[1])
            vals = [float(t) for t in tok[2:10]]
        except ValueError as e:
            raise DrpcRecordError(f"record {idx}: {e}", line=lineno) from None
        if not (0 <= r < rings):
            raise DrpcRecordError(
                f"record {idx}: ring {r} outside [0, {rings})", line=lineno
            )
        if not (0 <= c < cols):
            raise DrpcRecordError(
                f"record {idx}: col {c} outside [0, {cols})", line=lineno
            )
        sx, sy, sz, si, lx, ly, lz, li = vals
        if not (np.isnan(sx) or np.isnan(sy) or np.isnan(sz)):
            s_xyz[r, c] = (sx, sy, sz)
            s_int[r, c] = si
            s_val[r, c] = True
        if not (np.isnan(lx) or np.isnan(ly) or np.isnan(lz)):
            l_xyz[r, c] = (lx, ly, lz)
            l_int[r, c] = li
            l_val[r, c] = True
        if with_labels:
            ch = tok[10]
            if ch not in labels.CHAR_TO_CODE:
                raise DrpcRecordError(f"record {idx}: unknown label {ch!r}", line=lineno)
            lab[r, c] = labels.CHAR_TO_CODE[ch]
            if tok[11] != "-":
                try:
                    ref[r, c] = [float(t) for t in tok[11:14]]
                except ValueError as e:
                    raise DrpcRecordError(f"record {idx}: {e}", line=lineno) from None

    scan = DualScan(
        strongest=OrganizedCloud(s_xyz, s_int, s_val, geom.step_azimuth),
        last=OrganizedCloud(l_xyz, l_int, l_val, geom.step_azimuth),
    )
    return DrpcContents(scan=scan, label=lab, ref_position=ref)
