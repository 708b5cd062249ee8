"""Segmentation quality: Dice, Dice on the mid-plane, Hausdorff distance on the mid-plane.

Hausdorff distances are measured between boundary pixel sets (foreground
pixels with a background 4-neighbour) in millimetres, honouring anisotropic
spacing. The pairwise distance is ``sqrt((drow * dy)**2 + (dcol * dx)**2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from .core import FrameMask, Sweep
from .errors import AlignmentError, InsufficientDataError, UndefinedDistanceError
from .raster import boundary_pixels
from .volumetry import DEFAULT_MIN_AREA_PX, select_midplane

__all__ = [
    "SweepMetrics",
    "dice",
    "hausdorff_mm",
    "hausdorff_bruteforce",
    "directed_hausdorff_mm",
    "sweep_metrics",
    "interobserver",
]


@dataclass(frozen=True)
class SweepMetrics:
    """Per-sweep scores; ``hd_midplane_mm`` is None when undefined (empty mask)."""

    per_frame_dice: tuple[tuple[int, float], ...]
    dice_mean: float
    dice_midplane: float
    hd_midplane_mm: float | None
    midplane_index: int


def _check_pair(a: FrameMask, b: FrameMask):
    if a.shape != b.shape:
        raise AlignmentError(f"mask sizes differ: {a.width}x{a.height} vs {b.width}x{b.height}")
    if a.spacing != b.spacing:
        raise AlignmentError(f"mask spacings differ: {a.spacing} vs {b.spacing}")


def dice(a: FrameMask, b: FrameMask) -> float:
    """``2|A & B| / (|A| + |B|)``; two empty masks score 1."""
    _check_pair(a, b)
    na = int(np.count_nonzero(a.pixels))
    nb = int(np.count_nonzero(b.pixels))
    if na + nb == 0:
        return 1.0
    inter = int(np.count_nonzero(a.pixels & b.pixels))
    return 2.0 * inter / (na + nb)


def _exact_nearest(src: np.ndarray, dst: np.ndarray, dy: float, dx: float) -> np.ndarray:
    """Exact distance from each ``src`` (row, col) to its nearest ``dst`` pixel."""
    out = np.empty(len(src))
    chunk = max(1, 2_000_000 // max(len(dst), 1))
    for s in range(0, len(src), chunk):
        part = src[s : s + chunk]
        dr = (part[:, None, 0] - dst[None, :, 0]).astype(float)
        dc = (part[:, None, 1] - dst[None, :, 1]).astype(float)
        out[s : s + chunk] = np.sqrt((dr * dy) ** 2 + (dc * dx) ** 2).min(axis=1)
    return out


def directed_hausdorff_mm(a: FrameMask, b: FrameMask) -> float:
    """Largest distance from a boundary pixel of ``a`` to the boundary of ``b``.

    The Euclidean feature transform of ``b``'s boundary gives every pixel its
    nearest boundary pixel. Candidates within a few ulps of the maximum are
    then re-measured exhaustively, so exact ties cannot be resolved
    differently from an all-pairs search.
    """
    _check_pair(a, b)
    ba = boundary_pixels(a.pixels)
    bb = boundary_pixels(b.pixels)
    if not ba.any() or not bb.any():
        raise UndefinedDistanceError("Hausdorff distance is undefined for an empty mask")
    dy, dx = a.spacing.dy_mm, a.spacing.dx_mm
    ft = ndimage.distance_transform_edt(
        ~bb, sampling=(dy, dx), return_distances=False, return_indices=True
    )
    rows, cols = np.nonzero(ba)
    dr = (rows - ft[0][rows, cols]).astype(float)
    dc = (cols - ft[1][rows, cols]).astype(float)
    d = np.sqrt((dr * dy) ** 2 + (dc * dx) ** 2)
    top = float(d.max())
    near = d >= top * (1.0 - 1e-9)
    src = np.column_stack((rows[near], cols[near]))
    dst = np.argwhere(bb)
    return float(_exact_nearest(src, dst, dy, dx).max())


def hausdorff_mm(a: FrameMask, b: FrameMask) -> float:
    """Symmetric Hausdorff distance between the mask boundaries, in mm.

    Raises
    ------
    UndefinedDistanceError
        If either mask is empty.
    """
    return max(directed_hausdorff_mm(a, b), directed_hausdorff_mm(b, a))


def hausdorff_bruteforce(a: FrameMask, b: FrameMask) -> float:
    """All-pairs Hausdorff distance; slow, used as a cross-check."""
    _check_pair(a, b)
    pa = np.argwhere(boundary_pixels(a.pixels))
    pb = np.argwhere(boundary_pixels(b.pixels))
    if len(pa) == 0 or len(pb) == 0:
        raise UndefinedDistanceError("Hausdorff distance is undefined for an empty mask")
    dy, dx = a.spacing.dy_mm, a.spacing.dx_mm
    drow = (pa[:, None, 0] - pb[None, :, 0]).astype(float)
    dcol = (pa[:, None, 1] - pb[None, :, 1]).astype(float)
    dist = np.sqrt((drow * dy) ** 2 + (dcol * dx) ** 2)
    return float(max(dist.min(axis=1).max(), dist.min(axis=0).max()))


def _check_sweeps(pred: Sweep, gt: Sweep):
    if len(pred) != len(gt):
        raise AlignmentError(
            f"{gt.patient_id}/{gt.plane}: prediction has {len(pred)} frames, "
            f"ground truth has {len(gt)}"
        )
    if pred.shape != gt.shape or pred.spacing != gt.spacing:
        raise AlignmentError(f"{gt.patient_id}/{gt.plane}: frame size or spacing differs")


def sweep_metrics(
    pred: Sweep,
    gt: Sweep,
    min_area_px: int = DEFAULT_MIN_AREA_PX,
    midplane_source: str = "ground-truth",
) -> SweepMetrics:
    """Score a predicted sweep against ground truth.

    The mid-plane is the largest ground-truth frame, or the largest predicted
    frame when ``midplane_source == "prediction"``.
    """
    _check_sweeps(pred, gt)
    if midplane_source == "ground-truth":
        mid = select_midplane(gt, min_area_px)
    elif midplane_source == "prediction":
        mid = select_midplane(pred, min_area_px)
    else:
        raise ValueError(f"unknown midplane_source {midplane_source!r}")
    per_frame = tuple((i, dice(p, g)) for i, (p, g) in enumerate(zip(pred.frames, gt.frames)))
    try:
        hd = hausdorff_mm(pred.frames[mid], gt.frames[mid])
    except UndefinedDistanceError:
        hd = None
    return SweepMetrics(
        per_frame_dice=per_frame,
        dice_mean=float(np.mean([v for _, v in per_frame])),
        dice_midplane=per_frame[mid][1],
        hd_midplane_mm=hd,
        midplane_index=mid,
    )


def interobserver(
    observers: Sequence[Sweep],
    reference: Sweep,
    min_area_px: int = DEFAULT_MIN_AREA_PX,
) -> SweepMetrics:
    """Average of :func:`sweep_metrics` of every observer against ``reference``.

    Undefined Hausdorff values are left out of the mean; if all are
    undefined the result is None.
    """
    if not observers:
        raise InsufficientDataError("interobserver comparison needs at least one observer")
    results = [sweep_metrics(o, reference, min_area_px) for o in observers]
    n_frames = len(reference)
    per_frame = tuple(
        (i, math.fsum(r.per_frame_dice[i][1] for r in results) / len(results))
        for i in range(n_frames)
    )
    hds = [r.hd_midplane_mm for r in results if r.hd_midplane_mm is not None]
    return SweepMetrics(
        per_frame_dice=per_frame,
        dice_mean=math.fsum(r.dice_mean for r in results) / len(results),
        dice_midplane=math.fsum(r.dice_midplane for r in results) / len(results),
        hd_midplane_mm=math.fsum(hds) / len(hds) if hds else None,
        midplane_index=results[0].midplane_index,
    )
