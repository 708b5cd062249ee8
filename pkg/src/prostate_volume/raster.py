"""Pixel-level operations on binary masks: area, components, boundary tracing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import FrameMask
from .errors import DegenerateMaskError
from .pgm import decode_mask, encode_mask

__all__ = [
    "Contour",
    "decode_mask",
    "encode_mask",
    "area_px",
    "largest_component",
    "component_areas",
    "boundary_pixels",
    "extract_contour",
    "edge_midpoints",
]

_EIGHT = np.ones((3, 3), dtype=bool)
_FOUR = ndimage.generate_binary_structure(2, 1)

# Moore neighbourhood, clockwise on screen (rows grow downward), starting west.
_RING = ((0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1))
_RING_INDEX = {d: i for i, d in enumerate(_RING)}


@dataclass(frozen=True)
class Contour:
    """Closed boundary trace.

    ``points`` holds ``(x_mm, y_mm)`` rows; ``pixels`` holds the matching
    ``(row, col)`` of each traced pixel.
    """

    points: np.ndarray
    pixels: np.ndarray
    closed: bool = True

    def __len__(self):
        return len(self.points)


def area_px(mask: FrameMask) -> int:
    return int(np.count_nonzero(mask.pixels))


def _label(pixels: np.ndarray):
    return ndimage.label(pixels, structure=_EIGHT)


def component_areas(mask: FrameMask) -> np.ndarray:
    """Sizes of the 8-connected components, ordered by their first pixel in raster order."""
    labels, n = _label(mask.pixels)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    return np.bincount(labels.ravel(), minlength=n + 1)[1:]


def _largest_component_pixels(pixels: np.ndarray) -> np.ndarray:
    labels, n = _label(pixels)
    if n <= 1:
        return pixels.copy()
    sizes = np.bincount(labels.ravel(), minlength=n + 1)
    sizes[0] = 0
    # ndimage.label numbers components in raster order of their first pixel,
    # so argmax's first-hit rule breaks ties by smallest (row, col) seed.
    return labels == int(np.argmax(sizes))


def largest_component(mask: FrameMask) -> FrameMask:
    """Keep only the largest 8-connected foreground component."""
    return mask.with_pixels(_largest_component_pixels(mask.pixels))


def largest_component_area(mask: FrameMask) -> int:
    sizes = component_areas(mask)
    return int(sizes.max()) if sizes.size else 0


def boundary_pixels(pixels: np.ndarray) -> np.ndarray:
    """Foreground pixels with at least one background 4-neighbour.

    Pixels outside the frame count as background.
    """
    pixels = np.asarray(pixels, dtype=bool)
    interior = ndimage.binary_erosion(pixels, structure=_FOUR, border_value=0)
    return pixels & ~interior


def _moore_trace(pixels: np.ndarray) -> list[tuple[int, int]]:
    padded = np.pad(pixels, 1, constant_values=False)
    rows, cols = np.nonzero(padded)
    start = (int(rows[0]), int(cols[0]))
    # the raster-first pixel always has background to its west
    p, back = start, 0
    trace = [start]
    seen = {(p, back)}
    while True:
        for k in range(1, 9):
            idx = (back + k) % 8
            dr, dc = _RING[idx]
            q = (p[0] + dr, p[1] + dc)
            if padded[q]:
                pr, pc = _RING[(idx - 1) % 8]
                prev = (p[0] + pr, p[1] + pc)
                back = _RING_INDEX[(prev[0] - q[0], prev[1] - q[1])]
                p = q
                break
        else:
            break  # isolated pixel
        # A repeated (pixel, backtrack) state means the loop is closed. The
        # start may be re-entered from another side first, so stop on any repeat.
        if (p, back) in seen:
            break
        seen.add((p, back))
        trace.append(p)
    if len(trace) > 1 and trace[-1] == trace[0]:
        trace.pop()
    return [(r - 1, c - 1) for r, c in trace]


def extract_contour(mask: FrameMask) -> Contour:
    """Trace the outer boundary of the largest component (Moore-neighbour tracing).

    Foreground is 8-connected, background 4-connected. Each point is a pixel
    centre in millimetres: ``x = col * dx_mm``, ``y = row * dy_mm``.

    Raises
    ------
    DegenerateMaskError
        If the largest component has fewer than 3 pixels.
    """
    comp = _largest_component_pixels(mask.pixels)
    n = int(comp.sum())
    if n < 3:
        raise DegenerateMaskError(f"largest component has {n} pixel(s); need at least 3")
    pix = np.asarray(_moore_trace(comp), dtype=np.int64)
    pts = np.column_stack((pix[:, 1] * mask.spacing.dx_mm, pix[:, 0] * mask.spacing.dy_mm))
    return Contour(points=pts, pixels=pix)


def edge_midpoints(mask: FrameMask, contour: Contour) -> np.ndarray:
    """Midpoints of the pixel edges separating traced pixels from background.

    For a mask rasterised by pixel-centre inclusion, these points straddle
    the true outline instead of sitting up to one pixel inside it. Returned
    as ``(x_mm, y_mm)`` rows, one per distinct boundary edge.
    """
    padded = np.pad(mask.pixels, 1, constant_values=False)
    seen = set()
    out = []
    for r, c in contour.pixels.tolist():
        if (r, c) in seen:
            continue
        seen.add((r, c))
        for dr, dc in ((0, -1), (-1, 0), (0, 1), (1, 0)):
            if not padded[r + 1 + dr, c + 1 + dc]:
                out.append((c + 0.5 * dc, r + 0.5 * dr))
    arr = np.asarray(out, dtype=float)
    arr[:, 0] *= mask.spacing.dx_mm
    arr[:, 1] *= mask.spacing.dy_mm
    return arr
