"""Synthetic ellipsoid sweeps with known geometry.

Axial sweeps slice the ellipsoid across its sagittal axis and show
(frontal, longitudinal) as (horizontal, vertical). Sagittal sweeps slice
across the frontal axis and show (sagittal, longitudinal). A pixel is
foreground when its centre lies inside the cross-section. Every sweep has
one empty frame at each end and always contains the central slice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .core import FrameMask, PixelSpacing, PlaneKind, Sweep
from .errors import GeometryError, ValidationError

__all__ = [
    "PhantomSpec",
    "generate_sweep",
    "generate_pair",
    "analytic_volume",
    "perturb_sweep",
    "frame_size_for",
    "validate_geometry",
    "OUTER_FRACTION",
]

# frames in this fraction of the sweep at either end are eligible for dropout
OUTER_FRACTION = 0.2
DEFAULT_HARMONICS = 4


@dataclass(frozen=True)
class PhantomSpec:
    frontal_mm: float
    longitudinal_mm: float
    sagittal_mm: float
    spacing: PixelSpacing = PixelSpacing(0.4, 0.4)
    slice_step_mm: float = 1.0
    frame_width: int = 256
    frame_height: int = 256
    center_offset_mm: tuple[float, float] = (0.0, 0.0)
    jitter_sigma_mm: float = 0.0
    extremity_dropout: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("frontal_mm", "longitudinal_mm", "sagittal_mm", "slice_step_mm"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValidationError(f"{name} must be > 0, got {v}")
        if not isinstance(self.spacing, PixelSpacing):
            raise ValidationError("spacing must be a PixelSpacing")
        for name in ("frame_width", "frame_height"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if not (self.jitter_sigma_mm >= 0):
            raise ValidationError(f"jitter_sigma_mm must be >= 0, got {self.jitter_sigma_mm}")
        if not (0.0 <= self.extremity_dropout <= 1.0):
            raise ValidationError(
                f"extremity_dropout must lie in [0, 1], got {self.extremity_dropout}"
            )

    @property
    def diameters(self) -> tuple[float, float, float]:
        return (self.frontal_mm, self.longitudinal_mm, self.sagittal_mm)

    def in_plane(self, plane: PlaneKind) -> tuple[float, float, float]:
        """``(horizontal, vertical, through-plane)`` diameters for a sweep plane."""
        if PlaneKind(plane) is PlaneKind.AXIAL:
            return self.frontal_mm, self.longitudinal_mm, self.sagittal_mm
        return self.sagittal_mm, self.longitudinal_mm, self.frontal_mm


def analytic_volume(spec: PhantomSpec) -> float:
    """Exact ellipsoid volume in mL."""
    a, b, c = (d / 2.0 for d in spec.diameters)
    return 4.0 / 3.0 * math.pi * a * b * c / 1000.0


def frame_size_for(diameters, spacing: PixelSpacing, margin_px: int = 8) -> tuple[int, int]:
    """Smallest ``(width, height)`` holding any cross-section of the ellipsoid."""
    widest = max(diameters)
    w = int(math.ceil(widest / spacing.dx_mm)) + 2 * margin_px
    h = int(math.ceil(widest / spacing.dy_mm)) + 2 * margin_px
    return w, h


def _slice_positions(half: float, step: float) -> np.ndarray:
    m = max(int(math.ceil(half / step)) - 1, 0)
    while m > 0 and m * step >= half:
        m -= 1
    return np.arange(-m, m + 1) * step


def _check_fits(spec: PhantomSpec, h_semi: float, v_semi: float, cx: float, cy: float):
    dx, dy = spec.spacing.dx_mm, spec.spacing.dy_mm
    x_max = (spec.frame_width - 1) * dx
    y_max = (spec.frame_height - 1) * dy
    if not (cx - h_semi > 0 and cx + h_semi < x_max):
        need = int(math.ceil((2 * h_semi + 2 * abs(spec.center_offset_mm[0])) / dx)) + 3
        raise GeometryError(
            f"frame_width={spec.frame_width} px too small for a {2 * h_semi:g} mm cross-section "
            f"at dx={dx:g} mm; need at least {need} px"
        )
    if not (cy - v_semi > 0 and cy + v_semi < y_max):
        need = int(math.ceil((2 * v_semi + 2 * abs(spec.center_offset_mm[1])) / dy)) + 3
        raise GeometryError(
            f"frame_height={spec.frame_height} px too small for a {2 * v_semi:g} mm cross-section "
            f"at dy={dy:g} mm; need at least {need} px"
        )


def _plane_geometry(spec: PhantomSpec, plane: PlaneKind):
    h_d, v_d, through_d = spec.in_plane(plane)
    dx, dy = spec.spacing.dx_mm, spec.spacing.dy_mm
    cx = (spec.frame_width - 1) / 2.0 * dx + spec.center_offset_mm[0]
    cy = (spec.frame_height - 1) / 2.0 * dy + spec.center_offset_mm[1]
    _check_fits(spec, h_d / 2.0, v_d / 2.0, cx, cy)
    return h_d / 2.0, v_d / 2.0, through_d / 2.0, cx, cy


def validate_geometry(spec: PhantomSpec) -> None:
    """Raise :class:`GeometryError` unless both planes fit in the frame."""
    for plane in PlaneKind:
        _plane_geometry(spec, plane)


def generate_sweep(spec: PhantomSpec, plane: PlaneKind, patient_id: str = "phantom") -> Sweep:
    """Rasterise a noiseless sweep of ``spec`` in ``plane``.

    Raises
    ------
    GeometryError
        If the central cross-section does not fit inside the frame.
    """
    plane = PlaneKind(plane)
    h_semi, v_semi, half, cx, cy = _plane_geometry(spec, plane)
    dx, dy = spec.spacing.dx_mm, spec.spacing.dy_mm

    xs = np.arange(spec.frame_width) * dx - cx
    ys = np.arange(spec.frame_height) * dy - cy
    empty = FrameMask.empty(spec.frame_height, spec.frame_width, spec.spacing)
    frames = [empty]
    for z in _slice_positions(half, spec.slice_step_mm):
        f2 = max(1.0 - (z / half) ** 2, 0.0)
        if f2 == 0.0:
            frames.append(empty)
            continue
        inside = (xs[None, :] ** 2) / (h_semi**2 * f2) + (ys[:, None] ** 2) / (v_semi**2 * f2) <= 1.0
        frames.append(FrameMask(inside, spec.spacing))
    frames.append(empty)
    return Sweep(patient_id, plane, tuple(frames), source="phantom")


def generate_pair(spec: PhantomSpec, patient_id: str = "phantom") -> tuple[Sweep, Sweep]:
    """Noiseless ``(axial, sagittal)`` sweeps."""
    return (
        generate_sweep(spec, PlaneKind.AXIAL, patient_id),
        generate_sweep(spec, PlaneKind.SAGITTAL, patient_id),
    )


def _outer_frames(n: int) -> np.ndarray:
    if n == 1:
        return np.zeros(1, dtype=bool)
    u = np.arange(n) / (n - 1)
    return (u < OUTER_FRACTION) | (u > 1.0 - OUTER_FRACTION)


def _jitter_frame(pixels: np.ndarray, spacing: PixelSpacing, coeffs: np.ndarray) -> np.ndarray:
    dx, dy = spacing.dx_mm, spacing.dy_mm
    rows, cols = np.nonzero(pixels)
    cy, cx = rows.mean() * dy, cols.mean() * dx
    # nothing moves farther than sum(|coeffs|); work inside that window only
    reach = float(np.abs(coeffs).sum())
    pad_r = int(math.ceil(reach / dy)) + 2
    pad_c = int(math.ceil(reach / dx)) + 2
    r0, r1 = max(rows.min() - pad_r, 0), min(rows.max() + pad_r + 1, pixels.shape[0])
    c0, c1 = max(cols.min() - pad_c, 0), min(cols.max() + pad_c + 1, pixels.shape[1])
    win = pixels[r0:r1, c0:c1]

    z = (np.arange(c0, c1)[None, :] * dx - cx) + 1j * (np.arange(r0, r1)[:, None] * dy - cy)
    mag = np.abs(z)
    u = np.divide(z, mag, out=np.ones_like(z), where=mag > 0)  # e^{i phi}
    r = np.zeros(win.shape)
    uk = np.ones_like(u)
    for j in range(len(coeffs) // 2):
        uk = uk * u
        r += coeffs[2 * j] * uk.real + coeffs[2 * j + 1] * uk.imag

    # distances are measured against the full frame so cropping cannot create edges
    d_in = ndimage.distance_transform_edt(
        np.pad(win, 1, constant_values=True), sampling=(dy, dx)
    )[1:-1, 1:-1]
    d_out = ndimage.distance_transform_edt(~win, sampling=(dy, dx))
    h = 0.5 * min(dx, dy)
    out = np.zeros_like(pixels)
    out[r0:r1, c0:c1] = np.where(win, d_in + r > h, d_out < r + h)
    return out


def perturb_sweep(
    sweep: Sweep,
    jitter_sigma_mm: float = 0.0,
    extremity_dropout: float = 0.0,
    seed: int = 0,
    harmonics: int = DEFAULT_HARMONICS,
) -> Sweep:
    """Degrade a sweep the way an imperfect segmenter would.

    Each non-empty frame's outline moves radially (about the mask centroid)
    by a random low-order Fourier series whose RMS over angle has expectation
    ``jitter_sigma_mm``. Frames in the outer 20% of the sweep at either end
    are emptied with probability ``extremity_dropout``. Output depends only on
    ``(sweep, jitter_sigma_mm, extremity_dropout, seed, harmonics)``.
    """
    if jitter_sigma_mm < 0:
        raise ValidationError("jitter_sigma_mm must be >= 0")
    if not 0.0 <= extremity_dropout <= 1.0:
        raise ValidationError("extremity_dropout must lie in [0, 1]")
    if jitter_sigma_mm == 0 and extremity_dropout == 0:
        return replace(sweep)

    rng = np.random.default_rng(seed)
    outer = _outer_frames(len(sweep))
    coef_sd = jitter_sigma_mm / math.sqrt(harmonics)
    frames = []
    for i, fr in enumerate(sweep.frames):
        coeffs = rng.normal(0.0, coef_sd, size=2 * harmonics)
        drop = rng.random() < extremity_dropout
        if fr.is_empty() or (outer[i] and drop):
            frames.append(FrameMask.empty(fr.height, fr.width, fr.spacing))
            continue
        if jitter_sigma_mm == 0:
            frames.append(fr)
            continue
        frames.append(fr.with_pixels(_jitter_frame(fr.pixels, fr.spacing, coeffs)))
    return Sweep(sweep.patient_id, sweep.plane, tuple(frames), source=sweep.source)
