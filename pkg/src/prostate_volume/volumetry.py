"""Volume from two sweeps: mid-plane selection, ellipse diameters, ellipsoid formula."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import FrameMask, PlaneKind, Sweep
from .ellipse import AxisPolicy, EllipseParams, fit_ellipse, policy_diameters
from .errors import DomainError, EmptySweepError, PlaneMismatchError, VolumetryError
from .raster import component_areas, edge_midpoints, extract_contour, largest_component

__all__ = [
    "DEFAULT_MIN_AREA_PX",
    "DiameterTriple",
    "VolumeEstimate",
    "PlaneDiameters",
    "frame_areas",
    "select_midplane",
    "fit_frame",
    "extract_axial_diameters",
    "extract_sagittal_diameter",
    "ellipsoid_volume",
    "estimate_volume",
]

DEFAULT_MIN_AREA_PX = 100


@dataclass(frozen=True)
class DiameterTriple:
    frontal_mm: float
    longitudinal_mm: float
    sagittal_mm: float

    def __post_init__(self):
        for name in ("frontal_mm", "longitudinal_mm", "sagittal_mm"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be a positive finite diameter, got {v}")


@dataclass(frozen=True)
class VolumeEstimate:
    volume_ml: float
    diameters: DiameterTriple
    axial_midplane_index: int
    sagittal_midplane_index: int
    axial_ellipse: EllipseParams
    sagittal_ellipse: EllipseParams

    def as_dict(self) -> dict:
        return {
            "volume_ml": self.volume_ml,
            "frontal_mm": self.diameters.frontal_mm,
            "longitudinal_mm": self.diameters.longitudinal_mm,
            "sagittal_mm": self.diameters.sagittal_mm,
            "axial_midplane": self.axial_midplane_index,
            "sagittal_midplane": self.sagittal_midplane_index,
            "axial_ellipse": self.axial_ellipse.as_dict(),
            "sagittal_ellipse": self.sagittal_ellipse.as_dict(),
        }


@dataclass(frozen=True)
class PlaneDiameters:
    """Diameters read off one sweep's mid-plane."""

    primary_mm: float
    secondary_mm: float
    midplane_index: int
    ellipse: EllipseParams


def frame_areas(sweep: Sweep) -> np.ndarray:
    """Largest-component area of every frame, in pixels."""
    out = np.zeros(len(sweep), dtype=np.int64)
    for i, fr in enumerate(sweep.frames):
        sizes = component_areas(fr)
        out[i] = sizes.max() if sizes.size else 0
    return out


def select_midplane(sweep: Sweep, min_area_px: int = DEFAULT_MIN_AREA_PX) -> int:
    """Index of the frame whose largest component is biggest (lowest index on ties).

    Raises
    ------
    EmptySweepError
        If no frame reaches ``min_area_px``.
    """
    areas = frame_areas(sweep)
    best = int(np.argmax(areas))
    if areas[best] < max(min_area_px, 1):
        raise EmptySweepError(
            f"{sweep.plane} sweep of {sweep.patient_id}: no frame reaches "
            f"{min_area_px} px (largest is {int(areas[best])} px)"
        )
    return best


def fit_frame(mask: FrameMask) -> EllipseParams:
    """Ellipse through the outline of the mask's largest component.

    The fit uses the midpoints of the traced boundary's pixel edges rather
    than the pixel centres, so a disk of radius R rasterised by centre
    inclusion fits to R instead of roughly R - 0.5 px.
    """
    comp = largest_component(mask)
    contour = extract_contour(comp)
    return fit_ellipse(edge_midpoints(comp, contour))


def _plane_diameters(sweep, plane, min_area_px, axis_policy) -> PlaneDiameters:
    if sweep.plane is not plane:
        raise PlaneMismatchError(f"expected a {plane} sweep, got {sweep.plane}")
    idx = select_midplane(sweep, min_area_px)
    try:
        e = fit_frame(sweep.frames[idx])
    except VolumetryError as exc:
        raise type(exc)(f"{plane} sweep of {sweep.patient_id}, frame {idx}: {exc}") from exc
    primary, secondary = policy_diameters(e, axis_policy)
    return PlaneDiameters(primary, secondary, idx, e)


def extract_axial_diameters(
    sweep: Sweep,
    min_area_px: int = DEFAULT_MIN_AREA_PX,
    axis_policy: AxisPolicy | str = AxisPolicy.ORIENTATION_QUADRANT,
) -> tuple[float, float, int, EllipseParams]:
    """``(frontal_mm, longitudinal_mm, midplane_index, ellipse)`` from an axial sweep."""
    d = _plane_diameters(sweep, PlaneKind.AXIAL, min_area_px, axis_policy)
    return d.primary_mm, d.secondary_mm, d.midplane_index, d.ellipse


def extract_sagittal_diameter(
    sweep: Sweep,
    min_area_px: int = DEFAULT_MIN_AREA_PX,
    axis_policy: AxisPolicy | str = AxisPolicy.ORIENTATION_QUADRANT,
) -> tuple[float, int, EllipseParams]:
    """``(sagittal_mm, midplane_index, ellipse)`` from a sagittal sweep."""
    d = _plane_diameters(sweep, PlaneKind.SAGITTAL, min_area_px, axis_policy)
    return d.primary_mm, d.midplane_index, d.ellipse


def ellipsoid_volume(d: DiameterTriple) -> float:
    """Prostate volume in mL: frontal x longitudinal x sagittal x pi/6, mm^3 to mL."""
    if not isinstance(d, DiameterTriple):
        d = DiameterTriple(*d)
    return d.frontal_mm * d.longitudinal_mm * d.sagittal_mm * math.pi / 6.0 / 1000.0


def estimate_volume(
    axial: Sweep,
    sagittal: Sweep,
    min_area_px: int = DEFAULT_MIN_AREA_PX,
    axis_policy: AxisPolicy | str = AxisPolicy.ORIENTATION_QUADRANT,
) -> VolumeEstimate:
    frontal, longitudinal, ax_idx, ax_e = extract_axial_diameters(axial, min_area_px, axis_policy)
    sag, sag_idx, sag_e = extract_sagittal_diameter(sagittal, min_area_px, axis_policy)
    d = DiameterTriple(frontal, longitudinal, sag)
    return VolumeEstimate(ellipsoid_volume(d), d, ax_idx, sag_idx, ax_e, sag_e)
