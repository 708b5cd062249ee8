"""Prostate volume from binary segmentation sweeps.

Pick the largest mask of an axial and a sagittal sweep, fit ellipses to
their outlines, read off three diameters and apply the ellipsoid formula.
Also provides segmentation metrics, agreement statistics, patient-level
splitting and an ellipsoid phantom generator for verification.
"""

__version__ = "0.1.0"

from .core import (
    FrameMask,
    PatientRecord,
    PixelSpacing,
    PlaneKind,
    Sweep,
    SweepRef,
    load_manifest,
    load_sweep,
    write_sweep,
)
from .ellipse import AxisPolicy, EllipseParams, fit_ellipse, image_axis_diameters, sample_ellipse
from .metrics import dice, hausdorff_bruteforce, hausdorff_mm, interobserver, sweep_metrics
from .phantom import PhantomSpec, analytic_volume, generate_pair, generate_sweep, perturb_sweep
from .raster import area_px, extract_contour, largest_component
from .stats import bland_altman, holdout_test_selection, kfold_split, relative_error, sample_training_frames
from .volumetry import (
    DiameterTriple,
    VolumeEstimate,
    ellipsoid_volume,
    estimate_volume,
    extract_axial_diameters,
    extract_sagittal_diameter,
    select_midplane,
)
