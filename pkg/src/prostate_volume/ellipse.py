"""Direct least-squares ellipse fitting and axis bookkeeping.

The fit minimises the algebraic distance of the conic
``A x^2 + B xy + C y^2 + D x + E y + F`` over the points subject to
``4AC - B^2 = 1``, which guarantees an ellipse. It uses the partitioned
scatter-matrix form (Halir & Flusser) on centred, isotropically scaled
coordinates.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import FitError

__all__ = [
    "EllipseParams",
    "NormalizedConic",
    "AxisPolicy",
    "fit_conic",
    "conic_to_params",
    "fit_ellipse",
    "image_axis_diameters",
    "policy_diameters",
    "sample_ellipse",
]

_CIRCLE_RTOL = 1e-9
_C1_INV = np.array([[0.0, 0.0, 0.5], [0.0, -1.0, 0.0], [0.5, 0.0, 0.0]])


@dataclass(frozen=True)
class EllipseParams:
    """Ellipse in millimetres.

    ``orientation_rad`` is the angle of the major axis from the +x image
    axis, in ``[0, pi)``. Circles report 0.
    """

    cx_mm: float
    cy_mm: float
    semi_major_mm: float
    semi_minor_mm: float
    orientation_rad: float

    def __post_init__(self):
        for name in ("cx_mm", "cy_mm", "semi_major_mm", "semi_minor_mm", "orientation_rad"):
            object.__setattr__(self, name, float(getattr(self, name)))
        a, b, t = self.semi_major_mm, self.semi_minor_mm, self.orientation_rad
        if not (a >= b > 0):
            raise ValueError(f"need semi_major >= semi_minor > 0, got {a}, {b}")
        if not (0.0 <= t < math.pi):
            raise ValueError(f"orientation must lie in [0, pi), got {t}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.cx_mm, self.cy_mm)

    def as_dict(self) -> dict:
        return {
            "cx_mm": self.cx_mm,
            "cy_mm": self.cy_mm,
            "semi_major_mm": self.semi_major_mm,
            "semi_minor_mm": self.semi_minor_mm,
            "orientation_rad": self.orientation_rad,
        }


@dataclass(frozen=True)
class NormalizedConic:
    """Conic coefficients fitted in normalised coordinates.

    Points map to the fitting frame as ``(p - offset) * scale``.
    ``coeffs`` is ``(A, B, C, D, E, F)`` with unit Euclidean norm.
    """

    coeffs: np.ndarray
    offset: np.ndarray
    scale: float

    def normalize(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.offset) * self.scale

    def residuals(self, points) -> np.ndarray:
        q = self.normalize(points)
        x, y = q[:, 0], q[:, 1]
        A, B, C, D, E, F = self.coeffs
        return A * x * x + B * x * y + C * y * y + D * x + E * y + F


def fit_conic(points) -> NormalizedConic:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise FitError(f"points must have shape (n, 2), got {pts.shape}")
    if len(pts) < 5:
        raise FitError(f"insufficient points: need at least 5, got {len(pts)}")
    if not np.all(np.isfinite(pts)):
        raise FitError("points contain NaN or infinity")

    offset = pts.mean(axis=0)
    centred = pts - offset
    rms = math.sqrt(float(np.mean(np.sum(centred * centred, axis=1))))
    if rms == 0.0:
        raise FitError("all points coincide")
    scale = math.sqrt(2.0) / rms
    x, y = centred[:, 0] * scale, centred[:, 1] * scale

    D1 = np.column_stack((x * x, x * y, y * y))
    D2 = np.column_stack((x, y, np.ones_like(x)))
    if np.linalg.matrix_rank(np.hstack((D1, D2))) < 5:
        raise FitError("degenerate point scatter (rank-deficient design matrix)")
    S1 = D1.T @ D1
    S2 = D1.T @ D2
    S3 = D2.T @ D2
    try:
        T = -np.linalg.solve(S3, S2.T)
    except np.linalg.LinAlgError:
        raise FitError("degenerate point scatter (singular linear block)") from None
    M = _C1_INV @ (S1 + S2 @ T)

    evals, evecs = np.linalg.eig(M)
    evals = evals.real
    evecs = evecs.real
    cond = 4.0 * evecs[0] * evecs[2] - evecs[1] ** 2
    ok = np.flatnonzero(cond > 0)
    if ok.size == 0:
        raise FitError("no elliptical solution")
    k = ok[np.argmin(np.abs(evals[ok]))]
    a1 = evecs[:, k]
    coeffs = np.concatenate((a1, T @ a1))
    coeffs /= np.linalg.norm(coeffs)
    if coeffs[0] + coeffs[2] < 0:
        coeffs = -coeffs
    return NormalizedConic(coeffs=coeffs, offset=offset, scale=scale)


def conic_to_params(coeffs) -> EllipseParams:
    """Centre, semi-axes and orientation of an ellipse given as conic coefficients."""
    A, B, C, D, E, F = (float(v) for v in coeffs)
    den = 4.0 * A * C - B * B
    if not den > 0:
        raise FitError("conic is not an ellipse")
    x0 = (B * E - 2.0 * C * D) / den
    y0 = (B * D - 2.0 * A * E) / den
    f0 = F + 0.5 * (D * x0 + E * y0)
    lam, vec = np.linalg.eigh(np.array([[A, 0.5 * B], [0.5 * B, C]]))
    if lam[0] < 0:
        lam, f0 = -lam[::-1], -f0
        vec = vec[:, ::-1]
    if not (lam[0] > 0 and f0 < 0):
        raise FitError("conic has no real points")
    a = math.sqrt(-f0 / lam[0])
    b = math.sqrt(-f0 / lam[1])
    if a - b <= _CIRCLE_RTOL * a:
        theta = 0.0
    else:
        theta = math.atan2(vec[1, 0], vec[0, 0]) % math.pi
        if theta >= math.pi:
            theta = 0.0
    return EllipseParams(x0, y0, a, b, theta)


def fit_ellipse(points) -> EllipseParams:
    """Fit an ellipse to ``(x_mm, y_mm)`` points.

    Raises
    ------
    FitError
        Fewer than 5 points, degenerate scatter, or no elliptical solution.
    """
    conic = fit_conic(points)
    e = conic_to_params(conic.coeffs)
    s = conic.scale
    return EllipseParams(
        e.cx_mm / s + conic.offset[0],
        e.cy_mm / s + conic.offset[1],
        e.semi_major_mm / s,
        e.semi_minor_mm / s,
        e.orientation_rad,
    )


def major_is_horizontal(e: EllipseParams) -> bool:
    t = e.orientation_rad
    return t < math.pi / 4 or t >= 3 * math.pi / 4


def image_axis_diameters(e: EllipseParams) -> tuple[float, float]:
    """Full diameters ``(horizontal_mm, vertical_mm)``.

    The major axis counts as horizontal when its angle lies in
    ``[0, pi/4)`` or ``[3pi/4, pi)``; otherwise it is vertical.
    """
    major, minor = 2.0 * e.semi_major_mm, 2.0 * e.semi_minor_mm
    if major_is_horizontal(e):
        return major, minor
    return minor, major


class AxisPolicy(str, enum.Enum):
    """Which fitted axis becomes a plane's primary diameter.

    The primary diameter is frontal for axial frames and sagittal for
    sagittal frames; in the axial plane the other axis is longitudinal.
    """

    ORIENTATION_QUADRANT = "orientation-quadrant"
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"
    MAJOR = "major"
    MINOR = "minor"


def policy_diameters(e: EllipseParams, policy: AxisPolicy | str) -> tuple[float, float]:
    """``(primary_mm, secondary_mm)`` under ``policy``."""
    policy = AxisPolicy(policy)
    if policy in (AxisPolicy.ORIENTATION_QUADRANT, AxisPolicy.HORIZONTAL):
        return image_axis_diameters(e)
    if policy is AxisPolicy.VERTICAL:
        h, v = image_axis_diameters(e)
        return v, h
    major, minor = 2.0 * e.semi_major_mm, 2.0 * e.semi_minor_mm
    if policy is AxisPolicy.MAJOR:
        return major, minor
    return minor, major


def sample_ellipse(cx, cy, a, b, theta, n=100, phase=0.0) -> np.ndarray:
    """``n`` points evenly spaced in the parametric angle."""
    t = phase + np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    ct, st = math.cos(theta), math.sin(theta)
    u, v = a * np.cos(t), b * np.sin(t)
    return np.column_stack((cx + u * ct - v * st, cy + u * st + v * ct))
