"""Data model shared by every stage of the pipeline, plus manifest and sweep I/O.

A manifest is a JSON document describing a cohort::

    {"patients": [
        {"id": "P01",
         "axial_pred": {"dir": "P01/ax", "files": ["f000.pgm", ...], "spacing_mm": [0.4, 0.4]},
         "sagittal_pred": {...},
         "axial_gt": {...}, "sagittal_gt": {...},          # optional
         "reference_volume_ml": 41.2,                       # optional
         "observers": [{"axial_gt": {...}, "sagittal_gt": {...}}, ...]}  # optional
    ]}

Sweep fields may also hold a list of sweep objects when a patient has several
acquisitions in the same plane. Relative ``dir`` values resolve against the
directory containing the manifest.
"""

from __future__ import annotations

import enum
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import ManifestError, MissingSpacingError, ValidationError

__all__ = [
    "PixelSpacing",
    "FrameMask",
    "PlaneKind",
    "Sweep",
    "SweepRef",
    "ObserverSet",
    "PatientRecord",
    "load_manifest",
    "parse_manifest",
    "dump_manifest",
    "load_sweep",
    "write_sweep",
]


@dataclass(frozen=True)
class PixelSpacing:
    """Physical size of one pixel in millimetres."""

    dx_mm: float
    dy_mm: float

    def __post_init__(self):
        for name in ("dx_mm", "dy_mm"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float, np.floating, np.integer)):
                raise ValidationError(f"{name} must be a number, got {v!r}")
            if not math.isfinite(v) or v <= 0:
                raise ValidationError(f"{name} must be finite and > 0, got {v!r}")
            object.__setattr__(self, name, float(v))

    def scaled(self, s: float) -> PixelSpacing:
        return PixelSpacing(self.dx_mm * s, self.dy_mm * s)


class FrameMask:
    """One binary segmentation mask with its pixel spacing.

    ``pixels`` is a boolean ``(height, width)`` array; ``True`` marks
    prostate. The array is copied and frozen, so a mask never changes after
    construction.
    """

    __slots__ = ("_pixels", "spacing")

    def __init__(self, pixels, spacing: PixelSpacing):
        arr = np.array(pixels, dtype=bool, copy=True)
        if arr.ndim != 2:
            raise ValidationError(f"mask must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"mask must be at least 1x1, got shape {arr.shape}")
        if not isinstance(spacing, PixelSpacing):
            raise ValidationError("spacing must be a PixelSpacing")
        arr.setflags(write=False)
        self._pixels = arr
        self.spacing = spacing

    @classmethod
    def empty(cls, height: int, width: int, spacing: PixelSpacing) -> FrameMask:
        return cls(np.zeros((height, width), dtype=bool), spacing)

    @property
    def pixels(self) -> np.ndarray:
        return self._pixels

    @property
    def height(self) -> int:
        return self._pixels.shape[0]

    @property
    def width(self) -> int:
        return self._pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._pixels.shape

    @property
    def foreground(self) -> frozenset[tuple[int, int]]:
        """Foreground pixels as a set of ``(row, col)`` pairs."""
        rows, cols = np.nonzero(self._pixels)
        return frozenset(zip(rows.tolist(), cols.tolist()))

    def is_empty(self) -> bool:
        return not self._pixels.any()

    def with_pixels(self, pixels) -> FrameMask:
        return FrameMask(pixels, self.spacing)

    def __eq__(self, other):
        if not isinstance(other, FrameMask):
            return NotImplemented
        return (
            self.spacing == other.spacing
            and self.shape == other.shape
            and bool(np.array_equal(self._pixels, other._pixels))
        )

    def __hash__(self):
        return hash((self.shape, self.spacing, self._pixels.tobytes()))

    def __repr__(self):
        return (
            f"FrameMask({self.width}x{self.height}, {int(self._pixels.sum())} px, "
            f"dx={self.spacing.dx_mm}, dy={self.spacing.dy_mm})"
        )


class PlaneKind(str, enum.Enum):
    AXIAL = "axial"
    SAGITTAL = "sagittal"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class Sweep:
    """Ordered masks of one acquisition (one patient, one plane)."""

    patient_id: str
    plane: PlaneKind
    frames: tuple[FrameMask, ...]
    source: str = "phantom"

    def __post_init__(self):
        frames = tuple(self.frames)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "plane", PlaneKind(self.plane))
        if not frames:
            raise ValidationError(f"sweep {self.patient_id}/{self.plane} has no frames")
        first = frames[0]
        for i, fr in enumerate(frames):
            if fr.shape != first.shape:
                raise ValidationError(
                    f"frame {i} has size {fr.width}x{fr.height}, "
                    f"expected {first.width}x{first.height}"
                )
            if fr.spacing != first.spacing:
                raise ValidationError(f"frame {i} spacing {fr.spacing} differs from frame 0")

    def __len__(self):
        return len(self.frames)

    @property
    def spacing(self) -> PixelSpacing:
        return self.frames[0].spacing

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames[0].shape

    def stack(self) -> np.ndarray:
        """All frames as one ``(n_frames, height, width)`` boolean array."""
        return np.stack([f.pixels for f in self.frames])


@dataclass(frozen=True)
class SweepRef:
    """Where a sweep lives on disk: a directory and its ordered mask files."""

    patient_id: str
    plane: PlaneKind
    dir: Path
    files: tuple[str, ...]
    spacing: PixelSpacing | None

    def paths(self) -> list[Path]:
        return [self.dir / f for f in self.files]


@dataclass(frozen=True)
class ObserverSet:
    """One additional observer's ground-truth delineations for a patient."""

    axial_gt: tuple[SweepRef, ...] = ()
    sagittal_gt: tuple[SweepRef, ...] = ()


@dataclass(frozen=True)
class PatientRecord:
    patient_id: str
    axial_pred: tuple[SweepRef, ...] = ()
    sagittal_pred: tuple[SweepRef, ...] = ()
    axial_gt: tuple[SweepRef, ...] = ()
    sagittal_gt: tuple[SweepRef, ...] = ()
    reference_volume_ml: float | None = None
    observers: tuple[ObserverSet, ...] = field(default=())

    def __post_init__(self):
        if self.reference_volume_ml is not None and not self.reference_volume_ml > 0:
            raise ValidationError(
                f"{self.patient_id}: reference_volume_ml must be > 0, "
                f"got {self.reference_volume_ml}"
            )

    def sweeps(self, plane: PlaneKind, kind: str = "pred") -> tuple[SweepRef, ...]:
        return getattr(self, f"{PlaneKind(plane).value}_{kind}")

    @property
    def is_dual_plane(self) -> bool:
        has_ax = bool(self.axial_pred or self.axial_gt)
        has_sag = bool(self.sagittal_pred or self.sagittal_gt)
        return has_ax and has_sag


# --------------------------------------------------------------------------
# manifest parsing

_SWEEP_FIELDS = ("axial_pred", "sagittal_pred", "axial_gt", "sagittal_gt")


def _parse_spacing(value, where: str) -> PixelSpacing | None:
    if value is None:
        return None
    if not isinstance(value, list) or len(value) != 2:
        raise ManifestError(f"{where}.spacing_mm: expected [dx, dy], got {value!r}")
    try:
        return PixelSpacing(value[0], value[1])
    except ValidationError as exc:
        raise ManifestError(f"{where}.spacing_mm: {exc}") from None


def _parse_sweep_ref(obj, where: str, patient_id: str, plane: PlaneKind, base: Path) -> SweepRef:
    if not isinstance(obj, dict):
        raise ManifestError(f"{where}: expected an object, got {type(obj).__name__}")
    d = obj.get("dir")
    if not isinstance(d, str):
        raise ManifestError(f"{where}.dir: expected a string")
    files = obj.get("files")
    if not isinstance(files, list) or not all(isinstance(f, str) for f in files):
        raise ManifestError(f"{where}.files: expected an array of file names")
    if not files:
        raise ManifestError(f"{where}.files: must list at least one mask file")
    spacing = _parse_spacing(obj.get("spacing_mm"), where)
    return SweepRef(patient_id, plane, base / d, tuple(files), spacing)


def _parse_sweep_refs(value, where: str, patient_id: str, plane: PlaneKind, base: Path):
    if value is None:
        return ()
    if isinstance(value, list):
        return tuple(
            _parse_sweep_ref(v, f"{where}[{i}]", patient_id, plane, base)
            for i, v in enumerate(value)
        )
    return (_parse_sweep_ref(value, where, patient_id, plane, base),)


def _check_observer_alignment(rec_gt, obs_gt, where: str):
    if not obs_gt:
        return
    if len(obs_gt) != len(rec_gt):
        raise ManifestError(
            f"{where}: observer lists {len(obs_gt)} sweeps, primary ground truth has {len(rec_gt)}"
        )
    for i, (o, g) in enumerate(zip(obs_gt, rec_gt)):
        if len(o.files) != len(g.files):
            raise ManifestError(
                f"{where}[{i}]: observer has {len(o.files)} frames, "
                f"ground truth has {len(g.files)}"
            )


def parse_manifest(doc: Any, base_dir: str | os.PathLike = ".") -> list[PatientRecord]:
    """Build patient records from an already-decoded manifest document."""
    base = Path(base_dir)
    if not isinstance(doc, dict) or "patients" not in doc:
        raise ManifestError("manifest: expected an object with a 'patients' array")
    patients = doc["patients"]
    if not isinstance(patients, list):
        raise ManifestError("patients: expected an array")

    records = []
    seen = set()
    for i, entry in enumerate(patients):
        where = f"patients[{i}]"
        if not isinstance(entry, dict):
            raise ManifestError(f"{where}: expected an object")
        pid = entry.get("id")
        if not isinstance(pid, str) or not pid:
            raise ManifestError(f"{where}.id: expected a non-empty string")
        if pid in seen:
            raise ManifestError(f"{where}.id: duplicate patient id {pid!r}")
        seen.add(pid)

        sweeps = {}
        for name in _SWEEP_FIELDS:
            plane = PlaneKind(name.split("_")[0])
            sweeps[name] = _parse_sweep_refs(entry.get(name), f"{where}.{name}", pid, plane, base)

        ref_vol = entry.get("reference_volume_ml")
        if ref_vol is not None:
            if isinstance(ref_vol, bool) or not isinstance(ref_vol, (int, float)):
                raise ManifestError(f"{where}.reference_volume_ml: expected a number")
            if not math.isfinite(ref_vol) or ref_vol <= 0:
                raise ManifestError(f"{where}.reference_volume_ml: must be > 0, got {ref_vol}")
            ref_vol = float(ref_vol)

        observers = []
        raw_obs = entry.get("observers")
        if raw_obs is not None:
            if not isinstance(raw_obs, list):
                raise ManifestError(f"{where}.observers: expected an array")
            for j, o in enumerate(raw_obs):
                ow = f"{where}.observers[{j}]"
                if not isinstance(o, dict):
                    raise ManifestError(f"{ow}: expected an object")
                obs = ObserverSet(
                    _parse_sweep_refs(o.get("axial_gt"), f"{ow}.axial_gt", pid, PlaneKind.AXIAL, base),
                    _parse_sweep_refs(
                        o.get("sagittal_gt"), f"{ow}.sagittal_gt", pid, PlaneKind.SAGITTAL, base
                    ),
                )
                _check_observer_alignment(sweeps["axial_gt"], obs.axial_gt, f"{ow}.axial_gt")
                _check_observer_alignment(sweeps["sagittal_gt"], obs.sagittal_gt, f"{ow}.sagittal_gt")
                observers.append(obs)

        records.append(
            PatientRecord(
                patient_id=pid,
                reference_volume_ml=ref_vol,
                observers=tuple(observers),
                **sweeps,
            )
        )
    return records


def load_manifest(path: str | os.PathLike) -> list[PatientRecord]:
    """Read a manifest file and return one :class:`PatientRecord` per patient.

    Raises
    ------
    ManifestError
        On invalid JSON (message carries line and column), on a malformed
        field (message carries the field path) or on duplicate patient ids.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"{path}: cannot read manifest: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return parse_manifest(doc, path.parent)


def _ref_to_json(ref: SweepRef, base: Path) -> dict:
    try:
        d = os.path.relpath(ref.dir, base)
    except ValueError:
        d = str(ref.dir)
    out = {"dir": Path(d).as_posix(), "files": list(ref.files)}
    if ref.spacing is not None:
        out["spacing_mm"] = [ref.spacing.dx_mm, ref.spacing.dy_mm]
    return out


def _refs_to_json(refs: Sequence[SweepRef], base: Path):
    if len(refs) == 1:
        return _ref_to_json(refs[0], base)
    return [_ref_to_json(r, base) for r in refs]


def manifest_document(records: Iterable[PatientRecord], base_dir: str | os.PathLike) -> dict:
    base = Path(base_dir)
    patients = []
    for rec in records:
        entry: dict[str, Any] = {"id": rec.patient_id}
        for name in _SWEEP_FIELDS:
            refs = getattr(rec, name)
            if refs:
                entry[name] = _refs_to_json(refs, base)
        if rec.reference_volume_ml is not None:
            entry["reference_volume_ml"] = rec.reference_volume_ml
        if rec.observers:
            obs = []
            for o in rec.observers:
                oj = {}
                if o.axial_gt:
                    oj["axial_gt"] = _refs_to_json(o.axial_gt, base)
                if o.sagittal_gt:
                    oj["sagittal_gt"] = _refs_to_json(o.sagittal_gt, base)
                obs.append(oj)
            entry["observers"] = obs
        patients.append(entry)
    return {"patients": patients}


def dump_manifest(records: Iterable[PatientRecord], path: str | os.PathLike) -> None:
    """Write records as a manifest; sweep directories are stored relative to it."""
    path = Path(path)
    doc = manifest_document(records, path.parent)
    path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------
# sweeps on disk


def load_sweep(ref: SweepRef) -> Sweep:
    """Read every mask file of ``ref`` in listed order.

    Spacing is never guessed: a reference without spacing raises
    :class:`MissingSpacingError`.
    """
    from .pgm import decode_mask

    where = f"{ref.patient_id}/{ref.plane}"
    if ref.spacing is None:
        raise MissingSpacingError(f"{where}: sweep at {ref.dir} has no spacing_mm")
    if not ref.files:
        raise ValidationError(f"{where}: sweep lists no mask files")
    frames = []
    for i, p in enumerate(ref.paths()):
        try:
            data = p.read_bytes()
        except OSError as exc:
            raise ValidationError(f"{where}: frame {i} ({p}): {exc.strerror}") from None
        try:
            frames.append(decode_mask(data, ref.spacing))
        except ValueError as exc:
            raise type(exc)(f"{where}: frame {i} ({p.name}): {exc}") from None
        if frames[i].shape != frames[0].shape:
            raise ValidationError(
                f"{where}: frame {i} ({p.name}) is {frames[i].width}x{frames[i].height}, "
                f"frame 0 is {frames[0].width}x{frames[0].height}"
            )
    return Sweep(ref.patient_id, ref.plane, tuple(frames), source=str(ref.dir))


def write_sweep(sweep: Sweep, directory: str | os.PathLike, prefix: str = "frame") -> SweepRef:
    """Write each frame as ``<prefix>_NNNN.pgm`` and return the matching reference."""
    from .pgm import encode_mask

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    width = max(4, len(str(len(sweep) - 1)))
    files = []
    for i, fr in enumerate(sweep.frames):
        name = f"{prefix}_{i:0{width}d}.pgm"
        (directory / name).write_bytes(encode_mask(fr))
        files.append(name)
    return SweepRef(sweep.patient_id, sweep.plane, directory, tuple(files), sweep.spacing)
