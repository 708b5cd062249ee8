"""Cohort statistics and dataset partitioning.

Differences are always ``reference - predicted``: a positive bias means the
pipeline underestimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import PatientRecord, Sweep
from .errors import DomainError, InsufficientDataError, ValidationError

__all__ = [
    "LOA_Z",
    "DIFFERENCE_CONVENTION",
    "AgreementReport",
    "FoldAssignment",
    "bland_altman",
    "relative_error",
    "kfold_split",
    "sample_training_frames",
    "holdout_test_selection",
]

LOA_Z = 1.96
DIFFERENCE_CONVENTION = "reference_minus_predicted"
TRAINING_FRAME_STRIDE = 5


@dataclass(frozen=True)
class AgreementReport:
    pairs: tuple[tuple[str, float, float], ...]
    bias_ml: float
    sd_ml: float
    loa_low_ml: float
    loa_high_ml: float
    relative_errors: tuple[float, ...]
    diff_p2_5_ml: float
    diff_p97_5_ml: float

    @property
    def differences(self) -> np.ndarray:
        return np.array([r - p for _, p, r in self.pairs])

    @property
    def means(self) -> np.ndarray:
        return np.array([(r + p) / 2.0 for _, p, r in self.pairs])

    def summary(self) -> dict:
        """Flat summary including empirical percentiles of the relative error."""
        rel = np.asarray(self.relative_errors)
        return {
            "convention": DIFFERENCE_CONVENTION,
            "n": len(self.pairs),
            "bias_ml": self.bias_ml,
            "sd_ml": self.sd_ml,
            "loa_low_ml": self.loa_low_ml,
            "loa_high_ml": self.loa_high_ml,
            "diff_p2_5_ml": self.diff_p2_5_ml,
            "diff_p97_5_ml": self.diff_p97_5_ml,
            "relerr_median": float(np.median(rel)),
            "relerr_p2_5": float(np.percentile(rel, 2.5)),
            "relerr_p97_5": float(np.percentile(rel, 97.5)),
            "abs_relerr_median": float(np.median(np.abs(rel))),
        }


def relative_error(predicted_ml: float, reference_ml: float) -> float:
    """``(reference - predicted) / mean(reference, predicted)``."""
    if not (predicted_ml > 0 and reference_ml > 0):
        raise DomainError(
            f"volumes must be positive, got predicted={predicted_ml}, reference={reference_ml}"
        )
    return (reference_ml - predicted_ml) / ((reference_ml + predicted_ml) / 2.0)


def bland_altman(pairs, ids: Sequence[str] | None = None) -> AgreementReport:
    """Bland-Altman agreement between predicted and reference volumes.

    Parameters
    ----------
    pairs : sequence of (predicted_ml, reference_ml)
    ids : optional patient ids, one per pair

    Notes
    -----
    Uses the sample standard deviation (n - 1) and limits
    ``bias +/- 1.96 sd``. Empirical 2.5/97.5 percentiles of the differences
    are reported alongside.
    """
    pairs = [(float(p), float(r)) for p, r in pairs]
    if len(pairs) < 2:
        raise InsufficientDataError(f"Bland-Altman needs at least 2 pairs, got {len(pairs)}")
    if ids is None:
        ids = [str(i) for i in range(len(pairs))]
    elif len(ids) != len(pairs):
        raise ValidationError("ids and pairs differ in length")
    for p, r in pairs:
        if not (p > 0 and r > 0) or not (math.isfinite(p) and math.isfinite(r)):
            raise DomainError(f"volumes must be positive and finite, got ({p}, {r})")

    d = np.array([r - p for p, r in pairs])
    bias = float(d.mean())
    sd = float(d.std(ddof=1))
    return AgreementReport(
        pairs=tuple((str(i), p, r) for i, (p, r) in zip(ids, pairs)),
        bias_ml=bias,
        sd_ml=sd,
        loa_low_ml=bias - LOA_Z * sd,
        loa_high_ml=bias + LOA_Z * sd,
        relative_errors=tuple(relative_error(p, r) for p, r in pairs),
        diff_p2_5_ml=float(np.percentile(d, 2.5)),
        diff_p97_5_ml=float(np.percentile(d, 97.5)),
    )


@dataclass(frozen=True)
class FoldAssignment:
    fold_count: int
    assignment: dict[str, int]

    def folds(self) -> list[list[str]]:
        out = [[] for _ in range(self.fold_count)]
        for pid, k in sorted(self.assignment.items()):
            out[k].append(pid)
        return out


def kfold_split(patient_ids: Sequence[str], k: int, seed: int) -> FoldAssignment:
    """Patient-level k-fold assignment.

    Ids are sorted, shuffled with ``seed`` and dealt round-robin, so fold
    sizes differ by at most one and input order does not matter.
    """
    ids = list(patient_ids)
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate patient ids")
    if k < 2:
        raise ValidationError(f"k must be >= 2, got {k}")
    if len(ids) < k:
        raise ValidationError(f"cannot split {len(ids)} patients into {k} folds")
    order = np.random.default_rng(seed).permutation(len(ids))
    ids.sort()
    return FoldAssignment(k, {ids[j]: i % k for i, j in enumerate(order)})


def sample_training_frames(sweep: Sweep | int) -> list[int]:
    """Every fifth frame index, starting at 0."""
    n = sweep if isinstance(sweep, int) else len(sweep)
    return list(range(0, n, TRAINING_FRAME_STRIDE))


def holdout_test_selection(
    patients: Sequence[PatientRecord], n: int, seed: int
) -> tuple[list[str], list[str]]:
    """Draw ``n`` test patients among those with both axial and sagittal sweeps.

    Returns ``(test_ids, train_ids)``, both sorted; single-plane patients
    always train.
    """
    if n < 0:
        raise ValidationError("n must be >= 0")
    dual = sorted(p.patient_id for p in patients if p.is_dual_plane)
    if len(dual) < n:
        raise ValidationError(f"need {n} dual-plane patients for the test set, have {len(dual)}")
    rng = np.random.default_rng(seed)
    test = set(dual[i] for i in rng.choice(len(dual), size=n, replace=False)) if n else set()
    train = sorted(p.patient_id for p in patients if p.patient_id not in test)
    return sorted(test), train
