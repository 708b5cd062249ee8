"""Command-line entry point: ``prostate-volume {estimate,evaluate,split,phantom}``.

Exit codes: 0 success, 1 input or configuration error, 2 some patients failed.
Output rows are sorted by patient id and no timestamps are written, so
identical inputs give byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .core import PatientRecord, PixelSpacing, PlaneKind, Sweep, dump_manifest, load_manifest, load_sweep, write_sweep
from .core import ObserverSet
from .ellipse import AxisPolicy
from .errors import VolumetryError
from .metrics import interobserver, sweep_metrics
from .phantom import PhantomSpec, analytic_volume, frame_size_for, generate_pair, perturb_sweep, validate_geometry
from .plot import bland_altman_svg
from .stats import DIFFERENCE_CONVENTION, bland_altman, holdout_test_selection, kfold_split, relative_error
from .volumetry import DEFAULT_MIN_AREA_PX, estimate_volume, frame_areas

log = logging.getLogger("prostate_volume")

VOLUME_COLUMNS = (
    "patient_id",
    "frontal_mm",
    "longitudinal_mm",
    "sagittal_mm",
    "volume_ml",
    "axial_midplane",
    "sagittal_midplane",
    "status",
    "reason",
)
SEGMENTATION_COLUMNS = (
    "patient_id",
    "plane",
    "sweep",
    "midplane_index",
    "dice_mean",
    "dice_midplane",
    "hd_midplane_mm",
)
INTEROBSERVER_COLUMNS = (
    "patient_id",
    "plane",
    "sweep",
    "n_observers",
    "midplane_index",
    "dice_mean",
    "dice_midplane",
    "hd_midplane_mm",
)
AGREEMENT_PAIR_COLUMNS = (
    "patient_id",
    "predicted_ml",
    "reference_ml",
    "diff_ref_minus_pred_ml",
    "mean_ml",
    "relative_error",
)


class UsageError(Exception):
    """Invalid configuration detected before any output is written."""


# --------------------------------------------------------------------------
# helpers


def _write_csv(path: Path, columns: Sequence[str], rows: Sequence[dict]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _f(v, digits):
    return "" if v is None else f"{v:.{digits}f}"


def _map(fn: Callable, items, jobs: int):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def _prepare_out_dir(path: str | None) -> Path:
    if not path:
        raise UsageError("--out-dir is required")
    out = Path(path)
    if out.exists() and not out.is_dir():
        raise UsageError(f"--out-dir {out} exists and is not a directory")
    return out


def _pick_sweep(refs, min_area_px: int) -> tuple[Sweep, int]:
    """Load candidate sweeps; keep the one whose mid-plane area is largest (first on ties)."""
    best, best_area, best_i = None, -1, -1
    for i, ref in enumerate(refs):
        sw = load_sweep(ref)
        area = int(frame_areas(sw).max()) if len(refs) > 1 else 0
        if best is None or area > best_area:
            best, best_area, best_i = sw, area, i
    return best, best_i


def _estimate_patient(rec: PatientRecord, cfg) -> dict:
    row = {"patient_id": rec.patient_id}
    try:
        if not rec.axial_pred:
            raise VolumetryError("missing axial predicted sweep")
        if not rec.sagittal_pred:
            raise VolumetryError("missing sagittal predicted sweep")
        if cfg.axial_sweep is not None or cfg.sagittal_sweep is not None:
            ax_i = cfg.axial_sweep or 0
            sag_i = cfg.sagittal_sweep or 0
            if ax_i >= len(rec.axial_pred) or sag_i >= len(rec.sagittal_pred):
                raise VolumetryError("requested sweep index out of range")
            ax, sag = load_sweep(rec.axial_pred[ax_i]), load_sweep(rec.sagittal_pred[sag_i])
        else:
            ax, ax_i = _pick_sweep(rec.axial_pred, cfg.min_area_px)
            sag, sag_i = _pick_sweep(rec.sagittal_pred, cfg.min_area_px)
        est = estimate_volume(ax, sag, cfg.min_area_px, cfg.axis_policy)
    except VolumetryError as exc:
        row.update(status="failed", reason=str(exc))
        return row
    row.update(
        status="ok",
        reason="",
        estimate=est,
        axial_sweep=ax_i,
        sagittal_sweep=sag_i,
    )
    return row


def _volume_csv_row(r: dict) -> dict:
    est = r.get("estimate")
    out = {"patient_id": r["patient_id"], "status": r["status"], "reason": r["reason"]}
    if est is not None:
        d = est.diameters
        out.update(
            frontal_mm=_f(d.frontal_mm, 3),
            longitudinal_mm=_f(d.longitudinal_mm, 3),
            sagittal_mm=_f(d.sagittal_mm, 3),
            volume_ml=_f(est.volume_ml, 2),
            axial_midplane=est.axial_midplane_index,
            sagittal_midplane=est.sagittal_midplane_index,
        )
    return out


def _volume_json_row(r: dict) -> dict:
    out = {"patient_id": r["patient_id"], "status": r["status"]}
    if r["reason"]:
        out["reason"] = r["reason"]
    est = r.get("estimate")
    if est is not None:
        out.update(est.as_dict())
        out["axial_sweep"] = r["axial_sweep"]
        out["sagittal_sweep"] = r["sagittal_sweep"]
    return out


def _config_json(cfg) -> dict:
    return {
        "min_area_px": cfg.min_area_px,
        "axis_policy": AxisPolicy(cfg.axis_policy).value,
        "midplane_source": cfg.midplane_source,
    }


# --------------------------------------------------------------------------
# commands


def cmd_estimate(cfg) -> int:
    out = _prepare_out_dir(cfg.out_dir)
    records = load_manifest(cfg.manifest)
    results = _map(lambda rec: _estimate_patient(rec, cfg), records, cfg.jobs)
    results.sort(key=lambda r: r["patient_id"])
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "volumes.csv", VOLUME_COLUMNS, [_volume_csv_row(r) for r in results])
    _write_json(
        out / "volumes.json",
        {"config": _config_json(cfg), "patients": [_volume_json_row(r) for r in results]},
    )
    failed = [r for r in results if r["status"] != "ok"]
    for r in failed:
        log.warning("%s: %s", r["patient_id"], r["reason"])
    return 2 if failed else 0


def _metrics_row(pid, plane, i, m, extra=None) -> dict:
    row = {
        "patient_id": pid,
        "plane": str(plane),
        "sweep": i,
        "midplane_index": m.midplane_index,
        "dice_mean": _f(m.dice_mean, 4),
        "dice_midplane": _f(m.dice_midplane, 4),
        "hd_midplane_mm": _f(m.hd_midplane_mm, 3),
    }
    row.update(extra or {})
    return row


def _evaluate_patient(rec: PatientRecord, cfg) -> dict:
    seg_rows, obs_rows, errors = [], [], []
    for plane in PlaneKind:
        preds = rec.sweeps(plane, "pred")
        gts = rec.sweeps(plane, "gt")
        if gts and preds and len(gts) != len(preds):
            errors.append(f"{plane}: {len(preds)} predicted sweeps but {len(gts)} ground-truth sweeps")
            continue
        for i, gref in enumerate(gts):
            try:
                gt = load_sweep(gref)
                if preds:
                    m = sweep_metrics(load_sweep(preds[i]), gt, cfg.min_area_px, cfg.midplane_source)
                    seg_rows.append(_metrics_row(rec.patient_id, plane, i, m))
                obs_refs = [o.axial_gt if plane is PlaneKind.AXIAL else o.sagittal_gt for o in rec.observers]
                obs_refs = [o[i] for o in obs_refs if len(o) > i]
                if obs_refs:
                    m = interobserver([load_sweep(o) for o in obs_refs], gt, cfg.min_area_px)
                    obs_rows.append(
                        _metrics_row(rec.patient_id, plane, i, m, {"n_observers": len(obs_refs)})
                    )
            except VolumetryError as exc:
                errors.append(f"{plane} sweep {i}: {exc}")
    pair = None
    if rec.reference_volume_ml is not None:
        r = _estimate_patient(rec, cfg)
        if r["status"] == "ok":
            pair = (r["estimate"].volume_ml, rec.reference_volume_ml)
        else:
            errors.append(f"volume: {r['reason']}")
    return {"patient_id": rec.patient_id, "seg": seg_rows, "obs": obs_rows, "pair": pair, "errors": errors}


def cmd_evaluate(cfg) -> int:
    out = _prepare_out_dir(cfg.out_dir)
    records = load_manifest(cfg.manifest)
    results = _map(lambda rec: _evaluate_patient(rec, cfg), records, cfg.jobs)
    results.sort(key=lambda r: r["patient_id"])

    seg = [row for r in results for row in r["seg"]]
    obs = [row for r in results for row in r["obs"]]
    pairs = [(r["patient_id"], r["pair"]) for r in results if r["pair"] is not None]
    if not seg and not obs and not pairs:
        raise UsageError("no evaluable patients: need ground-truth sweeps or reference volumes")

    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "segmentation_metrics.csv", SEGMENTATION_COLUMNS, seg)
    if obs:
        _write_csv(out / "interobserver.csv", INTEROBSERVER_COLUMNS, obs)
    if len(pairs) >= 2:
        report = bland_altman([p for _, p in pairs], ids=[pid for pid, _ in pairs])
        summary = report.summary()
        with open(out / "agreement.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["metric", "value"])
            for k, v in summary.items():
                w.writerow([k, v if isinstance(v, (str, int)) else f"{v:.6f}"])
        _write_csv(
            out / "agreement_pairs.csv",
            AGREEMENT_PAIR_COLUMNS,
            [
                {
                    "patient_id": pid,
                    "predicted_ml": _f(p, 4),
                    "reference_ml": _f(r, 4),
                    "diff_ref_minus_pred_ml": _f(r - p, 4),
                    "mean_ml": _f((r + p) / 2.0, 4),
                    "relative_error": _f(relative_error(p, r), 6),
                }
                for pid, (p, r) in pairs
            ],
        )
        (out / "bland_altman.svg").write_text(
            bland_altman_svg(report, title="Predicted vs reference prostate volume"),
            encoding="utf-8",
        )
    elif pairs:
        log.warning("only one patient has a reference volume; agreement analysis skipped")

    failed = [r for r in results if r["errors"]]
    for r in failed:
        for e in r["errors"]:
            log.warning("%s: %s", r["patient_id"], e)
    return 2 if failed else 0


def cmd_split(cfg) -> int:
    if cfg.folds < 2:
        raise UsageError("--folds must be >= 2")
    if cfg.test_count < 0:
        raise UsageError("--test-count must be >= 0")
    out = _prepare_out_dir(cfg.out_dir)
    records = load_manifest(cfg.manifest)
    test, train = holdout_test_selection(records, cfg.test_count, cfg.seed)
    if cfg.folds > len(train):
        raise UsageError(f"--folds {cfg.folds} exceeds the {len(train)} training patients")
    folds = kfold_split(train, cfg.folds, cfg.seed)
    assignment = {pid: "test" for pid in test}
    assignment.update({pid: f"fold_{k}" for pid, k in folds.assignment.items()})
    out.mkdir(parents=True, exist_ok=True)
    _write_json(
        out / "splits.json",
        {
            "seed": cfg.seed,
            "folds": cfg.folds,
            "test_count": cfg.test_count,
            "assignment": assignment,
        },
    )
    return 0


def _phantom_specs(cfg, rng) -> list[PhantomSpec]:
    spacing = PixelSpacing(*cfg.spacing_mm)
    if cfg.diameters:
        diams = [tuple(d) for d in cfg.diameters]
    else:
        lo, hi = cfg.diameter_range
        if not (0 < lo <= hi):
            raise UsageError("--diameter-range needs 0 < LO <= HI")
        diams = [tuple(rng.uniform(lo, hi, 3)) for _ in range(cfg.count)]
    specs = []
    for i, d in enumerate(diams):
        w, h = frame_size_for(d, spacing)
        specs.append(
            PhantomSpec(
                *d,
                spacing=spacing,
                slice_step_mm=cfg.slice_step_mm,
                frame_width=cfg.frame_width or w,
                frame_height=cfg.frame_height or h,
                jitter_sigma_mm=cfg.jitter_sigma_mm,
                extremity_dropout=cfg.extremity_dropout,
                seed=int(rng.integers(2**31)),
            )
        )
    return specs


def cmd_phantom(cfg) -> int:
    out = _prepare_out_dir(cfg.out_dir)
    if cfg.count < 0 or cfg.observers < 0:
        raise UsageError("--count and --observers must be >= 0")
    rng = np.random.default_rng(cfg.seed)
    try:
        specs = _phantom_specs(cfg, rng)
        for s in specs:
            validate_geometry(s)
    except VolumetryError as exc:
        raise UsageError(str(exc)) from None

    records = []
    for i, spec in enumerate(specs):
        pid = f"PH{i:03d}"
        base = out / pid
        gt = generate_pair(spec, pid)
        refs = {}
        for plane, clean in zip(PlaneKind, gt):
            noisy = perturb_sweep(
                clean, spec.jitter_sigma_mm, spec.extremity_dropout, spec.seed + (plane is PlaneKind.SAGITTAL)
            )
            refs[f"{plane}_gt"] = (write_sweep(clean, base / f"{plane}_gt"),)
            refs[f"{plane}_pred"] = (write_sweep(noisy, base / f"{plane}_pred"),)
        observers = []
        for k in range(cfg.observers):
            obs = {}
            for j, (plane, clean) in enumerate(zip(PlaneKind, gt)):
                o = perturb_sweep(clean, cfg.observer_jitter_mm, 0.0, spec.seed + 1000 * (k + 1) + j)
                obs[f"{plane}_gt"] = (write_sweep(o, base / f"observer_{k}" / f"{plane}_gt"),)
            observers.append(ObserverSet(**obs))
        records.append(
            PatientRecord(
                patient_id=pid,
                reference_volume_ml=analytic_volume(spec),
                observers=tuple(observers),
                **refs,
            )
        )
    out.mkdir(parents=True, exist_ok=True)
    dump_manifest(records, out / "manifest.json")
    _write_json(
        out / "phantom_specs.json",
        {
            "seed": cfg.seed,
            "phantoms": [
                {
                    "patient_id": f"PH{i:03d}",
                    "frontal_mm": s.frontal_mm,
                    "longitudinal_mm": s.longitudinal_mm,
                    "sagittal_mm": s.sagittal_mm,
                    "spacing_mm": [s.spacing.dx_mm, s.spacing.dy_mm],
                    "slice_step_mm": s.slice_step_mm,
                    "frame_width": s.frame_width,
                    "frame_height": s.frame_height,
                    "jitter_sigma_mm": s.jitter_sigma_mm,
                    "extremity_dropout": s.extremity_dropout,
                    "seed": s.seed,
                    "analytic_volume_ml": analytic_volume(s),
                }
                for i, s in enumerate(specs)
            ],
        },
    )
    return 0


# --------------------------------------------------------------------------
# argument parsing


def _positive_int(v):
    i = int(v)
    if i < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return i


def _positive_float(v):
    f = float(v)
    if not (math.isfinite(f) and f > 0):
        raise argparse.ArgumentTypeError(f"must be > 0, got {v}")
    return f


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", required=True, help="directory for output files")
    common.add_argument("--jobs", type=_positive_int, default=1, help="patients processed in parallel")
    common.add_argument("--min-area-px", type=int, default=DEFAULT_MIN_AREA_PX)
    common.add_argument(
        "--axis-policy",
        choices=[p.value for p in AxisPolicy],
        default=AxisPolicy.ORIENTATION_QUADRANT.value,
    )
    common.add_argument(
        "--midplane-source", choices=["ground-truth", "prediction"], default="ground-truth"
    )
    common.add_argument("-v", "--verbose", action="store_true")

    with_manifest = argparse.ArgumentParser(add_help=False)
    with_manifest.add_argument("--manifest", required=True, help="cohort manifest (JSON)")

    p = argparse.ArgumentParser(prog="prostate-volume", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("estimate", parents=[common, with_manifest], help="volume per patient")
    e.add_argument("--seed", type=int, default=0, help="unused; accepted for uniformity")
    e.add_argument("--axial-sweep", type=int, default=None, help="use this axial sweep index")
    e.add_argument("--sagittal-sweep", type=int, default=None, help="use this sagittal sweep index")
    e.set_defaults(func=cmd_estimate)

    ev = sub.add_parser("evaluate", parents=[common, with_manifest], help="metrics and agreement")
    ev.add_argument("--seed", type=int, default=0, help="unused; accepted for uniformity")
    ev.set_defaults(func=cmd_evaluate, axial_sweep=None, sagittal_sweep=None)

    s = sub.add_parser("split", parents=[common, with_manifest], help="test hold-out and k folds")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--folds", type=int, default=4)
    s.add_argument("--test-count", type=int, default=10)
    s.set_defaults(func=cmd_split)

    ph = sub.add_parser("phantom", parents=[common], help="write a synthetic ellipsoid cohort")
    ph.add_argument("--seed", type=int, required=True)
    ph.add_argument("--count", type=int, default=3)
    ph.add_argument(
        "--diameters",
        type=_positive_float,
        nargs=3,
        action="append",
        metavar=("FRONTAL", "LONGITUDINAL", "SAGITTAL"),
        help="explicit diameters in mm; repeat for several phantoms (overrides --count)",
    )
    ph.add_argument("--diameter-range", type=float, nargs=2, default=(25.0, 70.0), metavar=("LO", "HI"))
    ph.add_argument("--spacing-mm", type=_positive_float, nargs=2, default=(0.4, 0.4), metavar=("DX", "DY"))
    ph.add_argument("--slice-step-mm", type=_positive_float, default=1.0)
    ph.add_argument("--frame-width", type=_positive_int, default=None)
    ph.add_argument("--frame-height", type=_positive_int, default=None)
    ph.add_argument("--jitter-sigma-mm", type=float, default=0.0)
    ph.add_argument("--extremity-dropout", type=float, default=0.0)
    ph.add_argument("--observers", type=int, default=0, help="extra observer delineation sets")
    ph.add_argument("--observer-jitter-mm", type=float, default=1.0)
    ph.set_defaults(func=cmd_phantom)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        cfg = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    logging.basicConfig(
        level=logging.INFO if cfg.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    if cfg.min_area_px < 1:
        log.error("--min-area-px must be >= 1")
        return 1
    try:
        return cfg.func(cfg)
    except (UsageError, VolumetryError, OSError) as exc:
        log.error("%s", exc)
        return 1
