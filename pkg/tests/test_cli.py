import csv
import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from prostate_volume.cli import (
    AGREEMENT_PAIR_COLUMNS,
    INTEROBSERVER_COLUMNS,
    SEGMENTATION_COLUMNS,
    VOLUME_COLUMNS,
    main,
)
from prostate_volume.core import load_manifest, load_sweep
from prostate_volume.phantom import OUTER_FRACTION

DIAMS = [(50, 40, 30), (36, 30, 42), (45, 45, 45)]


def run(*argv):
    return main([str(a) for a in argv])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def header(path):
    return path.read_text().splitlines()[0].split(",")


def phantom_args(out, diams=DIAMS, *extra):
    args = ["phantom", "--out-dir", out, "--seed", 1, "--spacing-mm", 0.5, 0.5]
    for d in diams:
        args += ["--diameters", *d]
    return args + list(extra)


@pytest.fixture(scope="module")
def clean_cohort(tmp_path_factory):
    out = tmp_path_factory.mktemp("clean")
    assert run(*phantom_args(out, DIAMS, "--observers", 2)) == 0
    return out


@pytest.fixture(scope="module")
def jitter_cohort(tmp_path_factory):
    out = tmp_path_factory.mktemp("jitter")
    args = ["phantom", "--out-dir", out, "--seed", 5, "--count", 12, "--spacing-mm", 0.5, 0.5,
            "--diameter-range", 35, 55, "--jitter-sigma-mm", 2.0]
    assert run(*args) == 0
    return out


class TestPhantom:
    def test_reference_volume(self, tmp_path):
        assert run(*phantom_args(tmp_path, [(50, 40, 30)])) == 0
        recs = load_manifest(tmp_path / "manifest.json")
        assert recs[0].reference_volume_ml == pytest.approx(31.416, abs=1e-3)
        specs = json.loads((tmp_path / "phantom_specs.json").read_text())
        assert specs["phantoms"][0]["frontal_mm"] == 50

    def test_dropout_empties_extremities(self, tmp_path):
        assert run(*phantom_args(tmp_path, [(40, 35, 40)], "--extremity-dropout", 1.0)) == 0
        rec = load_manifest(tmp_path / "manifest.json")[0]
        for refs in (rec.axial_pred, rec.sagittal_pred):
            sw = load_sweep(refs[0])
            u = np.arange(len(sw)) / (len(sw) - 1)
            outer = (u < OUTER_FRACTION) | (u > 1 - OUTER_FRACTION)
            assert all(sw.frames[i].is_empty() for i in np.nonzero(outer)[0])
            assert not sw.frames[len(sw) // 2].is_empty()

    def test_frame_too_small(self, tmp_path, caplog):
        out = tmp_path / "o"
        assert run(*phantom_args(out, [(50, 40, 30)], "--frame-width", 40)) == 1
        assert "frame_width" in caplog.text
        assert not out.exists()

    def test_observers_in_manifest(self, clean_cohort):
        recs = load_manifest(clean_cohort / "manifest.json")
        assert [len(r.observers) for r in recs] == [2, 2, 2]

    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        args = ["--count", 2, "--jitter-sigma-mm", 1.0, "--extremity-dropout", 0.5]
        assert run("phantom", "--out-dir", a, "--seed", 9, *args) == 0
        assert run("phantom", "--out-dir", b, "--seed", 9, *args) == 0
        files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
        assert files == sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
        assert all((a / f).read_bytes() == (b / f).read_bytes() for f in files)

    def test_seed_required(self, tmp_path):
        assert run("phantom", "--out-dir", tmp_path) == 1


class TestEstimate:
    def test_phantom_volumes(self, clean_cohort, tmp_path):
        assert run("estimate", "--manifest", clean_cohort / "manifest.json", "--out-dir", tmp_path) == 0
        rows = read_csv(tmp_path / "volumes.csv")
        assert len(rows) == 3
        for row, d in zip(rows, DIAMS):
            want = d[0] * d[1] * d[2] * np.pi / 6000
            assert float(row["volume_ml"]) == pytest.approx(want, rel=0.02)
            assert row["status"] == "ok"
        doc = json.loads((tmp_path / "volumes.json").read_text())
        assert set(doc["patients"][0]["axial_ellipse"]) >= {"cx_mm", "semi_major_mm", "orientation_rad"}

    def test_missing_sagittal(self, clean_cohort, tmp_path):
        doc = json.loads((clean_cohort / "manifest.json").read_text())
        for p in doc["patients"]:
            for k in ("axial_pred", "sagittal_pred"):
                p[k]["dir"] = str(clean_cohort / p[k]["dir"])
        del doc["patients"][1]["sagittal_pred"]
        m = tmp_path / "m.json"
        m.write_text(json.dumps(doc))
        assert run("estimate", "--manifest", m, "--out-dir", tmp_path / "o") == 2
        rows = read_csv(tmp_path / "o" / "volumes.csv")
        assert [r["status"] for r in rows] == ["ok", "failed", "ok"]
        assert "sagittal" in rows[1]["reason"]
        assert rows[1]["volume_ml"] == ""

    def test_empty_manifest(self, tmp_path):
        m = tmp_path / "m.json"
        m.write_text('{"patients": []}')
        assert run("estimate", "--manifest", m, "--out-dir", tmp_path / "o") == 0
        assert (tmp_path / "o" / "volumes.csv").read_text() == ",".join(VOLUME_COLUMNS) + "\n"

    def test_invalid_manifest(self, tmp_path, caplog):
        m = tmp_path / "m.json"
        m.write_text('{"patients": [{"id": 3}]}')
        assert run("estimate", "--manifest", m, "--out-dir", tmp_path / "o") == 1
        assert "patients[0]" in caplog.text

    def test_missing_manifest(self, tmp_path):
        assert run("estimate", "--manifest", tmp_path / "none.json", "--out-dir", tmp_path / "o") == 1

    def test_jobs_do_not_change_bytes(self, clean_cohort, tmp_path):
        m = clean_cohort / "manifest.json"
        assert run("estimate", "--manifest", m, "--out-dir", tmp_path / "a") == 0
        assert run("estimate", "--manifest", m, "--out-dir", tmp_path / "b", "--jobs", 3) == 0
        for name in ("volumes.csv", "volumes.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestEvaluate:
    def test_identical_prediction(self, clean_cohort, tmp_path):
        assert run("evaluate", "--manifest", clean_cohort / "manifest.json", "--out-dir", tmp_path) == 0
        seg = read_csv(tmp_path / "segmentation_metrics.csv")
        assert len(seg) == 6
        assert all(float(r["dice_mean"]) == 1.0 and float(r["dice_midplane"]) == 1.0 for r in seg)
        assert all(float(r["hd_midplane_mm"]) == 0.0 for r in seg)
        obs = read_csv(tmp_path / "interobserver.csv")
        assert len(obs) == 6 and all(r["n_observers"] == "2" for r in obs)
        assert all(0.8 < float(r["dice_midplane"]) < 1.0 for r in obs)
        assert (tmp_path / "bland_altman.svg").read_text().startswith("<svg")

    def test_bias_zero_when_reference_is_estimate(self, clean_cohort, tmp_path):
        assert run("estimate", "--manifest", clean_cohort / "manifest.json", "--out-dir", tmp_path / "e") == 0
        vols = {r["patient_id"]: float(r["volume_ml"]) for r in read_csv(tmp_path / "e" / "volumes.csv")}
        est = json.loads((tmp_path / "e" / "volumes.json").read_text())
        exact = {p["patient_id"]: p["volume_ml"] for p in est["patients"]}
        doc = json.loads((clean_cohort / "manifest.json").read_text())
        for p in doc["patients"]:
            p["reference_volume_ml"] = exact[p["id"]]
        m = clean_cohort / "self_ref.json"
        m.write_text(json.dumps(doc))
        assert run("evaluate", "--manifest", m, "--out-dir", tmp_path / "v") == 0
        summary = {r["metric"]: r["value"] for r in read_csv(tmp_path / "v" / "agreement.csv")}
        assert float(summary["bias_ml"]) == 0.0
        assert float(summary["loa_low_ml"]) == 0.0 == float(summary["loa_high_ml"])
        assert summary["convention"] == "reference_minus_predicted"
        assert len(vols) == 3

    def test_jittered_error_band(self, jitter_cohort, tmp_path):
        assert run("evaluate", "--manifest", jitter_cohort / "manifest.json", "--out-dir", tmp_path) == 0
        summary = {r["metric"]: r["value"] for r in read_csv(tmp_path / "agreement.csv")}
        assert 0.03 <= float(summary["abs_relerr_median"]) <= 0.20
        seg = read_csv(tmp_path / "segmentation_metrics.csv")
        assert all(float(r["dice_midplane"]) < 1.0 for r in seg)

    def test_reference_without_gt(self, clean_cohort, tmp_path):
        doc = json.loads((clean_cohort / "manifest.json").read_text())
        del doc["patients"][0]["axial_gt"], doc["patients"][0]["sagittal_gt"]
        doc["patients"][0]["observers"] = []
        m = clean_cohort / "partial.json"
        m.write_text(json.dumps(doc))
        assert run("evaluate", "--manifest", m, "--out-dir", tmp_path) == 0
        seg_ids = {r["patient_id"] for r in read_csv(tmp_path / "segmentation_metrics.csv")}
        pair_ids = {r["patient_id"] for r in read_csv(tmp_path / "agreement_pairs.csv")}
        assert "PH000" not in seg_ids and "PH000" in pair_ids

    def test_nothing_evaluable(self, clean_cohort, tmp_path):
        doc = json.loads((clean_cohort / "manifest.json").read_text())
        for p in doc["patients"]:
            for k in ("axial_gt", "sagittal_gt", "reference_volume_ml", "observers"):
                p.pop(k, None)
        m = clean_cohort / "bare.json"
        m.write_text(json.dumps(doc))
        assert run("evaluate", "--manifest", m, "--out-dir", tmp_path) == 1

    def test_golden_headers(self, clean_cohort, tmp_path):
        assert run("evaluate", "--manifest", clean_cohort / "manifest.json", "--out-dir", tmp_path) == 0
        assert header(tmp_path / "segmentation_metrics.csv") == list(SEGMENTATION_COLUMNS)
        assert header(tmp_path / "interobserver.csv") == list(INTEROBSERVER_COLUMNS)
        assert header(tmp_path / "agreement_pairs.csv") == list(AGREEMENT_PAIR_COLUMNS)
        assert header(tmp_path / "agreement.csv") == ["metric", "value"]


def test_frozen_column_names():
    assert VOLUME_COLUMNS[:7] == (
        "patient_id", "frontal_mm", "longitudinal_mm", "sagittal_mm", "volume_ml",
        "axial_midplane", "sagittal_midplane",
    )
    assert SEGMENTATION_COLUMNS == (
        "patient_id", "plane", "sweep", "midplane_index", "dice_mean", "dice_midplane", "hd_midplane_mm",
    )


def split_manifest(path, n_total=62, n_dual=44):
    sweep = {"dir": "x", "files": ["a.pgm"], "spacing_mm": [0.4, 0.4]}
    patients = []
    for i in range(n_total):
        p = {"id": f"P{i:03d}", "axial_pred": sweep}
        if i < n_dual:
            p["sagittal_pred"] = sweep
        patients.append(p)
    path.write_text(json.dumps({"patients": patients}))
    return path


class TestSplit:
    def test_cohort_shape(self, tmp_path):
        m = split_manifest(tmp_path / "m.json")
        assert run("split", "--manifest", m, "--out-dir", tmp_path / "o", "--seed", 42) == 0
        doc = json.loads((tmp_path / "o" / "splits.json").read_text())
        labels = list(doc["assignment"].values())
        assert len(doc["assignment"]) == 62
        assert labels.count("test") == 10
        assert sorted(labels.count(f"fold_{k}") for k in range(4)) == [13, 13, 13, 13]

    def test_byte_identical(self, tmp_path):
        m = split_manifest(tmp_path / "m.json")
        for d in ("a", "b"):
            assert run("split", "--manifest", m, "--out-dir", tmp_path / d, "--seed", 7) == 0
        assert (tmp_path / "a" / "splits.json").read_bytes() == (tmp_path / "b" / "splits.json").read_bytes()

    def test_k_too_large(self, tmp_path):
        m = split_manifest(tmp_path / "m.json", n_total=12, n_dual=12)
        assert run("split", "--manifest", m, "--out-dir", tmp_path / "o", "--seed", 1, "--folds", 5) == 1
        assert not (tmp_path / "o").exists()

    def test_not_enough_dual(self, tmp_path):
        m = split_manifest(tmp_path / "m.json", n_total=20, n_dual=5)
        assert run("split", "--manifest", m, "--out-dir", tmp_path / "o", "--seed", 1) == 1

    def test_seed_required(self, tmp_path):
        m = split_manifest(tmp_path / "m.json")
        assert run("split", "--manifest", m, "--out-dir", tmp_path / "o") == 1


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "prostate_volume", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()


def test_console_script_installed():
    exe = shutil.which("prostate-volume")
    if exe is None:
        pytest.skip("console script not on PATH")
    assert subprocess.run([exe, "--help"], capture_output=True).returncode == 0
