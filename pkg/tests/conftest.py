import numpy as np
import pytest

from prostate_volume.core import FrameMask, PixelSpacing, PlaneKind, Sweep

ONE_MM = PixelSpacing(1.0, 1.0)


def mask_from(rows, spacing=ONE_MM):
    """FrameMask from a list of strings ('#' = foreground) or a 2-D array."""
    if isinstance(rows, (list, tuple)) and rows and isinstance(rows[0], str):
        rows = [[c == "#" for c in r] for r in rows]
    return FrameMask(np.asarray(rows, dtype=bool), spacing)


def disk_pixels(h, w, cy, cx, r):
    yy, xx = np.mgrid[:h, :w]
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r


def sweep_of(frames, plane=PlaneKind.AXIAL, pid="T"):
    return Sweep(pid, plane, tuple(frames))


# acceptance results, filled by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")


@pytest.fixture
def one_mm():
    return ONE_MM
