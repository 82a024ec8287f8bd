"""CSV and figure rendering for fit/refinement reports."""

import csv

import numpy as np
import pytest

from ipatch.errors import IoError
from ipatch.refine import PatchMeasure
from ipatch.report import (
    render_report,
    write_deviation_csv,
    write_patches_csv,
    write_report_csv,
)

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"

ROWS = [
    {"iteration": 0, "patch_count": 3, "avg_pct": 0.31, "max_pct": 0.92,
     "worst_boundary_pct": 0.05},
    {"iteration": 1, "patch_count": 7, "avg_pct": 0.12, "max_pct": 0.28,
     "worst_boundary_pct": 0.02},
]


def _measure(fid, avg_pct, max_pct, samples):
    return PatchMeasure(face_id=fid, avg=avg_pct / 100, max=max_pct / 100,
                        avg_pct=avg_pct, max_pct=max_pct, samples=samples,
                        boundary_pct={})


def test_report_csv_rows_roundtrip(tmp_path):
    path = tmp_path / "report.csv"
    write_report_csv(ROWS, path)
    with open(path, newline="") as fh:
        back = list(csv.DictReader(fh))
    assert len(back) == 2
    assert back[0]["iteration"] == "0"
    assert float(back[1]["max_pct"]) == pytest.approx(0.28)


def test_report_csv_tolerates_missing_columns(tmp_path):
    path = tmp_path / "report.csv"
    write_report_csv([{"iteration": 0, "patch_count": 1}], path)
    with open(path, newline="") as fh:
        (row,) = list(csv.DictReader(fh))
    assert row["avg_pct"] == ""


def test_patches_csv_sorted_by_face_id(tmp_path):
    measures = {
        9: _measure(9, 0.4, 0.9, 120),
        2: _measure(2, 0.1, 0.2, 300),
    }
    path = tmp_path / "patches.csv"
    write_patches_csv(measures, path)
    with open(path, newline="") as fh:
        back = list(csv.DictReader(fh))
    assert [r["face_id"] for r in back] == ["2", "9"]
    assert [int(r["samples"]) for r in back] == [300, 120]


def test_deviation_csv_statistics(tmp_path):
    rng = np.random.default_rng(7)
    dev = rng.uniform(0.0, 2.0, size=500)
    path = tmp_path / "deviations.csv"
    write_deviation_csv(dev, path)
    with open(path, newline="") as fh:
        stats = {row["stat"]: float(row["value"]) for row in csv.DictReader(fh)}
    assert stats["count"] == 500
    assert stats["mean"] == pytest.approx(dev.mean())
    assert stats["p0"] == pytest.approx(dev.min())
    assert stats["p100"] == pytest.approx(dev.max())
    assert stats["p50"] == pytest.approx(np.median(dev))


def test_render_report_writes_everything_given(tmp_path):
    measures = {1: _measure(1, 0.2, 0.5, 64)}
    dev = np.linspace(0.0, 1.0, 100)
    written = render_report(tmp_path, rows=ROWS, measures=measures,
                            deviations=dev)
    names = {str(p).rsplit("/", 1)[-1] for p in written}
    assert {"report.csv", "trend.png", "patches.csv",
            "deviations.csv", "deviation_hist.png"} <= names
    for p in written:
        assert (tmp_path / str(p).rsplit("/", 1)[-1]).exists()
        if str(p).endswith(".png"):
            with open(p, "rb") as fh:
                assert fh.read(8) == PNG_MAGIC


def test_render_report_skips_absent_inputs(tmp_path):
    written = render_report(tmp_path, rows=ROWS)
    names = {str(p).rsplit("/", 1)[-1] for p in written}
    assert names == {"report.csv", "trend.png"}
    assert not (tmp_path / "patches.csv").exists()


def test_unwritable_path_raises_io_error(tmp_path):
    with pytest.raises(IoError):
        write_report_csv(ROWS, tmp_path / "missing_dir" / "report.csv")
