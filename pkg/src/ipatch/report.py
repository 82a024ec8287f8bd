"""Delimited reports and rendered figures for fitting and refinement runs.

Everything here writes files: a CSV holding the per-iteration rows the
refinement loop produced, and PNG figures next to it (deviation trend over
the iterations, per-patch fitting residuals, a histogram of the measured
deviations).  The figures use the non-interactive Agg backend so they work
in headless runs.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import IoError

__all__ = [
    "REPORT_COLUMNS",
    "PATCH_COLUMNS",
    "write_report_csv",
    "write_patches_csv",
    "write_deviation_csv",
    "plot_trend",
    "plot_patch_rms",
    "plot_deviation_histogram",
    "render_report",
]

REPORT_COLUMNS = ("iteration", "patch_count", "avg_pct", "max_pct", "worst_boundary_pct")
PATCH_COLUMNS = ("face_id", "samples", "avg_pct", "max_pct")
_PERCENTILES = (0, 25, 50, 75, 90, 99, 100)


def _ensure_dir(directory) -> Path:
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create report directory {directory}: {exc}") from exc
    return directory


def write_report_csv(rows, path) -> None:
    """One CSV row per refinement iteration, columns in a fixed order."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
            writer.writeheader()
            for row in rows:
                writer.writerow({k: row.get(k, "") for k in REPORT_COLUMNS})
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def write_patches_csv(measures, path) -> None:
    """One CSV row per measured patch, keyed by face id."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=PATCH_COLUMNS)
            writer.writeheader()
            for fid in sorted(measures):
                m = measures[fid]
                writer.writerow(
                    {
                        "face_id": m.face_id,
                        "samples": m.samples,
                        "avg_pct": m.avg_pct,
                        "max_pct": m.max_pct,
                    }
                )
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def write_deviation_csv(deviations, path) -> None:
    """Summary statistics of a deviation vector as (stat, value) rows."""
    d = np.asarray(deviations, dtype=np.float64)
    rows = [("count", len(d)), ("mean", float(d.mean()))]
    rows += [(f"p{q}", float(np.percentile(d, q))) for q in _PERCENTILES]
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("stat", "value"))
            writer.writerows(rows)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def plot_trend(rows, path) -> None:
    """Average and maximum deviation (% of bbox diagonal) per iteration."""
    it = [row["iteration"] for row in rows]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(it, [row["avg_pct"] for row in rows], "o-", label="average")
    ax.plot(it, [row["max_pct"] for row in rows], "s-", label="maximum")
    ax.set_xlabel("refinement iteration")
    ax.set_ylabel("deviation [% of bbox diagonal]")
    ax.set_xticks(it)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_patch_rms(patchwork, path) -> None:
    """Fitting residual (RMS of the distance-like field) per patch."""
    ids = [fp.face_id for fp in patchwork]
    rms = [fp.rms for fp in patchwork]
    fig, ax = plt.subplots(figsize=(max(6.0, 0.25 * len(ids)), 4.0))
    ax.bar(range(len(ids)), rms, color="#3572b0")
    ax.set_xticks(range(len(ids)))
    ax.set_xticklabels([str(i) for i in ids], rotation=90 if len(ids) > 24 else 0)
    ax.set_xlabel("face id")
    ax.set_ylabel("fit RMS [model units]")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_deviation_histogram(deviations, path, bins: int = 40) -> None:
    """Distribution of the per-vertex deviations from the target mesh."""
    d = np.asarray(deviations, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.hist(d, bins=bins, color="#3572b0", edgecolor="white")
    ax.set_xlabel("deviation [model units]")
    ax.set_ylabel("vertex count")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_report(directory, rows=None, patchwork=None, measures=None, deviations=None) -> list:
    """Write whatever report artifacts the given data supports.

    Returns the list of written paths: ``report.csv`` and ``trend.png``
    when iteration rows are given, ``patches.csv`` for per-patch measures,
    ``patch_rms.png`` for a patchwork and ``deviation_hist.png`` for a
    vector of deviations.
    """
    directory = _ensure_dir(directory)
    written = []
    if rows:
        csv_path = directory / "report.csv"
        write_report_csv(rows, csv_path)
        written.append(csv_path)
        trend_path = directory / "trend.png"
        plot_trend(rows, trend_path)
        written.append(trend_path)
    if measures:
        patches_path = directory / "patches.csv"
        write_patches_csv(measures, patches_path)
        written.append(patches_path)
    if patchwork is not None and len(patchwork):
        rms_path = directory / "patch_rms.png"
        plot_patch_rms(patchwork, rms_path)
        written.append(rms_path)
    if deviations is not None and len(deviations):
        dev_csv = directory / "deviations.csv"
        write_deviation_csv(deviations, dev_csv)
        written.append(dev_csv)
        hist_path = directory / "deviation_hist.png"
        plot_deviation_histogram(deviations, hist_path)
        written.append(hist_path)
    return [str(p) for p in written]
