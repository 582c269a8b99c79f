"""Annotated log-log figures from delimited experiment tables.

A figure job names one CSV file, an x and a y column, optional grouping and
row-filter columns, and an output image path.  Rendering draws one log-log
axes per group, annotates each with the least-squares slope of its trailing
points, and optionally adds reference-slope guide lines.
"""
from __future__ import annotations

import csv
import json
import sys
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__version__ = "0.1.0"
__all__ = ["PlotJob", "fit_slope", "load_job", "render"]

_JOB_KEYS = {"input", "output", "x", "y", "group_by", "guides", "where"}
_FIT_POINTS = 3
_SUFFIXES = (".png", ".svg")


@dataclass
class PlotJob:
    """One figure request: where the table is, what to plot, where to write."""

    x: str
    y: str
    input: str = ""
    output: str = ""
    group_by: list = field(default_factory=list)
    guides: list = field(default_factory=list)
    where: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.x or not self.y:
            raise ValueError("a job needs both an x and a y column")
        self.x = str(self.x)
        self.y = str(self.y)
        self.group_by = [str(g) for g in self.group_by]
        self.guides = [float(g) for g in self.guides]
        self.where = {str(k): str(v) for k, v in self.where.items()}


def load_job(path, input=None, output=None):
    """Read a job description from a JSON object file.

    ``input`` and ``output`` override the corresponding JSON fields, so the
    same job file can be reused across tables.  Unknown fields are rejected.
    """
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("job description must be a JSON object")
    unknown = sorted(set(data) - _JOB_KEYS)
    if unknown:
        raise ValueError(f"unknown job fields: {unknown}")
    for key in ("x", "y"):
        if key not in data:
            raise ValueError(f"job description is missing {key!r}")
    if input is not None:
        data["input"] = input
    if output is not None:
        data["output"] = output
    return PlotJob(**data)


def fit_slope(x, y, points=_FIT_POINTS):
    """Least-squares log-log slope of the trailing ``points`` samples.

    The trailing rows of a refinement table are the asymptotic regime, so
    the fit reads the observed order there.  Returns None when fewer than
    two samples are available.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        return None
    k = min(int(points), x.size)
    return float(np.polyfit(np.log(x[-k:]), np.log(y[-k:]), 1)[0])


def _read_groups(job):
    with open(job.input, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        needed = [job.x, job.y, *job.group_by, *job.where]
        missing = [c for c in needed if c not in header]
        if missing:
            raise ValueError(f"column(s) {missing} not found in {job.input} (header: {header})")
        rows = list(reader)
    rows = [r for r in rows if all(r[k] == v for k, v in job.where.items())]
    groups = {}
    for row in rows:
        try:
            xv = float(row[job.x])
            yv = float(row[job.y])
        except (TypeError, ValueError):
            continue  # blank or non-numeric cell: nothing to place on the axes
        if xv <= 0.0 or yv <= 0.0:
            continue  # log-log scales carry positive values only
        key = ", ".join(f"{g}={row[g]}" for g in job.group_by)
        groups.setdefault(key, []).append((xv, yv))
    return groups


def render(job: PlotJob):
    """Draw the figure described by ``job`` and return the fitted slopes.

    One log-log axes is drawn per group (row order preserved within each
    group), annotated with the trailing-point slope to two decimals.  The
    return value maps the group label to its fitted slope.  When filtering
    leaves nothing to plot, a warning is printed, no file is written, and an
    empty mapping is returned.
    """
    if not job.output.endswith(_SUFFIXES):
        raise ValueError(f"output path must end in one of {_SUFFIXES}")
    groups = _read_groups(job)
    if not groups:
        print(
            f"warning: no plottable rows in {job.input} after filtering; "
            f"not writing {job.output}",
            file=sys.stderr,
        )
        return {}
    slopes = {}
    fig, axes = plt.subplots(
        1, len(groups), figsize=(4.8 * len(groups), 3.6), squeeze=False
    )
    for ax, key in zip(axes[0], sorted(groups)):
        pts = groups[key]
        x = np.array([p[0] for p in pts])
        y = np.array([p[1] for p in pts])
        ax.loglog(x, y, "o-", color="tab:blue", label=job.y)
        for guide in job.guides:
            ax.loglog(
                x,
                y[-1] * (x / x[-1]) ** guide,
                "--",
                color="gray",
                linewidth=0.8,
                label=f"slope {guide:g}",
            )
        slope = fit_slope(x, y)
        slopes[key] = slope
        if slope is not None:
            ax.text(
                0.04,
                0.06,
                f"slope {slope:.2f}",
                transform=ax.transAxes,
                fontsize=10,
                bbox={"boxstyle": "round", "facecolor": "white", "alpha": 0.8},
            )
        ax.set_xlabel(job.x)
        ax.set_ylabel(job.y)
        if key:
            ax.set_title(key, fontsize=10)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=8)
    fig.tight_layout()
    if job.output.endswith(".svg"):
        fig.savefig(job.output, metadata={"Date": None})
    else:
        fig.savefig(job.output, dpi=150)
    plt.close(fig)
    return slopes
