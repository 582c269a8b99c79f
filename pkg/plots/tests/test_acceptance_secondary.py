"""Acceptance check for the figure component.

Prints one pass/fail line covering: exact slope recovery on synthetic
square-law data, slope annotation of a freshly generated refinement-study
table (consumed through the solver package's command line only), and the
solver package's independence from this component.
"""
import csv
import importlib.util
import pathlib
import subprocess
import sys
import time

from slopefig import PlotJob, render


def _write_square_law(path, levels=7):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["h", "error"])
        for k in range(1, levels + 1):
            h = 0.5**k
            writer.writerow([repr(h), repr(h * h)])


def _primary_source_dir():
    spec = importlib.util.find_spec("nlgrid")
    return pathlib.Path(spec.origin).parent


def test_criterion_11_plot_component(tmp_path, capsys):
    t0 = time.perf_counter()

    synth = tmp_path / "synth.csv"
    _write_square_law(synth)
    synth_fig = tmp_path / "synth.png"
    slopes = render(
        PlotJob(x="h", y="error", guides=[2], input=str(synth), output=str(synth_fig))
    )
    synth_slope = slopes[""]
    synth_ok = abs(synth_slope - 2.0) <= 1e-10 and synth_fig.exists()

    study_csv = tmp_path / "study.csv"
    proc = subprocess.run(
        [
            sys.executable, "-m", "nlgrid", "convergence",
            "--problem", "manufactured2d", "--delta", "0.1",
            "--h-list", "1/16,1/32,1/64",
            "--no-fig", "--out", str(study_csv),
        ],
        capture_output=True,
        text=True,
    )
    study_fig = tmp_path / "study.png"
    study_slope = None
    if proc.returncode == 0:
        slopes = render(
            PlotJob(x="h", y="error", guides=[2], input=str(study_csv), output=str(study_fig))
        )
        study_slope = slopes[""]
    study_ok = (
        proc.returncode == 0
        and study_slope is not None
        and 1.8 <= study_slope <= 2.2
        and study_fig.exists()
    )

    # the solver package must run without this component: its sources may
    # not reference it, and it must not have imported it above
    src = _primary_source_dir()
    standalone_ok = all(
        "slopefig" not in f.read_text() for f in src.glob("*.py")
    )

    ok = synth_ok and study_ok and standalone_ok
    with capsys.disabled():
        print(
            f"\n[criterion 11] {'PASS' if ok else 'FAIL'}: synthetic h^2 slope "
            f"{synth_slope:.12f} (tol 1e-10), study-figure slope annotation "
            f"{'n/a' if study_slope is None else f'{study_slope:.2f}'} "
            f"(window [1.8, 2.2]), solver package standalone: {standalone_ok}, "
            f"in {time.perf_counter() - t0:.1f}s",
            flush=True,
        )
    assert synth_ok, f"synthetic slope {synth_slope!r} not 2.0 within 1e-10"
    assert proc.returncode == 0, f"study generation failed: {proc.stderr}"
    assert study_ok, f"study slope {study_slope!r} outside [1.8, 2.2]"
    assert standalone_ok, "solver package references the figure component"
