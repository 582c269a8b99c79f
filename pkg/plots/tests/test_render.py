import csv
import json

import numpy as np
import pytest

from slopefig import PlotJob, fit_slope, load_job, render
from slopefig.cli import main


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _power_law_csv(path, exponent, coeff=1.0, levels=6, extra=()):
    h = [0.5**k for k in range(1, levels + 1)]
    rows = [[repr(hv), repr(coeff * hv**exponent), *extra] for hv in h]
    _write_csv(path, ["h", "error", *(f"g{i}" for i in range(len(extra)))], rows)


def test_fit_slope_recovers_exponent():
    for exponent in (-4.0, -3.3, -1.0, 0.5, 2.0, 2.7):
        x = 2.0 ** -np.arange(1, 8)
        y = 3.7 * x**exponent
        assert abs(fit_slope(x, y) - exponent) <= 1e-10


def test_fit_slope_uses_trailing_points():
    # first points deliberately off-trend; the last three carry slope 2
    x = np.array([0.5, 0.25, 0.125, 0.0625, 0.03125])
    y = np.array([9.0, 1.0, 0.125**2, 0.0625**2, 0.03125**2])
    assert abs(fit_slope(x, y) - 2.0) <= 1e-10


def test_fit_slope_degenerate():
    assert fit_slope([0.5], [0.25]) is None


def test_job_validation(tmp_path):
    with pytest.raises(ValueError):
        PlotJob(x="", y="error")
    bad = tmp_path / "job.json"
    bad.write_text(json.dumps({"x": "h", "y": "error", "mystery": 1}))
    with pytest.raises(ValueError):
        load_job(bad)
    bad.write_text(json.dumps({"y": "error"}))
    with pytest.raises(ValueError):
        load_job(bad)
    bad.write_text(json.dumps(["not", "an", "object"]))
    with pytest.raises(ValueError):
        load_job(bad)


def test_load_job_overrides(tmp_path):
    path = tmp_path / "job.json"
    path.write_text(
        json.dumps({"x": "h", "y": "error", "input": "a.csv", "guides": [2]})
    )
    job = load_job(path, input="b.csv", output="b.png")
    assert job.input == "b.csv" and job.output == "b.png"
    assert job.guides == [2.0]


def test_render_synthetic_square_law(tmp_path):
    table = tmp_path / "conv.csv"
    _power_law_csv(table, 2.0)
    out = tmp_path / "conv.png"
    job = PlotJob(x="h", y="error", input=str(table), output=str(out), guides=[2])
    slopes = render(job)
    assert set(slopes) == {""}
    assert abs(slopes[""] - 2.0) <= 1e-10
    assert out.exists() and out.stat().st_size > 0


def test_render_groups(tmp_path):
    table = tmp_path / "conv.csv"
    h = [0.5**k for k in range(1, 6)]
    rows = [[repr(hv), repr(hv**2), "1.3"] for hv in h]
    rows += [[repr(hv), repr(2.0 * hv), "1.7"] for hv in h]
    _write_csv(table, ["h", "error", "alpha"], rows)
    out = tmp_path / "conv.png"
    job = PlotJob(
        x="h", y="error", group_by=["alpha"], input=str(table), output=str(out)
    )
    slopes = render(job)
    assert set(slopes) == {"alpha=1.3", "alpha=1.7"}
    assert abs(slopes["alpha=1.3"] - 2.0) <= 1e-10
    assert abs(slopes["alpha=1.7"] - 1.0) <= 1e-10
    assert out.exists()


def test_render_missing_column(tmp_path):
    table = tmp_path / "conv.csv"
    _power_law_csv(table, 2.0)
    job = PlotJob(x="h", y="nonexistent", input=str(table), output=str(tmp_path / "x.png"))
    with pytest.raises(ValueError, match="nonexistent"):
        render(job)


def test_render_empty_after_filter(tmp_path, capsys):
    table = tmp_path / "conv.csv"
    h = [0.5**k for k in range(1, 6)]
    _write_csv(table, ["h", "error", "alpha"], [[repr(hv), repr(hv**2), "1.3"] for hv in h])
    out = tmp_path / "never.png"
    job = PlotJob(
        x="h", y="error", where={"alpha": "9.9"}, input=str(table), output=str(out)
    )
    assert render(job) == {}
    assert "warning" in capsys.readouterr().err
    assert not out.exists()


def test_render_skips_blank_cells(tmp_path):
    table = tmp_path / "conv.csv"
    _write_csv(
        table,
        ["h", "error"],
        [["0.5", ""], ["0.25", "0.0625"], ["0.125", "0.015625"], ["0.0625", "0.00390625"]],
    )
    out = tmp_path / "c.png"
    slopes = render(PlotJob(x="h", y="error", input=str(table), output=str(out)))
    assert abs(slopes[""] - 2.0) <= 1e-10


def test_render_deterministic(tmp_path):
    table = tmp_path / "conv.csv"
    _power_law_csv(table, 2.0)
    outs = [tmp_path / "a.png", tmp_path / "b.png"]
    for out in outs:
        render(PlotJob(x="h", y="error", input=str(table), output=str(out), guides=[1, 2]))
    assert outs[0].read_bytes() == outs[1].read_bytes()


def test_render_svg(tmp_path):
    table = tmp_path / "conv.csv"
    _power_law_csv(table, 2.0)
    out = tmp_path / "c.svg"
    render(PlotJob(x="h", y="error", input=str(table), output=str(out)))
    assert out.read_text().lstrip().startswith("<?xml")


def test_render_rejects_unknown_suffix(tmp_path):
    table = tmp_path / "conv.csv"
    _power_law_csv(table, 2.0)
    with pytest.raises(ValueError):
        render(PlotJob(x="h", y="error", input=str(table), output=str(tmp_path / "c.pdf")))


def test_cli_end_to_end(tmp_path, capsys):
    table = tmp_path / "conv.csv"
    _power_law_csv(table, 2.0)
    jobfile = tmp_path / "job.json"
    jobfile.write_text(json.dumps({"x": "h", "y": "error", "guides": [2]}))
    out = tmp_path / "fig.png"
    assert main([str(table), str(jobfile), str(out)]) == 0
    text = capsys.readouterr().out
    assert "slope 2.00" in text and f"wrote {out}" in text
    assert out.exists()


def test_cli_missing_column_is_exit_2(tmp_path, capsys):
    table = tmp_path / "conv.csv"
    _power_law_csv(table, 2.0)
    jobfile = tmp_path / "job.json"
    jobfile.write_text(json.dumps({"x": "h", "y": "wrong"}))
    assert main([str(table), str(jobfile), str(tmp_path / "fig.png")]) == 2
    assert "error:" in capsys.readouterr().err


def test_cli_empty_filter_is_exit_0(tmp_path, capsys):
    table = tmp_path / "conv.csv"
    h = [0.5**k for k in range(1, 6)]
    _write_csv(table, ["h", "error", "alpha"], [[repr(hv), repr(hv**2), "1.3"] for hv in h])
    jobfile = tmp_path / "job.json"
    jobfile.write_text(json.dumps({"x": "h", "y": "error", "where": {"alpha": "2.0"}}))
    out = tmp_path / "fig.png"
    assert main([str(table), str(jobfile), str(out)]) == 0
    assert "warning" in capsys.readouterr().err
    assert not out.exists()
