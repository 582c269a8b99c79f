"""Command-line interface: assemble, solve, convergence, limit-check, quad-study."""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np
from jsonschema import ValidationError, validate

from .gentensor import (
    QuadConfig,
    assemble_generating_tensor,
    classical_generating_tensor,
    load_tensor,
    save_tensor,
)
from .kernel import Normalization, make_kernel
from .solver import (
    GridSpec,
    assemble_rhs,
    convergence_study,
    discrete_l2_error,
    gaussian_solution,
    manufactured_rhs_2d,
    solve_cg,
)
from .toeplitz import build_operator
from . import figures

STUDY_COLUMNS = [
    "problem",
    "d",
    "alpha",
    "delta",
    "delta_policy",
    "h",
    "N_total",
    "error",
    "rate",
    "assembly_s",
    "solve_s",
    "iters",
]

_NORMALIZATIONS = [n.value for n in Normalization]

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "problem": {"type": "string", "enum": ["manufactured2d", "constant"]},
        "d": {"type": "integer", "enum": [2, 3]},
        "alpha": {"type": "number"},
        "delta": {"type": "number", "exclusiveMinimum": 0},
        "ratio": {"type": "number", "exclusiveMinimum": 0},
        "h": {"type": "number", "exclusiveMinimum": 0},
        "h_list": {
            "type": "array",
            "items": {"type": "number", "exclusiveMinimum": 0},
            "minItems": 1,
        },
        "n": {"type": "integer", "minimum": 1},
        "lambda": {"type": "number", "exclusiveMinimum": 0},
        "normalization": {"type": "string", "enum": _NORMALIZATIONS},
        "c": {"type": "number", "exclusiveMinimum": 0},
        "kernel_exponent": {"type": "number"},
        "n_list": {
            "type": "array",
            "items": {"type": "integer", "minimum": 2},
            "minItems": 2,
        },
        "n_ref": {"type": "integer", "minimum": 8},
        "n_radial": {"type": "integer", "minimum": 2},
        "n_angular": {"type": "integer", "minimum": 2},
        "radial_panels": {"type": "string", "enum": ["SingleInterval", "UnitShells"]},
        "reference": {"type": "string", "enum": ["exact", "fine"]},
        "refine": {"type": "integer", "minimum": 2},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "maxit": {"type": "integer", "minimum": 1},
        "limit_tol": {"type": "number", "exclusiveMinimum": 0},
        "deltas": {
            "type": "array",
            "items": {"type": "number", "exclusiveMinimum": 0},
            "minItems": 1,
        },
        "fig": {"type": "boolean"},
    },
}


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(rows, columns, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def _figure_path(csv_path):
    stem, _ = os.path.splitext(csv_path)
    return stem + ".png"


def _quad_from_config(cfg):
    if any(k in cfg for k in ("n_radial", "n_angular", "radial_panels")):
        return QuadConfig(
            n_radial=cfg.get("n_radial", 64),
            n_angular=cfg.get("n_angular", 64),
            radial_panels=cfg.get("radial_panels", "SingleInterval"),
        )
    return None


def _make_kernel_from_config(d, cfg):
    delta = cfg.get("delta")
    if delta is None:
        if "ratio" not in cfg or "h" not in cfg:
            raise ValueError("need delta, or ratio together with h")
        delta = cfg["ratio"] * cfg["h"]
    norm = cfg.get("normalization", Normalization.PAPER_PRINTED.value)
    return make_kernel(d, cfg["alpha"], delta, normalization=norm, c=cfg.get("c"))


def _cmd_assemble(cfg):
    for key in ("d", "n", "h", "alpha"):
        if key not in cfg:
            raise ValueError(f"assemble requires {key!r}")
    d = cfg["d"]
    kern = _make_kernel_from_config(d, cfg)
    threads = cfg.get("threads") or os.cpu_count()
    t0 = time.perf_counter()
    G = assemble_generating_tensor(
        d, cfg["n"], cfg["h"], kern, quad=_quad_from_config(cfg), threads=threads
    )
    elapsed = time.perf_counter() - t0
    print(
        f"assembled d={d} band={G.band} h={cfg['h']:g} delta={kern.delta:g} "
        f"alpha={kern.alpha:g} in {elapsed:.3f}s"
    )
    print(f"t[0,..] = {G.entries[(0,) * d]:.12e}")
    cache = cfg.get("cache")
    if cache:
        save_tensor(cache, G, cfg["n"])
        print(f"cached -> {cache}")
    return 0


def _cmd_solve(cfg):
    for key in ("d", "n", "alpha"):
        if key not in cfg:
            raise ValueError(f"solve requires {key!r}")
    d = cfg["d"]
    n = cfg["n"]
    problem = cfg.get("problem", "constant")
    box_length = 2.0 if problem == "manufactured2d" else 1.0
    h = cfg.get("h", box_length / (n + 1))
    kern = _make_kernel_from_config(d, cfg)
    threads = cfg.get("threads") or os.cpu_count()
    cache = cfg.get("cache")
    t0 = time.perf_counter()
    if cache and os.path.exists(cache):
        G, cached_n = load_tensor(cache)
        if (G.d, G.h, cached_n) != (d, h, n) or abs(G.kernel.delta - kern.delta) > 1e-15:
            raise ValueError("cache file does not match the requested problem")
    else:
        G = assemble_generating_tensor(
            d, n, h, kern, quad=_quad_from_config(cfg), threads=threads
        )
        if cache:
            save_tensor(cache, G, n)
    t_asm = time.perf_counter() - t0
    if problem == "manufactured2d":
        if d != 2:
            raise ValueError("manufactured2d is two-dimensional")
        box = ((-1.0, 1.0),) * d
    else:
        box = ((0.0, 1.0),) * d
    grid = GridSpec(box=box, n=(n,) * d, delta=kern.delta)
    if abs(grid.h - h) > 1e-12 * h:
        raise ValueError(
            f"h={h:g} does not match n={n} on the {problem} box (expected {grid.h:g})"
        )
    op = build_operator(G, grid.n, workers=threads)
    lam = cfg.get("lambda", 12.0)
    if problem == "manufactured2d":
        rhs = assemble_rhs(grid, lambda p: -manufactured_rhs_2d(lam, kern, p))
    else:
        rhs = assemble_rhs(grid, lambda p: np.ones(p.shape[0]))
    x, report = solve_cg(op, rhs, tol=cfg.get("tol", 1e-10), maxit=cfg.get("maxit", 2000))
    report.assembly_seconds = t_asm
    error = None
    if problem == "manufactured2d":
        u_ref = gaussian_solution(lam)(grid.node_mesh())
        error = discrete_l2_error(grid, x, u_ref)
    status = "converged" if report.converged else "NOT converged"
    print(
        f"{problem} d={d} n={n} h={h:g} delta={kern.delta:g}: {status} in "
        f"{report.iterations} iterations, rel residual {report.rel_residual:.3e}"
    )
    print(
        f"assembly {report.assembly_seconds:.3f}s, solve {report.solve_seconds:.3f}s "
        f"(matvec {report.matvec_seconds:.3f}s)"
    )
    if error is not None:
        print(f"grid l2 error vs known solution: {error:.6e}")
    out = cfg.get("out")
    if out:
        row = {
            "problem": problem,
            "d": d,
            "alpha": kern.alpha,
            "delta": kern.delta,
            "delta_policy": "fixed" if "delta" in cfg else "ratio",
            "h": h,
            "N_total": grid.n_total,
            "error": error,
            "rate": None,
            "assembly_s": report.assembly_seconds,
            "solve_s": report.solve_seconds,
            "iters": report.iterations,
        }
        _write_csv([row], STUDY_COLUMNS, out)
        print(f"wrote {out}")
    return 0 if report.converged else 1


def _cmd_convergence(cfg):
    if "problem" not in cfg:
        raise ValueError("convergence requires 'problem'")
    if "h_list" not in cfg:
        raise ValueError("convergence requires 'h_list'")
    threads = cfg.get("threads") or os.cpu_count()
    rows = convergence_study(
        cfg["problem"],
        h_list=cfg["h_list"],
        delta=cfg.get("delta"),
        ratio=cfg.get("ratio"),
        alpha=cfg.get("alpha"),
        d=cfg.get("d", 2),
        lam=cfg.get("lambda", 12.0),
        normalization=cfg.get("normalization", Normalization.PAPER_PRINTED.value),
        quad=_quad_from_config(cfg),
        reference=cfg.get("reference"),
        refine=cfg.get("refine", 4),
        tol=cfg.get("tol", 1e-10),
        maxit=cfg.get("maxit", 5000),
        threads=threads,
    )
    for row in rows:
        rate = "--" if row["rate"] is None else f"{row['rate']:.3f}"
        print(
            f"h={row['h']:<12g} N={row['N_total']:<8d} error={row['error']:.6e} "
            f"rate={rate} iters={row['iters']}"
        )
    out = cfg.get("out", "convergence.csv")
    _write_csv(rows, STUDY_COLUMNS, out)
    print(f"wrote {out}")
    if cfg.get("fig", True):
        fig_path = _figure_path(out)
        figures.convergence_figure(rows, fig_path)
        print(f"wrote {fig_path}")
    return 0


def _cmd_limit_check(cfg):
    for key in ("d", "alpha"):
        if key not in cfg:
            raise ValueError(f"limit-check requires {key!r}")
    d = cfg["d"]
    h = cfg.get("h", 1.0)
    final_delta = cfg.get("delta", 1e-3 * h)
    tol = cfg.get("limit_tol", 1e-2)
    deltas = cfg.get("deltas", [final_delta * 100.0, final_delta * 10.0, final_delta])
    norm = cfg.get("normalization", Normalization.PAPER_PRINTED.value)
    classical = classical_generating_tensor(d, h)
    deviations = []
    for delta in deltas:
        kern = make_kernel(d, cfg["alpha"], delta, normalization=norm, c=cfg.get("c"))
        G = assemble_generating_tensor(d, 8, h, kern, quad=_quad_from_config(cfg))
        ref = np.zeros_like(G.entries)
        sl = tuple(slice(0, min(2, G.band)) for _ in range(d))
        ref[sl] = classical.entries[sl]
        dev = float(np.max(np.abs(G.entries - ref)))
        deviations.append(dev)
        print(f"delta={delta:<12g} max deviation from local limit = {dev:.6e}")
    for a, b in zip(deviations[:-1], deviations[1:]):
        ratio = a / b if b else math.inf
        print(f"decade ratio: {ratio:.3f}")
    ok = deviations[-1] <= tol
    print(f"final deviation {deviations[-1]:.3e} {'<=' if ok else '>'} tol {tol:g}")
    return 0 if ok else 1


def _cmd_quad_study(cfg):
    d = cfg.get("d", 2)
    h = cfg.get("h", 1.0)
    delta = cfg.get("delta")
    if delta is None:
        raise ValueError("quad-study requires 'delta'")
    if delta <= h:
        raise ValueError("quad-study needs delta > h so the tail rule is exercised")
    exponent = cfg.get("kernel_exponent", d + 0.7)
    alpha = exponent - d
    kern = make_kernel(d, alpha, delta, normalization=Normalization.EXPLICIT.value, c=1.0)
    n_list = cfg.get("n_list", [4, 6, 8, 12, 16, 24, 32])
    n_ref = cfg.get("n_ref", 500 if d == 2 else 60)
    threads = cfg.get("threads") or os.cpu_count()
    band_n = int(math.floor(delta / h + 1e-12)) + 3
    ref = assemble_generating_tensor(
        d, band_n, h, kern, quad=QuadConfig(n_radial=n_ref, n_angular=n_ref), threads=threads
    )
    rows = []
    slopes = {}
    for axis in ("radial", "angular"):
        errs = []
        for n in n_list:
            quad = QuadConfig(
                n_radial=n if axis == "radial" else n_ref,
                n_angular=n if axis == "angular" else n_ref,
            )
            G = assemble_generating_tensor(d, band_n, h, kern, quad=quad, threads=threads)
            diff = np.abs(G.entries - ref.entries)
            worst = np.unravel_index(int(np.argmax(diff)), diff.shape)
            err = float(diff[worst])
            rows.append(
                {
                    "axis": axis,
                    "n": n,
                    "k": "-".join(str(v) for v in sorted(worst)),
                    "error": err,
                }
            )
            errs.append((n, err))
        fit = [(n, e) for n, e in errs if e > 1e-13]
        if len(fit) >= 2:
            lx = np.log([n for n, _ in fit])
            ly = np.log([e for _, e in fit])
            slope = float(np.polyfit(lx, ly, 1)[0])
        else:
            slope = -math.inf
        slopes[axis] = slope
        print(f"{axis} refinement: fitted slope {slope:.3f}")
    out = cfg.get("out", "quad_study.csv")
    _write_csv(rows, ["axis", "n", "k", "error"], out)
    print(f"wrote {out}")
    if cfg.get("fig", True):
        fig_path = _figure_path(out)
        figures.quadstudy_figure(rows, fig_path)
        print(f"wrote {fig_path}")
    return 0 if all(s <= -3.0 for s in slopes.values()) else 1


_COMMANDS = {
    "assemble": _cmd_assemble,
    "solve": _cmd_solve,
    "convergence": _cmd_convergence,
    "limit-check": _cmd_limit_check,
    "quad-study": _cmd_quad_study,
}


def run(command, config):
    """Validate a configuration mapping and execute one subcommand."""
    if command not in _COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    cfg = dict(config)
    extra = {"out", "cache", "threads"}
    schema_part = {k: v for k, v in cfg.items() if k not in extra}
    validate(schema_part, CONFIG_SCHEMA)
    return _COMMANDS[command](cfg)


def _parse_h_token(tok):
    tok = tok.strip()
    if "/" in tok:
        num, den = tok.split("/")
        return float(num) / float(den)
    return float(tok)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="nlgrid",
        description="Uniform-grid integral-operator solver with FFT-applied Toeplitz stiffness.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with experiment parameters")
    common.add_argument("--out", help="output CSV path")
    common.add_argument("--cache", help="binary tensor cache path (.nlgt)")
    common.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("assemble", parents=[common], help="assemble and cache a generating tensor")
    p.add_argument("--d", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--h", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--ratio", type=float)
    p.add_argument("--normalization", choices=_NORMALIZATIONS)
    p.add_argument("--c", type=float)
    p.add_argument("--n-radial", type=int, dest="n_radial")
    p.add_argument("--n-angular", type=int, dest="n_angular")
    p.add_argument("--radial-panels", choices=["SingleInterval", "UnitShells"], dest="radial_panels")

    p = sub.add_parser("solve", parents=[common], help="assemble (or load) and solve one grid")
    p.add_argument("--problem", choices=["manufactured2d", "constant"])
    p.add_argument("--d", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--h", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--ratio", type=float)
    p.add_argument("--normalization", choices=_NORMALIZATIONS)
    p.add_argument("--c", type=float)
    p.add_argument("--lambda", type=float, dest="lambda_")
    p.add_argument("--tol", type=float)
    p.add_argument("--maxit", type=int)

    p = sub.add_parser("convergence", parents=[common], help="run a refinement study")
    p.add_argument("--problem", choices=["manufactured2d", "constant"])
    p.add_argument("--d", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--ratio", type=float)
    p.add_argument("--lambda", type=float, dest="lambda_")
    p.add_argument("--h-list", dest="h_list", help="comma-separated spacings, fractions allowed")
    p.add_argument("--reference", choices=["exact", "fine"])
    p.add_argument("--refine", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--maxit", type=int)
    p.add_argument("--normalization", choices=_NORMALIZATIONS)
    p.add_argument("--no-fig", action="store_true")

    p = sub.add_parser("limit-check", parents=[common], help="compare small-radius entries with the local limit")
    p.add_argument("--d", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--h", type=float)
    p.add_argument("--tol", type=float, dest="limit_tol")
    p.add_argument("--normalization", choices=_NORMALIZATIONS)

    p = sub.add_parser("quad-study", parents=[common], help="tail-rule refinement study per axis")
    p.add_argument("--d", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--h", type=float)
    p.add_argument("--kernel-exponent", type=float, dest="kernel_exponent")
    p.add_argument("--n-list", dest="n_list", help="comma-separated rule sizes")
    p.add_argument("--n-ref", type=int, dest="n_ref")
    p.add_argument("--no-fig", action="store_true")
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    cfg = {}
    if args.config:
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        try:
            validate(file_cfg, CONFIG_SCHEMA)
        except ValidationError as exc:
            print(f"invalid config: {exc.message}", file=sys.stderr)
            return 2
        cfg.update(file_cfg)
    skip = {"command", "config"}
    for key, value in vars(args).items():
        if key in skip or value is None or value is False:
            continue
        if key == "lambda_":
            cfg["lambda"] = value
        elif key == "no_fig":
            cfg["fig"] = False
        elif key == "h_list":
            cfg["h_list"] = [_parse_h_token(t) for t in value.split(",")]
        elif key == "n_list":
            cfg["n_list"] = [int(t) for t in value.split(",")]
        else:
            cfg[key] = value
    try:
        return run(args.command, cfg)
    except (ValueError, ValidationError) as exc:
        message = exc.message if isinstance(exc, ValidationError) else str(exc)
        print(f"error: {message}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
