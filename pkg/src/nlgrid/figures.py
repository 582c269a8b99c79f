"""Figure rendering for study outputs (log-log error plots with guides)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["convergence_figure", "quadstudy_figure"]


def _group_key(row):
    if row["delta_policy"] == "fixed":
        return (row["problem"], row["alpha"], "delta", round(row["delta"], 12))
    return (row["problem"], row["alpha"], "delta/h", round(row["delta"] / row["h"], 9))


def convergence_figure(rows, path):
    """One log-log error-vs-h curve per (problem, alpha, radius policy) group,
    with slope-1 and slope-2 guides anchored on the first group."""
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    groups = {}
    for r in rows:
        groups.setdefault(_group_key(r), []).append(r)
    anchor = None
    for key, grp in sorted(groups.items(), key=lambda kv: str(kv[0])):
        grp = sorted(grp, key=lambda r: r["h"], reverse=True)
        hs = np.array([r["h"] for r in grp], dtype=float)
        es = np.array([r["error"] for r in grp], dtype=float)
        label = f"{key[0]} alpha={key[1]:g} {key[2]}={key[3]:g}"
        ax.loglog(hs, es, "o-", label=label)
        if anchor is None and len(hs) > 1:
            anchor = (hs, es)
    if anchor is not None:
        hs, es = anchor
        for s in (1.0, 2.0):
            ax.loglog(hs, es[0] * (hs / hs[0]) ** s, "k--", lw=0.8, alpha=0.5, label=f"slope {s:g}")
    ax.set_xlabel("h")
    ax.set_ylabel("error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def quadstudy_figure(rows, path):
    """Log-log quadrature error vs rule size, one curve per refined axis,
    with a slope minus-three guide."""
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    floor = 1e-17
    for axis in sorted({r["axis"] for r in rows}):
        pts = sorted((r["n"], r["error"]) for r in rows if r["axis"] == axis)
        ns = np.array([p[0] for p in pts], dtype=float)
        es = np.array([max(p[1], floor) for p in pts])
        ax.loglog(ns, es, "o-", label=f"{axis} refinement")
        if axis == sorted({r["axis"] for r in rows})[0] and len(ns) > 1:
            ax.loglog(ns, es[0] * (ns / ns[0]) ** -3.0, "k--", lw=0.8, alpha=0.5, label="slope -3")
    ax.set_xlabel("rule size n")
    ax.set_ylabel("max entry error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
