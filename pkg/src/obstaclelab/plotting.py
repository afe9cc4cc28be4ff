"""Figures written next to the CSV/JSON output of each experiment.

All functions take plain data (fields, report objects, row dicts) and a
target path, draw with the non-interactive Agg backend and return the path.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .free_boundary import NEG, OUTSIDE, POS, ZERO_FLAT, ZERO_GRAD  # noqa: E402

GOLDEN = (math.sqrt(5) - 1) / 2
WIDTH = 5.0
PALETTE = ["#08589e", "#2b8cbe", "#4eb3d3", "#7bccc4", "#a8ddb5", "#d95f0e"]

STYLE = {
    "axes.prop_cycle": matplotlib.cycler(color=PALETTE),
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "font.size": 8,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "figure.figsize": (WIDTH, WIDTH * GOLDEN),
    "figure.dpi": 150,
    "savefig.bbox": "tight",
    "svg.hashsalt": "obstaclelab",
}


@contextmanager
def _figure(path, nrows=1, ncols=1, **kw):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(nrows, ncols, layout="constrained", **kw)
        try:
            yield fig, ax
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(path, metadata={"Software": None})
        finally:
            plt.close(fig)


def plot_snapshots(field, path, n_snapshots: int = 5):
    """1D: profiles at evenly spaced levels.  2D: first and last level as images."""
    g = field.grid
    K = field.spec.n_steps
    if field.spec.dim == 1:
        with _figure(path) as (fig, ax):
            for k in np.unique(np.linspace(0, K, n_snapshots).round().astype(int)):
                ax.plot(g.axis, field.values[k], label=f"t = {g.times[k]:.3g}")
            ax.axhline(0.0, color="0.6", lw=0.6)
            ax.set_xlabel("x")
            ax.set_ylabel(field.name)
            ax.legend(frameon=False)
        return Path(path)
    ext = (g.axis[0], g.axis[-1], g.axis[0], g.axis[-1])
    with _figure(path, 1, 2, figsize=(WIDTH, WIDTH * 0.45)) as (fig, axes):
        for ax, k in zip(axes, (0, K)):
            v = np.where(g.ball_mask, field.values[k], np.nan)
            im = ax.imshow(v.T, origin="lower", extent=ext, cmap="RdBu_r")
            ax.contour(g.axis, g.axis, v.T, levels=[0.0], colors="k", linewidths=0.6)
            ax.set_title(f"t = {g.times[k]:.3g}")
            fig.colorbar(im, ax=ax, shrink=0.8)
    return Path(path)


def plot_classification(c, path, level: int = -1):
    """Phase labels on one level; 1D shows a label strip over time instead."""
    lab = c.labels
    cmap = matplotlib.colors.ListedColormap(["#2b8cbe", "#fdae61", "#d7191c", "#a6d96a", "#ffffff"])
    codes = {NEG: 0, ZERO_FLAT: 1, ZERO_GRAD: 2, POS: 3, OUTSIDE: 4}
    idx = np.vectorize(codes.get)(lab)
    g = c.field.grid
    with _figure(path) as (fig, ax):
        if c.field.spec.dim == 1:
            ax.imshow(idx.T, origin="lower", aspect="auto", cmap=cmap, vmin=0, vmax=4,
                      extent=(g.times[0], g.times[-1], g.axis[0], g.axis[-1]), interpolation="nearest")
            ax.set_xlabel("t")
            ax.set_ylabel("x")
        else:
            ax.imshow(idx[level].T, origin="lower", cmap=cmap, vmin=0, vmax=4,
                      extent=(g.axis[0], g.axis[-1], g.axis[0], g.axis[-1]), interpolation="nearest")
            ax.set_xlabel("x1")
            ax.set_ylabel("x2")
        handles = [matplotlib.patches.Patch(color=cmap(i), label=n)
                   for i, n in enumerate(("NEG", "ZERO_FLAT", "ZERO_GRAD", "POS"))]
        ax.legend(handles=handles, frameon=False, loc="upper right")
    return Path(path)


def plot_phi_profiles(reports, path):
    """r -> Phi_e(r) per (probe, direction), with the bound as a dashed level."""
    with _figure(path) as (fig, ax):
        for i, m in enumerate(reports):
            col = PALETTE[i % len(PALETTE)]
            lab = f"x0={tuple(round(v, 3) for v in m.probe.x0)}, e={tuple(round(float(v), 2) + 0.0 for v in m.direction)}"
            ax.plot(m.radii, m.phi, "o-", color=col, label=lab)
            ax.axhline(m.bound, color=col, ls="--", lw=0.7)
        ax.set_xscale("log")
        ax.set_xlabel("r")
        ax.set_ylabel("Phi_e(r)")
        ax.legend(frameon=False, fontsize=6)
    return Path(path)


def plot_scaling(rows, path):
    """log-log value vs R, one panel per quantity, one line per series.

    Rows carry keys R, quantity, value and optionally series."""
    by_q = {}
    for r in rows:
        if r["value"] is not None and r["value"] > 0:
            by_q.setdefault(r["quantity"], {}).setdefault(r.get("series", ""), []).append((r["R"], r["value"]))
    names = sorted(by_q)
    ncols = min(3, max(1, len(names)))
    nrows = max(1, math.ceil(len(names) / ncols))
    with _figure(path, nrows, ncols, figsize=(WIDTH * 1.4, 1.9 * nrows), squeeze=False) as (fig, axes):
        for ax, q in zip(axes.flat, names):
            for series, pts in sorted(by_q[q].items()):
                pts.sort()
                R, v = zip(*pts)
                ax.loglog(R, v, "o-", label=series)
            ax.set_title(q)
            ax.set_xlabel("R")
        for ax in list(axes.flat)[len(names):]:
            ax.set_visible(False)
        seen = {}
        for ax in axes.flat:
            for hd, lb in zip(*ax.get_legend_handles_labels()):
                seen.setdefault(lb, hd)
        labels = sorted(seen)
        fig.legend([seen[lb] for lb in labels], labels, frameon=False, loc="outside lower center", ncols=min(4, len(labels) or 1))
    return Path(path)


def plot_ladder(gaps, path):
    """Consecutive sup gaps against their bounds along the eps ladder."""
    with _figure(path) as (fig, ax):
        x = np.arange(len(gaps))
        ax.bar(x - 0.2, [g.gap for g in gaps], 0.4, label="sup gap")
        ax.bar(x + 0.2, [g.bound for g in gaps], 0.4, label="eps_a + eps_b + C_disc")
        ax.set_xticks(x, [f"{g.eps_a:g} / {g.eps_b:g}" for g in gaps])
        ax.set_yscale("log")
        ax.legend(frameon=False)
    return Path(path)


def plot_convergence(study, path):
    with _figure(path) as (fig, ax):
        ax.loglog(study.steps, [max(e, 1e-300) for e in study.errors], "o-", label=f"order {study.order:.3g}")
        ax.set_xlabel("tau" if study.mode == "time" else "h")
        ax.set_ylabel("max error")
        ax.legend(frameon=False)
    return Path(path)
