"""Figure rendering for benchmark and collision results.

Every renderer takes in-memory results, writes one PNG next to the CSV
output, and returns the path. All rendering is headless (Agg); nothing
here opens a window. Figures are deliberately plain: one panel, direct
labels, no styling beyond what makes the numbers readable.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "render_nd_matrix",
    "render_chunk_cdf",
    "render_sweep",
    "render_collisions",
    "render_calibration",
]

_DPI = 150


def render_nd_matrix(path, steps_at, nd_matrix) -> str:
    """Dirty-fraction heatmap: checkpoint steps down, ranks across."""
    data = np.asarray(nd_matrix, dtype=float)
    if data.ndim != 2 or data.size == 0:
        raise ValueError("nd_matrix must be a non-empty steps x ranks table")
    fig, ax = plt.subplots(figsize=(6, 4))
    im = ax.imshow(data, aspect="auto", cmap="viridis", vmin=0.0, vmax=1.0,
                   interpolation="nearest")
    ax.set_xlabel("rank")
    ax.set_ylabel("step")
    ax.set_xticks(range(data.shape[1]))
    ax.set_yticks(range(data.shape[0]))
    ax.set_yticklabels(steps_at)
    fig.colorbar(im, ax=ax, label="dirty block fraction")
    ax.set_title("dirty fraction per checkpoint")
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return os.fspath(path)


def render_chunk_cdf(path, samples: dict) -> str:
    """Cumulative size distribution per sample kind, log-x step plot."""
    fig, ax = plt.subplots(figsize=(6, 4))
    drew = False
    for kind in sorted(samples):
        values = sorted(v for v in samples[kind] if v > 0)
        if not values:
            continue
        fractions = np.arange(1, len(values) + 1) / len(values)
        ax.step(values, fractions, where="post", label=f"{kind} (n={len(values)})")
        drew = True
    if not drew:
        raise ValueError("no positive sizes to plot")
    ax.set_xscale("log")
    ax.set_xlabel("size (bytes)")
    ax.set_ylabel("cumulative fraction")
    ax.set_ylim(0, 1.02)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    ax.set_title("chunk size distribution")
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return os.fspath(path)


def render_sweep(path, rows) -> str:
    """Block-size sweep: overhead and dirty rate left, metadata right."""
    if not rows:
        raise ValueError("no sweep rows to plot")
    sizes = [r.block_size for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(sizes, [r.relative_overhead for r in rows], "o-",
             label="relative overhead vs full rewrite")
    ax1.plot(sizes, [r.dcp_rate for r in rows], "s--", label="dirty rate")
    ax1.axhline(0.0, color="grey", lw=0.8)
    ax1.set_xscale("log", base=2)
    ax1.set_xlabel("block size (bytes)")
    ax1.legend()
    ax1.grid(True, alpha=0.3)
    ax2.plot(sizes, [r.hash_table_bytes for r in rows], "o-", color="tab:red")
    ax2.set_xscale("log", base=2)
    ax2.set_yscale("log")
    ax2.set_xlabel("block size (bytes)")
    ax2.set_ylabel("tracking metadata (bytes)")
    ax2.grid(True, which="both", alpha=0.3)
    fig.suptitle("block size sweep")
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return os.fspath(path)


def render_collisions(path, report) -> str:
    """Collision rate per cell, grouped by algorithm, log-y.

    Zero-collision cells cannot sit on a log axis; they are drawn as
    open markers pinned to one decade below 1/iterations so "none
    observed" stays visually distinct from any measured rate.
    """
    if not report.cells:
        raise ValueError("no collision cells to plot")
    algs = sorted({c.algorithm.value for c in report.cells})
    floor = min(0.1 / c.iterations for c in report.cells)
    fig, ax = plt.subplots(figsize=(7, 4))
    for i, alg in enumerate(algs):
        cells = [c for c in report.cells if c.algorithm.value == alg]
        xs = np.linspace(i - 0.3, i + 0.3, num=len(cells))
        measured = [(x, c.rate) for x, c in zip(xs, cells) if c.collisions]
        absent = [x for x, c in zip(xs, cells) if not c.collisions]
        if measured:
            ax.plot(*zip(*measured), "o", color="tab:blue")
        if absent:
            ax.plot(absent, [floor] * len(absent), "o", mfc="none",
                    color="tab:grey")
    ax.set_yscale("log")
    ax.set_xticks(range(len(algs)))
    ax.set_xticklabels(algs, rotation=20)
    ax.set_ylabel("collision rate")
    ax.grid(True, axis="y", which="both", alpha=0.3)
    ax.set_title("observed collisions (open: none in run)")
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return os.fspath(path)


def render_calibration(path, results) -> str:
    """Per-block write and hash cost side by side, one group per result."""
    if not isinstance(results, (list, tuple)):
        results = [results]
    if not results:
        raise ValueError("no calibration results to plot")
    xs = np.arange(len(results))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(xs - 0.2, [r.t_w for r in results], width=0.4, label="t_w (write)")
    ax.bar(xs + 0.2, [r.t_h for r in results], width=0.4, label="t_h (hash)")
    ax.set_yscale("log")
    ax.set_xticks(xs)
    ax.set_xticklabels([f"b={r.block_size}" for r in results])
    ax.set_ylabel("seconds per block")
    for x, r in zip(xs, results):
        ax.annotate(f"rho={r.rho:.1f}", (x, max(r.t_w, r.t_h)),
                    ha="center", va="bottom", fontsize=8)
    ax.legend()
    ax.set_title("calibration")
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return os.fspath(path)
