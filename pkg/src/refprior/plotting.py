"""Figure rendering for run reports.

Every command writes its delimited data files first; these helpers render
the matching matplotlib figures next to them.  PNG metadata is stripped so
reruns produce identical bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "save_prior_figure",
    "save_histogram_figure",
    "save_histogram_panel",
    "save_trace_figure",
    "save_bounds_figure",
    "save_coverage_figure",
]

_SAVE_KW = dict(dpi=120, metadata={"Software": None})


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_prior_figure(grid, weights, path, title="prior"):
    fig, ax = plt.subplots(figsize=(6, 3.2))
    grid = np.asarray(grid)
    weights = np.asarray(weights)
    if grid.size > 1:
        width = 0.9 * np.diff(grid).min()
    else:
        width = 1.0
    ax.bar(grid, weights, width=width, color="#33557a", linewidth=0)
    ax.set_xlabel("theta")
    ax.set_ylabel("weight")
    ax.set_title(title)
    _finish(fig, path)


def save_histogram_figure(bin_lo, bin_hi, counts, path, title="samples"):
    fig, ax = plt.subplots(figsize=(6, 3.2))
    bin_lo = np.asarray(bin_lo)
    bin_hi = np.asarray(bin_hi)
    counts = np.asarray(counts, dtype=float)
    ax.bar(bin_lo, counts, width=bin_hi - bin_lo, align="edge",
           color="#7a4a30", linewidth=0)
    ax.set_xlabel("theta")
    ax.set_ylabel("count")
    ax.set_title(title)
    _finish(fig, path)


def save_histogram_panel(histograms, path, title="sample histograms"):
    """Grid of per-iteration histograms; ``histograms`` is a list of
    ``(label, bin_lo, bin_hi, counts)`` tuples."""
    n = len(histograms)
    cols = min(3, max(1, n))
    rows = (n + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(3.4 * cols, 2.4 * rows),
                             squeeze=False)
    for ax in axes.flat[n:]:
        ax.set_visible(False)
    for ax, (label, lo, hi, counts) in zip(axes.flat, histograms):
        lo = np.asarray(lo)
        hi = np.asarray(hi)
        ax.bar(lo, np.asarray(counts, dtype=float), width=hi - lo,
               align="edge", color="#7a4a30", linewidth=0)
        ax.set_title(label, fontsize=9)
        ax.tick_params(labelsize=7)
    fig.suptitle(title)
    _finish(fig, path)


def save_trace_figure(records, path, title="iteration trace"):
    """Minimax-risk estimate and accumulated-variance diagnostic per
    iteration; ``records`` is a list of dicts with iter/minimax/tau keys."""
    iters = [r["iter"] for r in records]
    risk = [r["minimax_estimate_nats"] for r in records]
    tau = [r["tau_sq"] for r in records]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 4.6), sharex=True)
    ax1.plot(iters, risk, marker="o", markersize=3, color="#33557a")
    ax1.set_ylabel("minimax estimate (nats)")
    ax1.set_title(title)
    ax2.plot(iters, tau, marker="o", markersize=3, color="#7a4a30")
    ax2.set_ylabel("accumulated variance")
    ax2.set_xlabel("iteration")
    _finish(fig, path)


def save_bounds_figure(lower, upper, path, title="capacity sandwich"):
    lower = np.asarray(lower)
    upper = np.asarray(upper)
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 4.6), sharex=True)
    ax1.plot(lower, label="lower", color="#33557a")
    ax1.plot(upper, label="upper", color="#7a4a30")
    ax1.set_ylabel("bound (nats)")
    ax1.legend(fontsize=8)
    ax1.set_title(title)
    gap = np.clip(upper - lower, 1e-300, None)
    ax2.semilogy(gap, color="#555555")
    ax2.set_ylabel("gap")
    ax2.set_xlabel("iteration")
    _finish(fig, path)


def save_coverage_figure(ks_values, epsilon, path, title="replication KS distances"):
    ks_values = np.asarray(ks_values)
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.hist(ks_values, bins=40, color="#33557a")
    ax.axvline(epsilon, color="#aa3333", linestyle="--", label=f"epsilon = {epsilon:g}")
    ax.set_xlabel("final KS distance")
    ax.set_ylabel("replications")
    ax.legend(fontsize=8)
    ax.set_title(title)
    _finish(fig, path)
