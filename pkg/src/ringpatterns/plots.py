"""Figure rendering for sweep reports.

Figures are written next to the delimited output; the Agg backend keeps this
usable in headless runs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _figsize(scale: float = 1.0) -> tuple[float, float]:
    width = 6.4 * scale
    golden = (5**0.5 - 1) / 2
    return (width, width * golden)


def render_sweep_figure(rows: list[dict], summaries: list[dict], path: str):
    """Discrepancy scatter against lpf N with the explicit bound overlaid."""
    fig, ax = plt.subplots(figsize=_figsize())
    xs = [r["lpf"] for r in rows]
    ys = [r["discrepancy"] for r in rows]
    ax.scatter(xs, ys, s=8, alpha=0.35, color="#1f77b4", label="trials")
    sx = [s["lpf"] for s in summaries]
    smax = [s["max_discrepancy"] for s in summaries]
    ax.plot(sx, smax, "o-", color="#d62728", label="max per ring")
    sb = [s["bound"] for s in summaries]
    ax.plot(sx, sb, "s--", color="#2ca02c", label="explicit bound")
    ax.set_xlabel("lpf N")
    ax.set_ylabel("discrepancy")
    ax.set_yscale("log")
    ax.legend(frameon=False, fontsize=9)
    ax.set_title("polynomial-average discrepancy sweep")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_decay_figure(summaries: list[dict], path: str):
    fig, ax = plt.subplots(figsize=_figsize(0.8))
    xs = [s["lpf"] for s in summaries]
    ax.plot(xs, [s["max_discrepancy"] for s in summaries], "o-", label="max discrepancy")
    ax.plot(xs, [s["bound"] for s in summaries], "s--", label="bound")
    ax.set_xlabel("lpf N")
    ax.set_yscale("log")
    ax.legend(frameon=False, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
