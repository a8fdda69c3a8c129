"""Figure rendering for experiment runs.

Figures are written next to the delimited output so a run is inspectable at a
glance; the CSV remains the machine-readable boundary.  Rendering is headless
(Agg) and deterministic: records arrive canonically sorted.
"""

from __future__ import annotations

import math
import os
from typing import Sequence


def render_figures(command: str, records: Sequence[dict], out_dir: str) -> list[str]:
    """Write the figures appropriate for ``command``; returns the paths."""
    if not records:
        return []
    if command in ("bound-sweep", "khintchine"):
        return [_ratio_figure(command, records, out_dir)]
    if command == "decoupling":
        return [_slack_figure(records, out_dir)]
    return []


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _ratio_figure(command: str, records: Sequence[dict], out_dir: str) -> str:
    plt = _pyplot()
    ks = sorted({rec["k"] for rec in records})
    families = sorted({rec["family"] for rec in records})
    fig, axes = plt.subplots(1, len(ks), figsize=(4.2 * len(ks), 3.6),
                             sharey=False, squeeze=False)
    for ax, k in zip(axes[0], ks):
        sub = [rec for rec in records if rec["k"] == k]
        for family in families:
            rows = sorted((rec["N"], rec["ratio"]) for rec in sub
                          if rec["family"] == family)
            if not rows:
                continue
            xs = [n for n, _ in rows]
            ys = [r for _, r in rows]
            ax.plot(xs, ys, "o-", markersize=3.5, linewidth=1.0, alpha=0.75,
                    label=family)
        ax.set_xscale("log", base=2)
        ax.set_xlabel("N")
        ax.set_ylabel("ratio  lhs / (p log N)^{k/2} rhs")
        ax.set_title(f"k = {k}")
        ax.grid(True, linewidth=0.3, alpha=0.5)
    axes[0][0].legend(fontsize=7)
    fig.suptitle(f"{command}: moment norm vs flattening bound")
    fig.tight_layout()
    path = os.path.join(out_dir, f"{command.replace('-', '_')}_ratios.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _slack_figure(records: Sequence[dict], out_dir: str) -> str:
    plt = _pyplot()
    labels = [f"{rec['family']}\nk{rec['k']} N{rec['N']} p{rec['p']:g}"
              for rec in records]
    values = [rec["ratio"] for rec in records]
    clipped = [v if math.isfinite(v) else 40.0 for v in values]
    fig, ax = plt.subplots(figsize=(max(6.0, 0.45 * len(records)), 3.8))
    ax.bar(range(len(records)), clipped, color="#4878a8")
    ax.axhline(-3.0, color="#b03030", linewidth=1.0, linestyle="--",
               label="-3 combined stderr")
    ax.set_xticks(range(len(records)))
    ax.set_xticklabels(labels, fontsize=5, rotation=90)
    ax.set_ylabel("slack / combined stderr")
    ax.set_title("decoupling: rhs - lhs in combined stderr units")
    ax.legend(fontsize=7)
    fig.tight_layout()
    path = os.path.join(out_dir, "decoupling_slack.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
