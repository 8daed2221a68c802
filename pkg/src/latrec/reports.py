"""Figure rendering for report outputs.

Figures are written next to the delimited report files. The Agg backend
is forced so rendering works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def render_sweep_figure(rows: list[tuple[float, float]], best_lam: float,
                        path: str, title: str = "Interpolation weight sweep") -> None:
    """Corpus WER as a function of the interpolation weight."""
    lams = [lam for lam, _ in rows]
    wers = [100.0 * w for _, w in rows]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(lams, wers, marker="o", markersize=4, linewidth=1.5, color="#1f77b4")
    best_wer = dict(rows)[best_lam] * 100.0
    ax.plot([best_lam], [best_wer], marker="*", markersize=14, color="#d62728",
            linestyle="none", label=f"best: {best_lam:g} ({best_wer:.2f}%)")
    ax.set_xlabel("interpolation weight")
    ax.set_ylabel("corpus WER (%)")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_oracle_figure(summary: dict[str, float], path: str,
                         title: str = "Oracle WER by decoding-space size") -> None:
    """Bar chart of pooled oracle WER per hypothesis source."""
    labels = list(summary)
    values = [100.0 * summary[k] for k in labels]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    bars = ax.bar(labels, values, color="#1f77b4", width=0.6)
    for bar, value in zip(bars, values):
        ax.text(bar.get_x() + bar.get_width() / 2, bar.get_height(),
                f"{value:.2f}", ha="center", va="bottom", fontsize=9)
    ax.set_ylabel("oracle WER (%)")
    ax.set_title(title)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
