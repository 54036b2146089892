"""Figure rendering for CLI reports.

All figures go through the Agg backend straight to PNG files with fixed
metadata, so identical runs write identical bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_PNG_METADATA = {"Software": "deconfound"}
_DPI = 120


def _save(fig, path: str) -> None:
    fig.savefig(path, dpi=_DPI, metadata=_PNG_METADATA)
    plt.close(fig)


def propensity_histogram_figure(report, path: str) -> None:
    """Overlaid per-arm histograms of estimated treatment probabilities."""
    edges = np.asarray(report.bin_edges)
    centers = 0.5 * (edges[:-1] + edges[1:])
    width = float(edges[1] - edges[0])
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.bar(centers, report.control_counts, width=width, alpha=0.6,
           label="control", color="tab:blue")
    ax.bar(centers, report.treated_counts, width=width, alpha=0.6,
           label="treated", color="tab:orange")
    ax.set_xlabel("estimated propensity")
    ax.set_ylabel("count")
    ax.set_title(f"overlap check (support score {report.ioss:.3f}, "
                 f"extreme fraction {report.extreme_fraction:.3f})")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def estimate_figure(result, path: str) -> None:
    """Point estimate with CI plus a histogram of influence scores."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.errorbar([0], [result.estimate],
                 yerr=[[result.estimate - result.ci_low],
                       [result.ci_high - result.estimate]],
                 fmt="o", capsize=6, color="tab:blue")
    ax1.set_xlim(-1, 1)
    ax1.set_xticks([])
    ax1.set_ylabel("estimate")
    ax1.set_title(f"{result.estimand}: {result.estimate:.4g} "
                  f"[{result.ci_low:.4g}, {result.ci_high:.4g}]")
    ax2.hist(result.scores, bins=40, color="tab:gray")
    ax2.set_xlabel("influence score (centered)")
    ax2.set_ylabel("count")
    ax2.set_title("score distribution")
    fig.tight_layout()
    _save(fig, path)


def mc_figure(report, path: str) -> None:
    """Sampling distribution of the estimates across trials."""
    est = [r.estimate for r in report.trials if r.error is None]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.hist(est, bins=40, color="tab:blue", alpha=0.8)
    ax.axvline(report.true_value, color="tab:red", linestyle="--",
               label=f"truth {report.true_value:.3g}")
    ax.set_xlabel("estimate")
    ax.set_ylabel("trials")
    ax.set_title(f"bias {report.bias:.3g}, rmse {report.rmse:.3g}, "
                 f"coverage {report.coverage:.3f}")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)
