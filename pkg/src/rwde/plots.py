"""Figure rendering for the CLI report paths.

Everything draws to a file through the Agg backend; there is no interactive
display. Figures accompany the delimited outputs, they never replace them.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .experiments import FitResult, TailEstimate, TrajectoryRun


def plot_survival(estimate: TailEstimate, path: str) -> None:
    """Log-log empirical survival of G(o,o) with both fitted slopes."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(estimate.survival_t, estimate.survival_p, ".", ms=3, color="0.3", label="empirical")
    t_lo, t_hi = estimate.regression_range
    ts = np.geomspace(t_lo, t_hi, 50)
    p_lo = np.interp(t_lo, estimate.survival_t, estimate.survival_p)
    ax.loglog(
        ts,
        p_lo * (ts / t_lo) ** (-estimate.regression_exponent),
        "-",
        label=f"regression: {estimate.regression_exponent:.3f}",
    )
    th = estimate.hill_threshold
    ph = np.interp(th, estimate.survival_t, estimate.survival_p)
    ts = np.geomspace(th, estimate.survival_t[-1], 50)
    ax.loglog(ts, ph * (ts / th) ** (-estimate.hill_exponent), "--", label=f"Hill: {estimate.hill_exponent:.3f}")
    ax.set_xlabel("t")
    ax.set_ylabel("P(G(o,o) > t)")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_trajectory(run: TrajectoryRun, path: str, fit: FitResult | None = None) -> None:
    """Mean displacement curve, optionally with the fitted power law and
    the objective profile over the exponent grid."""
    ncols = 2 if fit is not None else 1
    fig, axes = plt.subplots(1, ncols, figsize=(6 * ncols, 4.5))
    ax = axes[0] if fit is not None else axes
    ax.plot(run.checkpoints, run.mean_y, color="0.2", lw=1, label="mean displacement")
    if fit is not None:
        ns = np.asarray(run.checkpoints, dtype=float)
        ax.plot(
            ns,
            fit.amplitude * ns**fit.alpha,
            "--",
            label=f"{fit.amplitude:.3g} n^{fit.alpha:.2f}",
        )
        ax.axvspan(fit.window[0], fit.window[1], color="0.9", zorder=0)
    ax.set_xlabel("n")
    ax.set_ylabel("mean of X_n . e1")
    ax.legend(frameon=False)
    if fit is not None:
        ax2 = axes[1]
        ax2.plot(fit.grid, fit.objectives, ".-", color="0.2")
        ax2.axvline(fit.alpha, color="r", lw=0.8)
        ax2.set_xlabel("exponent")
        ax2.set_ylabel("max relative error over window")
        ax2.set_yscale("log")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
