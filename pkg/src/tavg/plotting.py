"""Matplotlib figure rendering for loss logs, metric reports, and frame grids."""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def _to_display(img: np.ndarray) -> np.ndarray:
    return np.clip((np.asarray(img, dtype=np.float64) + 1.0) / 2.0, 0.0, 1.0)


def plot_losses(records, out_path, title: str = "adversarial training") -> None:
    """Loss curves (top) and mean D scores (bottom) over iterations."""
    iters = [r.iteration for r in records]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax1.plot(iters, [r.d_loss for r in records], label="D loss", lw=0.8)
    ax1.plot(iters, [r.g_loss for r in records], label="G loss", lw=0.8)
    ax1.set_ylabel("loss")
    ax1.legend()
    ax1.set_title(title)
    ax2.plot(iters, [r.d_real_mean for r in records], label="D(real)", lw=0.8)
    ax2.plot(iters, [r.d_fake_mean for r in records], label="D(fake)", lw=0.8)
    ax2.axhline(0.5, color="gray", ls=":", lw=0.8)
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("mean score")
    ax2.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def plot_metric_bars(report, out_path) -> None:
    """Grouped bars per condition for each metric column."""
    names = [r.condition for r in report.rows]
    metrics = {"MSE": [r.mse for r in report.rows],
               "SSIM": [r.ssim for r in report.rows],
               "LPIPS": [r.lpips for r in report.rows]}
    fig, axes = plt.subplots(1, 3, figsize=(9, 3))
    for ax, (label, values) in zip(axes, metrics.items()):
        ax.bar(range(len(names)), values, color="#4878a8")
        ax.set_xticks(range(len(names)))
        ax.set_xticklabels(names, rotation=20)
        ax.set_title(label)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def save_frame_grid(pairs, out_path, title: str = "") -> None:
    """Render (real, generated) frame-triplet pairs as stacked image rows."""
    if not pairs:
        return
    t = pairs[0][0].shape[0]
    n = len(pairs)
    fig, axes = plt.subplots(2 * n, t, figsize=(1.2 * t, 2.4 * n),
                             squeeze=False)
    for row, (real, fake) in enumerate(pairs):
        for col in range(t):
            axes[2 * row][col].imshow(_to_display(real[col]))
            axes[2 * row + 1][col].imshow(_to_display(fake[col]))
    for ax in axes.ravel():
        ax.set_xticks([])
        ax.set_yticks([])
    if title:
        fig.suptitle(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
