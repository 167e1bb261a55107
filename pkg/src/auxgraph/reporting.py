"""Figure rendering for CLI reports. Uses the Agg backend only."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def save_weight_heatmap(weights: np.ndarray, path: str | Path, title: str = "Contribution weights") -> None:
    """Heatmap of per-test-utterance auxiliary weights."""
    weights = np.asarray(weights, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(7, 5))
    im = ax.imshow(weights, aspect="auto", interpolation="nearest", cmap="viridis")
    ax.set_xlabel("auxiliary index")
    ax.set_ylabel("test utterance index")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, label="weight")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_det_curve(points, path: str | Path, eer_value: float | None = None) -> None:
    """FAR/FRR staircase with the equal-error diagonal."""
    far = [p[0] for p in points]
    frr = [p[1] for p in points]
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    ax.plot(far, frr, drawstyle="steps-post", label="detection tradeoff")
    ax.plot([0, 1], [0, 1], linestyle=":", color="gray", label="FAR = FRR")
    if eer_value is not None:
        ax.plot([eer_value], [eer_value], "o", color="crimson", label=f"EER = {100 * eer_value:.2f}%")
    ax.set_xlabel("false acceptance rate")
    ax.set_ylabel("false rejection rate")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_loss_curve(history, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(6.5, 4))
    ax.plot(range(len(history)), history)
    ax.set_xlabel("step")
    ax.set_ylabel("pair loss")
    ax.set_title("Training loss")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
