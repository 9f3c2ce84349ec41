"""Matplotlib rendering of activation maps and method comparisons.

Figures are written straight to files (Agg backend, no display).  Rendering
is deterministic for identical inputs, so figure files participate in the
same byte-reproducibility guarantee as the delimited outputs.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_map_figure(path, results, dims, title: str) -> None:
    """Render per-slice heat maps of |statistic| with active voxels marked."""
    nx, ny, nz = dims
    mags = np.abs(np.array([r.statistic for r in results])).reshape(nx, ny, nz)
    active = np.array([r.active for r in results], dtype=bool).reshape(nx, ny, nz)
    vmax = mags.max() if mags.max() > 0 else 1.0

    ncols = min(nz, 4)
    nrows = (nz + ncols - 1) // ncols
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(3.2 * ncols, 3.0 * nrows), squeeze=False
    )
    last_image = None
    for z in range(nz):
        ax = axes[z // ncols][z % ncols]
        last_image = ax.imshow(
            mags[:, :, z].T, origin="lower", cmap="magma", vmin=0.0, vmax=vmax
        )
        ax_y, ax_x = np.nonzero(active[:, :, z].T)
        if ax_x.size:
            ax.scatter(ax_x, ax_y, s=18, facecolors="none", edgecolors="cyan", linewidths=0.9)
        ax.set_title(f"z = {z}", fontsize=9)
        ax.set_xlabel("x", fontsize=8)
        ax.set_ylabel("y", fontsize=8)
        ax.tick_params(labelsize=7)
    for idx in range(nz, nrows * ncols):
        axes[idx // ncols][idx % ncols].axis("off")
    if last_image is not None:
        fig.colorbar(last_image, ax=[a for row in axes for a in row], shrink=0.85, label="|statistic|")
    fig.suptitle(title)
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_compare_figure(path, glm_results, gc_results, title: str) -> None:
    """Scatter GLM magnitude against causality strength per voxel."""
    glm_mag = np.abs(np.array([r.statistic for r in glm_results]))
    gc_strength = np.array(
        [r.score.strength if r.score is not None else r.statistic for r in gc_results]
    )
    both = np.array([a.active and b.active for a, b in zip(glm_results, gc_results)])
    either = np.array(
        [(a.active != b.active) for a, b in zip(glm_results, gc_results)]
    )
    neither = ~(both | either)

    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    for mask, color, label in (
        (neither, "0.6", "inactive in both"),
        (either, "tab:orange", "active in one"),
        (both, "tab:red", "active in both"),
    ):
        if mask.any():
            ax.scatter(glm_mag[mask], gc_strength[mask], s=16, c=color, label=label)
    ax.set_xlabel("GLM |activation coefficient|")
    ax.set_ylabel("causality strength")
    ax.set_title(title)
    ax.legend(fontsize=8, loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
