"""Matplotlib report figures (PNG) that accompany the CSV and P6 outputs.

These are for reading; the P6 writer in ``pixmap`` is the byte-exact artifact.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .boundaries import IMAG_ZERO, REAL_GAP  # noqa: E402

LINE_STYLE = {REAL_GAP: dict(color="cyan", ls="--"), IMAG_ZERO: dict(color="black", ls="-.")}
# keep PNG output free of timestamps so reruns give identical files
_PNG_META = {"Software": None}


def _overlay(ax, polylines):
    seen = set()
    for line in polylines:
        label = None if line.family in seen else line.family
        seen.add(line.family)
        ax.plot(line.points[:, 1], line.points[:, 0], lw=1.2, label=label, **LINE_STYLE[line.family])


def heatmap_png(path, eta_axis, u_axis, grid, valid, vmin, vmax, polylines=(), title="", label=""):
    fig, ax = plt.subplots(figsize=(5, 4))
    masked = np.ma.masked_where(~(valid & np.isfinite(grid)), grid)
    cmap = matplotlib.colormaps["viridis"].with_extremes(bad="0.5")
    if len(eta_axis) > 1 and len(u_axis) > 1:
        mesh = ax.pcolormesh(u_axis, eta_axis, masked, cmap=cmap, vmin=vmin, vmax=vmax, shading="nearest")
        fig.colorbar(mesh, ax=ax, label=label)
        ax.set_xlim(u_axis[0], u_axis[-1])
        ax.set_ylim(eta_axis[0], eta_axis[-1])
    _overlay(ax, polylines)
    if polylines:
        ax.legend(loc="upper right", fontsize=7)
    ax.set_xlabel("U/t")
    ax.set_ylabel(r"$\eta$")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)


def boundaries_png(path, polylines, u_window=(-4, 4), title=""):
    fig, ax = plt.subplots(figsize=(5, 4))
    _overlay(ax, polylines)
    ax.set_xlim(*u_window)
    ax.set_xlabel("U/t")
    ax.set_ylabel(r"$\eta$")
    ax.set_title(title)
    if polylines:
        ax.legend(loc="upper right", fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)


def curve_png(path, curve, loss_name=""):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    if curve:
        c = np.asarray(curve, dtype=float)
        ax.plot(c[:, 0], c[:, 1], label="train")
        ax.plot(c[:, 0], c[:, 2], label="validation")
        ax.legend()
    ax.set_xlabel("epoch")
    ax.set_ylabel(loss_name or "loss")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)
