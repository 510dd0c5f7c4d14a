"""Optional matplotlib figures for diagnostics output.

Everything here is presentation only; no numerical result depends on it.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

import numpy as np  # noqa: E402

from .diagnostics import DiagnosticsRecord  # noqa: E402
from .grid import GridDensity  # noqa: E402

__all__ = ["plot_records", "plot_density", "plot_comparison"]


def plot_records(records: list[DiagnosticsRecord], path: str | Path) -> None:
    """Two panels: the identity terms over time, and the residual."""
    t = [r.t for r in records]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 7), sharex=True)

    ax1.plot(t, [r.kl for r in records], label="KL", marker=".")
    ax1.plot(t, [r.fisher for r in records], label="Fisher", marker=".")
    ax1.plot(t, [r.dt_term for r in records], label="dt term", marker=".")
    ax1.set_ylabel("value")
    ax1.legend()
    ax1.grid(True, alpha=0.3)

    t_fd = [r.t for r in records if r.residual is not None]
    res = [abs(r.residual) for r in records if r.residual is not None]
    if t_fd:
        ax2.semilogy(t_fd, res, marker=".", color="tab:red")
    ax2.set_xlabel("t")
    ax2.set_ylabel("|residual|")
    ax2.grid(True, alpha=0.3)

    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_density(density: GridDensity, path: str | Path) -> None:
    grid = density.grid
    fig, ax = plt.subplots(figsize=(6, 4.5))
    if grid.dim == 1:
        ax.plot(grid.axes[0].centers(), density.values)
        ax.set_xlabel("x")
        ax.set_ylabel("q(x)")
    else:
        x0 = grid.axes[0].centers()
        x1 = grid.axes[1].centers()
        im = ax.pcolormesh(
            x0, x1, density.values.T, shading="nearest", cmap="viridis"
        )
        fig.colorbar(im, ax=ax, label="q(x)")
        ax.set_xlabel("x0")
        ax.set_ylabel("x1")
    ax.set_title(f"t = {density.t:g}, mass = {density.mass:.6f}")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_comparison(
    grid_density: GridDensity, hist_density: GridDensity, path: str | Path
) -> None:
    """Overlay a solver marginal and a particle histogram on one axis (1D)."""
    if grid_density.grid.dim != 1:
        raise ValueError("comparison plot is 1D only")
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.plot(
        grid_density.grid.axes[0].centers(), grid_density.values, label="solver"
    )
    centers = hist_density.grid.axes[0].centers()
    width = hist_density.grid.axes[0].h
    ax.bar(
        centers, hist_density.values, width=width,
        alpha=0.4, color="tab:orange", label="particles",
    )
    ax.set_xlabel("x")
    ax.set_ylabel("density")
    ax.legend()
    ax.set_title(f"t = {grid_density.t:g}")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
