"""Figure rendering for the CLI report path (always to files, never a GUI)."""

from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_convergence(rows, path, x: str = "N") -> None:
    """Log-log error curves, one line per (pair, mode) series."""
    series = {}
    for r in rows:
        series.setdefault((r.pair, r.mode), []).append(r)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for (pair, mode), rr in sorted(series.items()):
        if x == "N":
            xs = [r.N for r in rr]
        else:
            xs = [1.0 / (r.N * r.eps) for r in rr]
        ax.loglog(xs, [r.e_rel for r in rr], "o-", label=f"{pair} [{mode}]")
    ax.set_xlabel("N" if x == "N" else "1/(N eps)")
    ax.set_ylabel("relative average error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_field(points, field, path, subsample: int = 0) -> None:
    """Curvature intensity map; 2D adds arrows, 3D renders a scatter."""
    points = np.atleast_2d(points)
    mags = field.magnitudes
    step = max(1, len(points) // subsample) if subsample else 1
    sel = np.arange(0, len(points), step)
    if points.shape[1] == 2:
        fig, ax = plt.subplots(figsize=(6, 6))
        sc = ax.scatter(points[:, 0], points[:, 1], c=mags, s=4, cmap="viridis")
        ax.quiver(points[sel, 0], points[sel, 1],
                  field.vectors[sel, 0], field.vectors[sel, 1],
                  angles="xy", scale_units="xy", color="tab:red", alpha=0.5, width=0.002)
        ax.set_aspect("equal")
    else:
        fig = plt.figure(figsize=(6, 6))
        ax = fig.add_subplot(projection="3d")
        sc = ax.scatter(points[:, 0], points[:, 1], points[:, 2], c=mags, s=2,
                        cmap="viridis")
    fig.colorbar(sc, ax=ax, shrink=0.8, label="|H|")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_vertex_curvature(mesh, indices, vectors, path) -> None:
    """Interior-vertex curvature magnitudes over a mesh vertex scatter."""
    mags = np.linalg.norm(vectors, axis=1)
    fig = plt.figure(figsize=(6, 6))
    ax = fig.add_subplot(projection="3d")
    verts = mesh.vertices[indices]
    sc = ax.scatter(verts[:, 0], verts[:, 1], verts[:, 2], c=mags, s=8, cmap="viridis")
    fig.colorbar(sc, ax=ax, shrink=0.8, label="|H|")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
