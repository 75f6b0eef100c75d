"""Figure rendering for solve, sweep, and game outputs.

Figures are written next to the delimited outputs; nothing is ever shown
interactively (the Agg backend is forced before pyplot loads).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .field import ScalarField  # noqa: E402
from .geometry import Region  # noqa: E402


def _field_image(field: ScalarField) -> np.ndarray:
    img = np.where(field.region == int(Region.OUTSIDE), np.nan,
                   field.values).reshape(field.grid.shape)
    return img.T  # axis 0 -> x, axis 1 -> y for imshow with origin="lower"


def save_solution_figure(lower: ScalarField, upper: ScalarField, path) -> Path | None:
    """Heatmaps of the rising limit and of the two-sided gap (2-D only)."""
    if lower.grid.dim != 2:
        return None
    gap = lower.with_values(np.where(np.isfinite(lower.values),
                                     upper.values - lower.values, np.nan))
    extent = [lower.grid.axis_coords(0)[0], lower.grid.axis_coords(0)[-1],
              lower.grid.axis_coords(1)[0], lower.grid.axis_coords(1)[-1]]
    fig, axes = plt.subplots(1, 2, figsize=(10.5, 4.4))
    for ax, fld, title in ((axes[0], lower, "rising limit"),
                           (axes[1], gap, "upper minus lower")):
        im = ax.imshow(_field_image(fld), origin="lower", extent=extent,
                       interpolation="nearest")
        ax.set_title(title)
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_sweep_figure(rows: list[dict], axis: str, path) -> Path | None:
    if not rows:
        return None
    xs = [row["value"] for row in rows]
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for key, marker in (("gap", "o"), ("residual", "s"), ("l_inf_vs_reference", "^")):
        ys = [row.get(key) for row in rows]
        if any(y is None for y in ys):
            continue
        ax.plot(xs, ys, marker=marker, label=key)
    ax.set_xlabel(axis)
    ax.set_yscale("log")
    positive = [row["gap"] for row in rows if row["gap"] > 0]
    if not positive:
        ax.set_yscale("linear")
    ax.set_ylabel("measure")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_game_figure(entries: list[dict], path) -> Path | None:
    """Value estimates with 95% intervals, against the solved value when present."""
    if not entries:
        return None
    idx = np.arange(len(entries))
    means = [e["mean"] for e in entries]
    ci = [e["ci95"] for e in entries]
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    ax.errorbar(idx, means, yerr=ci, fmt="o", capsize=4, label="Monte Carlo")
    solved = [e.get("solver_value") for e in entries]
    if all(s is not None for s in solved):
        ax.plot(idx, solved, "x", markersize=9, label="solved field")
    ax.set_xticks(idx)
    ax.set_xticklabels([",".join(f"{c:.3g}" for c in e["point"]) for e in entries],
                       rotation=30, ha="right")
    ax.set_xlabel("start point")
    ax.set_ylabel("value")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_survival_figure(table, path) -> Path | None:
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    ax.plot(table.blocks, table.survival, "o-")
    ax.set_xlabel(f"turn blocks of {table.j_tilde}")
    ax.set_ylabel("fraction still running")
    ax.set_title(f"fitted geometric rate {table.theta_hat:.3g}")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
