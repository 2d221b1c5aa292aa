"""Render figures from busselab experiment CSVs.

Each figure kind consumes one of the documented CSV schemas and writes a
deterministic PNG: a fixed style sheet, no timestamps, and pinned metadata,
so rerendering identical inputs yields byte-identical files.

Kinds and their expected columns:

==============  =================================================  =========
kind            input columns                                      analogue
==============  =================================================  =========
spacetime       t, x, v                                            space-time biomass heatmap
exit-map        seed, a, k_init, sigma, t_exit, censored           log10 mean exit-time map
exit-bars       seed, a, k_init, sigma, t_exit, censored           per-k bars with error bars
stationary-map  t, a, sigma, k, frequency                          final densities over rainfall
density-time    t, a, sigma, k, frequency                          density vs time with mean curve
exit-vs-a       seed, a, k_init, sigma, t_exit, censored           semilog max exit time vs a
exit-vs-sigma   seed, a, k_init, sigma, t_exit, censored           log-log exit time vs sigma
==============  =================================================  =========

An optional boundary CSV (a, k_low, k_high) draws the stable-region
polyline on the map kinds and colors exit-bars by membership.
"""

from __future__ import annotations

from dataclasses import dataclass

import matplotlib
import numpy as np
import pandas as pd

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["FigureSpec", "SchemaError", "render", "FIGURE_KINDS"]

PNG_METADATA = {"Software": "busselab-figures"}

STYLE = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 130,
    "savefig.dpi": 130,
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.grid": False,
    "svg.hashsalt": "busselab",
}

REQUIRED_COLUMNS = {
    "spacetime": ["t", "x", "v"],
    "exit-map": ["seed", "a", "k_init", "sigma", "t_exit", "censored"],
    "exit-bars": ["seed", "a", "k_init", "sigma", "t_exit", "censored"],
    "stationary-map": ["t", "a", "sigma", "k", "frequency"],
    "density-time": ["t", "a", "sigma", "k", "frequency"],
    "exit-vs-a": ["seed", "a", "k_init", "sigma", "t_exit", "censored"],
    "exit-vs-sigma": ["seed", "a", "k_init", "sigma", "t_exit", "censored"],
}

FIGURE_KINDS = tuple(sorted(REQUIRED_COLUMNS))


class SchemaError(ValueError):
    """Input CSV does not carry the columns the figure kind needs."""

    def __init__(self, path, missing):
        self.missing = list(missing)
        super().__init__(f"{path}: missing required columns: {', '.join(self.missing)}")


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: kind, input CSV(s), output path, optional extras."""

    kind: str
    inputs: tuple[str, ...]
    out: str
    boundary: str | None = None
    xlim: tuple[float, float] | None = None
    ylim: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in REQUIRED_COLUMNS:
            raise ValueError(f"unknown figure kind {self.kind!r}; known: {', '.join(FIGURE_KINDS)}")
        if not self.inputs:
            raise ValueError("at least one input CSV is required")


def _load(path: str, kind: str) -> pd.DataFrame:
    frame = pd.read_csv(path)
    missing = [col for col in REQUIRED_COLUMNS[kind] if col not in frame.columns]
    if missing:
        raise SchemaError(path, missing)
    return frame


def _load_boundary(path: str) -> pd.DataFrame:
    frame = pd.read_csv(path)
    missing = [col for col in ("a", "k_low", "k_high") if col not in frame.columns]
    if missing:
        raise SchemaError(path, missing)
    return frame.sort_values("a")


def _draw_boundary(ax, boundary: pd.DataFrame):
    ax.plot(boundary["a"], boundary["k_low"], color="red", lw=1.4)
    ax.plot(boundary["a"], boundary["k_high"], color="red", lw=1.4)


def _cell_means(records: pd.DataFrame) -> pd.DataFrame:
    return (
        records.groupby(["a", "k_init"], as_index=False)
        .agg(mean=("t_exit", "mean"), std=("t_exit", "std"), n=("t_exit", "size"))
        .fillna({"std": 0.0})
    )


def _fig_spacetime(frame: pd.DataFrame, ax):
    pivot = frame.pivot_table(index="x", columns="t", values="v")
    mesh = ax.pcolormesh(pivot.columns, pivot.index, pivot.values, cmap="viridis", shading="nearest")
    ax.figure.colorbar(mesh, ax=ax, label="biomass v")
    ax.set_xlabel("t")
    ax.set_ylabel("x")
    ax.set_title("biomass space-time")


def _fig_exit_map(frame: pd.DataFrame, ax, boundary):
    cells = _cell_means(frame)
    pivot = cells.pivot_table(index="k_init", columns="a", values="mean")
    with np.errstate(divide="ignore"):
        values = np.log10(pivot.values)
    mesh = ax.pcolormesh(pivot.columns, pivot.index, values, cmap="magma", shading="nearest")
    ax.figure.colorbar(mesh, ax=ax, label="log10 mean exit time")
    if boundary is not None:
        _draw_boundary(ax, boundary)
    ax.set_xlabel("rainfall a")
    ax.set_ylabel("initial wave number k")
    ax.set_title("average first exit time")


def _fig_exit_bars(frame: pd.DataFrame, ax, boundary):
    a_values = frame["a"].unique()
    if len(a_values) != 1:
        raise ValueError(f"exit-bars needs records at a single rainfall value, got {sorted(a_values)}")
    a = float(a_values[0])
    cells = _cell_means(frame).sort_values("k_init")
    colors = ["steelblue"] * len(cells)
    if boundary is not None:
        lo = np.interp(a, boundary["a"], boundary["k_low"])
        hi = np.interp(a, boundary["a"], boundary["k_high"])
        inside = (cells["k_init"] >= lo) & (cells["k_init"] <= hi)
        colors = np.where(inside, "indianred", "steelblue")
    ax.bar(cells["k_init"], cells["mean"], yerr=cells["std"], color=colors, capsize=2)
    ax.set_xlabel("initial wave number k")
    ax.set_ylabel("mean exit time")
    ax.set_title(f"exit times at a={a:g}, sigma={frame['sigma'].iloc[0]:g}")


def _fig_stationary_map(frame: pd.DataFrame, ax, boundary):
    final = frame[frame["t"] == frame["t"].max()]
    pivot = final.pivot_table(index="k", columns="a", values="frequency", fill_value=0.0)
    mesh = ax.pcolormesh(pivot.columns, pivot.index, pivot.values, cmap="viridis", shading="nearest")
    ax.figure.colorbar(mesh, ax=ax, label="frequency")
    if boundary is not None:
        _draw_boundary(ax, boundary)
    ax.set_xlabel("rainfall a")
    ax.set_ylabel("local wave number k")
    ax.set_title(f"stationary local wave numbers (t={frame['t'].max():g})")


def _fig_density_time(frame: pd.DataFrame, ax):
    keys = frame[["a", "sigma"]].drop_duplicates()
    if len(keys) != 1:
        raise ValueError("density-time needs a single (a, sigma) slice")
    pivot = frame.pivot_table(index="k", columns="t", values="frequency", fill_value=0.0)
    mesh = ax.pcolormesh(pivot.columns, pivot.index, pivot.values, cmap="viridis", shading="nearest")
    ax.figure.colorbar(mesh, ax=ax, label="frequency")
    weights = pivot.values / pivot.values.sum(axis=0, keepdims=True)
    mean_curve = weights.T @ pivot.index.values
    ax.plot(pivot.columns, mean_curve, color="red", lw=1.4, label="mean")
    ax.legend(loc="upper right")
    ax.set_xlabel("t")
    ax.set_ylabel("local wave number k")
    ax.set_title(f"density of local wave numbers (a={keys['a'].iloc[0]:g}, sigma={keys['sigma'].iloc[0]:g})")


def _least_squares(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    return slope, intercept


def _fig_exit_vs_a(frame: pd.DataFrame, ax):
    cells = _cell_means(frame)
    best = cells.groupby("a", as_index=False)["mean"].max()
    y = np.log10(best["mean"])
    ax.scatter(best["a"], y, color="black", s=18, zorder=3)
    if len(best) >= 2:
        slope, intercept = _least_squares(best["a"], y)
        xs = np.linspace(best["a"].min(), best["a"].max(), 50)
        ax.plot(xs, slope * xs + intercept, color="red", lw=1.2,
                label=f"slope {slope:.2f}/unit a")
        ax.legend()
    ax.set_xlabel("rainfall a")
    ax.set_ylabel("log10 max_k mean exit time")
    ax.set_title("exponential trend of the longest exit times")


def _fig_exit_vs_sigma(frame: pd.DataFrame, ax):
    keys = frame[["a", "k_init"]].drop_duplicates()
    if len(keys) != 1:
        raise ValueError("exit-vs-sigma needs records at a single (a, k) cell")
    by_sigma = frame.groupby("sigma", as_index=False)["t_exit"].mean()
    x = np.log10(by_sigma["sigma"])
    y = np.log10(by_sigma["t_exit"])
    ax.scatter(x, y, color="black", s=18, zorder=3)
    if len(by_sigma) >= 2:
        slope, intercept = _least_squares(x, y)
        xs = np.linspace(x.min(), x.max(), 50)
        ax.plot(xs, slope * xs + intercept, color="red", lw=1.2, label=f"alpha = {slope:.1f}")
        ax.legend()
    ax.set_xlabel("log10 sigma")
    ax.set_ylabel("log10 mean exit time")
    ax.set_title(f"noise scaling at a={keys['a'].iloc[0]:g}, k={keys['k_init'].iloc[0]}")


def render(spec: FigureSpec) -> str:
    """Draw the figure and return the output path."""
    frames = [_load(path, spec.kind) for path in spec.inputs]
    frame = pd.concat(frames, ignore_index=True) if len(frames) > 1 else frames[0]
    boundary = _load_boundary(spec.boundary) if spec.boundary else None

    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        try:
            if spec.kind == "spacetime":
                _fig_spacetime(frame, ax)
            elif spec.kind == "exit-map":
                _fig_exit_map(frame, ax, boundary)
            elif spec.kind == "exit-bars":
                _fig_exit_bars(frame, ax, boundary)
            elif spec.kind == "stationary-map":
                _fig_stationary_map(frame, ax, boundary)
            elif spec.kind == "density-time":
                _fig_density_time(frame, ax)
            elif spec.kind == "exit-vs-a":
                _fig_exit_vs_a(frame, ax)
            elif spec.kind == "exit-vs-sigma":
                _fig_exit_vs_sigma(frame, ax)
            if spec.xlim:
                ax.set_xlim(*spec.xlim)
            if spec.ylim:
                ax.set_ylim(*spec.ylim)
            fig.tight_layout()
            fig.savefig(spec.out, metadata=PNG_METADATA)
        finally:
            plt.close(fig)
    return spec.out
