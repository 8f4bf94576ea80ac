"""Figure rendering for the CLI report path.

Each renderer takes a CSV written by a CLI command and saves a PNG next to
it. The CSVs remain the primary artifact; figures are a convenience view of
the same data.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

SITE_COLORS = ["#e41a1c", "#377eb8", "#4daf4a", "#984ea3",
               "#ff7f00", "#a65628", "#f781bf"]


def read_csv(path) -> tuple[list[str], dict[str, np.ndarray]]:
    """Parse a command CSV into (header comment lines, column arrays)."""
    header = []
    cols = None
    data = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            header.append(line)
        elif cols is None:
            cols = line.split(",")
        elif line.strip():
            data.append([float(x) for x in line.split(",")])
    if cols is None:
        raise ValueError(f"{path}: no column header found")
    arr = np.array(data) if data else np.zeros((0, len(cols)))
    return header, {name: arr[:, i] for i, name in enumerate(cols)}


def _finish(fig, out_png):
    for ax in fig.axes:
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)


def plot_propagation(csv_path, out_png) -> None:
    _, cols = read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    t = cols["t_fs"] / 1000.0
    for m in range(1, 8):
        ax.plot(t, cols[f"p_site{m}"], label=f"site {m}",
                color=SITE_COLORS[m - 1], lw=1.2)
    ax.plot(t, cols["p_RC"], "k--", label="RC", lw=1.5)
    ax.plot(t, cols["p_ground"], color="gray", ls=":", label="ground", lw=1.2)
    ax.set_xlabel("time (ps)")
    ax.set_ylabel("population")
    ax.legend(fontsize=8, ncol=3)
    _finish(fig, out_png)


def plot_lambda_sweep(csv_path, out_png) -> None:
    _, cols = read_csv(csv_path)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.5, 3.6))
    for site in sorted(set(cols["site"].astype(int))):
        sel = cols["site"].astype(int) == site
        lam = cols["lambda_cm1"][sel]
        order = np.argsort(lam)
        ax1.plot(lam[order], cols["trapping_time_ps"][sel][order], "o-",
                 label=f"site {site}")
        ax2.plot(lam[order], cols["efficiency"][sel][order], "s-",
                 label=f"site {site}")
    ax1.set_xlabel(r"reorganization energy (cm$^{-1}$)")
    ax1.set_ylabel("trapping time (ps)")
    ax2.set_xlabel(r"reorganization energy (cm$^{-1}$)")
    ax2.set_ylabel("efficiency")
    ax1.legend(fontsize=8)
    _finish(fig, out_png)


def plot_grid_shift_temp(csv_path, out_png) -> None:
    _, cols = read_csv(csv_path)
    des = np.array(sorted(set(cols["delta_e_cm1"])))
    temps = np.array(sorted(set(cols["temperature_k"])))
    eff = np.full((len(temps), len(des)), np.nan)
    for de, t, e in zip(cols["delta_e_cm1"], cols["temperature_k"], cols["efficiency"]):
        eff[np.searchsorted(temps, t), np.searchsorted(des, de)] = e
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    mesh = ax.pcolormesh(des, temps, eff, shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="efficiency")
    ax.set_xlabel(r"site-energy shift $\Delta E$ (cm$^{-1}$)")
    ax.set_ylabel("temperature (K)")
    _finish(fig, out_png)


def plot_temp_sweep(csv_path, out_png) -> None:
    _, cols = read_csv(csv_path)
    order = np.argsort(cols["temperature_k"])
    t = cols["temperature_k"][order]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.5, 3.6))
    ax1.plot(t, cols["trapping_time_ps"][order], "o-")
    ax1.set_xlabel("temperature (K)")
    ax1.set_ylabel("trapping time (ps)")
    ax2.plot(t, cols["efficiency"][order], "s-", label="efficiency")
    ax2.plot(t, cols["thermal_deviation"][order], "d--", label="thermal deviation")
    ax2.set_xlabel("temperature (K)")
    ax2.legend(fontsize=8)
    _finish(fig, out_png)


def plot_bench(csv_path, out_png) -> None:
    _, cols = read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    ax.loglog(cols["n_tot"], cols["wall_seconds"], "o-")
    for n, x, y in zip(cols["n_max"], cols["n_tot"], cols["wall_seconds"]):
        ax.annotate(f"{int(n)}", (x, y), textcoords="offset points",
                    xytext=(4, 4), fontsize=8)
    ax.set_xlabel("auxiliary matrices")
    ax.set_ylabel("wall time (s)")
    _finish(fig, out_png)


_RENDERERS = {
    "propagate": plot_propagation,
    "sweep-lambda": plot_lambda_sweep,
    "grid-shift-temp": plot_grid_shift_temp,
    "sweep-temp": plot_temp_sweep,
    "bench": plot_bench,
}


def render(command: str, csv_path) -> Path:
    """Render the figure for a command CSV; returns the PNG path."""
    out_png = Path(csv_path).with_suffix(".png")
    _RENDERERS[command](csv_path, out_png)
    return out_png
