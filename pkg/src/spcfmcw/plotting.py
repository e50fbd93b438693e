"""Matplotlib figures for run, sweep and matched-filter products.

All functions write a PNG and close their figure; the Agg backend is used so
no display is required.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, Mapping, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

PathLike = Union[str, Path]

# Fixed metadata keeps repeated renders byte-stable.
_PNG_META = {"Software": None}
_FLOOR_DB = -140.0


def _save(fig, path: PathLike) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_PNG_META)
    plt.close(fig)
    return path


def plot_range_profile(range_m: np.ndarray, magnitude_db: np.ndarray, path: PathLike, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(7, 3.6))
    ax.plot(range_m, np.maximum(magnitude_db, _FLOOR_DB), lw=0.8)
    ax.set_xlabel("range [m]")
    ax.set_ylabel("magnitude [dB]")
    ax.set_ylim(_FLOOR_DB, 5)
    ax.grid(alpha=0.3)
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_range_doppler(range_m, velocity, magnitude_db, path: PathLike, dynamic_range_db: float = 100.0) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4.2))
    mesh = ax.pcolormesh(velocity, range_m, magnitude_db, shading="nearest",
                         vmin=-dynamic_range_db, vmax=0, cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="dB")
    ax.set_xlabel("velocity [m/s]")
    ax.set_ylabel("range [m]")
    return _save(fig, path)


def plot_spectrogram(times, freqs, magnitude_db, path: PathLike, dynamic_range_db: float = 80.0) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4.2))
    mesh = ax.pcolormesh(np.asarray(times) * 1e6, np.asarray(freqs) * 1e-6, magnitude_db,
                         shading="nearest", vmin=-dynamic_range_db, vmax=0, cmap="magma")
    fig.colorbar(mesh, ax=ax, label="dB")
    ax.set_xlabel("time [us]")
    ax.set_ylabel("frequency [MHz]")
    return _save(fig, path)


def plot_sweep(rows: Sequence[Mapping[str, object]], axis: str, metric: str, path: PathLike) -> Path:
    """One line per phase type; the metric is averaged (median) over seeds."""
    fig, ax = plt.subplots(figsize=(6.5, 4))
    groups: Dict[str, Dict[object, list]] = {}
    for r in rows:
        groups.setdefault(str(r["phase_type"]), {}).setdefault(r["value"], []).append(float(r[metric]))
    categorical = axis == "phase_type"
    for name, pts in groups.items():
        xs = list(pts)
        ys = [float(np.median(pts[x])) for x in xs]
        if categorical:
            ax.plot([str(x) for x in xs], ys, "o", label=name)
        else:
            ax.plot([float(x) for x in xs], ys, "o-", label=name)
    if axis == "n_chips":
        ax.set_xscale("log", base=2)
    ax.set_xlabel(axis)
    ax.set_ylabel(metric)
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, path)


def plot_comparison(range_m, curves: Mapping[str, np.ndarray], path: PathLike) -> Path:
    fig, ax = plt.subplots(figsize=(7, 3.6))
    for label, y in curves.items():
        ax.plot(range_m, np.maximum(y, _FLOOR_DB), lw=0.8, label=label)
    ax.set_xlabel("range [m]")
    ax.set_ylabel("magnitude [dB]")
    ax.set_ylim(_FLOOR_DB, 5)
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, path)
