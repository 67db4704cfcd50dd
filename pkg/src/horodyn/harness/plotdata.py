"""Figure data tables and their matplotlib renderings.

Two plot kinds are supported.  A margin grid samples the signed margin of a
horosphere over a planar slice of the domain; an orbit trace records one
orbit step by step.  Each emit writes a CSV table and a PNG with the same
stem, so the numbers behind every figure stay inspectable.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from ..dynamics import iterate
from ..geometry import gauge
from ..horospheres import horosphere_margin, small_horosphere
from ..mapexpr import parse_map
from .config import ConfigError, ScenarioConfig
from .suites import default_maps

_VIEW = 0.999  # grid extent; stays strictly inside the closed bidisk square


def _plot_center(config: ScenarioConfig) -> np.ndarray:
    d = config.domain
    if config.plot.center is None:
        c = np.zeros(d.dim, dtype=complex)
        if d.is_product:
            c[:] = 1.0
        else:
            c[0] = 1.0
        return c
    src = config.plot.center
    if len(src) != d.dim:
        raise ConfigError(f"plot center needs {d.dim} entries, got {len(src)}")
    return np.asarray(src, dtype=complex)


def _plot_start(config: ScenarioConfig) -> np.ndarray:
    d = config.domain
    if config.plot.start is None:
        return np.zeros(d.dim, dtype=complex)
    src = config.plot.start
    if len(src) != d.dim:
        raise ConfigError(f"plot start needs {d.dim} entries, got {len(src)}")
    return np.asarray(src, dtype=complex)


def _plot_map(config: ScenarioConfig):
    text = config.plot.map_text
    if text is None:
        pool = config.maps or default_maps(config.domain)
        text = pool[0]
    return parse_map(text, config.domain)


def margin_grid_table(config: ScenarioConfig):
    """Margin of a sublevel horosphere over a planar slice.

    One complex dimension: the slice is the z1 plane itself.  Higher
    dimension: real parts of z1 and z2 with the remaining coordinates at
    zero.  Points outside the domain carry nan.
    """
    d = config.domain
    n = config.plot.grid
    if n < 2:
        raise ConfigError("plot grid must be at least 2")
    center = _plot_center(config)
    h = small_horosphere(d, np.zeros(d.dim, dtype=complex), center, config.plot.radius)
    axis = np.linspace(-_VIEW, _VIEW, n)
    xx, yy = np.meshgrid(axis, axis)
    pts = np.zeros((n * n, d.dim), dtype=complex)
    if d.dim == 1:
        pts[:, 0] = (xx + 1j * yy).ravel()
        cols = ("re_z1", "im_z1", "margin")
    else:
        pts[:, 0] = xx.ravel()
        pts[:, 1] = yy.ravel()
        cols = ("re_z1", "re_z2", "margin")
    inside = np.asarray(gauge(d, pts)) < 1.0
    values = np.full(n * n, math.nan)
    if np.any(inside):
        margins, _ = horosphere_margin(h, pts[inside])
        values[inside] = margins
    rows = [(float(xx.ravel()[i]), float(yy.ravel()[i]), float(values[i]))
            for i in range(n * n)]
    return cols, rows, (axis, values.reshape(n, n))


def orbit_trace_table(config: ScenarioConfig):
    """One orbit of the configured map: per-step coordinates and distance."""
    d = config.domain
    steps = config.plot.steps
    cols = ["step", "gauge", "k_from_pole"]
    for j in range(1, d.dim + 1):
        cols += [f"re_z{j}", f"im_z{j}"]
    if steps <= 0:
        return tuple(cols), [], None
    m = _plot_map(config)
    orbit = iterate(m, _plot_start(config), steps)
    rows = []
    for i, p in enumerate(orbit.points):
        row = [float(i), float(gauge(d, p)), float(orbit.k_from_pole[i])]
        for j in range(d.dim):
            row += [float(p[j].real), float(p[j].imag)]
        rows.append(tuple(row))
    return tuple(cols), rows, orbit


def write_table(path, cols, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _render_margin(path, axis, grid, config: ScenarioConfig) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 5.0))
    mesh = ax.pcolormesh(axis, axis, grid, shading="auto", cmap="RdBu_r",
                         vmin=-2.0, vmax=2.0)
    finite = np.isfinite(grid)
    if finite.any() and (grid[finite] < 0).any() and (grid[finite] > 0).any():
        ax.contour(axis, axis, grid, levels=[0.0], colors="k", linewidths=1.0)
    fig.colorbar(mesh, ax=ax, label="margin")
    ax.set_aspect("equal")
    ax.set_title(f"horosphere margin, R={config.plot.radius:g}")
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _render_trace(path, orbit, config: ScenarioConfig) -> None:
    fig, (left, right) = plt.subplots(1, 2, figsize=(9.0, 4.0))
    angles = np.linspace(0.0, 2.0 * math.pi, 256)
    left.plot(np.cos(angles), np.sin(angles), color="0.7", lw=0.8)
    if orbit is not None:
        z1 = orbit.points[:, 0]
        left.plot(z1.real, z1.imag, ".-", ms=3, lw=0.7)
        finite = np.isfinite(orbit.k_from_pole)
        right.plot(np.flatnonzero(finite), orbit.k_from_pole[finite], ".-", ms=3, lw=0.7)
    left.set_aspect("equal")
    left.set_title("first coordinate")
    right.set_title("distance from origin")
    right.set_xlabel("step")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def emit_plot(config: ScenarioConfig, stem) -> tuple:
    """Write <stem>.csv and <stem>.png for the configured plot kind."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    csv_path = stem.with_suffix(".csv")
    png_path = stem.with_suffix(".png")
    if config.plot.kind == "margin-grid":
        cols, rows, (axis, grid) = margin_grid_table(config)
        write_table(csv_path, cols, rows)
        _render_margin(png_path, axis, grid, config)
    elif config.plot.kind == "orbit-trace":
        cols, rows, orbit = orbit_trace_table(config)
        write_table(csv_path, cols, rows)
        _render_trace(png_path, orbit, config)
    else:
        raise ConfigError(f"unknown plot kind {config.plot.kind!r}")
    return csv_path, png_path


def summary_figure(report, path) -> None:
    """Bar chart of record margins, colored by status."""
    records = sorted(report.records, key=lambda r: r.id)
    fig, ax = plt.subplots(figsize=(7.0, max(2.5, 0.28 * len(records) + 1.2)))
    colors = {"pass": "tab:green", "fail": "tab:red", "indeterminate": "tab:orange"}
    ys = np.arange(len(records))
    widths = []
    for r in records:
        mag = abs(r.margin)
        widths.append(0.0 if not math.isfinite(mag) else math.log10(max(mag, 1e-16)))
    ax.barh(ys, widths, color=[colors.get(r.status, "0.5") for r in records])
    ax.set_yticks(ys)
    ax.set_yticklabels([r.id for r in records], fontsize=7)
    ax.invert_yaxis()
    ax.set_xlabel("log10 |margin|")
    ax.set_title(f"{report.suite} suite, seed {report.seed}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
