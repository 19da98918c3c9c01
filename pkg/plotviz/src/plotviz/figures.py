"""Figures from solver run directories.

Every figure is a pure function of the CSV/JSON files a run leaves
behind; the solver itself is never imported.  A run directory contains
``moments_t<t>.csv`` files (columns x, rho, velocity, energy_eV, current,
E_field, potential), optional ``pdf_x<loc>_t<t>.csv`` slices, and
``run_meta.json``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

MOMENT_COLUMNS = ("x", "rho", "velocity", "energy_eV", "current",
                  "E_field", "potential")

# figure kind -> (column, y label, log scale)
PROFILE_KINDS = {
    "density": ("rho", r"density $\rho$ [1/m$^3$]", True),
    "velocity": ("velocity", "mean velocity [m/s]", False),
    "energy": ("energy_eV", "mean energy [eV]", False),
    "current": ("current", r"current [A/m$^2$]", False),
    "field": ("E_field", "electric field [V/m]", False),
    "potential": ("potential", "potential [V]", False),
}

_MOMENT_RE = re.compile(r"moments_t([0-9.]+)\.csv$")
_PDF_RE = re.compile(r"pdf_x([0-9.]+)_t([0-9.]+)\.csv$")


@dataclass
class FigureSpec:
    """What to draw: kind, inputs, and presentation choices."""

    kind: str                       # moment-profile | surface | pdf-heatmap
    run_dirs: list
    out_dir: Path
    time: float | None = None      # None: latest common time
    profiles: tuple = tuple(PROFILE_KINDS)
    dpi: int = 150

    def __post_init__(self):
        for d in self.run_dirs:
            if not Path(d).is_dir():
                raise FileNotFoundError(f"run directory not found: {d}")


@dataclass
class RunData:
    """Parsed contents of one run directory."""

    path: Path
    label: str
    moments: dict = field(default_factory=dict)   # time -> (N, 7) array
    pdfs: dict = field(default_factory=dict)      # (x, time) -> (M, 3) array

    @property
    def times(self):
        return sorted(self.moments)


def _read_csv(path: Path) -> np.ndarray:
    with open(path) as fh:
        fh.readline()
        return np.loadtxt(fh, delimiter=",", ndmin=2)


def load_run(run_dir) -> RunData:
    run_dir = Path(run_dir)
    label = run_dir.name
    meta_path = run_dir / "run_meta.json"
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        label = meta.get("config", {}).get("band", label)
    data = RunData(path=run_dir, label=label)
    for f in sorted(run_dir.iterdir()):
        m = _MOMENT_RE.match(f.name)
        if m:
            data.moments[float(m.group(1))] = _read_csv(f)
            continue
        m = _PDF_RE.match(f.name)
        if m:
            data.pdfs[(float(m.group(1)), float(m.group(2)))] = _read_csv(f)
    if not data.moments:
        raise FileNotFoundError(f"no moments_t*.csv files in {run_dir}")
    return data


def common_time(runs, requested=None) -> float:
    """Latest time present in every run (or validate the requested one)."""
    shared = set(runs[0].times)
    for run in runs[1:]:
        shared &= set(run.times)
    if not shared:
        raise ValueError("runs share no snapshot times")
    if requested is not None:
        if requested not in shared:
            raise ValueError(f"t={requested} not present in all runs")
        return requested
    return max(shared)


def column(table: np.ndarray, name: str) -> np.ndarray:
    return table[:, MOMENT_COLUMNS.index(name)]


def moment_profile_figure(runs, kind: str, time: float):
    """One moment vs position, overlaying all runs at the same time."""
    col, ylabel, log = PROFILE_KINDS[kind]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for run in runs:
        table = run.moments[time]
        ax.plot(column(table, "x"), column(table, col), label=run.label)
    if log:
        ax.set_yscale("log")
    ax.set_xlabel(r"position $x$ [$\ell_*$]")
    ax.set_ylabel(ylabel)
    ax.set_title(f"{kind} at t = {time:g} ps")
    if len(runs) > 1:
        ax.legend()
    fig.tight_layout()
    return fig


def current_surface_figure(run):
    """Current vs (t, x) for one run, from all its snapshots."""
    times = run.times
    x = column(run.moments[times[0]], "x")
    J = np.array([column(run.moments[t], "current") for t in times])
    fig, ax = plt.subplots(figsize=(6.5, 4.2))
    mesh = ax.pcolormesh(x, times, J, shading="nearest")
    fig.colorbar(mesh, ax=ax, label=r"current [A/m$^2$]")
    ax.set_xlabel(r"position $x$ [$\ell_*$]")
    ax.set_ylabel("time [ps]")
    ax.set_title(f"current vs (t, x) [{run.label}]")
    fig.tight_layout()
    return fig


def pdf_heatmap_figure(run, x_probe: float, time: float):
    """Distribution slice in Cartesian momentum coordinates.

    The slice is azimuthally symmetric, so the (r, mu) grid maps to the
    k_z = 0 plane via k_x = sqrt(r) mu, k_y = +/- sqrt(r) sqrt(1 - mu^2),
    mirrored across the k_x axis.
    """
    table = run.pdfs[(x_probe, time)]
    r, mu, f = table[:, 0], table[:, 1], table[:, 2]
    kx = np.sqrt(r) * mu
    ky = np.sqrt(r) * np.sqrt(np.maximum(0.0, 1.0 - mu**2))
    kx2 = np.concatenate([kx, kx])
    ky2 = np.concatenate([ky, -ky])
    f2 = np.concatenate([f, f])
    fig, ax = plt.subplots(figsize=(5.6, 4.6))
    tri = ax.tripcolor(kx2, ky2, f2, shading="gouraud")
    fig.colorbar(tri, ax=ax, label=r"$f(r,\mu)$")
    ax.set_xlabel(r"$k_x$ [$k_{scale}$]")
    ax.set_ylabel(r"$k_y$ [$k_{scale}$]")
    ax.set_title(f"pdf at x = {x_probe:g}, t = {time:g} ps [{run.label}]")
    ax.set_aspect("equal")
    fig.tight_layout()
    return fig


def render(spec: FigureSpec) -> list:
    """Produce every figure the spec asks for; returns written paths."""
    runs = [load_run(d) for d in spec.run_dirs]
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def save(fig, name):
        path = out / name
        fig.savefig(path, dpi=spec.dpi)
        plt.close(fig)
        written.append(path)

    if spec.kind in ("moment-profile", "all"):
        t = common_time(runs, spec.time)
        for kind in spec.profiles:
            save(moment_profile_figure(runs, kind, t),
                 f"{kind}_t{t:g}.png")
    if spec.kind in ("surface", "all"):
        for run in runs:
            if len(run.times) > 1:
                save(current_surface_figure(run),
                     f"current_surface_{run.label}.png")
    if spec.kind in ("pdf-heatmap", "all"):
        for run in runs:
            for (x_probe, t) in sorted(run.pdfs):
                save(pdf_heatmap_figure(run, x_probe, t),
                     f"pdf_{run.label}_x{x_probe:g}_t{t:g}.png")
    return written
