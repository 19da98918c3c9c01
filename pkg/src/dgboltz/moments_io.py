"""Observables (density, velocity, energy, current) and run output files.

Moments are computed with the same per-cell quadrature tables the
assembly uses, then rescaled to SI.  All run artifacts are plain CSV with
17 significant digits plus one JSON metadata file, so downstream tooling
never needs the solver.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

from .constants import K_B, Q_E
from .driver import RunState, Simulation
from .mesh import M, R, T

FMT = "%.17g"


@dataclass
class MomentSet:
    """Per-x-cell observables in SI units (field/potential included)."""

    x: np.ndarray                 # cell centers, reference-length units
    density: np.ndarray           # 1/m^3
    velocity: np.ndarray          # m/s
    energy_ev: np.ndarray         # eV
    current: np.ndarray           # A/m^2
    e_field: np.ndarray           # V/m
    potential: np.ndarray         # V
    zero_density_cells: np.ndarray

    COLUMNS = ("x", "rho", "velocity", "energy_eV", "current",
               "E_field", "potential")

    def as_table(self) -> np.ndarray:
        return np.column_stack([self.x, self.density, self.velocity,
                                self.energy_ev, self.current, self.e_field,
                                self.potential])


@dataclass
class PdfSlice:
    """Distribution f(r, mu) = 2 Phi / sqrt(r) at one position probe.

    Negative values are reported as-is; the scheme does not enforce
    positivity and clamping would hide that.
    """

    x_probe: float
    r: np.ndarray
    mu: np.ndarray
    f: np.ndarray                 # (nr, nmu)
    time_ps: float


def moments(run: RunState, sim: Simulation) -> MomentSet:
    """Kinetic moments of one snapshot.

    The velocity moment integrates the x-transport speed against the
    state, which is the group velocity in reference units l*/t*.
    """
    mesh, tables, cfg = sim.mesh, sim.tables, sim.config
    w = run.state.coeffs
    drdmu = mesh.dr[:, None] * mesh.dmu[None, :]
    rho = np.einsum("ikm,km->i", w[..., T], drdmu)

    trm = np.stack([w[..., T], w[..., R], w[..., M]], axis=-1)
    vel_moment = np.einsum("kmc,ikmc->i", tables.a1_moments, trm)
    eps_moment = _energy_moment(w, tables, mesh)

    zero = rho <= 0.0
    safe_rho = np.where(zero, 1.0, rho)
    vel_dimless = np.where(zero, 0.0, vel_moment / safe_rho)
    eps_dimless = np.where(zero, 0.0, eps_moment / safe_rho)

    groups = sim.groups
    v_unit = cfg.scales.length / cfg.scales.time
    kt_ev = K_B * cfg.material.lattice_temperature / Q_E
    current = Q_E * vel_moment * groups.k_scale**3 * v_unit
    return MomentSet(
        x=mesh.x_centers.copy(),
        density=rho * groups.k_scale**3,
        velocity=vel_dimless * v_unit,
        energy_ev=eps_dimless * kt_ev,
        current=current,
        e_field=run.field.e_mean * cfg.scales.field,
        potential=run.field.psi_centers * cfg.scales.voltage,
        zero_density_cells=zero,
    )


def _energy_moment(w, tables, mesh):
    per_km = (tables.eps_moments[None, :, None, 0] * w[..., T]
              + tables.eps_moments[None, :, None, 1] * w[..., R])
    return np.einsum("ikm,m->i", per_km, mesh.dmu)


def pdf_slice(run: RunState, sim: Simulation, x_probe: float) -> PdfSlice:
    mesh = sim.mesh
    i = int(np.argmin(np.abs(mesh.x_centers - x_probe)))
    f = 2.0 * run.state.coeffs[i, :, :, T] / np.sqrt(mesh.r_centers)[:, None]
    n_neg = int(np.count_nonzero(f < 0.0))
    if n_neg:
        log.warning("pdf slice at x=%.4f, t=%.4f ps has %d negative values "
                    "(reported unclamped)", mesh.x_centers[i], run.time_ps,
                    n_neg)
    return PdfSlice(x_probe=float(mesh.x_centers[i]), r=mesh.r_centers.copy(),
                    mu=mesh.mu_centers.copy(), f=f, time_ps=run.time_ps)


# ---------------------------------------------------------------------------
# files


def _time_tag(time_ps: float) -> str:
    return f"{time_ps:.4f}"


def write_outputs(snapshots, sim: Simulation, out_dir) -> list[str]:
    """Write per-snapshot moment CSVs, pdf slices, and run metadata.

    Returns the list of files written (relative to out_dir).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for run in snapshots:
        mom = moments(run, sim)
        name = f"moments_t{_time_tag(run.time_ps)}.csv"
        _write_csv(out / name, MomentSet.COLUMNS, mom.as_table())
        written.append(name)
        for probe in sim.config.pdf_probes:
            sl = pdf_slice(run, sim, probe)
            pname = f"pdf_x{sl.x_probe:.4f}_t{_time_tag(run.time_ps)}.csv"
            rows = np.column_stack([
                np.repeat(sl.r, sl.mu.size),
                np.tile(sl.mu, sl.r.size),
                sl.f.ravel()])
            _write_csv(out / pname, ("r", "mu", "f"), rows)
            written.append(pname)

    meta = {
        "config": _config_echo(sim.config),
        "scaling": sim.groups.as_dict(),
        "mesh_fingerprint": sim.mesh.fingerprint(),
        "mesh": {"nx": sim.mesh.nx, "nr": sim.mesh.nr, "nmu": sim.mesh.nmu,
                 "r_max": sim.mesh.r_max},
        "snapshots_ps": [run.time_ps for run in snapshots],
        "format_version": 1,
    }
    with open(out / "run_meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    written.append("run_meta.json")
    return written


def _write_csv(path, columns, table):
    try:
        with open(path, "w") as fh:
            fh.write(",".join(columns) + "\n")
            for row in np.atleast_2d(table):
                fh.write(",".join(FMT % v for v in row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write output file {path}: {exc}") from exc


def read_moments_csv(path):
    """Round-trip reader for the moments CSV (testing aid)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return header, data


def _config_echo(cfg) -> dict:
    return {
        "device": cfg.device,
        "band": cfg.band,
        "bias_v": cfg.bias_v,
        "t_max_ps": cfg.t_max_ps,
        "cfl": cfg.cfl,
        "output_cadence_ps": cfg.output_cadence_ps,
        "rk_order": cfg.rk_order,
        "collisions_on": cfg.collisions_on,
        "field_mode": cfg.field_mode,
        "material": {
            "effective_mass_ratio": cfg.material.effective_mass_ratio,
            "optical_phonon_energy": cfg.material.optical_phonon_energy,
            "acoustic_coupling": cfg.material.acoustic_coupling,
            "optical_coupling": cfg.material.optical_coupling,
            "kane_alpha": cfg.material.kane_alpha,
            "rel_permittivity": cfg.material.rel_permittivity,
            "lattice_temperature": cfg.material.lattice_temperature,
        },
        "scales": {"length": cfg.scales.length, "time": cfg.scales.time,
                   "voltage": cfg.scales.voltage},
    }
