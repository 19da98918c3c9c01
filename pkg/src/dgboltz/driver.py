"""Run assembly and explicit time evolution.

One step advances the coefficient system dW/dt = Transport(W, E[W]) +
Collisions(W) with a strong-stability-preserving Runge-Kutta method; the
field solve is refreshed from the stage density at every stage.  The time
step follows the advective speed bounds plus the collisional out-rate.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import collisions, poisson, transport
from .bands import (EnergyBand, GridSampler, KaneBand, ParabolicBand,
                    average_band, load_band_table, make_band)
from .mesh import DGState, PhaseSpaceMesh, build_mesh, density, project_to_dg
from .poisson import DopingProfile, FieldState
from .quadrature import gauss_rule
from .scaling import (MaterialParams, ReferenceScales, derive_scaling,
                      kane_alpha_dimensionless)
from .transport import AdvectionCoefficients, AssemblyTables, GhostPolicy


class NumericalAbort(RuntimeError):
    """The integration produced a non-finite coefficient."""


DEVICE_PRESETS = {
    # breakpoints in units of the reference length, densities in 1/m^3
    "diode400": dict(breakpoints=(0.3, 0.7),
                     densities=(5e23, 2e21, 5e23), mesh="diode400"),
    "diode50": dict(breakpoints=(0.1, 0.15),
                    densities=(5e24, 1e21, 5e24), mesh="diode50"),
}


@dataclass
class RunConfig:
    """Everything a run needs, in physical units where applicable."""

    device: str = "diode400"
    band: str = "parabolic"              # parabolic | kane | table:<path>
    bias_v: float = 0.5
    t_max_ps: float = 5.0
    cfl: float = 0.3
    output_cadence_ps: float = 1.0
    steady_tol: float = 1e-6
    rk_order: int = 2
    collisions_on: bool = True
    field_mode: str = "consistent"       # consistent | zero (diagnostics)
    mesh: object = None                  # preset name or explicit dict
    doping_breakpoints: tuple = ()       # overrides the device preset
    doping_m3: tuple = ()
    material: MaterialParams = dc_field(default_factory=MaterialParams.silicon)
    scales: ReferenceScales = dc_field(default_factory=ReferenceScales)
    cache_dir: object = None
    use_cache: bool = True
    pdf_probes: tuple = ()               # x locations for pdf slices
    deterministic: bool = True

    def __post_init__(self):
        if self.t_max_ps < 0.0:
            raise ValueError("t_max_ps must be >= 0")
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError("cfl must be in (0, 1]")
        if self.rk_order not in (2, 3):
            raise ValueError("rk_order must be 2 or 3")
        if self.field_mode not in ("consistent", "zero"):
            raise ValueError("field_mode must be 'consistent' or 'zero'")


@dataclass
class RunState:
    """One point of the evolution: time is dimensionless."""

    time: float
    state: DGState
    field: FieldState
    step: int
    diagnostics: dict

    @property
    def time_ps(self):
        return self.time * self.diagnostics.get("t_star_s", 1e-12) / 1e-12


def build_band(config: RunConfig) -> EnergyBand:
    spec = config.band
    if spec == "parabolic":
        return ParabolicBand()
    if spec == "kane":
        return KaneBand(kane_alpha_dimensionless(config.material))
    if spec.startswith("table:"):
        loaded = load_band_table(spec[len("table:"):])
        if isinstance(loaded, GridSampler):
            loaded = average_band(loaded, loaded.r_nodes)
        return make_band("tabulated", table=loaded)
    raise ValueError(f"unknown band spec {config.band!r}")


class Simulation:
    """Immutable run setup: mesh, band, operators, and boundary data."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.groups = derive_scaling(config.material, config.scales)

        if config.device in DEVICE_PRESETS:
            preset = DEVICE_PRESETS[config.device]
            breakpoints = config.doping_breakpoints or preset["breakpoints"]
            densities = config.doping_m3 or preset["densities"]
            mesh_spec = config.mesh if config.mesh is not None else preset["mesh"]
        else:
            if not (config.doping_breakpoints and config.doping_m3
                    and config.mesh is not None):
                raise ValueError(
                    f"device {config.device!r} is not a preset; provide "
                    "doping_breakpoints, doping_m3 and mesh explicitly")
            breakpoints, densities = config.doping_breakpoints, config.doping_m3
            mesh_spec = config.mesh
        self.mesh = build_mesh(mesh_spec) if not isinstance(
            mesh_spec, PhaseSpaceMesh) else mesh_spec
        self.doping = DopingProfile.from_si(breakpoints, densities,
                                            self.groups.k_scale)
        self.band = build_band(config)
        self.coeffs = AdvectionCoefficients(self.band, self.groups.c_d,
                                            self.groups.c_e)
        self.tables = AssemblyTables(self.mesh, self.coeffs)
        self.ghosts = GhostPolicy(
            left_density=float(self.doping.value_at(self.mesh.x_edges[0])),
            right_density=float(self.doping.value_at(self.mesh.x_edges[-1])))
        self.bias = config.bias_v / config.scales.voltage

        if config.collisions_on:
            kernel = collisions.ScatteringKernelSpec.from_scaling(self.groups)
            plband = collisions.project_band(self.band, self.mesh)
            self.matrices = collisions.load_or_precompute(
                kernel, plband, self.mesh, cache_dir=config.cache_dir,
                use_cache=config.use_cache)
            self.loss_rate = self.matrices.loss_rate_mean(self.mesh)
        else:
            self.matrices = None
            self.loss_rate = np.zeros(self.mesh.nr)

    # -- pieces ----------------------------------------------------------

    def solve_field(self, state: DGState) -> FieldState:
        if self.config.field_mode == "zero":
            return FieldState.zero(self.mesh)
        rho = density(state, self.mesh)
        return poisson.solve(rho, self.doping, self.bias,
                             self.config.material.rel_permittivity,
                             self.mesh, self.groups.c_p, self.groups.c_v)

    def rate(self, state: DGState, field: FieldState):
        """Right-hand side at a given stage field."""
        out = transport.assemble_transport(state, field, self.tables,
                                           self.ghosts)
        if self.matrices is not None:
            out += collisions.apply(self.matrices, state, self.mesh)
        return out

    def initialize(self) -> RunState:
        """Equilibrium shell distribution scaled to reproduce the doping.

        The normalization uses the projection quadrature itself, so the
        initial density matches the doping at every position exactly.
        """
        band = self.band
        rg, rw = gauss_rule(3, self.mesh.r_edges[:-1], self.mesh.r_edges[1:])
        h_cells = np.sum(rw * np.sqrt(rg) / 2.0 * np.exp(-band.eps(rg)),
                         axis=-1)
        mu_span = self.mesh.mu_edges[-1] - self.mesh.mu_edges[0]
        norm = 1.0 / (mu_span * h_cells.sum())
        doping = self.doping

        def f(x, r, mu):
            rr = np.maximum(r, 0.0)
            return (norm * doping.value_at(x) * np.sqrt(rr) / 2.0
                    * np.exp(-band.eps(rr)) + 0.0 * mu)

        state = project_to_dg(f, self.mesh)
        field = self.solve_field(state)
        return RunState(time=0.0, state=state, field=field, step=0,
                        diagnostics=self._diagnostics(state, 0.0, 0.0))

    def compute_dt(self, state: DGState, field: FieldState) -> float:
        bounds = transport.compute_speed_bounds(self.tables, field)
        bounds = bounds + self.loss_rate[None, :, None]
        top = float(bounds.max())
        cadence = self.config.output_cadence_ps * 1e-12 / self.config.scales.time
        if top <= 0.0:
            return cadence if cadence > 0.0 else 1.0
        return self.config.cfl / top

    def step(self, run: RunState) -> RunState:
        """One SSP Runge-Kutta step.

        Each stage solves the field from its own stage density (never a
        stale one), so the field-solve count per step equals the stage
        count.  The stored field of the returned state is the last stage's;
        snapshot emission refreshes it.
        """
        w0 = run.state.coeffs
        fp = run.state.mesh_fingerprint
        f1 = self.solve_field(run.state)
        dt = self.compute_dt(run.state, f1)
        k1 = self.rate(run.state, f1)
        w1 = DGState(w0 + dt * k1, fp)
        if self.config.rk_order == 2:
            f_last = self.solve_field(w1)
            k2 = self.rate(w1, f_last)
            wn = 0.5 * (w0 + w1.coeffs + dt * k2)
        else:
            f2 = self.solve_field(w1)
            k2 = self.rate(w1, f2)
            w2 = DGState(0.75 * w0 + 0.25 * (w1.coeffs + dt * k2), fp)
            f_last = self.solve_field(w2)
            k3 = self.rate(w2, f_last)
            wn = (w0 + 2.0 * (w2.coeffs + dt * k3)) / 3.0
        if not np.all(np.isfinite(wn)):
            bad = np.argwhere(~np.isfinite(wn))[0]
            raise NumericalAbort(
                f"non-finite coefficient at cell (i,k,m,p)={tuple(bad)} "
                f"after step {run.step + 1}")
        new = DGState(wn, fp)
        residual = self._residual(w0, wn, dt)
        diag = self._diagnostics(new, dt, residual)
        diag["step_change"] = residual * dt     # ||dW||/||W|| per step
        diag["steady_detected"] = residual < self.config.steady_tol
        return RunState(time=run.time + dt, state=new, field=f_last,
                        step=run.step + 1, diagnostics=diag)

    def run(self, progress=None):
        """Advance to t_max, returning snapshots at the output cadence.

        Runs to the fixed horizon regardless of the steady-state residual;
        the residual is reported in the diagnostics.
        """
        cfg = self.config
        t_star = cfg.scales.time
        t_max = cfg.t_max_ps * 1e-12 / t_star
        cadence = cfg.output_cadence_ps * 1e-12 / t_star
        run = self.initialize()
        snapshots = [run]
        if t_max <= 0.0:
            return snapshots
        next_emit = cadence if cadence > 0.0 else np.inf
        while run.time < t_max:
            run = self.step(run)
            if run.time >= min(next_emit, t_max) - 1e-12:
                run = RunState(run.time, run.state,
                               self.solve_field(run.state), run.step,
                               run.diagnostics)
                snapshots.append(run)
                while next_emit <= run.time + 1e-12:
                    next_emit += cadence
            if progress is not None:
                progress(run)
        if snapshots[-1] is not run:
            run = RunState(run.time, run.state, self.solve_field(run.state),
                           run.step, run.diagnostics)
            snapshots.append(run)
        return snapshots

    # -- bookkeeping -----------------------------------------------------

    def total_mass(self, state: DGState) -> float:
        return float(np.sum(state.coeffs[..., 0] * self.mesh.cell_volumes()))

    def _residual(self, w_old, w_new, dt):
        denom = dt * float(np.linalg.norm(w_old))
        if denom == 0.0:
            return np.inf
        return float(np.linalg.norm(w_new - w_old)) / denom

    def _diagnostics(self, state, dt, residual):
        return {
            "mass": self.total_mass(state),
            "dt": dt,
            "residual": residual,
            "t_star_s": self.config.scales.time,
        }
