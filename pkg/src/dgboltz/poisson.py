"""Self-consistent field solve for the reduced one-dimensional problem.

The dimensionless potential obeys eps_r * psi'' = c_p (rho - N) with
Dirichlet values psi(x_left) = 0 and psi(x_right) = bias.  Because rho is
piecewise linear, psi' has closed-form cell integrals; the advected field
E = -c_v psi' (piecewise quadratic) is L2-projected back onto the P1 space
before transport sees it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import CellDensity, PhaseSpaceMesh


@dataclass(frozen=True)
class DopingProfile:
    """Step doping: breakpoints inside the device, one density per region.

    Densities are dimensionless (physical concentration / k_scale^3).
    """

    breakpoints: np.ndarray
    densities: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "breakpoints",
                           np.asarray(self.breakpoints, dtype=float))
        object.__setattr__(self, "densities",
                           np.asarray(self.densities, dtype=float))
        if self.densities.size != self.breakpoints.size + 1:
            raise ValueError("need one density per region")
        if np.any(self.densities <= 0.0):
            raise ValueError("doping densities must be positive")
        if self.breakpoints.size and np.any(np.diff(self.breakpoints) <= 0.0):
            raise ValueError("breakpoints must be strictly increasing")

    @staticmethod
    def from_si(breakpoints, densities_m3, k_scale: float) -> "DopingProfile":
        dens = np.asarray(densities_m3, dtype=float) / k_scale**3
        return DopingProfile(np.asarray(breakpoints, dtype=float), dens)

    def value_at(self, x):
        """Doping at x; points exactly on a breakpoint take the right region."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.breakpoints, x, side="right")
        return self.densities[idx]

    def cell_projection(self, mesh: PhaseSpaceMesh) -> CellDensity:
        """Exact per-cell P1 projection of the step profile."""
        mean = np.empty(mesh.nx)
        slope = np.empty(mesh.nx)
        for i in range(mesh.nx):
            a, b = mesh.x_edges[i], mesh.x_edges[i + 1]
            # snap breakpoints within roundoff of an edge onto the edge so
            # junction-aligned meshes never see sliver cuts
            tol = 1e-12 * (b - a)
            inner = self.breakpoints[(self.breakpoints > a + tol)
                                     & (self.breakpoints < b - tol)]
            if inner.size == 0:
                # uncut cell: exact constant, no quadrature roundoff
                mean[i] = self.value_at(0.5 * (a + b))
                slope[i] = 0.0
                continue
            dx = b - a
            xc = mesh.x_centers[i]
            cuts = np.concatenate([[a], inner, [b]])
            vals = self.value_at(0.5 * (cuts[:-1] + cuts[1:]))
            seg = np.diff(cuts)
            mean[i] = np.sum(vals * seg) / dx
            b_edges = 2.0 * (cuts - xc) / dx
            int_b = 0.25 * dx * np.diff(b_edges**2)
            slope[i] = 3.0 / dx * np.sum(vals * int_b)
        return CellDensity(mean=mean, slope=slope)


@dataclass
class FieldState:
    """Piecewise-linear field and edge potential values (dimensionless)."""

    e_mean: np.ndarray      # per x-cell mean of E = -c_v psi'
    e_slope: np.ndarray     # per x-cell P1 slope coefficient
    psi_edges: np.ndarray   # potential at cell edges (exact)
    psi_centers: np.ndarray

    def eval_e(self, mesh: PhaseSpaceMesh, x):
        x = np.asarray(x, dtype=float)
        i = np.clip(np.searchsorted(mesh.x_edges, x, side="right") - 1,
                    0, mesh.nx - 1)
        bx = 2.0 * (x - mesh.x_centers[i]) / mesh.dx[i]
        return self.e_mean[i] + self.e_slope[i] * bx

    @staticmethod
    def zero(mesh: PhaseSpaceMesh) -> "FieldState":
        nx = mesh.nx
        return FieldState(np.zeros(nx), np.zeros(nx),
                          np.zeros(nx + 1), np.zeros(nx))


def solve(rho: CellDensity, doping: DopingProfile, bias: float,
          eps_r: float, mesh: PhaseSpaceMesh, c_p: float,
          c_v: float) -> FieldState:
    """Solve the 1D field problem for a piecewise-linear density.

    ``bias`` is the dimensionless potential at the right contact; the left
    contact is grounded.
    """
    nd = doping.cell_projection(mesh)
    g_mean = rho.mean - nd.mean
    g_slope = rho.slope - nd.slope
    dx = mesh.dx
    length = mesh.x_edges[-1] - mesh.x_edges[0]
    cp = c_p / eps_r

    # cumulative source integral at cell edges (slopes integrate to zero)
    i_edges = np.concatenate([[0.0], np.cumsum(g_mean * dx)])
    # exact per-cell integrals of I(x) and psi'
    int_i = i_edges[:-1] * dx + g_mean * dx**2 / 2.0 - g_slope * dx**2 / 6.0
    dpsi0 = (bias - cp * np.sum(int_i)) / length

    e_mean = -c_v * (dpsi0 + cp * (i_edges[:-1] + g_mean * dx / 2.0
                                   - g_slope * dx / 6.0))
    e_slope = -c_v * cp * g_mean * dx / 2.0

    psi_edges = np.concatenate([[0.0], np.cumsum(dpsi0 * dx + cp * int_i)])
    # potential at cell centers: integrate psi' over the left half cell
    half = (dpsi0 * dx / 2.0
            + cp * (i_edges[:-1] * dx / 2.0 + g_mean * dx**2 / 8.0
                    - g_slope * dx**2 / 12.0))
    psi_centers = psi_edges[:-1] + half
    return FieldState(e_mean=e_mean, e_slope=e_slope,
                      psi_edges=psi_edges, psi_centers=psi_centers)
