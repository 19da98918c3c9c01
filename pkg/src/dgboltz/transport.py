"""Advection coefficients and the upwind DG transport assembly.

Advection speeds in the reduced phase space factor as
    a1(r, mu)            = c_d * 2 sqrt(r) * mu * deps/dr     (x-transport)
    a4(r, mu; E)         = e4(r, mu) * E(x),  e4 = -2 c_e sqrt(r) mu
    a5(r, mu; E)         = e5(r, mu) * E(x),  e5 = -c_e (1 - mu^2)/sqrt(r)
for a radial band.  Upwinding is pointwise: at every face quadrature node
the trace is taken from the side the local speed leaves, which reduces to
the uniform-sign cell rule whenever a face has a single sign.

All radial integrals are evaluated on an s = sqrt(r) Gauss grid so the
sqrt(r) and 1/sqrt(r) factors never appear at r = 0 and are polynomial for
the parabolic band.  Volume moments and x-face integrals share one grid
per momentum cell, so a spatially uniform state produces exactly zero
rate at zero field.  Faces at r = 0 and mu = +/-1 carry identically zero
speed and therefore identically zero flux.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .bands import EnergyBand
from .mesh import DGState, M, MASS_DIAG, PhaseSpaceMesh, R, T, X
from .poisson import FieldState
from .quadrature import gauss_rule

NG_S = 4    # radial nodes per cell (s variable)
NG_MU = 3
NG_X = 3


class ContactDensityError(RuntimeError):
    """Charge-neutral contact undefined: non-positive boundary density."""


@dataclass(frozen=True)
class GhostPolicy:
    """Boundary closure: charge-neutral contacts in x, vacuum above r_max.

    left/right_density are the dimensionless doping values at the
    contacts; the ghost state is the interior face trace rescaled so its
    momentum integral equals them.  No closure is needed at r = 0 or
    mu = +/-1 (the fluxes there vanish identically).
    """

    left_density: float
    right_density: float


class AdvectionCoefficients:
    """Speed evaluators bound to one band and one set of scaling groups."""

    def __init__(self, band: EnergyBand, c_d: float, c_e: float):
        self.band = band
        self.c_d = c_d
        self.c_e = c_e

    def a1(self, r, mu):
        r = np.asarray(r, dtype=float)
        return self.c_d * 2.0 * np.sqrt(r) * np.asarray(mu) * self.band.deps_dr(r)

    def e4(self, r, mu):
        return -2.0 * self.c_e * np.sqrt(np.asarray(r, dtype=float)) * np.asarray(mu)

    def e5(self, r, mu):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0.0):
            raise ValueError("a5 is singular at r = 0; assembled integrals "
                             "use the s = sqrt(r) substitution instead")
        mu = np.asarray(mu)
        return -self.c_e * (1.0 - mu**2) / np.sqrt(r)

    def a4(self, r, mu, e_x):
        return self.e4(r, mu) * e_x

    def a5(self, r, mu, e_x):
        return self.e5(r, mu) * e_x

    def eval_coeffs(self, r, mu, e_x):
        """(a1, a4, a5) at a point; the reduced-problem speeds."""
        return self.a1(r, mu), self.a4(r, mu, e_x), self.a5(r, mu, e_x)

    def full_terms(self, r, mu, phi, e_vec):
        """All six advection components for a radial band (testing aid)."""
        r = np.asarray(r, dtype=float)
        mu = np.asarray(mu, dtype=float)
        phi = np.asarray(phi, dtype=float)
        ex, ey, ez = e_vec
        sq = np.sqrt(r)
        st = np.sqrt(1.0 - mu**2)
        deps = self.band.deps_dr(r)
        a1 = self.c_d * 2.0 * sq * mu * deps
        a2 = self.c_d * 2.0 * sq * st * np.cos(phi) * deps
        a3 = self.c_d * 2.0 * sq * st * np.sin(phi) * deps
        a4 = -2.0 * self.c_e * sq * (mu * ex + st * (np.cos(phi) * ey
                                                     + np.sin(phi) * ez))
        a5 = -self.c_e * ((1.0 - mu**2) / sq * ex
                          - mu * st / sq * (np.cos(phi) * ey
                                            + np.sin(phi) * ez))
        a6 = -self.c_e / (sq * st) * (-np.sin(phi) * ey + np.cos(phi) * ez)
        return a1, a2, a3, a4, a5, a6


def unit_vectors(mu, phi):
    """Orthonormal frame of the (r, mu, phi) momentum coordinates."""
    mu = np.asarray(mu, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sqrt(1.0 - mu**2)
    e_r = np.stack([mu, st * np.cos(phi), st * np.sin(phi)])
    e_mu = np.stack([st, -mu * np.cos(phi), -mu * np.sin(phi)])
    e_phi = np.stack([np.zeros_like(phi + mu), -np.sin(phi), np.cos(phi)])
    return e_r, e_mu, e_phi


def geometric_identity_check(coeffs: AdvectionCoefficients, r, mu, phi, e_vec):
    """Max residual between component forms and frame-projection forms.

    The field-driven speeds are directional cosines of E against the local
    momentum frame; this verifies the algebra at a point.
    """
    r = np.asarray(r, dtype=float)
    _, _, _, a4, a5, a6 = coeffs.full_terms(r, mu, phi, e_vec)
    e_r, e_mu, e_phi = unit_vectors(mu, phi)
    e_vec = np.asarray(e_vec, dtype=float)
    dot = lambda frame: np.einsum("c...,c...->...",
                                  frame, e_vec.reshape(3, *([1] * (frame.ndim - 1))))
    sq = np.sqrt(r)
    st = np.sqrt(1.0 - np.asarray(mu, dtype=float)**2)
    g4 = -2.0 * coeffs.c_e * sq * dot(e_r)
    g5 = -coeffs.c_e * st / sq * dot(e_mu)
    g6 = -coeffs.c_e / (sq * st) * dot(e_phi)
    return max(np.abs(a4 - g4).max(), np.abs(a5 - g5).max(),
               np.abs(a6 - g6).max())


# ---------------------------------------------------------------------------
# precomputed assembly tables


class AssemblyTables:
    """Per-cell quadrature data for one mesh + band + scaling combination.

    Everything transport and the moment integrals need is tabulated here:
    shared volume nodes, signed speed moments for the x-faces, face node
    values for the r- and mu-faces, and per-cell speed bounds for the time
    step control.
    """

    def __init__(self, mesh: PhaseSpaceMesh, coeffs: AdvectionCoefficients):
        self.mesh = mesh
        self.coeffs = coeffs
        nr, nmu = mesh.nr, mesh.nmu

        # shared (s, mu) volume grid; weights include the dr = 2 s ds factor
        s_lo = np.sqrt(mesh.r_edges[:-1])
        s_hi = np.sqrt(mesh.r_edges[1:])
        self.s_nodes, s_w = gauss_rule(NG_S, s_lo, s_hi)      # (nr, NG_S)
        self.wr = 2.0 * self.s_nodes * s_w
        self.r_nodes = self.s_nodes**2
        self.br = 2.0 * (self.r_nodes - mesh.r_centers[:, None]) / mesh.dr[:, None]

        self.mu_nodes, self.wmu = gauss_rule(NG_MU, mesh.mu_edges[:-1],
                                             mesh.mu_edges[1:])
        self.bm_ref = leggauss(NG_MU)[0]    # reference nodes double as basis
        self.bx_ref = leggauss(NG_X)[0]
        self.xw_ref = leggauss(NG_X)[1]     # reference weights on [-1, 1]

        deps = coeffs.band.deps_dr(self.r_nodes)              # (nr, NG_S)
        a1n = (coeffs.c_d * 2.0 * self.s_nodes * deps)[:, None, :, None] \
            * self.mu_nodes[None, :, None, :]                 # (nr,nmu,NG_S,NG_MU)
        self.wv = self.wr[:, None, :, None] * self.wmu[None, :, None, :]

        # basis values on the volume grid: index c in {1, b_r, b_mu}
        ones = np.ones((nr, nmu, NG_S, NG_MU))
        basis = np.stack([ones,
                          np.broadcast_to(self.br[:, None, :, None], ones.shape),
                          np.broadcast_to(self.bm_ref[None, None, None, :],
                                          ones.shape)])        # (3,nr,nmu,S,MU)
        self.basis_v = basis

        self.a1_moments = np.einsum("kmsg,ckmsg->kmc", self.wv * a1n, basis)
        self.fx_pos = np.einsum("kmsg,ckmsg,pkmsg->kmcp",
                                self.wv * np.maximum(a1n, 0.0), basis, basis)
        self.fx_neg = np.einsum("kmsg,ckmsg,pkmsg->kmcp",
                                self.wv * np.minimum(a1n, 0.0), basis, basis)

        e4n = -2.0 * coeffs.c_e * self.s_nodes[:, None, :, None] \
            * self.mu_nodes[None, :, None, :]
        e5n = -coeffs.c_e * (1.0 - self.mu_nodes[None, :, None, :]**2) \
            / self.s_nodes[:, None, :, None]
        self.e4_moments = np.einsum("kmsg,ckmsg->kmc", self.wv * e4n, basis)
        self.e5_moments = np.einsum("kmsg,ckmsg->kmc", self.wv * e5n, basis)

        # band-energy moments against {1, b_r} for the observable integrals
        eps_n = coeffs.band.eps(self.r_nodes)
        self.eps_moments = np.stack(
            [np.einsum("ks,ks->k", self.wr, eps_n),
             np.einsum("ks,ks->k", self.wr, eps_n * self.br)], axis=-1)

        # r-face node speeds (x factor applied at assembly time)
        s_face = np.sqrt(mesh.r_edges)                        # (nr+1,)
        self.e4_face = -2.0 * coeffs.c_e * s_face[:, None, None] \
            * self.mu_nodes[None, :, :]                       # (nr+1,nmu,NG_MU)

        # mu-face node speeds
        mu_edge = mesh.mu_edges                               # (nmu+1,)
        self.e5_face = -coeffs.c_e * (1.0 - mu_edge[None, :, None]**2) \
            / self.s_nodes[:, None, :]                        # (nr,nmu+1,NG_S)

        # per-cell speed bounds for the time step control
        r_corners = np.stack([mesh.r_edges[:-1], mesh.r_edges[1:]])
        deps_corners = coeffs.band.deps_dr(r_corners)         # (2, nr)
        deps_max = np.maximum(deps_corners.max(axis=0), deps.max(axis=-1))
        mu_abs = np.maximum(np.abs(mesh.mu_edges[:-1]), np.abs(mesh.mu_edges[1:]))
        self.a1_max = (coeffs.c_d * 2.0 * s_hi * deps_max)[:, None] * mu_abs[None, :]
        self.e4_max = (2.0 * coeffs.c_e * s_hi)[:, None] * mu_abs[None, :]
        inside = (mesh.mu_edges[:-1] < 0.0) & (mesh.mu_edges[1:] > 0.0)
        one_minus = np.where(inside, 1.0,
                             1.0 - np.minimum(mesh.mu_edges[:-1]**2,
                                              mesh.mu_edges[1:]**2))
        self.e5_max = (coeffs.c_e / self.s_nodes[:, 0])[:, None] * one_minus[None, :]


def _traces_x(state: DGState):
    """Cell traces at the left/right x-faces in the {1, b_r, b_mu} basis."""
    w = state.coeffs
    left = np.stack([w[..., T] - w[..., X], w[..., R], w[..., M]], axis=-1)
    right = np.stack([w[..., T] + w[..., X], w[..., R], w[..., M]], axis=-1)
    return left, right


def boundary_face_density(state: DGState, mesh: PhaseSpaceMesh, side: str):
    """Density of the interior trace at a contact face."""
    left, right = _traces_x(state)
    drdmu = mesh.dr[:, None] * mesh.dmu[None, :]
    if side == "left":
        return float(np.einsum("km,km->", left[0, :, :, 0], drdmu))
    return float(np.einsum("km,km->", right[-1, :, :, 0], drdmu))


def assemble_transport(state: DGState, field: FieldState,
                       tables: AssemblyTables, ghosts: GhostPolicy,
                       return_face_fluxes: bool = False):
    """Rate of change of the DG coefficients from advection alone.

    Returns an array shaped like ``state.coeffs``; with
    ``return_face_fluxes`` also returns the x-, r- and mu-face flux moment
    arrays (used by budget and boundary tests).
    """
    mesh = tables.mesh
    if state.mesh_fingerprint and state.mesh_fingerprint != mesh.fingerprint():
        raise ValueError("state and tables use different meshes")
    nx, nr, nmu = mesh.nx, mesh.nr, mesh.nmu
    w = state.coeffs
    rhs = np.zeros_like(w)

    # ------------------------------------------------------------------ x
    tl, tr = _traces_x(state)
    drdmu = mesh.dr[:, None] * mesh.dmu[None, :]
    rho_l = np.einsum("km,km->", tl[0, :, :, 0], drdmu)
    rho_r = np.einsum("km,km->", tr[-1, :, :, 0], drdmu)
    if rho_l <= 0.0 or rho_r <= 0.0:
        raise ContactDensityError(
            f"boundary face densities (left={rho_l:g}, right={rho_r:g}) "
            "must be positive for the charge-neutral contact condition")
    ghost_l = (ghosts.left_density / rho_l) * tl[0]
    ghost_r = (ghosts.right_density / rho_r) * tr[-1]

    up = np.concatenate([ghost_l[None], tr], axis=0)     # (nx+1, nr, nmu, 3)
    down = np.concatenate([tl, ghost_r[None]], axis=0)
    fx = np.einsum("kmcp,fkmp->fkmc", tables.fx_pos, up) \
        + np.einsum("kmcp,fkmp->fkmc", tables.fx_neg, down)

    rhs[..., T] += fx[:-1, :, :, 0] - fx[1:, :, :, 0]
    rhs[..., R] += fx[:-1, :, :, 1] - fx[1:, :, :, 1]
    rhs[..., M] += fx[:-1, :, :, 2] - fx[1:, :, :, 2]
    rhs[..., X] += -fx[:-1, :, :, 0] - fx[1:, :, :, 0] \
        + 2.0 * np.einsum("kmc,ikmc->ikm", tables.a1_moments,
                          np.stack([w[..., T], w[..., R], w[..., M]], axis=-1))

    # field values at the x quadrature nodes, (nx, NG_X)
    e_nodes = field.e_mean[:, None] + field.e_slope[:, None] * tables.bx_ref
    xw = tables.xw_ref[None, :] * (0.5 * mesh.dx)[:, None]
    ea = mesh.dx * field.e_mean                  # int E dx
    eb = mesh.dx * field.e_slope / 3.0           # int E b_x dx

    # ------------------------------------------------------------------ r
    bxr = tables.bx_ref
    bmr = tables.bm_ref
    # speeds at face nodes: v = e4(face, mu) * E(x)
    v = tables.e4_face[None, :, :, None, :] * e_nodes[:, None, None, :, None]
    vp = np.maximum(v, 0.0)
    vm = np.minimum(v, 0.0)
    # traces of the cells below/above each r-face at the (x, mu) nodes
    below = (w[..., T] + w[..., R])[..., None, None] \
        + w[..., X][..., None, None] * bxr[None, None, None, :, None] \
        + w[..., M][..., None, None] * bmr[None, None, None, None, :]
    above = (w[..., T] - w[..., R])[..., None, None] \
        + w[..., X][..., None, None] * bxr[None, None, None, :, None] \
        + w[..., M][..., None, None] * bmr[None, None, None, None, :]
    flux = np.zeros((nx, nr + 1, nmu, NG_X, NG_MU))
    flux[:, 1:nr] = vp[:, 1:nr] * below[:, :nr - 1] + vm[:, 1:nr] * above[:, 1:]
    flux[:, nr] = vp[:, nr] * below[:, nr - 1]          # vacuum ghost above
    # r = 0 face: speed vanishes identically; keep the explicit product so
    # the stored flux is an exact zero of the same code path
    flux[:, 0] = v[:, 0] * above[:, 0]

    wxm = xw[:, None, None, :, None] * tables.wmu[None, None, :, None, :]
    wf = wxm * flux
    f_r = np.stack([
        np.einsum("ifmxg->ifm", wf),
        np.einsum("ifmxg,x->ifm", wf, bxr),
        np.einsum("ifmxg,g->ifm", wf, bmr),
    ], axis=-1)

    rhs[..., T] += f_r[:, :-1, :, 0] - f_r[:, 1:, :, 0]
    rhs[..., R] += -f_r[:, :-1, :, 0] - f_r[:, 1:, :, 0]
    rhs[..., M] += f_r[:, :-1, :, 2] - f_r[:, 1:, :, 2]
    rhs[..., X] += f_r[:, :-1, :, 1] - f_r[:, 1:, :, 1]

    trm = np.stack([w[..., T], w[..., R], w[..., M]], axis=-1)
    vol4 = np.einsum("kmc,ikmc->ikm", tables.e4_moments, trm) * ea[:, None, None] \
        + tables.e4_moments[None, :, :, 0] * w[..., X] * eb[:, None, None]
    rhs[..., R] += 2.0 / mesh.dr[None, :, None] * vol4

    # ----------------------------------------------------------------- mu
    v5 = tables.e5_face[None, :, :, None, :] * e_nodes[:, None, None, :, None]
    vp5 = np.maximum(v5, 0.0)
    vm5 = np.minimum(v5, 0.0)
    below5 = (w[..., T] + w[..., M])[..., None, None] \
        + w[..., X][..., None, None] * bxr[None, None, None, :, None] \
        + w[..., R][..., None, None] * tables.br[None, :, None, None, :]
    above5 = (w[..., T] - w[..., M])[..., None, None] \
        + w[..., X][..., None, None] * bxr[None, None, None, :, None] \
        + w[..., R][..., None, None] * tables.br[None, :, None, None, :]
    flux5 = np.zeros((nx, nr, nmu + 1, NG_X, NG_S))
    flux5[:, :, 1:nmu] = vp5[:, :, 1:nmu] * below5[:, :, :nmu - 1] \
        + vm5[:, :, 1:nmu] * above5[:, :, 1:]
    # mu = -1 and mu = +1 faces: 1 - mu^2 = 0 makes the speed an exact zero
    flux5[:, :, 0] = v5[:, :, 0] * above5[:, :, 0]
    flux5[:, :, nmu] = v5[:, :, nmu] * below5[:, :, nmu - 1]

    wxr = xw[:, None, None, :, None] * tables.wr[None, :, None, None, :]
    wf5 = wxr * flux5
    f_m = np.stack([
        np.einsum("ikfxs->ikf", wf5),
        np.einsum("ikfxs,x->ikf", wf5, bxr),
        np.einsum("ikfxs,ks->ikf", wf5, tables.br),
    ], axis=-1)

    rhs[..., T] += f_m[:, :, :-1, 0] - f_m[:, :, 1:, 0]
    rhs[..., M] += -f_m[:, :, :-1, 0] - f_m[:, :, 1:, 0]
    rhs[..., R] += f_m[:, :, :-1, 2] - f_m[:, :, 1:, 2]
    rhs[..., X] += f_m[:, :, :-1, 1] - f_m[:, :, 1:, 1]

    vol5 = np.einsum("kmc,ikmc->ikm", tables.e5_moments, trm) * ea[:, None, None] \
        + tables.e5_moments[None, :, :, 0] * w[..., X] * eb[:, None, None]
    rhs[..., M] += 2.0 / mesh.dmu[None, None, :] * vol5

    # ------------------------------------------------------- mass scaling
    vols = mesh.cell_volumes()
    rate = rhs / (vols[..., None] * MASS_DIAG)
    if return_face_fluxes:
        return rate, fx, f_r, f_m
    return rate


def compute_speed_bounds(tables: AssemblyTables, field: FieldState):
    """Per-cell |a1|/dx + |a4|/dr + |a5|/dmu for the CFL control."""
    mesh = tables.mesh
    e_abs = np.maximum(np.abs(field.e_mean - field.e_slope),
                       np.abs(field.e_mean + field.e_slope))
    term_x = tables.a1_max[None, :, :] / mesh.dx[:, None, None]
    term_r = (tables.e4_max[None, :, :] * e_abs[:, None, None]
              / mesh.dr[None, :, None])
    term_m = (tables.e5_max[None, :, :] * e_abs[:, None, None]
              / mesh.dmu[None, None, :])
    return term_x + term_r + term_m
