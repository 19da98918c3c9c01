"""Phase-space mesh, P1 basis bookkeeping, and coefficient storage.

The reduced problem lives on tensor cells in (x, r, mu).  Each cell carries
four coefficients of the local basis {1, 2(r-r_k)/dr, 2(mu-mu_m)/dmu,
2(x-x_i)/dx}, stored in that order and indexed by the module-level
constants T, R, M, X.  The working unknown is the azimuthally integrated
weighted pdf, so densities compare directly with the dimensionless doping.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .quadrature import gauss_rule

# coefficient slots: cell average, r-slope, mu-slope, x-slope
T, R, M, X = 0, 1, 2, 3
NCOEF = 4

# inverse diagonal mass matrix entries per slot (basis on [-1,1]^3)
MASS_DIAG = np.array([1.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0])


@dataclass(frozen=True)
class PhaseSpaceMesh:
    """Tensor cell decomposition of (x, r, mu)."""

    x_edges: np.ndarray
    r_edges: np.ndarray
    mu_edges: np.ndarray

    def __post_init__(self):
        for name in ("x_edges", "r_edges", "mu_edges"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if arr.ndim != 1 or arr.size < 2:
                raise ValueError(f"{name} needs at least two edges")
            if np.any(np.diff(arr) <= 0.0):
                raise ValueError(f"{name} must be strictly increasing")
        if self.x_edges[0] < -1e-15 or self.x_edges[-1] > 1.0 + 1e-12:
            raise ValueError("x domain must lie inside [0, 1]")
        if self.r_edges[0] < 0.0:
            raise ValueError("r domain must start at r >= 0")
        if self.mu_edges[0] < -1.0 - 1e-12 or self.mu_edges[-1] > 1.0 + 1e-12:
            raise ValueError("mu domain must lie inside [-1, 1]")

    @property
    def nx(self):
        return self.x_edges.size - 1

    @property
    def nr(self):
        return self.r_edges.size - 1

    @property
    def nmu(self):
        return self.mu_edges.size - 1

    @property
    def x_centers(self):
        return 0.5 * (self.x_edges[:-1] + self.x_edges[1:])

    @property
    def r_centers(self):
        return 0.5 * (self.r_edges[:-1] + self.r_edges[1:])

    @property
    def mu_centers(self):
        return 0.5 * (self.mu_edges[:-1] + self.mu_edges[1:])

    @property
    def dx(self):
        return np.diff(self.x_edges)

    @property
    def dr(self):
        return np.diff(self.r_edges)

    @property
    def dmu(self):
        return np.diff(self.mu_edges)

    @property
    def r_max(self):
        return float(self.r_edges[-1])

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for arr in (self.x_edges, self.r_edges, self.mu_edges):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()[:16]

    def cell_volumes(self):
        return (self.dx[:, None, None] * self.dr[None, :, None]
                * self.dmu[None, None, :])


def _edges_from_blocks(start: float, blocks) -> np.ndarray:
    """Blocks are (count, width) pairs laid end to end from `start`.

    Each block is generated with exact endpoints (start + count*width in
    one rounding) so junctions that land on block boundaries stay on mesh
    edges to the last bit.
    """
    parts = []
    pos = start
    for count, width in blocks:
        count = int(count)
        if count <= 0 or width <= 0.0:
            raise ValueError("mesh blocks need positive count and width")
        stop = pos + count * width
        seg = np.linspace(pos, stop, count + 1)
        parts.append(seg if not parts else seg[1:])
        pos = stop
    return np.concatenate(parts)


def _edges_from_spans(spans) -> np.ndarray:
    """Spans are (count, lo, hi) triples of uniformly split intervals."""
    edges = None
    for count, lo, hi in spans:
        seg = np.linspace(lo, hi, int(count) + 1)
        if edges is None:
            edges = seg
        else:
            if not np.isclose(edges[-1], seg[0]):
                raise ValueError("mu spans must be contiguous")
            edges = np.concatenate([edges, seg[1:]])
    return edges


MESH_PRESETS = {
    # 1 um device, refined around the first junction at x = 0.3
    "diode400": dict(
        x_blocks=[(20, 0.01), (40, 0.005), (60, 0.01)],
        n_r=80, dr=0.45,
        mu_spans=[(12, -1.0, 0.7), (12, 0.7, 1.0)],
    ),
    # 0.25 um device, refined around the junctions at x = 0.1 and 0.15
    "diode50": dict(
        x_blocks=[(9, 0.01), (20, 0.001), (6, 0.005), (20, 0.001), (9, 0.01)],
        n_r=80, dr=0.8,
        mu_spans=[(10, -1.0, 0.7), (10, 0.7, 1.0)],
    ),
}


def build_mesh(spec) -> PhaseSpaceMesh:
    """Build a mesh from a preset name or an explicit block description.

    Explicit specs are dicts with keys ``x_blocks`` [(count, width), ...],
    ``n_r``/``dr`` (uniform radial grid from 0) and ``mu_spans``
    [(count, lo, hi), ...]; ``x_start`` defaults to 0.
    """
    if isinstance(spec, str):
        try:
            spec = MESH_PRESETS[spec]
        except KeyError:
            raise ValueError(f"unknown mesh preset {spec!r}") from None
    x_edges = _edges_from_blocks(spec.get("x_start", 0.0), spec["x_blocks"])
    n_r, dr = int(spec["n_r"]), float(spec["dr"])
    r_edges = dr * np.arange(n_r + 1)
    mu_edges = _edges_from_spans(spec["mu_spans"])
    return PhaseSpaceMesh(x_edges=x_edges, r_edges=r_edges, mu_edges=mu_edges)


# ---------------------------------------------------------------------------
# basis interaction matrix


def beta_matrix_full() -> np.ndarray:
    """Position-space basis overlap table for the six-slot 2D-x basis.

    Slot order: cell average, r-slope, mu-slope, phi-slope, x-slope,
    y-slope.  Entries are cell-normalized overlaps of the x,y parts.
    """
    beta = np.zeros((6, 6))
    beta[:4, :4] = 1.0
    beta[4, 4] = 1.0 / 3.0
    beta[5, 5] = 1.0 / 3.0
    return beta


def beta_matrix_reduced() -> np.ndarray:
    """Overlap table restricted to the reduced slots (T, R, M, X)."""
    full = beta_matrix_full()
    idx = [0, 1, 2, 4]
    return full[np.ix_(idx, idx)]


# ---------------------------------------------------------------------------
# DG coefficient state


@dataclass
class DGState:
    """Per-cell P1 coefficients, shape (nx, nr, nmu, 4)."""

    coeffs: np.ndarray
    mesh_fingerprint: str = ""

    @staticmethod
    def zeros(mesh: PhaseSpaceMesh) -> "DGState":
        return DGState(np.zeros((mesh.nx, mesh.nr, mesh.nmu, NCOEF)),
                       mesh.fingerprint())

    def copy(self) -> "DGState":
        return DGState(self.coeffs.copy(), self.mesh_fingerprint)

    def validate(self):
        if not np.all(np.isfinite(self.coeffs)):
            bad = np.argwhere(~np.isfinite(self.coeffs))
            raise FloatingPointError(
                f"non-finite DG coefficient at (i,k,m,p)={tuple(bad[0])}")


def project_to_dg(f, mesh: PhaseSpaceMesh) -> DGState:
    """Per-cell L2 projection of f(x, r, mu) onto the P1 basis.

    Uses 3-point Gauss per axis; f must broadcast over point arrays.
    """
    ng = 3
    xg, xw = gauss_rule(ng, mesh.x_edges[:-1], mesh.x_edges[1:])
    rg, rw = gauss_rule(ng, mesh.r_edges[:-1], mesh.r_edges[1:])
    mg, mw = gauss_rule(ng, mesh.mu_edges[:-1], mesh.mu_edges[1:])

    bx = 2.0 * (xg - mesh.x_centers[:, None]) / mesh.dx[:, None]
    br = 2.0 * (rg - mesh.r_centers[:, None]) / mesh.dr[:, None]
    bm = 2.0 * (mg - mesh.mu_centers[:, None]) / mesh.dmu[:, None]

    vals = f(xg[:, :, None, None, None, None],
             rg[None, None, :, :, None, None],
             mg[None, None, None, None, :, :])
    vals = np.broadcast_to(np.asarray(vals, dtype=float),
                           (mesh.nx, ng, mesh.nr, ng, mesh.nmu, ng))

    w = (xw[:, :, None, None, None, None]
         * rw[None, None, :, :, None, None]
         * mw[None, None, None, None, :, :])
    vols = mesh.cell_volumes()

    coeffs = np.empty((mesh.nx, mesh.nr, mesh.nmu, NCOEF))
    wv = w * vals
    coeffs[..., T] = np.einsum("agbhcj->abc", wv) / vols
    coeffs[..., R] = 3.0 * np.einsum("agbhcj,bh->abc", wv, br) / vols
    coeffs[..., M] = 3.0 * np.einsum("agbhcj,cj->abc", wv, bm) / vols
    coeffs[..., X] = 3.0 * np.einsum("agbhcj,ag->abc", wv, bx) / vols
    return DGState(coeffs, mesh.fingerprint())


def dg_eval(state: DGState, mesh: PhaseSpaceMesh, x, r, mu):
    """Point evaluation of the piecewise-linear representation."""
    x = np.asarray(x, dtype=float)
    r = np.asarray(r, dtype=float)
    mu = np.asarray(mu, dtype=float)
    i = np.clip(np.searchsorted(mesh.x_edges, x, side="right") - 1, 0, mesh.nx - 1)
    k = np.clip(np.searchsorted(mesh.r_edges, r, side="right") - 1, 0, mesh.nr - 1)
    m = np.clip(np.searchsorted(mesh.mu_edges, mu, side="right") - 1, 0, mesh.nmu - 1)
    bx = 2.0 * (x - mesh.x_centers[i]) / mesh.dx[i]
    br = 2.0 * (r - mesh.r_centers[k]) / mesh.dr[k]
    bm = 2.0 * (mu - mesh.mu_centers[m]) / mesh.dmu[m]
    c = state.coeffs[i, k, m]
    return c[..., T] + c[..., R] * br + c[..., M] * bm + c[..., X] * bx


@dataclass
class CellDensity:
    """Per-x-cell linear density: rho(x) = mean + slope * 2(x-x_i)/dx."""

    mean: np.ndarray
    slope: np.ndarray

    def left_trace(self):
        return self.mean - self.slope

    def right_trace(self):
        return self.mean + self.slope


def density(state: DGState, mesh: PhaseSpaceMesh) -> CellDensity:
    """Momentum-space integral of the state, one linear profile per x-cell."""
    drdmu = mesh.dr[:, None] * mesh.dmu[None, :]
    mean = np.einsum("ikm,km->i", state.coeffs[..., T], drdmu)
    slope = np.einsum("ikm,km->i", state.coeffs[..., X], drdmu)
    return CellDensity(mean=mean, slope=slope)
