"""Precomputed electron-phonon transition operator for radial bands.

The scattering kernel couples momentum shells through energy deltas at
shifts {-alpha_p, 0, +alpha_p}.  Projecting the band onto piecewise-linear
segments makes every delta resolvable in closed form: a resonance at
radius r' contributes 1/|d eps/dr'| = 1/A of the segment it falls in, and
the sqrt(r) shell weights become polynomial after the substitution r = s^2,
so fixed Gauss rules on the clipped resonance windows are exact.

Gain and loss entries are built from the *same* clipped windows and rules,
which makes the discrete operator conserve probability to roundoff.

The operator acts on the azimuthally integrated unknown; the angular
integration of the kernel contributes the factor 2*pi (azimuth) and the
mu-width factors that appear in `apply`.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .bands import EnergyBand
from .mesh import DGState, M, PhaseSpaceMesh, R, T, X
from .quadrature import gauss_rule

GAUSS_PTS = 4          # exact for the degree<=6 polynomial s-integrands
SHIFTS = (-1, 0, 1)    # multiples of alpha_p in the delta arguments


@dataclass(frozen=True)
class ScatteringKernelSpec:
    """Dimensionless strengths of the three delta branches."""

    c_zero: float
    c_plus: float
    c_minus: float
    alpha_p: float

    def __post_init__(self):
        if min(self.c_zero, self.c_plus, self.c_minus) < 0.0 or self.alpha_p < 0.0:
            raise ValueError("kernel constants must be non-negative")

    def coefficient(self, shift: int) -> float:
        return {1: self.c_plus, 0: self.c_zero, -1: self.c_minus}[shift]

    @staticmethod
    def from_scaling(groups) -> "ScatteringKernelSpec":
        return ScatteringKernelSpec(c_zero=groups.c_zero,
                                    c_plus=groups.c_plus,
                                    c_minus=groups.c_minus,
                                    alpha_p=groups.alpha_p)

    def fingerprint(self) -> str:
        h = hashlib.sha256(np.array(
            [self.c_zero, self.c_plus, self.c_minus, self.alpha_p]).tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class PiecewiseLinearBand:
    """Band value and slope at every r-cell midpoint."""

    eps: np.ndarray
    slope: np.ndarray

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.eps).tobytes())
        h.update(np.ascontiguousarray(self.slope).tobytes())
        return h.hexdigest()[:16]


def project_band(band: EnergyBand, mesh: PhaseSpaceMesh) -> PiecewiseLinearBand:
    """Tangent-line band per r-cell; the delta resolution needs slope > 0."""
    eps, slope = band.eval(mesh.r_centers)
    if np.any(slope <= 0.0):
        k = int(np.argmax(slope <= 0.0))
        raise ValueError(
            f"band slope must be positive; cell {k} has {slope[k]:g}")
    return PiecewiseLinearBand(eps=np.asarray(eps), slope=np.asarray(slope))


@dataclass
class CollisionOperatorMatrices:
    """Radial gain/loss blocks plus the metadata to validate reuse.

    gain_r[li, kt, ks, a, b]: target cell kt, source cell ks, test r-basis
    a in {1, b_r} and source r-basis b in {1, b_r}, for shift SHIFTS[li].
    loss_r[li, k, c]: per test cell k, moments of the out-rate against
    {1, b_r, b_r^2}.  Angular factors are applied in `apply`.
    """

    gain_r: np.ndarray
    loss_r: np.ndarray
    mesh_fingerprint: str
    band_fingerprint: str
    kernel_fingerprint: str

    @property
    def gain_total(self):
        return self.gain_r.sum(axis=0)

    @property
    def loss_total(self):
        return self.loss_r.sum(axis=0)

    def loss_rate_mean(self, mesh: PhaseSpaceMesh) -> np.ndarray:
        """Cell-mean total out-scattering rate, one value per r-cell."""
        return 4.0 * np.pi * self.loss_total[:, 0] / mesh.dr


def _window_integrals(mesh, band, c_l, shift_alpha, test_polys):
    """Shared machinery for gain and loss entries.

    For every (resonating cell A, parametrized cell B) pair, integrate
        s^2 * poly_B(s^2) * poly_A(rA(s^2)) / A_slope[A]
    over the part of B's s-range whose resonance radius
        rA(s^2) = (eps_B + A_B (s^2 - rc_B) + shift - eps_A)/A_A + rc_A
    falls inside cell A.  Returns an (nB, nA, n_polyB, n_polyA) array.

    With test_polys = (1, b_r) this is the gain block (B = target cell,
    A = source cell); the loss block reuses it with swapped roles.
    """
    lo, hi = mesh.r_edges[:-1], mesh.r_edges[1:]
    rc, dr = mesh.r_centers, mesh.dr
    eps, slp = band.eps, band.slope
    nr = mesh.nr

    # window of B's r-variable where the resonance lies in cell A:
    # sigma(bound) = rc_B + (A_A (bound - rc_A) + eps_A - eps_B - shift)/A_B
    base = (eps[None, :] - eps[:, None] - shift_alpha)  # [B, A]
    sig_lo = rc[:, None] + (slp[None, :] * (lo[None, :] - rc[None, :])
                            + base) / slp[:, None]
    sig_hi = rc[:, None] + (slp[None, :] * (hi[None, :] - rc[None, :])
                            + base) / slp[:, None]
    win_lo = np.maximum(np.maximum(lo[:, None], sig_lo), 0.0)
    win_hi = np.minimum(hi[:, None], sig_hi)

    nb_polyB, nb_polyA = test_polys
    out = np.zeros((nr, nr, nb_polyB, nb_polyA))
    ib, ia = np.nonzero(win_hi > win_lo)
    if ib.size == 0:
        return out
    s_nodes, s_w = gauss_rule(GAUSS_PTS, np.sqrt(win_lo[ib, ia]),
                              np.sqrt(win_hi[ib, ia]))
    r_t = s_nodes**2
    r_a = (eps[ib, None] + slp[ib, None] * (r_t - rc[ib, None])
           + shift_alpha - eps[ia, None]) / slp[ia, None] + rc[ia, None]
    b_t = 2.0 * (r_t - rc[ib, None]) / dr[ib, None]
    b_a = 2.0 * (r_a - rc[ia, None]) / dr[ia, None]
    core = c_l * s_w * s_nodes**2 / slp[ia, None]
    for pa in range(nb_polyB):
        for pb in range(nb_polyA):
            vals = np.sum(core * b_t**pa * b_a**pb, axis=-1)
            out[ib, ia, pa, pb] = vals
    return out


def precompute(kernel: ScatteringKernelSpec, band: PiecewiseLinearBand,
               mesh: PhaseSpaceMesh) -> CollisionOperatorMatrices:
    """Build the radial gain tensor and loss matrix for one mesh + band."""
    nr = mesh.nr
    gain = np.zeros((len(SHIFTS), nr, nr, 2, 2))
    loss = np.zeros((len(SHIFTS), nr, 3))
    for li, l in enumerate(SHIFTS):
        c_l = kernel.coefficient(l)
        if c_l == 0.0:
            continue
        shift = l * kernel.alpha_p
        # gain: parametrize the target cell, resonance in the source cell
        gain[li] = _window_integrals(mesh, band, c_l, shift, (2, 2))
        # loss: parametrize the target cell, resonance in the losing cell;
        # swapping roles reuses the identical windows and rules, which is
        # what makes gain and loss cancel in the mass functional
        blocks = _window_integrals(mesh, band, c_l, shift, (1, 3))
        loss[li] = blocks[:, :, 0, :].sum(axis=0)
    return CollisionOperatorMatrices(
        gain_r=gain, loss_r=loss,
        mesh_fingerprint=mesh.fingerprint(),
        band_fingerprint=band.fingerprint(),
        kernel_fingerprint=kernel.fingerprint())


def apply(matrices: CollisionOperatorMatrices, state: DGState,
          mesh: PhaseSpaceMesh) -> np.ndarray:
    """Coefficient rates (gain - loss) * W; linear, x-independent.

    Returns an array shaped like state.coeffs.
    """
    if matrices.mesh_fingerprint != mesh.fingerprint():
        raise ValueError("collision matrices built for a different mesh")
    w = state.coeffs
    dmu = mesh.dmu
    dr = mesh.dr
    gt = matrices.gain_total          # (kt, ks, a, b)
    lt = matrices.loss_total          # (k, c)

    # mu-integrated source moments, shape (nx, nr)
    u0 = np.einsum("ikm,m->ik", w[..., T], dmu)
    u1 = np.einsum("ikm,m->ik", w[..., R], dmu)
    ux = np.einsum("ikm,m->ik", w[..., X], dmu)

    gain0 = np.einsum("ts,is->it", gt[:, :, 0, 0], u0) \
        + np.einsum("ts,is->it", gt[:, :, 0, 1], u1)
    gain1 = np.einsum("ts,is->it", gt[:, :, 1, 0], u0) \
        + np.einsum("ts,is->it", gt[:, :, 1, 1], u1)
    gainx = np.einsum("ts,is->it", gt[:, :, 0, 0], ux)

    two_pi = 2.0 * np.pi
    inv_dr = 1.0 / dr
    rate = np.empty_like(w)
    rate[..., T] = (two_pi * inv_dr * gain0)[:, :, None] \
        - (2.0 * two_pi * inv_dr)[None, :, None] \
        * (lt[None, :, 0, None] * w[..., T] + lt[None, :, 1, None] * w[..., R])
    rate[..., R] = (3.0 * two_pi * inv_dr * gain1)[:, :, None] \
        - (6.0 * two_pi * inv_dr)[None, :, None] \
        * (lt[None, :, 1, None] * w[..., T] + lt[None, :, 2, None] * w[..., R])
    rate[..., M] = -(2.0 * two_pi * inv_dr)[None, :, None] \
        * lt[None, :, 0, None] * w[..., M]
    rate[..., X] = (two_pi * inv_dr * gainx)[:, :, None] \
        - (2.0 * two_pi * inv_dr)[None, :, None] \
        * lt[None, :, 0, None] * w[..., X]
    return rate


# ---------------------------------------------------------------------------
# on-disk cache

CACHE_MAGIC = "dgboltz-collision-cache"
CACHE_VERSION = 1


def cache_path(directory, matrices_or_parts) -> str:
    if isinstance(matrices_or_parts, CollisionOperatorMatrices):
        parts = (matrices_or_parts.mesh_fingerprint,
                 matrices_or_parts.band_fingerprint,
                 matrices_or_parts.kernel_fingerprint)
    else:
        parts = matrices_or_parts
    return str(directory / ("coll_" + "_".join(parts) + ".npz"))


def save_cache(directory, matrices: CollisionOperatorMatrices) -> str:
    directory.mkdir(parents=True, exist_ok=True)
    path = cache_path(directory, matrices)
    header = json.dumps({
        "magic": CACHE_MAGIC, "version": CACHE_VERSION,
        "mesh": matrices.mesh_fingerprint,
        "band": matrices.band_fingerprint,
        "kernel": matrices.kernel_fingerprint,
        "gain_entries": int(np.count_nonzero(matrices.gain_r)),
        "loss_entries": int(np.count_nonzero(matrices.loss_r)),
    })
    np.savez(path, header=np.frombuffer(header.encode(), dtype=np.uint8),
             gain_r=matrices.gain_r, loss_r=matrices.loss_r)
    return path


def load_cache(directory, mesh_fp: str, band_fp: str,
               kernel_fp: str) -> CollisionOperatorMatrices | None:
    path = cache_path(directory, (mesh_fp, band_fp, kernel_fp))
    try:
        with np.load(path) as blob:
            header = json.loads(bytes(blob["header"]).decode())
            if (header.get("magic") != CACHE_MAGIC
                    or header.get("version") != CACHE_VERSION
                    or header.get("mesh") != mesh_fp
                    or header.get("band") != band_fp
                    or header.get("kernel") != kernel_fp):
                return None
            gain, loss = blob["gain_r"], blob["loss_r"]
            if int(header["gain_entries"]) != int(np.count_nonzero(gain)) \
                    or int(header["loss_entries"]) != int(np.count_nonzero(loss)):
                return None
            return CollisionOperatorMatrices(
                gain_r=gain, loss_r=loss, mesh_fingerprint=mesh_fp,
                band_fingerprint=band_fp, kernel_fingerprint=kernel_fp)
    except (FileNotFoundError, KeyError, ValueError, json.JSONDecodeError):
        return None


def load_or_precompute(kernel, band, mesh, cache_dir=None,
                       use_cache=True) -> CollisionOperatorMatrices:
    if use_cache and cache_dir is not None:
        cached = load_cache(cache_dir, mesh.fingerprint(), band.fingerprint(),
                            kernel.fingerprint())
        if cached is not None:
            return cached
    matrices = precompute(kernel, band, mesh)
    if use_cache and cache_dir is not None:
        save_cache(cache_dir, matrices)
    return matrices
