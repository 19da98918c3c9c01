"""Radial conduction-band models and the angular-averaging pipeline.

Three interchangeable band kinds feed the solver: the parabolic identity
band eps(r) = r, the non-parabolic Kane dispersion, and a tabulated band
built by spherically averaging an anisotropic energy surface over momentum
shells and spline-interpolating the result.  Energies and r are always in
the dimensionless units fixed by the scaling module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline as _SciPyCubicSpline


class BandFileError(ValueError):
    """Raised for malformed band-table files; message carries line numbers."""


class ExtrapolationError(ValueError):
    """Raised when a strict tabulated band is queried outside its table."""


# ---------------------------------------------------------------------------
# band models


class EnergyBand:
    """Radial band abstraction: eps(r) and d eps/dr, vectorized over r.

    Radial bands have no angular dependence by construction, so the angular
    partial derivatives of eps are identically zero.
    """

    kind = "abstract"

    def eval(self, r):
        """Return (eps, deps_dr) at r (scalar or array)."""
        raise NotImplementedError

    def eps(self, r):
        return self.eval(r)[0]

    def deps_dr(self, r):
        return self.eval(r)[1]


class ParabolicBand(EnergyBand):
    """eps(r) = r: the effective-mass band in shell coordinates."""

    kind = "parabolic"

    def eval(self, r):
        r = np.asarray(r, dtype=float)
        return r.copy(), np.ones_like(r)


class KaneBand(EnergyBand):
    """Non-parabolic dispersion eps(1 + alpha_k eps) = r.

    alpha_k is the non-parabolicity already scaled to thermal-energy units.
    The closed form is written to avoid cancellation as alpha_k -> 0.
    """

    kind = "kane"

    def __init__(self, alpha_k: float):
        if alpha_k <= 0.0:
            raise ValueError("alpha_k must be > 0 (use ParabolicBand for 0)")
        self.alpha_k = float(alpha_k)

    def eval(self, r):
        r = np.asarray(r, dtype=float)
        root = np.sqrt(1.0 + 4.0 * self.alpha_k * r)
        eps = 2.0 * r / (1.0 + root)
        return eps, 1.0 / root


class TabulatedBand(EnergyBand):
    """Spline-interpolated band from averaged samples at shell radii.

    Outside [r_nodes[0], r_nodes[-1]] evaluation continues linearly with the
    boundary interval's slope (clamped extrapolation); every such query
    increments ``extrapolation_count`` for auditing.  With strict=True an
    out-of-range query raises ExtrapolationError instead.
    """

    kind = "tabulated"

    def __init__(self, spline: "RadialSpline", strict: bool = False):
        self.spline = spline
        self.strict = strict
        self.extrapolation_count = 0

    def eval(self, r):
        r = np.asarray(r, dtype=float)
        lo, hi = self.spline.knots[0], self.spline.knots[-1]
        below = r < lo
        above = r > hi
        n_out = int(np.count_nonzero(below) + np.count_nonzero(above))
        if n_out:
            if self.strict:
                raise ExtrapolationError(
                    f"band queried outside table range [{lo:g}, {hi:g}]")
            self.extrapolation_count += n_out
        rc = np.clip(r, lo, hi)
        eps = self.spline(rc)
        deps = self.spline.derivative(rc)
        if n_out:
            eps = eps + deps * (r - rc)   # slope already the clamped one
        return eps, deps


def make_band(kind: str, alpha_k: float | None = None,
              table: "BandTable | None" = None) -> EnergyBand:
    if kind == "parabolic":
        return ParabolicBand()
    if kind == "kane":
        if alpha_k is None:
            raise ValueError("kane band needs alpha_k")
        return KaneBand(alpha_k)
    if kind == "tabulated":
        if table is None:
            raise ValueError("tabulated band needs a BandTable")
        return TabulatedBand(fit_spline(table.r_nodes, table.eps_values))
    raise ValueError(f"unknown band kind {kind!r}")


def eval_band(band: EnergyBand, r):
    """Functional form of EnergyBand.eval, for symmetry with the other ops."""
    return band.eval(r)


# ---------------------------------------------------------------------------
# cubic spline


@dataclass(frozen=True)
class RadialSpline:
    """Natural cubic interpolant with explicit knots and coefficients.

    ``coeffs`` has shape (4, n_intervals): per-interval polynomial
    coefficients, highest degree first, in the local variable (r - knot).
    """

    knots: np.ndarray
    coeffs: np.ndarray
    bc: str = "natural"
    _pp: _SciPyCubicSpline = field(repr=False, compare=False, default=None)

    def __call__(self, r):
        return self._pp(r)

    def derivative(self, r):
        return self._pp(r, 1)

    def second_derivative(self, r):
        return self._pp(r, 2)


def fit_spline(nodes, values) -> RadialSpline:
    """Interpolating natural cubic spline through (nodes, values).

    Natural end conditions (zero second derivative) because tabulated bands
    carry no end-derivative information.
    """
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    if nodes.ndim != 1 or nodes.size < 4:
        raise ValueError("need at least 4 nodes for a cubic spline")
    if np.any(np.diff(nodes) <= 0.0):
        raise ValueError("spline nodes must be strictly increasing")
    pp = _SciPyCubicSpline(nodes, values, bc_type="natural")
    return RadialSpline(knots=nodes, coeffs=pp.c, _pp=pp)


# ---------------------------------------------------------------------------
# angular averaging over momentum shells

N_ANGULAR = 10

def _angular_nodes():
    """Tensor Gauss-Legendre nodes/weights on [0,1] x [0,pi].

    Weights are normalized so the average of a constant is that constant.
    """
    x, w = leggauss(N_ANGULAR)
    mu = 0.5 * (x + 1.0)
    wmu = 0.5 * w
    phi = 0.5 * np.pi * (x + 1.0)
    wphi = 0.5 * np.pi * w
    wgrid = np.outer(wmu, wphi) / np.pi   # measure of the domain is pi
    return mu, phi, wgrid


MU_NODES, PHI_NODES, W_ANGULAR = _angular_nodes()


def spherical_average(sampler, r: float) -> float:
    """Average eps(r, mu, phi) over the angular Gauss grid at fixed r.

    ``sampler(r, mu, phi)`` must broadcast over the (10, 10) node grid.
    """
    mu = MU_NODES[:, None]
    phi = PHI_NODES[None, :]
    vals = np.asarray(sampler(r, mu, phi), dtype=float)
    vals = np.broadcast_to(vals, (N_ANGULAR, N_ANGULAR))
    return float(np.sum(W_ANGULAR * vals))


def l2_deviation(sampler, r: float) -> float:
    """Relative mean-square angular deviation from the shell average at r."""
    mu = MU_NODES[:, None]
    phi = PHI_NODES[None, :]
    vals = np.asarray(sampler(r, mu, phi), dtype=float)
    vals = np.broadcast_to(vals, (N_ANGULAR, N_ANGULAR))
    avg = np.sum(W_ANGULAR * vals)
    denom = np.sum(W_ANGULAR * vals**2)
    if denom == 0.0:
        return 0.0
    return float(np.sum(W_ANGULAR * (vals - avg) ** 2) / denom)


def isotropic_sampler(band: EnergyBand):
    """Wrap a radial band as an angle-independent full-band sampler."""
    def sampler(r, mu, phi):
        eps = band.eps(np.asarray(r, dtype=float))
        return np.broadcast_to(eps, np.broadcast_shapes(
            np.shape(r), np.shape(mu), np.shape(phi)))
    return sampler


@dataclass
class BandTable:
    """Averaged band samples at shell radii, with per-node anisotropy."""

    r_nodes: np.ndarray
    eps_values: np.ndarray
    deviation: np.ndarray

    def __post_init__(self):
        self.r_nodes = np.asarray(self.r_nodes, dtype=float)
        self.eps_values = np.asarray(self.eps_values, dtype=float)
        self.deviation = np.asarray(self.deviation, dtype=float)
        if np.any(np.diff(self.r_nodes) <= 0.0):
            raise ValueError("r_nodes must be strictly increasing")
        if np.any(self.eps_values < 0.0):
            raise ValueError("eps_values must be non-negative")
        if np.any(self.deviation < 0.0):
            raise ValueError("deviation must be non-negative")


def average_band(sampler, r_nodes) -> BandTable:
    """Run the averaging pipeline: shell averages + deviations at r_nodes."""
    r_nodes = np.asarray(r_nodes, dtype=float)
    eps = np.array([spherical_average(sampler, r) for r in r_nodes])
    dev = np.array([l2_deviation(sampler, r) for r in r_nodes])
    return BandTable(r_nodes=r_nodes, eps_values=eps, deviation=dev)


# ---------------------------------------------------------------------------
# band-table files
#
# Text format, '#' comments.  Mode A: header line "radial", rows "r,eps".
# Mode B: header "angular nr=<Nr> quad=gauss10", then per r-node a block of
# 100 rows "r,mu,phi,eps" at the fixed 10x10 Gauss nodes.


class GridSampler:
    """Full-band sampler backed by values at the fixed angular Gauss nodes."""

    def __init__(self, r_nodes: np.ndarray, eps_grid: np.ndarray):
        self.r_nodes = np.asarray(r_nodes, dtype=float)
        self.eps_grid = np.asarray(eps_grid, dtype=float)  # (Nr, 10, 10)

    def __call__(self, r, mu, phi):
        idx = np.searchsorted(self.r_nodes, r)
        for j in (idx - 1, idx, idx + 1):
            if 0 <= j < self.r_nodes.size and np.isclose(
                    self.r_nodes[j], r, rtol=1e-12, atol=1e-12):
                return self.eps_grid[j]
        raise ValueError(f"grid sampler has no shell at r={r!r}")


def _parse_float(tok: str, lineno: int, path: str) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise BandFileError(f"{path}:{lineno}: not a number: {tok!r}") from None
    if not np.isfinite(v):
        raise BandFileError(f"{path}:{lineno}: non-finite value {tok!r}")
    return v


def load_band_table(path):
    """Parse a band file: returns a BandTable (radial) or GridSampler (angular)."""
    path = str(path)
    with open(path) as fh:
        raw = fh.readlines()
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(raw)]
    lines = [(n, ln) for n, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise BandFileError(f"{path}: empty band file")

    hdr_no, header = lines[0]
    body = lines[1:]
    if header == "radial":
        return _load_radial(body, path)
    if header.startswith("angular"):
        return _load_angular(header, hdr_no, body, path)
    raise BandFileError(f"{path}:{hdr_no}: unknown header {header!r}")


def _load_radial(body, path) -> BandTable:
    rs, es = [], []
    last_r = -np.inf
    for lineno, ln in body:
        toks = ln.split(",")
        if len(toks) != 2:
            raise BandFileError(f"{path}:{lineno}: expected 'r,eps', got {ln!r}")
        r = _parse_float(toks[0], lineno, path)
        e = _parse_float(toks[1], lineno, path)
        if r <= last_r:
            raise BandFileError(
                f"{path}:{lineno}: r values must be strictly increasing "
                f"({r:g} after {last_r:g})")
        if e < 0.0:
            raise BandFileError(f"{path}:{lineno}: negative energy {e:g}")
        last_r = r
        rs.append(r)
        es.append(e)
    return BandTable(np.array(rs), np.array(es), np.zeros(len(rs)))


def _load_angular(header, hdr_no, body, path) -> GridSampler:
    fields = dict(tok.split("=", 1) for tok in header.split()[1:] if "=" in tok)
    if fields.get("quad") != "gauss10":
        raise BandFileError(f"{path}:{hdr_no}: only quad=gauss10 is supported")
    try:
        nr = int(fields["nr"])
    except (KeyError, ValueError):
        raise BandFileError(f"{path}:{hdr_no}: angular header needs nr=<int>") from None
    need = nr * N_ANGULAR * N_ANGULAR
    if len(body) != need:
        raise BandFileError(
            f"{path}: angular file needs {need} data rows, found {len(body)}")

    r_nodes = np.empty(nr)
    grid = np.empty((nr, N_ANGULAR, N_ANGULAR))
    it = iter(body)
    last_r = -np.inf
    for k in range(nr):
        block_r = None
        for im in range(N_ANGULAR):
            for ip in range(N_ANGULAR):
                lineno, ln = next(it)
                toks = ln.split(",")
                if len(toks) != 4:
                    raise BandFileError(
                        f"{path}:{lineno}: expected 'r,mu,phi,eps', got {ln!r}")
                r = _parse_float(toks[0], lineno, path)
                mu = _parse_float(toks[1], lineno, path)
                phi = _parse_float(toks[2], lineno, path)
                e = _parse_float(toks[3], lineno, path)
                if block_r is None:
                    if r <= last_r:
                        raise BandFileError(
                            f"{path}:{lineno}: r blocks must be strictly "
                            f"increasing ({r:g} after {last_r:g})")
                    block_r = r
                elif r != block_r:
                    raise BandFileError(
                        f"{path}:{lineno}: r changed mid-block "
                        f"({r:g} != {block_r:g})")
                if not (np.isclose(mu, MU_NODES[im], atol=1e-9)
                        and np.isclose(phi, PHI_NODES[ip], atol=1e-9)):
                    raise BandFileError(
                        f"{path}:{lineno}: node ({mu:g},{phi:g}) is not the "
                        f"gauss10 node ({MU_NODES[im]:g},{PHI_NODES[ip]:g})")
                grid[k, im, ip] = e
        r_nodes[k] = block_r
        last_r = block_r
    return GridSampler(r_nodes, grid)


def write_radial_band_file(path, table: BandTable):
    with open(path, "w") as fh:
        fh.write("# averaged radial band table (dimensionless)\n")
        fh.write("radial\n")
        for r, e in zip(table.r_nodes, table.eps_values):
            fh.write(f"{float(r)!r},{float(e)!r}\n")


def write_angular_band_file(path, sampler, r_nodes):
    """Sample a full-band surface at the angular Gauss nodes and save it."""
    r_nodes = np.asarray(r_nodes, dtype=float)
    with open(path, "w") as fh:
        fh.write("# full-band samples at the fixed 10x10 angular gauss nodes\n")
        fh.write(f"angular nr={r_nodes.size} quad=gauss10\n")
        for r in r_nodes:
            vals = np.broadcast_to(
                np.asarray(sampler(r, MU_NODES[:, None], PHI_NODES[None, :]),
                           dtype=float), (N_ANGULAR, N_ANGULAR))
            for im in range(N_ANGULAR):
                for ip in range(N_ANGULAR):
                    fh.write(f"{float(r)!r},{float(MU_NODES[im])!r},"
                             f"{float(PHI_NODES[ip])!r},"
                             f"{float(vals[im, ip])!r}\n")
