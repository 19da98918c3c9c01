"""Material parameters, reference scales, and the dimensionless groups.

All physical inputs are SI (energies in eV where noted); everything the
solver touches downstream is dimensionless.  The wavevector normalization
is k_scale = sqrt(2 m* kB T_L)/hbar, so the squared-radius momentum
coordinate r satisfies |k| = k_scale*sqrt(r) and energies are measured in
units of kB*T_L.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import EPS_0, HBAR, K_B, M_E, Q_E

# Silicon defaults for the electron-phonon coupling strengths.  The kernel
# constants K (optical, inelastic) and K0 (acoustic, elastic approximation)
# are derived from deformation potentials:
#   K0 = Xi^2 kB T_L / (4 pi^2 hbar rho vs^2)
#   K  = (DtK)^2 / (8 pi^2 rho omega_p)
# with Xi the acoustic deformation potential, rho the mass density, vs the
# longitudinal sound speed and DtK the optical coupling constant.  These
# numbers are assumptions (documented in the README), not fitted values.
SI_DENSITY = 2329.0            # kg/m^3
SI_SOUND_SPEED = 9040.0        # m/s
SI_ACOUSTIC_DEFPOT_EV = 9.0    # eV
SI_OPTICAL_COUPLING_EV_M = 1.14e11   # eV/m


def _acoustic_kernel_constant(lattice_temperature: float) -> float:
    xi = SI_ACOUSTIC_DEFPOT_EV * Q_E
    return xi**2 * K_B * lattice_temperature / (
        4.0 * math.pi**2 * HBAR * SI_DENSITY * SI_SOUND_SPEED**2)


def _optical_kernel_constant(optical_phonon_energy_ev: float) -> float:
    dtk = SI_OPTICAL_COUPLING_EV_M * Q_E
    omega_p = optical_phonon_energy_ev * Q_E / HBAR
    return dtk**2 / (8.0 * math.pi**2 * SI_DENSITY * omega_p)


@dataclass(frozen=True)
class MaterialParams:
    """Band and scattering parameters of the host semiconductor.

    effective_mass_ratio     m*/m_e (dimensionless)
    optical_phonon_energy    hbar*omega_p in eV
    acoustic_coupling        elastic kernel constant K0, SI (J m^3/s)
    optical_coupling         inelastic kernel constant K, SI (J m^3/s)
    kane_alpha               non-parabolicity alpha in 1/eV
    rel_permittivity         eps_r (dimensionless)
    lattice_temperature      T_L in K
    """

    effective_mass_ratio: float = 0.32
    optical_phonon_energy: float = 0.063
    acoustic_coupling: float = _acoustic_kernel_constant(300.0)
    optical_coupling: float = _optical_kernel_constant(0.063)
    kane_alpha: float = 0.5
    rel_permittivity: float = 11.7
    lattice_temperature: float = 300.0

    def __post_init__(self):
        for name in ("effective_mass_ratio", "optical_phonon_energy",
                     "acoustic_coupling", "optical_coupling", "kane_alpha",
                     "rel_permittivity", "lattice_temperature"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"MaterialParams.{name} must be > 0")

    @staticmethod
    def silicon(**overrides) -> "MaterialParams":
        """Default silicon parameter set; any field overridable."""
        return MaterialParams(**overrides)


@dataclass(frozen=True)
class ReferenceScales:
    """Reference length/time/voltage; the field scale is derived.

    The field scale is pinned to E* = 0.1 V*/l* so it is never set
    independently.
    """

    length: float = 1e-6     # m
    time: float = 1e-12      # s
    voltage: float = 1.0     # V

    def __post_init__(self):
        for name in ("length", "time", "voltage"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"ReferenceScales.{name} must be > 0")

    @property
    def field(self) -> float:
        """E* in V/m, exactly 0.1 * voltage / length."""
        return 0.1 * self.voltage / self.length


@dataclass(frozen=True)
class ScalingGroups:
    """Every dimensionless group the solver uses, plus k_scale (1/m).

    c_plus/c_minus/c_zero multiply the emission/absorption/elastic delta
    kernels; n_q is the phonon occupation at the lattice temperature.
    """

    c_d: float
    c_e: float
    c_p: float
    c_v: float
    alpha_p: float
    c_plus: float
    c_minus: float
    c_zero: float
    k_scale: float
    n_q: float

    def as_dict(self) -> dict:
        return {
            "c_d": self.c_d, "c_e": self.c_e, "c_p": self.c_p,
            "c_v": self.c_v, "alpha_p": self.alpha_p,
            "c_plus": self.c_plus, "c_minus": self.c_minus,
            "c_zero": self.c_zero, "k_scale": self.k_scale, "n_q": self.n_q,
        }


def derive_scaling(mat: MaterialParams, ref: ReferenceScales) -> ScalingGroups:
    """Derive all dimensionless groups from material and reference scales."""
    m_star = mat.effective_mass_ratio * M_E
    k_t = K_B * mat.lattice_temperature
    hw = mat.optical_phonon_energy * Q_E

    c_d = (ref.time / ref.length) * math.sqrt(k_t / (2.0 * m_star))
    c_e = ref.time * Q_E * ref.field / math.sqrt(2.0 * m_star * k_t)
    k_scale = math.sqrt(2.0 * m_star * k_t) / HBAR
    c_p = k_scale**3 * ref.length**2 * Q_E / (EPS_0 * ref.voltage)
    c_v = ref.voltage / (ref.length * ref.field)

    alpha_p = hw / k_t
    n_q = 1.0 / math.expm1(alpha_p)
    base = (2.0 * m_star * ref.time / HBAR**3) * math.sqrt(2.0 * m_star * k_t)
    c_plus = base * (n_q + 1.0) * mat.optical_coupling
    c_minus = base * n_q * mat.optical_coupling
    c_zero = base * mat.acoustic_coupling

    return ScalingGroups(c_d=c_d, c_e=c_e, c_p=c_p, c_v=c_v,
                         alpha_p=alpha_p, c_plus=c_plus, c_minus=c_minus,
                         c_zero=c_zero, k_scale=k_scale, n_q=n_q)


def thermal_energy_ev(mat: MaterialParams) -> float:
    """kB*T_L in eV; the energy unit of the dimensionless band."""
    return K_B * mat.lattice_temperature / Q_E


def kane_alpha_dimensionless(mat: MaterialParams) -> float:
    """alpha * kB*T_L: the non-parabolicity in thermal-energy units."""
    return mat.kane_alpha * thermal_energy_ev(mat)
