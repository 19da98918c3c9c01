"""Scaling-group derivation against an independent scalar oracle.

Expected values below were evaluated directly from the CODATA constants
with a standalone script (straight transcription of the defining formulas,
no package code) and frozen here to 10 digits.
"""

import math

import pytest

from dgboltz.scaling import (MaterialParams, ReferenceScales, ScalingGroups,
                             derive_scaling, kane_alpha_dimensionless,
                             thermal_energy_ev)

# independent-oracle values for m*/me = 0.32, T = 300 K, l* = 1e-6 m,
# t* = 1e-12 s, V* = 1 V, hbar*omega_p = 0.063 eV
ORACLE = {
    "c_d": 8.4288394945e-02,
    "c_e": 3.2604206886e-01,
    "c_p": 1.8308106999e+06,
    "c_v": 10.0,
    "alpha_p": 2.4369488055,
    "n_q": 0.0958029897,
    "k_scale": 4.6597282803e+08,
}


@pytest.fixture
def groups() -> ScalingGroups:
    return derive_scaling(MaterialParams.silicon(), ReferenceScales())


def test_field_scale_is_tenth_of_voltage_over_length():
    ref = ReferenceScales(length=2e-6, time=1e-12, voltage=3.0)
    assert ref.field == 0.1 * 3.0 / 2e-6


def test_cv_is_ten_for_default_scales(groups):
    # E* = 0.1 V*/l* makes c_v = V*/(l* E*) exactly 10
    assert groups.c_v == pytest.approx(10.0, rel=1e-15)


def test_alpha_p_matches_direct_evaluation(groups):
    assert groups.alpha_p == pytest.approx(ORACLE["alpha_p"], rel=1e-9)
    assert groups.alpha_p == pytest.approx(2.437, abs=5e-4)


@pytest.mark.parametrize("name", ["c_d", "c_e", "c_p", "k_scale", "n_q"])
def test_groups_match_oracle_to_four_digits(groups, name):
    assert getattr(groups, name) == pytest.approx(ORACLE[name], rel=1e-9)


def test_emission_absorption_ratio(groups):
    # c_plus/c_minus = (n_q+1)/n_q, equivalently c_plus n_q = c_minus (n_q+1)
    lhs = groups.c_plus * groups.n_q
    rhs = groups.c_minus * (groups.n_q + 1.0)
    assert lhs == pytest.approx(rhs, rel=1e-14)
    assert groups.n_q == pytest.approx(1.0 / math.expm1(groups.alpha_p),
                                       rel=1e-14)


def test_scaling_homogeneity_in_time():
    mat = MaterialParams.silicon()
    g1 = derive_scaling(mat, ReferenceScales(time=1e-12))
    g2 = derive_scaling(mat, ReferenceScales(time=2e-12))
    assert g2.c_d == pytest.approx(2.0 * g1.c_d, rel=1e-14)
    assert g2.c_e == pytest.approx(2.0 * g1.c_e, rel=1e-14)
    assert g2.c_plus == pytest.approx(2.0 * g1.c_plus, rel=1e-14)
    assert g2.alpha_p == g1.alpha_p
    assert g2.c_p == g1.c_p


def test_rejects_nonpositive_inputs():
    with pytest.raises(ValueError):
        MaterialParams.silicon(effective_mass_ratio=-0.1)
    with pytest.raises(ValueError):
        MaterialParams.silicon(lattice_temperature=0.0)
    with pytest.raises(ValueError):
        ReferenceScales(length=0.0)


def test_thermal_energy_and_kane_alpha():
    mat = MaterialParams.silicon()
    assert thermal_energy_ev(mat) == pytest.approx(0.0258519998, rel=1e-9)
    assert kane_alpha_dimensionless(mat) == pytest.approx(0.0129259999,
                                                          rel=1e-9)
