"""Field solve against closed-form integrations."""

import numpy as np
import pytest

from dgboltz.mesh import CellDensity, PhaseSpaceMesh
from dgboltz.poisson import DopingProfile, FieldState, solve

CP, CV, EPS_R = 1.83e6, 10.0, 11.7


def x_mesh(nx=20):
    return PhaseSpaceMesh(np.linspace(0.0, 1.0, nx + 1),
                          np.array([0.0, 1.0]), np.array([-1.0, 1.0]))


def uniform_doping(value=1.0):
    return DopingProfile(np.array([]), np.array([value]))


def matched_density(mesh, value=1.0):
    return CellDensity(np.full(mesh.nx, value), np.zeros(mesh.nx))


class TestDopingProfile:
    def test_step_projection_on_aligned_mesh(self):
        mesh = x_mesh(10)
        prof = DopingProfile(np.array([0.3, 0.7]), np.array([5.0, 2.0, 5.0]))
        proj = prof.cell_projection(mesh)
        expect = np.where((mesh.x_centers > 0.3) & (mesh.x_centers < 0.7),
                          2.0, 5.0)
        np.testing.assert_allclose(proj.mean, expect, rtol=1e-14)
        assert np.abs(proj.slope).max() < 1e-12

    def test_step_inside_cell_projected_exactly(self):
        mesh = x_mesh(4)          # edges at 0, .25, .5, .75, 1
        prof = DopingProfile(np.array([0.375]), np.array([4.0, 2.0]))
        proj = prof.cell_projection(mesh)
        # second cell is half 4.0 and half 2.0
        assert proj.mean[1] == pytest.approx(3.0, rel=1e-14)
        # L2 slope of a centered step of height -2: (3/dx) * h*dx*(-1/4)*2...
        # direct quadrature oracle
        xs = np.linspace(0.25, 0.5, 20001)
        vals = np.where(xs < 0.375, 4.0, 2.0)
        b = 2 * (xs - 0.375) / 0.25
        slope = 3.0 * np.trapezoid(vals * b, xs) / 0.25
        assert proj.slope[1] == pytest.approx(slope, rel=1e-3)

    def test_validation(self):
        with pytest.raises(ValueError):
            DopingProfile(np.array([0.5]), np.array([1.0]))
        with pytest.raises(ValueError):
            DopingProfile(np.array([]), np.array([-1.0]))


class TestSolve:
    def test_zero_source_constant_field(self):
        mesh = x_mesh()
        bias = 0.5
        fs = solve(matched_density(mesh), uniform_doping(), bias, EPS_R,
                   mesh, CP, CV)
        assert np.allclose(fs.e_mean, -CV * bias, rtol=1e-13)
        assert np.abs(fs.e_slope).max() < 1e-10
        assert fs.psi_edges[0] == 0.0
        assert fs.psi_edges[-1] == pytest.approx(bias, abs=1e-13)
        # potential is linear
        np.testing.assert_allclose(fs.psi_centers, bias * mesh.x_centers,
                                   atol=1e-13)

    def test_constant_excess_zero_bias(self):
        mesh = x_mesh()
        c = 3e-4
        rho = CellDensity(np.full(mesh.nx, 1.0 + c), np.zeros(mesh.nx))
        fs = solve(rho, uniform_doping(), 0.0, EPS_R, mesh, CP, CV)
        # E(x) = -c_v (c_p c / eps_r)(x - 1/2), linear and antisymmetric
        expect = -CV * (CP * c / EPS_R) * (mesh.x_centers - 0.5)
        np.testing.assert_allclose(fs.e_mean, expect, rtol=1e-11)
        assert fs.e_mean[0] == pytest.approx(-fs.e_mean[-1], rel=1e-11)

    def test_step_source_hand_integration(self):
        mesh = x_mesh(10)
        c = 2e-4
        src = np.where(mesh.x_centers < 0.5, c, -c)
        rho = CellDensity(1.0 + src, np.zeros(mesh.nx))
        fs = solve(rho, uniform_doping(), 0.0, EPS_R, mesh, CP, CV)
        # hand integration: I(x) = c x below 1/2 and c(1-x) above, so
        # int_0^1 I = c/4 and psi'(0) = -cp c/4; integrating once more:
        cp = CP / EPS_R

        def psi(x):
            if x <= 0.5:
                return cp * c * (x**2 / 2 - x / 4)
            return cp * c * (0.75 * x - x**2 / 2 - 0.25)

        for x_probe in (0.1, 0.2, 0.4, 0.6, 0.8, 1.0):
            idx = int(round(x_probe * 10))
            assert fs.psi_edges[idx] == pytest.approx(psi(x_probe), abs=1e-12)

    def test_gauss_law_consistency(self):
        mesh = x_mesh(13)
        rng = np.random.default_rng(3)
        rho = CellDensity(1.0 + 1e-3 * rng.normal(size=mesh.nx),
                          1e-4 * rng.normal(size=mesh.nx))
        bias = 0.37
        fs = solve(rho, uniform_doping(), bias, EPS_R, mesh, CP, CV)
        total = np.sum(fs.e_mean * mesh.dx)
        assert total == pytest.approx(CV * (0.0 - bias), rel=1e-12)

    def test_linearity_and_superposition(self):
        mesh = x_mesh(8)
        rng = np.random.default_rng(11)
        nd = uniform_doping()
        r1 = CellDensity(1.0 + rng.normal(size=mesh.nx) * 1e-3,
                         rng.normal(size=mesh.nx) * 1e-4)
        r2 = CellDensity(1.0 + rng.normal(size=mesh.nx) * 1e-3,
                         rng.normal(size=mesh.nx) * 1e-4)
        fa = solve(r1, nd, 0.2, EPS_R, mesh, CP, CV)
        fb = solve(r2, nd, 0.1, EPS_R, mesh, CP, CV)
        mid = CellDensity(0.5 * (r1.mean + r2.mean),
                          0.5 * (r1.slope + r2.slope))
        fm = solve(mid, nd, 0.15, EPS_R, mesh, CP, CV)
        np.testing.assert_allclose(fm.e_mean, 0.5 * (fa.e_mean + fb.e_mean),
                                   rtol=1e-11)
        np.testing.assert_allclose(fm.e_slope, 0.5 * (fa.e_slope + fb.e_slope),
                                   atol=1e-14)

    def test_equilibrium_fixed_point(self):
        mesh = x_mesh()
        fs = solve(matched_density(mesh), uniform_doping(), 0.0, EPS_R,
                   mesh, CP, CV)
        assert np.abs(fs.e_mean).max() < 1e-12
        assert np.abs(fs.e_slope).max() < 1e-12
        assert np.abs(fs.psi_edges).max() < 1e-12

    def test_zero_field_helper(self):
        mesh = x_mesh(5)
        fs = FieldState.zero(mesh)
        assert fs.e_mean.shape == (5,)
        assert np.all(fs.eval_e(mesh, np.linspace(0, 1, 7)) == 0.0)
