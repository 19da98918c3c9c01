"""Mesh presets, the basis overlap table, projection, and density."""

import numpy as np
import pytest

from dgboltz.mesh import (DGState, M, PhaseSpaceMesh, R, T, X,
                          beta_matrix_full, beta_matrix_reduced, build_mesh,
                          density, dg_eval, project_to_dg)


def toy_mesh(nx=4, nr=4, nmu=4, x_hi=1.0, r_hi=4.0):
    return PhaseSpaceMesh(np.linspace(0.0, x_hi, nx + 1),
                          np.linspace(0.0, r_hi, nr + 1),
                          np.linspace(-1.0, 1.0, nmu + 1))


class TestPresets:
    def test_diode400(self):
        mesh = build_mesh("diode400")
        assert (mesh.nx, mesh.nr, mesh.nmu) == (120, 80, 24)
        assert mesh.r_max == pytest.approx(36.0, rel=1e-14)
        assert np.allclose(mesh.dr, 0.45)
        assert mesh.x_edges[-1] == pytest.approx(1.0, abs=1e-12)
        assert np.isclose(mesh.x_edges, 0.3).any()   # junction on an edge
        assert np.isclose(mesh.x_edges, 0.7).any()
        assert np.isclose(mesh.mu_edges, 0.7).any()
        # refinement blocks literally as specified
        assert np.allclose(mesh.dx[:20], 0.01)
        assert np.allclose(mesh.dx[20:60], 0.005)
        assert np.allclose(mesh.dx[60:], 0.01)

    def test_diode50(self):
        mesh = build_mesh("diode50")
        assert (mesh.nx, mesh.nr, mesh.nmu) == (64, 80, 20)
        assert mesh.r_max == pytest.approx(64.0, rel=1e-14)
        assert np.allclose(mesh.dr, 0.8)
        assert mesh.x_edges[-1] == pytest.approx(0.25, abs=1e-12)
        assert np.isclose(mesh.x_edges, 0.1).any()
        assert np.isclose(mesh.x_edges, 0.15).any()
        widths = [(9, 0.01), (20, 0.001), (6, 0.005), (20, 0.001), (9, 0.01)]
        i = 0
        for count, w in widths:
            assert np.allclose(mesh.dx[i:i + count], w)
            i += count

    def test_uniform_toy(self):
        mesh = toy_mesh()
        assert mesh.nx * mesh.nr * mesh.nmu == 64
        assert np.allclose(mesh.dx, 0.25)
        assert np.allclose(mesh.dmu, 0.5)

    def test_bad_specs_rejected(self):
        with pytest.raises(ValueError):
            build_mesh("diode9000")
        with pytest.raises(ValueError):
            build_mesh(dict(x_blocks=[(0, 0.1)], n_r=4, dr=1.0,
                            mu_spans=[(4, -1, 1)]))
        with pytest.raises(ValueError):
            PhaseSpaceMesh(np.array([0.0, 0.5, 0.4]),
                           np.array([0.0, 1.0]), np.array([-1.0, 1.0]))


def test_beta_matrix_literal():
    expect = np.array([
        [1, 1, 1, 1, 0, 0],
        [1, 1, 1, 1, 0, 0],
        [1, 1, 1, 1, 0, 0],
        [1, 1, 1, 1, 0, 0],
        [0, 0, 0, 0, 1 / 3, 0],
        [0, 0, 0, 0, 0, 1 / 3],
    ])
    got = beta_matrix_full()
    assert np.array_equal(got, expect)
    assert np.array_equal(got, got.T)
    reduced = beta_matrix_reduced()
    assert np.array_equal(reduced, np.array([
        [1, 1, 1, 0], [1, 1, 1, 0], [1, 1, 1, 0], [0, 0, 0, 1 / 3]]))


class TestProjection:
    def test_constant(self):
        mesh = toy_mesh()
        state = project_to_dg(lambda x, r, mu: 2.5 + 0 * x * r * mu, mesh)
        assert np.allclose(state.coeffs[..., T], 2.5, atol=1e-14)
        assert np.abs(state.coeffs[..., [R, M, X]]).max() < 1e-13

    def test_linear_in_x_exact(self):
        mesh = toy_mesh()
        state = project_to_dg(lambda x, r, mu: 3.0 * x + 1.0 + 0 * r * mu, mesh)
        xc, dx = mesh.x_centers, mesh.dx
        assert np.allclose(state.coeffs[..., T],
                           (3.0 * xc + 1.0)[:, None, None], atol=1e-13)
        assert np.allclose(state.coeffs[..., X],
                           (1.5 * dx)[:, None, None], atol=1e-13)
        assert np.abs(state.coeffs[..., [R, M]]).max() < 1e-13

    def test_r_squared_against_closed_form(self):
        mesh = toy_mesh(nr=4, r_hi=4.0)   # r-cells of width 1
        state = project_to_dg(lambda x, r, mu: r**2 + 0 * x * mu, mesh)
        for k in range(mesh.nr):
            a, b = mesh.r_edges[k], mesh.r_edges[k + 1]
            rc, dr = 0.5 * (a + b), b - a
            mean = (b**3 - a**3) / (3 * dr)
            int_rb = (2 / dr) * ((b**4 - a**4) / 4 - rc * (b**3 - a**3) / 3)
            slope = 3 / dr * int_rb
            assert state.coeffs[0, k, 0, T] == pytest.approx(mean, rel=1e-13)
            assert state.coeffs[0, k, 0, R] == pytest.approx(slope, rel=1e-13)

    def test_projection_idempotent(self):
        mesh = toy_mesh()
        f = lambda x, r, mu: np.exp(-r) * (1 + 0.5 * mu) * np.cos(3 * x)
        first = project_to_dg(f, mesh)
        again = project_to_dg(
            lambda x, r, mu: dg_eval(first, mesh, x, r, mu), mesh)
        np.testing.assert_allclose(again.coeffs, first.coeffs, atol=1e-13)


class TestDensity:
    def test_separable_profile(self):
        mesh = toy_mesh(r_hi=4.0)
        g = lambda x: 1.0 + 0.2 * x
        state = project_to_dg(lambda x, r, mu: g(x) + 0 * r * mu, mesh)
        rho = density(state, mesh)
        # rho(x) = g(x) * r_max * (mu width)
        factor = mesh.r_max * 2.0
        assert np.allclose(rho.mean, g(mesh.x_centers) * factor, rtol=1e-13)
        assert np.allclose(rho.slope, 0.1 * mesh.dx * factor, rtol=1e-12)

    def test_zero_state(self):
        mesh = toy_mesh()
        rho = density(DGState.zeros(mesh), mesh)
        assert np.all(rho.mean == 0.0) and np.all(rho.slope == 0.0)

    def test_linearity(self):
        mesh = toy_mesh()
        rng = np.random.default_rng(7)
        s1 = DGState(rng.normal(size=(mesh.nx, mesh.nr, mesh.nmu, 4)))
        s2 = DGState(rng.normal(size=(mesh.nx, mesh.nr, mesh.nmu, 4)))
        comb = DGState(2.0 * s1.coeffs - 0.5 * s2.coeffs)
        got = density(comb, mesh)
        d1, d2 = density(s1, mesh), density(s2, mesh)
        np.testing.assert_allclose(got.mean, 2 * d1.mean - 0.5 * d2.mean,
                                   rtol=1e-12)
        np.testing.assert_allclose(got.slope, 2 * d1.slope - 0.5 * d2.slope,
                                   rtol=1e-12)
