"""Observables, output files, and the command-line interface."""

import json

import numpy as np
import pytest

from dgboltz import cli
from dgboltz.driver import RunConfig, RunState, Simulation
from dgboltz.mesh import T, project_to_dg
from dgboltz.moments_io import (moments, pdf_slice, read_moments_csv,
                                write_outputs)

KT_EV = 0.0258519998


def flat_sim(**kw):
    base = dict(device="flat", doping_breakpoints=(0.5,),
                doping_m3=(5e23, 5e23),
                mesh=dict(x_blocks=[(4, 0.25)], n_r=24, dr=1.0,
                          mu_spans=[(4, -1.0, 1.0)]),
                bias_v=0.0, collisions_on=False, band="parabolic",
                t_max_ps=0.02)
    base.update(kw)
    return Simulation(RunConfig(**base))


def with_state(sim, f):
    run = sim.initialize()
    state = project_to_dg(f, sim.mesh)
    return RunState(0.0, state, sim.solve_field(state), 0, run.diagnostics)


class TestMoments:
    def test_equilibrium_velocity_and_current_vanish(self):
        sim = flat_sim()
        mom = moments(sim.initialize(), sim)
        # thermal speed is ~1e5 m/s; anything below 1e-6 is pure roundoff
        assert np.abs(mom.velocity).max() <= 1e-6
        assert np.abs(mom.current).max() <= 1e-6 * 1.602e-19 * 5e23

    def test_forward_half_space_gives_positive_velocity(self):
        sim = flat_sim()
        run = with_state(sim, lambda x, r, mu: np.sqrt(np.maximum(r, 0))
                         * np.exp(-r) * np.maximum(mu, 0.0) + 0 * x)
        mom = moments(run, sim)
        assert np.all(mom.velocity > 0.0)
        assert np.all(mom.current > 0.0)

    def test_manufactured_profile_quadrature_matches_analytic(self):
        # velocity = 4 c_d / (3 sqrt(pi)) l*/t* and energy = 3/2 kT for
        # Phi = (sqrt(r)/2) e^-r (1+mu)/2; the quadrature of the *exact*
        # profile must hit the closed forms to 1e-6
        sim = flat_sim(mesh=dict(x_blocks=[(2, 0.5)], n_r=400, dr=0.1,
                                 mu_spans=[(8, -1.0, 1.0)]))
        tables, mesh = sim.tables, sim.mesh
        r = tables.r_nodes[:, None, :, None]
        mu = tables.mu_nodes[None, :, None, :]
        phi = np.sqrt(r) / 2 * np.exp(-r) * (1 + mu) / 2
        a1 = (sim.groups.c_d * 2 * np.sqrt(r) * mu) * np.ones_like(phi)
        num_v = np.sum(tables.wv * a1 * phi)
        num_e = np.sum(tables.wv * r * phi)
        den = np.sum(tables.wv * phi)
        v_unit = sim.config.scales.length / sim.config.scales.time
        want_v = 4 * sim.groups.c_d / (3 * np.sqrt(np.pi))
        assert num_v / den == pytest.approx(want_v, rel=1e-6)
        assert num_e / den == pytest.approx(1.5, rel=1e-6)
        # the projected-state moments carry the P1 representation error
        run = with_state(sim, lambda x, r_, mu_:
                         np.sqrt(np.maximum(r_, 0)) / 2 * np.exp(-r_)
                         * (1 + mu_) / 2 + 0 * x)
        mom = moments(run, sim)
        assert mom.velocity[0] == pytest.approx(want_v * v_unit, rel=5e-4)
        assert mom.energy_ev[0] / KT_EV == pytest.approx(1.5, rel=5e-4)

    def test_zero_density_cells_flagged(self):
        sim = flat_sim()
        run = sim.initialize()
        zeroed = run.state.coeffs.copy()
        zeroed[1] = 0.0
        mom = moments(RunState(0.0, type(run.state)(zeroed,
                      run.state.mesh_fingerprint), run.field, 0,
                      run.diagnostics), sim)
        assert mom.zero_density_cells[1]
        assert mom.velocity[1] == 0.0 and mom.energy_ev[1] == 0.0

    def test_units_roundtrip(self):
        sim = flat_sim()
        mom = moments(sim.initialize(), sim)
        k3 = sim.groups.k_scale**3
        back = mom.density / k3
        rho = np.einsum("ikm,km->i", sim.initialize().state.coeffs[..., T],
                        sim.mesh.dr[:, None] * sim.mesh.dmu[None, :])
        np.testing.assert_allclose(back, rho, rtol=1e-12)

    def test_pdf_slice_geometry(self):
        sim = flat_sim(mesh=dict(x_blocks=[(4, 0.25)], n_r=96, dr=0.25,
                                 mu_spans=[(4, -1.0, 1.0)]))
        run = sim.initialize()
        sl = pdf_slice(run, sim, 0.6)
        assert sl.f.shape == (sim.mesh.nr, sim.mesh.nmu)
        assert sl.x_probe == pytest.approx(
            sim.mesh.x_centers[np.argmin(np.abs(sim.mesh.x_centers - 0.6))])
        # f = 2 Phi / sqrt(r) recovers the shell-free distribution: for the
        # equilibrium state it is proportional to exp(-eps) up to the
        # cell-average bias, which is largest in the sqrt-kink cell at r=0
        ratio = sl.f[:, 0] / np.exp(-sim.mesh.r_centers)
        assert np.abs(ratio / ratio[1] - 1.0)[1:48].max() < 0.02


class TestOutputs:
    def test_zero_snapshot_series_writes_meta_only(self, tmp_path):
        sim = flat_sim()
        files = write_outputs([], sim, tmp_path)
        assert files == ["run_meta.json"]
        meta = json.loads((tmp_path / "run_meta.json").read_text())
        assert meta["mesh_fingerprint"] == sim.mesh.fingerprint()
        assert meta["config"]["device"] == "flat"
        assert "c_d" in meta["scaling"]

    def test_snapshot_row_count_matches_mesh(self, tmp_path):
        sim = Simulation(RunConfig(device="diode400", t_max_ps=0.0,
                                   collisions_on=False))
        snaps = sim.run()
        write_outputs(snaps, sim, tmp_path)
        header, data = read_moments_csv(tmp_path / "moments_t0.0000.csv")
        assert header == list("x rho velocity energy_eV current "
                              "E_field potential".split())
        assert data.shape == (120, 7)

    def test_roundtrip_bitwise_at_17_digits(self, tmp_path):
        sim = flat_sim()
        snaps = sim.run()
        write_outputs(snaps, sim, tmp_path)
        mom = moments(snaps[0], sim)
        _, data = read_moments_csv(tmp_path / "moments_t0.0000.csv")
        np.testing.assert_array_equal(data, mom.as_table())

    def test_pdf_probe_files(self, tmp_path):
        sim = flat_sim(pdf_probes=(0.3,), t_max_ps=0.0)
        files = write_outputs(sim.run(), sim, tmp_path)
        pdfs = [f for f in files if f.startswith("pdf_x")]
        assert len(pdfs) == 1
        header, data = read_moments_csv(tmp_path / pdfs[0])
        assert header == ["r", "mu", "f"]
        assert data.shape == (sim.mesh.nr * sim.mesh.nmu, 3)


def write_toy_config(path, **extra):
    cfg = {
        "device": {"preset": "diode400", "doping_breakpoints": [0.3, 0.7],
                   "doping_m3": [5e23, 2e21, 5e23]},
        "band": {"model": "parabolic"},
        "bias_v": 0.1,
        "mesh": {"x_blocks": [[6, 1 / 6]], "n_r": 8, "dr": 2.0,
                 "mu_spans": [[4, -1.0, 1.0]]},
        "time": {"t_max_ps": 0.01, "cfl": 0.3, "output_cadence_ps": 0.01},
        "output": {"pdf_probes": [0.5]},
        "collisions_on": False,
    }
    cfg.update(extra)
    path.write_text(json.dumps(cfg))
    return path


class TestCli:
    def test_run_produces_output_tree(self, tmp_path):
        cfg = write_toy_config(tmp_path / "cfg.json")
        out = tmp_path / "out"
        assert cli.main(["run", str(cfg), "--out", str(out)]) == 0
        assert (out / "run_meta.json").exists()
        assert list(out.glob("moments_t*.csv"))
        assert list(out.glob("pdf_x*.csv"))

    def test_run_flag_overrides(self, tmp_path, capsys):
        cfg = write_toy_config(tmp_path / "cfg.json")
        out = tmp_path / "out"
        assert cli.main(["run", str(cfg), "--out", str(out),
                         "--bias", "0.0", "--tmax", "0.0"]) == 0
        meta = json.loads((out / "run_meta.json").read_text())
        assert meta["config"]["bias_v"] == 0.0
        assert meta["config"]["t_max_ps"] == 0.0

    def test_print_scaling(self, tmp_path, capsys):
        cfg = write_toy_config(tmp_path / "cfg.json")
        assert cli.main(["run", str(cfg), "--print-scaling"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        keys = {ln.split(",")[0] for ln in lines}
        assert {"c_d", "c_e", "c_p", "c_v", "alpha_p"} <= keys

    def test_print_mesh(self, tmp_path, capsys):
        cfg = write_toy_config(tmp_path / "cfg.json")
        assert cli.main(["run", str(cfg), "--print-mesh"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("x_edges,")
        assert "mu_edges," in out

    def test_missing_config_is_config_error(self, tmp_path):
        assert cli.main(["run", str(tmp_path / "nope.json")]) == 2

    def test_malformed_config_is_config_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert cli.main(["run", str(bad)]) == 2

    def test_unknown_flag_usage_error(self, tmp_path, capsys):
        assert cli.main(["run", "cfg.json", "--warp-speed"]) == 2

    def test_bands_kane_below_parabolic(self, tmp_path):
        out = tmp_path / "bands.csv"
        assert cli.main(["bands", "--band", "kane", "--rmax", "36",
                         "--out", str(out)]) == 0
        header, data = read_moments_csv(out)
        assert header[:2] == ["r", "eps_kane"]
        r, eps = data[:, 0], data[:, 1]
        assert np.all(eps[1:] < r[1:])

    def test_average_pipeline(self, tmp_path):
        from dgboltz.bands import (KaneBand, isotropic_sampler,
                                   write_angular_band_file)
        band_file = tmp_path / "synthetic_angular.band"
        write_angular_band_file(band_file, isotropic_sampler(KaneBand(0.0129)),
                                np.linspace(0.5, 8.0, 6))
        out = tmp_path / "avg.csv"
        assert cli.main(["average", str(band_file), "--out", str(out)]) == 0
        header, data = read_moments_csv(out)
        assert header == ["r", "eps", "deviation"]
        assert data.shape == (6, 3)
        assert np.abs(data[:, 2]).max() <= 1e-20

    def test_check_subcommand_passes(self, capsys):
        assert cli.main(["check", "--seed", "3"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out


class TestMomentLinearity:
    def test_extensive_moments_linear_in_state(self):
        sim = flat_sim()
        rng = np.random.default_rng(29)
        shape = (sim.mesh.nx, sim.mesh.nr, sim.mesh.nmu, 4)
        run = sim.initialize()

        def mom_of(coeffs):
            st = type(run.state)(coeffs, run.state.mesh_fingerprint)
            return moments(RunState(0.0, st, run.field, 0, run.diagnostics),
                           sim)

        c1 = rng.normal(size=shape) + 2.0
        c2 = rng.normal(size=shape) + 2.0
        a, b = 1.3, -0.4
        mc = mom_of(a * c1 + b * c2)
        m1, m2 = mom_of(c1), mom_of(c2)
        # density and current are plain integrals of the state
        np.testing.assert_allclose(mc.density, a * m1.density + b * m2.density,
                                   rtol=1e-11)
        np.testing.assert_allclose(mc.current, a * m1.current + b * m2.current,
                                   rtol=1e-11, atol=1e-20)

    def test_negative_pdf_values_logged_not_clamped(self, caplog):
        import logging
        sim = flat_sim()
        run = sim.initialize()
        bad = run.state.coeffs.copy()
        bad[0, 2, 1, T] = -1.0
        run2 = RunState(0.0, type(run.state)(bad, run.state.mesh_fingerprint),
                        run.field, 0, run.diagnostics)
        with caplog.at_level(logging.WARNING, logger="dgboltz.moments_io"):
            sl = pdf_slice(run2, sim, 0.1)
        assert (sl.f < 0).sum() == 1        # reported, not clamped
        assert any("negative" in r.message for r in caplog.records)
