"""Command-line front end.

Subcommands:
  run <config.json>   full simulation, outputs to --out
  bands               emit band tables eps(r), deps/dr for the models
  average <bandfile>  angular-average a full-band sample file
  check               built-in invariant smoke suite

Exit codes: 0 ok, 2 configuration error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bands import BandFileError, GridSampler, average_band, load_band_table
from .driver import NumericalAbort, RunConfig, Simulation, build_band
from .mesh import beta_matrix_full
from .moments_io import FMT, write_outputs
from .scaling import (MaterialParams, ReferenceScales, derive_scaling,
                      kane_alpha_dimensionless)
from .transport import ContactDensityError


class ConfigError(ValueError):
    pass


def config_from_file(path, args) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    return config_from_dict(raw, args)


def config_from_dict(raw: dict, args=None) -> RunConfig:
    """Build a RunConfig from the documented JSON sections + CLI overrides."""
    device = raw.get("device", {})
    material = MaterialParams.silicon(**raw.get("material", {}))
    sc = raw.get("scales", {})
    scales = ReferenceScales(length=sc.get("length_m", 1e-6),
                             time=sc.get("time_s", 1e-12),
                             voltage=sc.get("voltage_v", 1.0))
    band_sec = raw.get("band", {"model": "parabolic"})
    band = band_sec.get("model", "parabolic")
    if band == "table":
        band = "table:" + band_sec["path"]
    mesh_sec = raw.get("mesh")
    mesh = None
    if mesh_sec is not None:
        mesh = mesh_sec.get("preset", None) or {
            "x_blocks": [tuple(b) for b in mesh_sec["x_blocks"]],
            "n_r": mesh_sec["n_r"], "dr": mesh_sec["dr"],
            "mu_spans": [tuple(s) for s in mesh_sec["mu_spans"]],
        }
    time_sec = raw.get("time", {})
    out_sec = raw.get("output", {})

    try:
        cfg = RunConfig(
            device=device.get("preset", device.get("name", "diode400")),
            band=band,
            bias_v=raw.get("bias_v", device.get("bias_v", 0.5)),
            t_max_ps=time_sec.get("t_max_ps", 5.0),
            cfl=time_sec.get("cfl", 0.3),
            output_cadence_ps=time_sec.get("output_cadence_ps", 1.0),
            rk_order=time_sec.get("rk_order", 2),
            collisions_on=raw.get("collisions_on", True),
            field_mode=raw.get("field_mode", "consistent"),
            mesh=mesh,
            doping_breakpoints=tuple(device.get("doping_breakpoints", ())),
            doping_m3=tuple(device.get("doping_m3", ())),
            material=material,
            scales=scales,
            pdf_probes=tuple(out_sec.get("pdf_probes", ())),
        )
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    if args is not None:
        if args.bias is not None:
            cfg.bias_v = args.bias
        if args.band is not None:
            cfg.band = args.band
        if args.mesh_preset is not None:
            cfg.mesh = args.mesh_preset
        if args.tmax is not None:
            cfg.t_max_ps = args.tmax
        if args.cfl is not None:
            cfg.cfl = args.cfl
        if args.no_collision_cache:
            cfg.use_cache = False
    return cfg


def _print_scaling(cfg: RunConfig):
    groups = derive_scaling(cfg.material, cfg.scales)
    for key, val in groups.as_dict().items():
        print(f"{key},{FMT % val}")


def _print_mesh(mesh):
    for name, edges in (("x_edges", mesh.x_edges), ("r_edges", mesh.r_edges),
                        ("mu_edges", mesh.mu_edges)):
        print(name + "," + ",".join(FMT % v for v in edges))


def cmd_run(args) -> int:
    cfg = config_from_file(args.config, args)
    if args.print_scaling:
        _print_scaling(cfg)
        return 0
    sim = Simulation(cfg)
    if args.print_mesh:
        _print_mesh(sim.mesh)
        return 0
    out_dir = Path(args.out)

    def progress(run):
        if run.step % 500 == 0:
            print(f"step {run.step}: t = {run.time_ps:.3f} ps, "
                  f"dt = {run.diagnostics['dt']:.3e}, "
                  f"residual = {run.diagnostics['residual']:.3e}",
                  file=sys.stderr)

    snapshots = sim.run(progress=progress if args.verbose else None)
    files = write_outputs(snapshots, sim, out_dir)
    print(f"wrote {len(files)} files to {out_dir}")
    final = snapshots[-1]
    print(f"final t = {final.time_ps:.3f} ps after {final.step} steps, "
          f"steady-state residual = {final.diagnostics['residual']:.3e}")
    return 0


def cmd_bands(args) -> int:
    cfg = RunConfig(band="parabolic")
    alpha_k = kane_alpha_dimensionless(cfg.material)
    r = np.linspace(0.0, args.rmax, args.n)
    cols, table = ["r"], [r]
    wanted = (["parabolic", "kane"] if args.band == "all" else [args.band])
    for spec in wanted:
        band = build_band(RunConfig(band=spec, material=cfg.material))
        eps, deps = band.eval(r)
        cols += [f"eps_{spec.split(':')[0]}", f"deps_{spec.split(':')[0]}"]
        table += [eps, deps]
    out = Path(args.out)
    with open(out, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in np.column_stack(table):
            fh.write(",".join(FMT % v for v in row) + "\n")
    print(f"wrote {out} (alpha_k = {alpha_k:.6g})")
    return 0


def cmd_average(args) -> int:
    loaded = load_band_table(args.bandfile)
    if not isinstance(loaded, GridSampler):
        raise ConfigError("average needs an angular-mode band file")
    table = average_band(loaded, loaded.r_nodes)
    out = Path(args.out)
    with open(out, "w") as fh:
        fh.write("r,eps,deviation\n")
        for r, e, d in zip(table.r_nodes, table.eps_values, table.deviation):
            fh.write(f"{FMT % r},{FMT % e},{FMT % d}\n")
    print(f"wrote {out}")
    return 0


def cmd_check(args) -> int:
    """Quick self-contained invariant suite; exits nonzero on failure."""
    from .bands import KaneBand
    from .collisions import (ScatteringKernelSpec, apply, precompute,
                             project_band)
    from .mesh import DGState, PhaseSpaceMesh
    from .poisson import FieldState
    from .transport import (AdvectionCoefficients, AssemblyTables,
                            GhostPolicy, assemble_transport,
                            geometric_identity_check)

    rng = np.random.default_rng(args.seed)
    cfg = RunConfig()
    groups = derive_scaling(cfg.material, cfg.scales)
    failures = []

    def report(name, ok, detail=""):
        print(f"{'PASS' if ok else 'FAIL'}  {name}" +
              (f"  ({detail})" if detail else ""))
        if not ok:
            failures.append(name)

    beta = beta_matrix_full()
    ok = (np.array_equal(beta, beta.T) and beta[0, 3] == 1.0
          and beta[4, 4] == 1.0 / 3.0 and beta[4, 0] == 0.0)
    report("basis overlap table", ok)

    coeffs = AdvectionCoefficients(KaneBand(
        kane_alpha_dimensionless(cfg.material)), groups.c_d, groups.c_e)
    worst = 0.0
    for _ in range(200):
        worst = max(worst, geometric_identity_check(
            coeffs, rng.uniform(0.05, 30), rng.uniform(-0.999, 0.999),
            rng.uniform(-np.pi, np.pi), rng.normal(size=3) * 10))
    report("field-frame identities", worst <= 1e-12, f"max residual {worst:.2e}")

    ok = abs(groups.c_plus * groups.n_q
             - groups.c_minus * (groups.n_q + 1)) <= 1e-14 * groups.c_plus
    report("emission/absorption balance", ok)

    r = np.linspace(1e-3, 60, 500)
    kane = KaneBand(kane_alpha_dimensionless(cfg.material))
    report("kane below parabolic", bool(np.all(kane.eps(r) < r)))

    mesh = PhaseSpaceMesh(np.linspace(0, 1, 5), np.linspace(0, 8, 7),
                          np.linspace(-1, 1, 5))
    tables = AssemblyTables(mesh, coeffs)
    c = np.zeros((mesh.nx, mesh.nr, mesh.nmu, 4))
    c[..., 0] = rng.uniform(1, 2, c[..., 0].shape)
    state = DGState(c, mesh.fingerprint())
    field = FieldState(np.full(mesh.nx, 25.0), np.zeros(mesh.nx),
                       np.zeros(mesh.nx + 1), np.zeros(mesh.nx))
    area = float(np.einsum("k,m->", mesh.dr, mesh.dmu))
    _, _, f_r, f_m = assemble_transport(
        state, field, tables, GhostPolicy(area, area),
        return_face_fluxes=True)
    ok = (np.all(f_r[:, 0] == 0.0) and np.all(f_m[:, :, 0] == 0.0)
          and np.all(f_m[:, :, -1] == 0.0))
    report("boundary fluxes identically zero", ok)

    kern = ScatteringKernelSpec.from_scaling(groups)
    mat = precompute(kern, project_band(kane, mesh), mesh)
    worst = 0.0
    vols = mesh.cell_volumes()
    for _ in range(10):
        st = DGState(rng.normal(size=c.shape), mesh.fingerprint())
        rate = apply(mat, st, mesh)
        net = abs(np.sum(rate[..., 0] * vols))
        scale = np.abs(rate[..., 0]).max() * vols.max() * mesh.nr
        worst = max(worst, net / scale)
    report("collision mass conservation", worst <= 1e-10,
           f"worst {worst:.2e}")

    print(f"{len(failures)} failures")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dgboltz",
        description="Kinetic transport solver for 1D silicon diodes")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a simulation from a JSON config")
    run.add_argument("config")
    run.add_argument("--out", default="out")
    run.add_argument("--bias", type=float, default=None,
                     help="override bias in volts")
    run.add_argument("--band", default=None,
                     help="parabolic | kane | table:<path>")
    run.add_argument("--mesh-preset", default=None)
    run.add_argument("--tmax", type=float, default=None,
                     help="override t_max in ps")
    run.add_argument("--cfl", type=float, default=None)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--print-scaling", action="store_true",
                     help="echo the dimensionless groups and exit")
    run.add_argument("--print-mesh", action="store_true",
                     help="echo the mesh edges as CSV and exit")
    run.add_argument("--no-collision-cache", action="store_true")
    run.add_argument("--verbose", action="store_true")
    run.set_defaults(func=cmd_run)

    bd = sub.add_parser("bands", help="emit band model tables")
    bd.add_argument("--band", default="all",
                    help="parabolic | kane | table:<path> | all")
    bd.add_argument("--rmax", type=float, default=36.0)
    bd.add_argument("--n", type=int, default=201)
    bd.add_argument("--out", default="bands.csv")
    bd.set_defaults(func=cmd_bands)

    av = sub.add_parser("average", help="spherically average a band file")
    av.add_argument("bandfile")
    av.add_argument("--out", default="band_average.csv")
    av.set_defaults(func=cmd_average)

    ck = sub.add_parser("check", help="run the built-in invariant suite")
    ck.add_argument("--seed", type=int, default=0)
    ck.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ConfigError, BandFileError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (NumericalAbort, ContactDensityError, FloatingPointError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
