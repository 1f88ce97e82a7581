"""Command line entry point: ``sbmrom <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .embedded import CircleGeometry, classify
from .errors import SbmRomError
from .fom import FomConfig, run_fom
from .ghost_interp import GhostFiller
from .mesh import generate_channel_mesh, load_mesh, save_mesh
from .pod import compute_modes, select_modes, write_spectrum_csv
from .rom import RomOperator, run_rom
from .workbench import io
from .workbench.study import PRESETS, StudyConfig, load_preset, run_study

log = logging.getLogger("sbmrom")


def _floats(text):
    return [float(v) for v in text.split(",")]


def _add_mesh_args(p):
    p.add_argument("--mesh", type=Path, help="mesh file (TRIMESH v1); generated when omitted")
    p.add_argument("--x-range", type=_floats, default=[-1.5, 1.5])
    p.add_argument("--y-range", type=_floats, default=[-0.3, 0.3])
    p.add_argument("--edge", type=float, default=0.02)


def _add_geom_args(p, required=True):
    p.add_argument("--R", type=float, required=required, help="cylinder radius")
    p.add_argument("--xc", type=float, default=0.0, help="cylinder center x")


def _add_flow_args(p):
    p.add_argument("--T", type=float, default=0.8)
    p.add_argument("--cfl", type=float, default=0.5)
    p.add_argument("--dt", type=float, default=None, help="fixed step; CFL-driven when omitted")
    p.add_argument("--n-pmc", type=int, default=2)
    p.add_argument("--c-vms", type=float, default=2.0)
    p.add_argument("--h0", type=float, default=0.2)
    p.add_argument("--v0", type=_floats, default=[0.1, 0.0])
    p.add_argument("--m-inflow", type=float, default=-0.02)
    p.add_argument("--m-outflow", type=float, default=0.02)


def _mesh(args):
    if args.mesh is not None:
        return load_mesh(args.mesh)
    return generate_channel_mesh(tuple(args.x_range), tuple(args.y_range), args.edge)


def _geometry(args):
    return None if args.R is None else CircleGeometry(args.xc, args.R)


def _fom_config(args, **extra):
    return FomConfig(
        T=args.T, cfl=args.cfl, dt=args.dt, n_pmc=args.n_pmc, c_vms=args.c_vms, h0=args.h0,
        v0=tuple(args.v0), m_inflow=args.m_inflow, m_outflow=args.m_outflow, **extra,
    )


def cmd_mesh_gen(args):
    if args.preset:
        m = load_preset(args.preset).mesh
        args.x_range, args.y_range, args.edge = m["x_range"], m["y_range"], m["edge"]
    mesh = generate_channel_mesh(tuple(args.x_range), tuple(args.y_range), args.edge)
    save_mesh(mesh, args.output)
    print(f"{args.output}: {mesh.n_node} nodes, {mesh.n_elem} elements")


def cmd_fom_run(args):
    mesh = _mesh(args)
    geom = _geometry(args)
    sd = classify(mesh, geom)
    cfg = _fom_config(args, n_freq=args.n_freq, include_initial=args.include_initial, log_every=args.log_every)
    tr = run_fom(cfg, geom, mesh, sd)
    out = args.output
    out.mkdir(parents=True, exist_ok=True)
    io.save_matrix(tr.states, out / "states.bin")
    io.save_times(tr.times, tr.steps, out / "times.csv")
    io.export_vtk(mesh, tr.states[:, -1], out / "terminal.vtk", title=f"FOM t={tr.times[-1]:g}")
    if geom is not None:
        sd.dump_csv(out / "surrogate.csv")
    print(f"{tr.n_steps} steps, {tr.n_samples} samples, {tr.wall_time:.1f}s -> {out}")


def cmd_interp(args):
    mesh = _mesh(args)
    sd = classify(mesh, _geometry(args))
    S = io.load_matrix(args.states)
    filler = GhostFiller(mesh, sd, eps=args.eps, sigma=args.sigma, degree=args.degree, centers=args.centers)
    io.save_matrix(filler.fill(S), args.output)
    print(f"filled {len(sd.inactive_nodes)} ghost nodes in {S.shape[1]} snapshots -> {args.output}")


def cmd_pod_build(args):
    S = np.hstack([io.load_matrix(p) for p in args.snapshots])
    basis = compute_modes(S)
    if args.mu is not None:
        basis = basis.select(args.mu)
    out = args.output
    out.mkdir(parents=True, exist_ok=True)
    io.save_matrix(basis.modes, out / "modes.bin")
    write_spectrum_csv(basis.eigenvalues, out / "spectrum.csv")
    print(f"{S.shape[1]} snapshots, rank {basis.rank}, kept {basis.n_modes} modes -> {out}")


def cmd_rom_run(args):
    mesh = _mesh(args)
    geom = _geometry(args)
    Phi = io.load_matrix(args.modes)
    if args.n_modes:
        Phi = Phi[:, : args.n_modes]
    elif args.mu is not None:
        if args.spectrum is None:
            raise SystemExit("--mu needs --spectrum")
        lam = np.loadtxt(args.spectrum, delimiter=",", skiprows=1, ndmin=2)[:, 1]
        Phi = Phi[:, : select_modes(lam, args.mu)]
    cfg = _fom_config(args)
    if cfg.dt is None:
        cfg = cfg.with_(dt=0.002)
    sd = classify(mesh, geom)
    op = RomOperator(Phi, mesh, geom, cfg, surrogate=sd, ghost_mass=args.ghost_mass)
    U0 = None
    if args.initial is not None:
        U0 = io.load_matrix(args.initial)[:, 0]
    rt = run_rom(op, n_freq=args.n_freq, U0=U0)
    out = args.output
    out.mkdir(parents=True, exist_ok=True)
    rt.write_csv(out / "trajectory.csv")
    io.save_matrix(rt.states, out / "states.bin")
    if rt.coeffs.shape[1]:
        io.export_vtk(mesh, rt.states[:, -1], out / "terminal.vtk", title=f"ROM t={rt.times[-1]:g}")
    status = f"FAILED ({rt.failure})" if rt.failed else "OK"
    print(f"{op.n_modes} modes, {rt.n_steps} steps, {rt.wall_time:.1f}s, {status} -> {out}")
    return 1 if rt.failed else 0


def cmd_study(args):
    if args.config is not None:
        cfg = StudyConfig.from_json(args.config)
    elif args.preset:
        cfg = load_preset(args.preset)
    else:
        raise SystemExit("study needs --preset or --config")
    if args.n_freq is not None:
        cfg.n_freq = args.n_freq
    if args.mu_pod is not None:
        cfg.mu_pod = args.mu_pod
    if args.models is not None:
        cfg.models = args.models.split(",")
    if args.dt_eval is not None:
        cfg.dt_eval = args.dt_eval
    if args.edge is not None:
        cfg.mesh = dict(cfg.mesh, edge=args.edge)
    if args.no_plots:
        cfg.plots = False
    cfg.output_dir = str(args.output)
    cfg.validate()
    report = run_study(cfg)
    for r in report.rows:
        e = "        --" if r["errors"] is None else f"{r['errors'][0]:.3e}"
        print(f"{r['param']:<16} mu=1-{1 - r['mu_pod']:.0e} {r['model']:<10} h={e} modes={r['n_modes']} {r['status']}")
    print(f"report -> {args.output / 'report.csv'}")


def cmd_export(args):
    mesh = _mesh(args)
    S = io.load_matrix(args.states)
    io.export_vtk(mesh, S[:, args.column], args.output)
    print(f"column {args.column} of {args.states} -> {args.output}")


def build_parser():
    ap = argparse.ArgumentParser(prog="sbmrom", description="Shifted-boundary shallow water FOM/ROM workbench")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh-gen", help="generate a structured channel mesh")
    p.add_argument("--x-range", type=_floats, default=[-1.5, 1.5])
    p.add_argument("--y-range", type=_floats, default=[-0.3, 0.3])
    p.add_argument("--edge", type=float, default=0.02)
    p.add_argument("--preset", choices=PRESETS)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(func=cmd_mesh_gen)

    p = sub.add_parser("fom-run", help="run the full-order model")
    _add_mesh_args(p)
    _add_geom_args(p, required=False)
    _add_flow_args(p)
    p.add_argument("--n-freq", type=int, default=1)
    p.add_argument("--include-initial", action="store_true")
    p.add_argument("--log-every", type=int, default=0)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(func=cmd_fom_run)

    p = sub.add_parser("interp", help="fill removed-region values of stored snapshots")
    _add_mesh_args(p)
    _add_geom_args(p)
    p.add_argument("--states", type=Path, required=True)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--centers", choices=["all", "band"], default="all")
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(func=cmd_interp)

    p = sub.add_parser("pod-build", help="POD basis from snapshot matrices")
    p.add_argument("snapshots", type=Path, nargs="+")
    p.add_argument("--mu", type=float, help="energy threshold; all modes when omitted")
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(func=cmd_pod_build)

    p = sub.add_parser("rom-run", help="run the reduced model for one geometry")
    _add_mesh_args(p)
    _add_geom_args(p)
    _add_flow_args(p)
    p.add_argument("--modes", type=Path, required=True)
    p.add_argument("--n-modes", type=int)
    p.add_argument("--mu", type=float)
    p.add_argument("--spectrum", type=Path)
    p.add_argument("--initial", type=Path, help="matrix whose first column is the initial state")
    p.add_argument("--ghost-mass", choices=["zero", "background", "unit"], default="zero")
    p.add_argument("--n-freq", type=int, default=1)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(func=cmd_rom_run)

    p = sub.add_parser("study", help="offline/online study with an error report")
    p.add_argument("--preset", choices=PRESETS)
    p.add_argument("--config", type=Path, help="study JSON")
    p.add_argument("--n-freq", type=int)
    p.add_argument("--mu-pod", type=_floats)
    p.add_argument("--models", help="comma list of iROM,ROM")
    p.add_argument("--dt-eval", type=float)
    p.add_argument("--edge", type=float, help="override the mesh edge length")
    p.add_argument("--no-plots", action="store_true")
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("export", help="write one stored state as legacy VTK")
    _add_mesh_args(p)
    p.add_argument("--states", type=Path, required=True)
    p.add_argument("--column", type=int, default=-1)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(func=cmd_export)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args) or 0
    except (SbmRomError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
