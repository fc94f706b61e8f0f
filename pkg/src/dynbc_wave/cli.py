"""Command-line entry point ``dynbc-wave``.

Exit codes: 0 success, 1 selftest failure, 2 configuration error,
3 numerical breakdown, 4 inconclusive verdict.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import assemble, write_triplets
from .config import (
    ConfigError,
    build_initial,
    build_mesh,
    build_spec,
    parse_config,
    sweep_grid,
)
from .energy import EnergySample
from .harness import (
    BLOWUP,
    ENERGY_NORM_THRESHOLD,
    GLOBAL,
    INCONCLUSIVE,
    SOURCE_NORM_THRESHOLD,
    NegativeEnergyFailure,
    _blowup_verdict,
    sweep,
    sweep_table,
)
from .mesh import (
    InvalidParameterError,
    MeshFormatError,
    generate_annulus,
    generate_interval,
    generate_rectangle,
    read_mesh_csv,
    write_mesh_csv,
)
from .regime import GlobalCertificate, classify
from .stepper import REACHED_T_END, RESOLVENT_BREAKDOWN, Stepper

EXIT_OK = 0
EXIT_SELFTEST = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INCONCLUSIVE = 4


def format_float(x) -> str:
    """Shortest round-trip decimal (Python ``repr``); ints pass through."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path: Path, header, rows) -> None:
    out = [",".join(header)]
    out += [",".join(c if isinstance(c, str) else format_float(c) for c in r) for r in rows]
    path.write_text("\n".join(out) + "\n")


def _load(args):
    if not args.config:
        raise ConfigError([(0, "--config is required for this command")])
    return parse_config(args.config)


def _out_dir(args, cfg=None) -> Path:
    d = Path(args.out) if args.out else Path(cfg.get("output", "directory") if cfg else ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_manifest(out: Path, cfg_text: str, jobs: int, t0: float, extra: dict) -> None:
    man = {
        "config_sha256": hashlib.sha256(cfg_text.encode()).hexdigest(),
        "version": __version__,
        "threads": jobs,
        "wall_time_s": round(time.perf_counter() - t0, 6),
        **extra,
    }
    (out / "manifest.json").write_text(json.dumps(man, indent=2, sort_keys=True) + "\n")


# -- subcommands ----------------------------------------------------------------
def cmd_mesh(args) -> int:
    if args.read:
        mesh = read_mesh_csv(args.read)
    elif args.config:
        mesh = build_mesh(_load(args))
    elif args.geometry == "interval":
        mesh = generate_interval(args.L, args.n)
    elif args.geometry == "annulus":
        mesh = generate_annulus(args.r0, args.r1, args.nr, args.nt)
    elif args.geometry == "rectangle":
        mesh = generate_rectangle(args.Lx, args.Ly, args.nx, args.ny, args.side)
    else:
        raise ConfigError([(0, "give a geometry, --config or --read")])
    out = _out_dir(args)
    write_mesh_csv(mesh, out / "mesh.csv")
    if args.operators:
        ops = assemble(mesh)
        write_triplets(ops.M, out / "mass.csv")
        write_triplets(ops.K, out / "stiffness.csv")
    print(
        f"mesh: dim={mesh.dim} nodes={mesh.n_nodes} elements={len(mesh.elements)} "
        f"dirichlet={len(mesh.dirichlet_nodes)} gamma1_nodes={len(mesh.gamma1_nodes)} -> {out / 'mesh.csv'}"
    )
    return EXIT_OK


def cmd_classify(args) -> int:
    cfg = _load(args)
    spec = build_spec(cfg)
    if cfg.has("initial"):
        ops = assemble(build_mesh(cfg))
        u0, v0 = build_initial(cfg, ops, spec)
        report = classify(spec, ops, u0, v0)
    else:
        report = classify(spec)
    print(report.to_text())
    print()
    print(report.to_machine())
    return EXIT_OK


def cmd_run(args) -> int:
    t0 = time.perf_counter()
    cfg = _load(args)
    mesh = build_mesh(cfg)
    ops = assemble(mesh)
    spec = build_spec(cfg)
    u0, v0 = build_initial(cfg, ops, spec)
    report = classify(spec, ops, u0, v0)
    cert = report.global_ if isinstance(report.global_, GlobalCertificate) else None
    out = _out_dir(args, cfg)
    traj = Stepper(ops, spec, cfg.stepper).integrate(
        u0, v0, cfg.t_end,
        sample_every=cfg.get("output", "sample_every"),
        snapshot_every=cfg.get("output", "snapshot_every"),
        cert=cert,
    )
    write_csv(out / "trajectory.csv", EnergySample.columns(), [s.row() for s in traj.samples])
    if traj.snapshots:
        snap = out / "snapshots"
        snap.mkdir(exist_ok=True)
        X = mesh.nodes
        coords = ["x", "y"][: mesh.dim]
        for k, (t, u, v) in enumerate(traj.snapshots):
            U, V = ops.extend(u), ops.extend(v)
            rows = [[i, *X[i], U[i], V[i]] for i in range(mesh.n_nodes)]
            write_csv(snap / f"snapshot_{k:05d}.csv", ["node", *coords, "u", "v"], rows)
        write_csv(snap / "times.csv", ["index", "t"], [[k, s[0]] for k, s in enumerate(traj.snapshots)])

    st = traj.status
    if st.kind == RESOLVENT_BREAKDOWN:
        verdict, reason, code = INCONCLUSIVE, st.message, EXIT_NUMERICAL
    elif st.kind == REACHED_T_END:
        verdict, reason, code = GLOBAL, "", EXIT_OK
        if report.label == "blowup-certified" and report.energy0 is not None and report.energy0 < 0:
            verdict, reason, code = INCONCLUSIVE, "window too short or thresholds unmet", EXIT_INCONCLUSIVE
    else:
        v = _blowup_verdict(ops, spec, traj, ENERGY_NORM_THRESHOLD, SOURCE_NORM_THRESHOLD)
        verdict, reason = v.kind, v.reason
        code = EXIT_OK if v.kind == BLOWUP else EXIT_INCONCLUSIVE
    _write_manifest(out, cfg.source_text, args.jobs, t0, {
        "status": st.kind,
        "t_final": st.t_final,
        "verdict": verdict,
        "regime": report.label,
        "steps": len(traj.step_t) - 1,
        "rejected_steps": traj.n_rejected,
    })
    line = f"status={st.kind} t_final={format_float(st.t_final)} verdict={verdict} regime={report.label}"
    print(line + (f" reason={reason}" if reason else ""))
    return code


def cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    cfg = _load(args)
    grid = sweep_grid(cfg)
    jobs = args.jobs if args.jobs_given else cfg.get("sweep", "jobs")
    rows = sweep(grid, jobs=jobs)
    header, body = sweep_table(rows)
    out = _out_dir(args, cfg)
    write_csv(out / "sweep.csv", header, body)
    kinds = [r.verdict.kind for r in rows]
    _write_manifest(out, cfg.source_text, jobs, t0, {
        "rows": len(rows),
        "verdicts": {k: kinds.count(k) for k in sorted(set(kinds))},
    })
    print(f"sweep: {len(rows)} rows -> {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    """Randomized spot checks of monotonicity, resolvent and gradient identities."""
    from .energy import potential_J
    from .nonlin import PowerSum, ProblemSpec, damping_force, source_force
    from .stepper import solve_resolvent

    rng = np.random.default_rng(args.seed)
    ops = assemble(generate_interval(1.0, 20))
    cub = PowerSum.damping((1.0, 3.0), (0.5, 1.5))
    spec = ProblemSpec(P=cub, Q=cub, f=PowerSum.source((1.0, 4.0)), g=PowerSum.source((2.0, 3.0)))
    ok = True

    v, w = rng.normal(size=(2, ops.n))
    mono = (damping_force(ops, spec, v) - damping_force(ops, spec, w)) @ (v - w)
    ok &= _report("damping monotone", mono >= 0)

    rhs = rng.normal(size=ops.n)
    sol = solve_resolvent(ops, spec, rhs, np.zeros(ops.n), 10.0)
    sol2 = solve_resolvent(ops, spec, rhs, np.zeros(ops.n), 10.0, v_init=rng.normal(size=ops.n))
    ok &= _report("resolvent unique", np.max(np.abs(sol.v - sol2.v)) <= 1e-8)

    u = rng.normal(size=ops.n)
    i, h = int(rng.integers(ops.n)), 1e-5
    e = np.zeros(ops.n)
    e[i] = h
    fd = (potential_J(ops, spec, u + e) - potential_J(ops, spec, u - e)) / (2 * h)
    g = source_force(ops, spec, u)[i]
    ok &= _report("source gradient", abs(fd - g) <= 1e-6 * max(1.0, abs(g)))
    return EXIT_OK if ok else EXIT_SELFTEST


def _report(name: str, passed) -> bool:
    print(f"{'pass' if passed else 'FAIL'}  {name}")
    return bool(passed)


def _common(suppress: bool) -> argparse.ArgumentParser:
    # Subcommand copies use SUPPRESS so they do not overwrite flags given
    # before the subcommand name.
    d = (lambda x: argparse.SUPPRESS) if suppress else (lambda x: x)
    c = argparse.ArgumentParser(add_help=False)
    c.add_argument("--config", default=d(None), help="run configuration file")
    c.add_argument("--out", default=d(None), help="output directory")
    c.add_argument("--jobs", type=int, default=d(None), help="worker processes for sweeps")
    c.add_argument("--seed", type=int, default=d(0), help="seed for selftest")
    return c


def build_parser() -> argparse.ArgumentParser:
    common = _common(suppress=True)
    p = argparse.ArgumentParser(prog="dynbc-wave", parents=[_common(suppress=False)],
                                description="Wave equation with dynamic boundary conditions: simulate and classify.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="{mesh,classify,run,sweep}")

    m = sub.add_parser("mesh", parents=[common], help="generate or convert a mesh")
    m.add_argument("geometry", nargs="?", choices=["interval", "annulus", "rectangle"])
    m.add_argument("--L", type=float, default=1.0)
    m.add_argument("--n", type=int, default=100)
    m.add_argument("--r0", type=float, default=0.3)
    m.add_argument("--r1", type=float, default=1.0)
    m.add_argument("--nr", type=int, default=16)
    m.add_argument("--nt", type=int, default=64)
    m.add_argument("--Lx", type=float, default=1.0)
    m.add_argument("--Ly", type=float, default=1.0)
    m.add_argument("--nx", type=int, default=8)
    m.add_argument("--ny", type=int, default=8)
    m.add_argument("--side", default="top")
    m.add_argument("--read", help="re-read a mesh CSV and write it back (round trip)")
    m.add_argument("--operators", action="store_true", help="also write mass/stiffness triplets")
    m.set_defaults(func=cmd_mesh)

    for name, func, hlp in (
        ("classify", cmd_classify, "print the regime report"),
        ("run", cmd_run, "integrate one scenario"),
        ("sweep", cmd_sweep, "run a parameter grid"),
    ):
        s = sub.add_parser(name, parents=[common], help=hlp)
        s.set_defaults(func=func)
    s = sub.add_parser("selftest", parents=[common])
    s.set_defaults(func=cmd_selftest)
    # Keep the hidden command out of the usage listing.
    sub._choices_actions = [a for a in sub._choices_actions if a.dest != "selftest"]
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "command", None):
        parser.print_help()
        return EXIT_CONFIG
    args.jobs_given = args.jobs is not None
    args.jobs = args.jobs if args.jobs is not None else 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvalidParameterError, MeshFormatError, NegativeEnergyFailure, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, ArithmeticError) as exc:
        print(f"numerical breakdown: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
