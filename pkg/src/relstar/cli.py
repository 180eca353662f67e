"""Command-line entry point.

Subcommands: hf solve, hfb solve, tauc, beta sweep, analyze {decay|shell|hk},
sweep run <config>, plot <manifest> <kind>.

Exit codes: 0 success, 2 config error, 3 solver non-convergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, parse_config
from .grid import GridSpec
from .jsonio import dump_json17
from .params import PhysicalParams
from .sweep import SolverNotConverged, emit_plotdata, run_sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3
EXIT_IO = 4


def _add_physics_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--m", type=float, default=1.0)
    p.add_argument("--kappa", type=float, default=0.5)
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--grid", type=int, default=32, help="points per axis")
    p.add_argument("--box", type=float, default=None, help="box length (default 40/m)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("out"))


def _grid_from(args) -> GridSpec:
    box = args.box if args.box is not None else 40.0 / max(args.m, 1e-12)
    return GridSpec(args.grid, box)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relstar")
    sub = parser.add_subparsers(dest="command", required=True)

    hf = sub.add_parser("hf").add_subparsers(dest="action", required=True)
    hf_solve = hf.add_parser("solve")
    _add_physics_flags(hf_solve)
    hf_solve.add_argument("--n", type=int, default=2)
    hf_solve.add_argument("--init", default="gaussian_stack")
    hf_solve.add_argument("--tol", type=float, default=1e-6)
    hf_solve.add_argument("--max-iter", type=int, default=600)

    hfb = sub.add_parser("hfb").add_subparsers(dest="action", required=True)
    hfb_solve = hfb.add_parser("solve")
    _add_physics_flags(hfb_solve)
    hfb_solve.add_argument("--lambda", dest="lam", type=float, default=2.5)
    hfb_solve.add_argument("--basis-size", type=int, default=12)
    hfb_solve.add_argument("--basis-from", choices=("kth", "hf"), default="kth")
    hfb_solve.add_argument("--pairing", choices=("on", "off"), default="on")

    tauc = sub.add_parser("tauc")
    tauc.add_argument("--init", default="gaussian")
    tauc.add_argument("--iterations", type=int, default=20000)
    tauc.add_argument("--out", type=Path, default=Path("out"))

    beta = sub.add_parser("beta").add_subparsers(dest="action", required=True)
    beta_sweep = beta.add_parser("sweep")
    _add_physics_flags(beta_sweep)
    beta_sweep.add_argument("--thetas", default="0,0.05,0.1")

    analyze = sub.add_parser("analyze").add_subparsers(dest="action", required=True)
    decay = analyze.add_parser("decay")
    decay.add_argument("--field", type=Path, required=True, help="RSF1 density file")
    decay.add_argument("--model", choices=("exponential", "power"), default="exponential")
    decay.add_argument("--out", type=Path, default=Path("out"))
    shell = analyze.add_parser("shell")
    _add_physics_flags(shell)
    shell.add_argument("--radius", type=float, default=None)
    shell.add_argument("--radii", default=None, help="comma-separated exterior radii")
    hk = analyze.add_parser("hk")
    _add_physics_flags(hk)
    hk.add_argument("--samples", type=int, default=20)

    sweep = sub.add_parser("sweep").add_subparsers(dest="action", required=True)
    sweep_run = sweep.add_parser("run")
    sweep_run.add_argument("config", type=Path)
    sweep_run.add_argument("--force", action="store_true")

    plot = sub.add_parser("plot")
    plot.add_argument("manifest", type=Path)
    plot.add_argument("kind", choices=("energy_vs_kappa", "beta_vs_theta", "decay_tail", "scaling_curve"))
    plot.add_argument("--out", type=Path, default=None)

    return parser


# ---------------------------------------------------------------------------
# command handlers
# ---------------------------------------------------------------------------


def _cmd_hf_solve(args) -> int:
    from .fieldio import write_field
    from .hf import HFSolveConfig, minimize_hf

    params = PhysicalParams(m=args.m, kappa=args.kappa, theta=args.theta,
                            particle_number=args.n)
    grid = _grid_from(args)
    config = HFSolveConfig(
        max_outer_iterations=args.max_iter, gradient_tolerance=args.tol,
        initializer=args.init, seed=args.seed,
    )
    report = minimize_hf(params, grid, config)
    args.out.mkdir(parents=True, exist_ok=True)
    payload = report.energy.to_json_dict(params)
    payload.update(
        {
            "multipliers": list(map(float, report.multipliers)),
            "converged": report.converged,
            "gradient_norm": report.gradient_norm,
            "iterations": report.iterations,
            "supercritical_flag": report.supercritical_flag,
            "in_box": report.in_box,
            "seed": args.seed,
        }
    )
    dump_json17(payload, args.out / "report.json")
    with open(args.out / "trajectory.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "energy"])
        for i, e in enumerate(report.energy_trajectory):
            writer.writerow([i, format(e, ".17g")])
    for j, orb in enumerate(report.orbital_set.orbitals):
        write_field(args.out / f"orbital_{j}.rsf1", orb, grid.box_length)
    print(f"hf solve: total = {report.energy.total:.10g}, converged = {report.converged}")
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def _cmd_hfb_solve(args) -> int:
    from .hfb import (
        HFBSolveConfig,
        basis_from_hf,
        basis_from_onebody,
        build_basis_integrals,
        solve_hfb,
    )

    params = PhysicalParams(m=args.m, kappa=args.kappa, theta=args.theta,
                            total_mass=args.lam)
    params.require_coercive()
    grid = _grid_from(args)
    if args.basis_from == "kth":
        basis = basis_from_onebody(params, grid, args.basis_size, seed=args.seed)
    else:
        from .hf import HFSolveConfig, minimize_hf

        n = max(2, int(round(args.lam)))
        hf_report = minimize_hf(
            PhysicalParams(m=args.m, kappa=args.kappa, theta=args.theta, particle_number=n),
            grid, HFSolveConfig(seed=args.seed),
        )
        basis = basis_from_hf(hf_report, params, grid, args.basis_size, seed=args.seed)
    integrals = build_basis_integrals(basis, params)
    report = solve_hfb(params, integrals, HFBSolveConfig(pairing=args.pairing == "on", seed=args.seed))
    args.out.mkdir(parents=True, exist_ok=True)
    payload = report.energy.to_json_dict(params)
    payload.update(
        {
            "mu_theta": report.mu_theta,
            "pairing_norm": report.pairing_norm,
            "scf_residual": report.scf_residual,
            "trace_gamma": report.trace_gamma,
            "constraint_violation": report.state.constraint_violation(),
            "converged": report.converged,
            "fractional_fill": report.fractional_fill,
            "seed": args.seed,
        }
    )
    dump_json17(payload, args.out / "report.json")
    print(f"hfb solve: total = {report.energy.total:.10g}, mu = {report.mu_theta:.6g}, "
          f"converged = {report.converged}")
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def _cmd_tauc(args) -> int:
    from .chandrasekhar import minimize_tf

    report = minimize_tf(initializer=args.init, iterations=args.iterations)
    args.out.mkdir(parents=True, exist_ok=True)
    dump_json17(
        {"tau_estimate": report.tau_estimate, "converged": report.converged,
         "el_residual": report.el_residual},
        args.out / "report.json",
    )
    with open(args.out / "profile.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r", "f"])
        for r, v in zip(report.density.radii, report.density.values):
            writer.writerow([format(r, ".17g"), format(v, ".17g")])
    print(f"tau_c estimate = {report.tau_estimate:.6f}")
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def _cmd_beta_sweep(args) -> int:
    from .onebody import beta_sweep_rows

    grid = _grid_from(args)
    thetas = [float(t) for t in args.thetas.replace(",", " ").split()]
    rows = beta_sweep_rows(args.m, [args.kappa], thetas, grid, seed=args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "beta.csv", "w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["theta", "kappa", "m", "beta_theta", "residual", "iterations"]
        )
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (format(v, ".17g") if isinstance(v, float) else v)
                             for k, v in row.items()})
    for row in rows:
        print(f"theta = {row['theta']}: beta = {row['beta_theta']:.8f}")
    return EXIT_OK


def _cmd_analyze_decay(args) -> int:
    from .analysis import fit_decay
    from .fieldio import read_field

    values, box_length = read_field(args.field)
    grid = GridSpec(values.shape[0], box_length)
    fit = fit_decay(np.abs(values), grid, args.model)
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "decay.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["R", "shell_mass", "log_shell_mass"])
        for r, mass in zip(fit.radii, fit.shell_masses):
            writer.writerow([format(r, ".17g"), format(mass, ".17g"),
                             format(np.log(mass), ".17g")])
    dump_json17(
        {"model": fit.model, "rate_or_exponent": fit.rate_or_exponent,
         "r_squared": fit.r_squared, "window": list(fit.window)},
        args.out / "report.json",
    )
    print(f"{fit.model} fit: value = {fit.rate_or_exponent:.6g}, R^2 = {fit.r_squared:.6f}")
    return EXIT_OK


def _cmd_analyze_shell(args) -> int:
    from .analysis import shell_check

    grid = _grid_from(args)
    L = grid.box_length
    radius = args.radius if args.radius is not None else L / 10.0
    theta = args.theta if args.theta > 0 else 1.0
    if args.radii:
        radii = [float(t) for t in args.radii.replace(",", " ").split()]
    else:
        radii = list(np.linspace(radius + 4 * grid.spacing, L / 4.0, 4))
    report = shell_check(radius, theta, grid, radii)
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "shell.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["radius", "numeric", "closed_form"])
        for r, lhs, rhs in zip(report.exterior_radii, report.lhs, report.rhs):
            writer.writerow([format(r, ".17g"), format(lhs, ".17g"), format(rhs, ".17g")])
    print(f"shell check: max relative error = {report.max_relative_error:.3e}")
    return EXIT_OK


def _cmd_analyze_hk(args) -> int:
    from .analysis import hardy_kato_audit

    grid = _grid_from(args)
    worst = hardy_kato_audit(args.samples, grid, args.theta, seed=args.seed)
    print(f"Hardy-Kato audit: worst ratio = {worst:.6f} (bound pi/2 = {np.pi/2:.6f})")
    return EXIT_OK


def _cmd_sweep_run(args) -> int:
    config = parse_config(args.config)
    manifest = run_sweep(config, force=args.force)
    failed = [j for j in manifest.jobs if j["status"] != "ok" or not j["converged"]]
    print(f"sweep: {len(manifest.jobs)} jobs, {len(manifest.jobs) - len(failed)} converged")
    return EXIT_NOT_CONVERGED if failed else EXIT_OK


def _cmd_plot(args) -> int:
    path = emit_plotdata(args.manifest, args.kind, args.out)
    print(f"wrote {path}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "hf":
            return _cmd_hf_solve(args)
        if args.command == "hfb":
            return _cmd_hfb_solve(args)
        if args.command == "tauc":
            return _cmd_tauc(args)
        if args.command == "beta":
            return _cmd_beta_sweep(args)
        if args.command == "analyze":
            handler = {
                "decay": _cmd_analyze_decay,
                "shell": _cmd_analyze_shell,
                "hk": _cmd_analyze_hk,
            }[args.action]
            return handler(args)
        if args.command == "sweep":
            return _cmd_sweep_run(args)
        if args.command == "plot":
            return _cmd_plot(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverNotConverged as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
