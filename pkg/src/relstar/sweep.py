"""Sweep orchestration: bounded worker pool, per-job output directories,
hashed artifact manifest, deterministic reports."""

from __future__ import annotations

import csv
import hashlib
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig
from .fieldio import write_field
from .jsonio import dump_json17
from .params import PhysicalParams

__all__ = ["RunManifest", "run_sweep", "emit_plotdata", "worker_count", "SolverNotConverged"]


class SolverNotConverged(RuntimeError):
    """Any job failed to converge; maps to exit code 3."""


def worker_count() -> int:
    env = os.environ.get("RELSTAR_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


@dataclass
class RunManifest:
    config_echo: str
    version: str
    started: float
    finished: float
    jobs: list  # per-job dicts: id, params, status, artifacts {path: sha256}

    def as_dict(self) -> dict:
        return {
            "config_echo": self.config_echo,
            "version": self.version,
            "started": self.started,
            "finished": self.finished,
            "jobs": self.jobs,
        }


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _job_params(base: PhysicalParams, overrides: dict) -> PhysicalParams:
    kwargs = {}
    if "kappa" in overrides:
        kwargs["kappa"] = overrides["kappa"]
    if "theta" in overrides:
        kwargs["theta"] = overrides["theta"]
    if "lambda" in overrides:
        kwargs["total_mass"] = overrides["lambda"]
    if "n" in overrides:
        kwargs["particle_number"] = int(overrides["n"])
    return replace(base, **kwargs)


def _run_hf_job(params, config: RunConfig, outdir: Path, seed: int) -> dict:
    from .hf import HFSolveConfig, minimize_hf

    solver = config.solver
    hf_config = HFSolveConfig(
        max_outer_iterations=int(solver.get("max_iter", 600)),
        gradient_tolerance=float(solver.get("tol", 1e-6)),
        initializer=solver.get("init", "gaussian_stack"),
        seed=seed,
    )
    report = minimize_hf(params, config.grid, hf_config)
    payload = report.energy.to_json_dict(params)
    payload.update(
        {
            "multipliers": list(map(float, report.multipliers)),
            "converged": report.converged,
            "gradient_norm": report.gradient_norm,
            "iterations": report.iterations,
            "supercritical_flag": report.supercritical_flag,
            "in_box": report.in_box,
            "tail_fraction": report.tail_fraction,
            "seed": seed,
        }
    )
    dump_json17(payload, outdir / "report.json")
    with open(outdir / "trajectory.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "energy"])
        for i, e in enumerate(report.energy_trajectory):
            writer.writerow([i, format(e, ".17g")])
    for j, orb in enumerate(report.orbital_set.orbitals):
        write_field(outdir / f"orbital_{j}.rsf1", orb, config.grid.box_length)
    return {"converged": report.converged, "kind": "hf"}


def _run_hfb_job(params, config: RunConfig, outdir: Path, seed: int) -> dict:
    from .hfb import HFBSolveConfig, basis_from_onebody, build_basis_integrals, solve_hfb

    solver = config.solver
    basis_size = int(solver.get("basis_size", 12))
    basis = basis_from_onebody(params, config.grid, basis_size, seed=seed)
    integrals = build_basis_integrals(basis, params)
    hfb_config = HFBSolveConfig(
        pairing=solver.get("pairing", "on") != "off", seed=seed,
        max_scf_iterations=int(solver.get("max_iter", 400)),
    )
    report = solve_hfb(params, integrals, hfb_config)
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
            "iterations": report.iterations,
            "basis_size": basis_size,
            "seed": seed,
        }
    )
    dump_json17(payload, outdir / "report.json")
    return {"converged": report.converged, "kind": "hfb"}


def _run_tauc_job(params, config: RunConfig, outdir: Path, seed: int) -> dict:
    from .chandrasekhar import minimize_tf

    solver = config.solver
    report = minimize_tf(
        initializer=solver.get("init", "gaussian"),
        iterations=int(solver.get("iterations", 20000)),
    )
    dump_json17(
        {
            "tau_estimate": report.tau_estimate,
            "converged": report.converged,
            "el_residual": report.el_residual,
        },
        outdir / "report.json",
    )
    with open(outdir / "profile.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r", "f"])
        for r, v in zip(report.density.radii, report.density.values):
            writer.writerow([format(r, ".17g"), format(v, ".17g")])
    return {"converged": report.converged, "kind": "tauc"}


def _run_beta_job(params, config: RunConfig, outdir: Path, seed: int) -> dict:
    from .onebody import beta_sweep_rows

    thetas_text = config.solver.get("thetas", "0 0.05 0.1")
    thetas = [float(t) for t in thetas_text.replace(",", " ").split()]
    rows = beta_sweep_rows(params.m, [params.kappa], thetas, config.grid, seed=seed)
    with open(outdir / "beta.csv", "w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["theta", "kappa", "m", "beta_theta", "residual", "iterations"]
        )
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (format(v, ".17g") if isinstance(v, float) else v)
                             for k, v in row.items()})
    converged = all(r["residual"] <= 1e-5 for r in rows)
    dump_json17({"rows": rows, "converged": converged}, outdir / "report.json")
    return {"converged": converged, "kind": "beta"}


_RUNNERS = {"hf": _run_hf_job, "hfb": _run_hfb_job, "tauc": _run_tauc_job, "beta": _run_beta_job}


def run_sweep(config: RunConfig, force: bool = False) -> RunManifest:
    from .config import emit_config

    if config.problem not in _RUNNERS:
        raise ConfigError(f"problem {config.problem!r} is not sweepable")
    outdir = Path(config.output_dir)
    if outdir.exists() and any(outdir.iterdir()) and not force:
        raise OSError(f"output dir {outdir} is not empty; pass --force to reuse")
    outdir.mkdir(parents=True, exist_ok=True)

    jobs = config.sweep_jobs()
    started = time.time()
    results = [None] * len(jobs)

    def run_one(idx: int) -> dict:
        overrides = jobs[idx]
        job_dir = outdir / f"job_{idx:04d}"
        job_dir.mkdir(parents=True, exist_ok=True)
        job_seed = config.seed + idx  # stable per-job seed, independent of ordering
        try:
            params = _job_params(config.physics, overrides) if config.physics else None
            status = _RUNNERS[config.problem](params, config, job_dir, job_seed)
            ok = True
        except Exception as exc:  # isolate per-job failures
            status = {"error": f"{type(exc).__name__}: {exc}", "converged": False}
            ok = False
        artifacts = {
            str(p.relative_to(outdir)): _sha256(p) for p in sorted(job_dir.iterdir())
        }
        return {
            "id": idx,
            "overrides": overrides,
            "seed": job_seed,
            "status": "ok" if ok else "failed",
            "converged": bool(status.get("converged", False)),
            "artifacts": artifacts,
        }

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        for idx, row in zip(range(len(jobs)), pool.map(run_one, range(len(jobs)))):
            results[idx] = row

    manifest = RunManifest(
        config_echo=emit_config(config),
        version=__version__,
        started=started,
        finished=time.time(),
        jobs=results,
    )
    dump_json17(manifest.as_dict(), outdir / "manifest.json")
    return manifest


def verify_manifest(manifest_path) -> bool:
    import json

    base = Path(manifest_path).parent
    with open(manifest_path) as fh:
        data = json.load(fh)
    for job in data["jobs"]:
        for rel, digest in job["artifacts"].items():
            p = base / rel
            if not p.exists() or _sha256(p) != digest:
                return False
    return True


PLOT_KINDS = ("energy_vs_kappa", "beta_vs_theta", "decay_tail", "scaling_curve")


def emit_plotdata(manifest_path, kind: str, out_path=None) -> Path:
    import json

    if kind not in PLOT_KINDS:
        raise ConfigError(f"unknown plot kind {kind!r}; expected one of {PLOT_KINDS}")
    base = Path(manifest_path).parent
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    out_path = Path(out_path) if out_path else base / f"{kind}.csv"

    rows = []
    if kind == "energy_vs_kappa":
        for job in manifest["jobs"]:
            report_rel = next((a for a in job["artifacts"] if a.endswith("report.json")), None)
            if report_rel is None:
                continue
            with open(base / report_rel) as fh:
                rep = json.load(fh)
            rows.append(
                [rep.get("kappa"), rep.get("total"), rep.get("kinetic"),
                 rep.get("direct"), rep.get("exchange"), rep.get("converged")]
            )
        header = ["kappa", "total", "kinetic", "direct", "exchange", "converged"]
    elif kind == "beta_vs_theta":
        for job in manifest["jobs"]:
            beta_rel = next((a for a in job["artifacts"] if a.endswith("beta.csv")), None)
            if beta_rel is None:
                continue
            with open(base / beta_rel) as fh:
                for rec in csv.DictReader(fh):
                    rows.append([rec["theta"], rec["kappa"], rec["beta_theta"]])
        header = ["theta", "kappa", "beta_theta"]
    elif kind == "scaling_curve":
        for job in manifest["jobs"]:
            curve_rel = next((a for a in job["artifacts"] if a.endswith("scaling.csv")), None)
            if curve_rel is None:
                continue
            with open(base / curve_rel) as fh:
                for rec in csv.DictReader(fh):
                    rows.append([rec["t"], rec["energy"]])
        header = ["t", "energy"]
    else:  # decay_tail
        for job in manifest["jobs"]:
            tail_rel = next((a for a in job["artifacts"] if a.endswith("decay.csv")), None)
            if tail_rel is None:
                continue
            with open(base / tail_rel) as fh:
                for rec in csv.DictReader(fh):
                    rows.append([rec["R"], rec["shell_mass"], rec["log_shell_mass"]])
        header = ["R", "shell_mass", "log_shell_mass"]

    if not rows:
        raise ConfigError(f"manifest has no artifacts for plot kind {kind!r}")
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return out_path
