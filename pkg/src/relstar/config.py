"""Run configuration: strict key = value files with [section] headers.

Unknown keys are rejected, duplicates and syntax errors reported with line
numbers, and physics violations (kappa >= 4/pi for the coercive solvers)
refused at parse time.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from .grid import GridSpec
from .params import KAPPA_COERCIVE_BOUND, PhysicalParams

__all__ = ["ConfigError", "RunConfig", "parse_config", "emit_config"]

PROBLEMS = ("hf", "hfb", "tauc", "beta", "analyze")
# solvers whose admissibility theory needs Hardy-Kato coercivity
COERCIVE_PROBLEMS = ("hfb", "beta")

_SCHEMA = {
    "run": {"problem", "output_dir", "seed", "job_cap"},
    "physics": {"m", "kappa", "theta", "q", "n", "lambda"},
    "grid": {"points", "box"},
    "solver": {
        "max_iter", "tol", "mixing", "init", "basis_size", "basis_from",
        "pairing", "iterations", "step", "samples", "model", "radius",
        "radii", "thetas",
    },
    "sweep": {"kappa", "theta", "lambda", "n"},
}


class ConfigError(ValueError):
    """Configuration rejected; maps to exit code 2."""


@dataclass
class RunConfig:
    problem: str
    physics: PhysicalParams | None
    grid: GridSpec
    solver: dict
    sweep: dict
    output_dir: str
    seed: int
    job_cap: int = 256

    def sweep_jobs(self) -> list:
        """Cartesian product of the sweep axes as per-job physics overrides."""
        axes = [(k, v) for k, v in self.sweep.items() if v]
        jobs = [{}]
        for key, values in axes:
            jobs = [dict(j, **{key: val}) for j in jobs for val in values]
        if len(jobs) > self.job_cap:
            raise ConfigError(f"sweep size {len(jobs)} exceeds job cap {self.job_cap}")
        return jobs


def _float_list(text: str) -> list:
    return [float(tok) for tok in text.replace(",", " ").split()]


def parse_config(path) -> RunConfig:
    parser = configparser.ConfigParser(
        delimiters=("=",), inline_comment_prefixes=("#",), strict=True,
        interpolation=None,
    )
    try:
        with open(path) as fh:
            parser.read_file(fh, source=str(path))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: duplicate key {exc.option!r}")
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: duplicate section {exc.section!r}")
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else "?"
        raise ConfigError(f"{path}:{lineno}: malformed config syntax")

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        unknown = set(parser[section]) - _SCHEMA[section]
        if unknown:
            raise ConfigError(
                f"{path}: unknown key(s) {sorted(unknown)} in section [{section}]"
            )

    run = parser["run"] if parser.has_section("run") else {}
    problem = run.get("problem", "hf")
    if problem not in PROBLEMS:
        raise ConfigError(f"{path}: unknown problem {problem!r}; expected one of {PROBLEMS}")
    output_dir = run.get("output_dir", "out")
    seed = int(run.get("seed", 0))
    job_cap = int(run.get("job_cap", 256))

    phys = parser["physics"] if parser.has_section("physics") else {}
    m = float(phys.get("m", 1.0))
    kappa = float(phys.get("kappa", 0.5))
    theta = float(phys.get("theta", 0.0))
    q = int(phys.get("q", 1))
    n = phys.get("n")
    lam = phys.get("lambda")

    if problem in COERCIVE_PROBLEMS and kappa >= KAPPA_COERCIVE_BOUND:
        raise ConfigError(
            f"{path}: kappa = {kappa} rejected for problem '{problem}': the coercive "
            f"regime requires kappa < 4/pi = {KAPPA_COERCIVE_BOUND:.6f}"
        )

    physics = None
    if problem in ("hf", "hfb", "beta"):
        try:
            if problem == "hfb":
                physics = PhysicalParams(
                    m=m, kappa=kappa, theta=theta, q=q,
                    total_mass=float(lam) if lam is not None else 2.5,
                )
            else:
                physics = PhysicalParams(
                    m=m, kappa=kappa, theta=theta, q=q,
                    particle_number=int(n) if n is not None else 1,
                )
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}")

    gsec = parser["grid"] if parser.has_section("grid") else {}
    points = int(gsec.get("points", 32))
    box_default = 40.0 / m if m > 0 else 40.0
    box = float(gsec.get("box", box_default))
    try:
        grid = GridSpec(points, box)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}")

    solver = dict(parser["solver"]) if parser.has_section("solver") else {}

    sweep = {}
    if parser.has_section("sweep"):
        for key, text in parser["sweep"].items():
            sweep[key] = _float_list(text)

    return RunConfig(
        problem=problem, physics=physics, grid=grid, solver=solver,
        sweep=sweep, output_dir=output_dir, seed=seed, job_cap=job_cap,
    )


def emit_config(config: RunConfig) -> str:
    """Inverse of parse_config for valid configs (round-trip property)."""
    lines = ["[run]", f"problem = {config.problem}",
             f"output_dir = {config.output_dir}", f"seed = {config.seed}",
             f"job_cap = {config.job_cap}", "", "[physics]"]
    if config.physics is not None:
        p = config.physics
        lines += [f"m = {p.m!r}", f"kappa = {p.kappa!r}", f"theta = {p.theta!r}",
                  f"q = {p.q}"]
        if p.particle_number is not None:
            lines.append(f"n = {p.particle_number}")
        if p.total_mass is not None:
            lines.append(f"lambda = {p.total_mass!r}")
    lines += ["", "[grid]", f"points = {config.grid.points_per_axis}",
              f"box = {config.grid.box_length!r}"]
    if config.solver:
        lines += ["", "[solver]"]
        lines += [f"{k} = {v}" for k, v in config.solver.items()]
    if config.sweep:
        lines += ["", "[sweep]"]
        lines += [f"{k} = {' '.join(repr(x) for x in v)}" for k, v in config.sweep.items()]
    return "\n".join(lines) + "\n"
