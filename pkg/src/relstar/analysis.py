"""Post-hoc verification instruments: density tail fits, the Yukawa shell
theorem check, the Hardy-Kato inequality audit, and theta-sweep monotonicity
tables."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import GridSpec, convolve_interaction, convolve_yukawa, expectation_multiplier, gaussian_field, integrate, sqrt_lap_multiplier

__all__ = [
    "DecayFit",
    "ShellCheckReport",
    "fit_decay",
    "shell_check",
    "hardy_kato_audit",
    "theta_sensitivity",
]

TAIL_FLOOR = 1e-14


@dataclass
class DecayFit:
    radii: np.ndarray
    shell_masses: np.ndarray
    model: str  # 'exponential' | 'power'
    rate_or_exponent: float
    r_squared: float
    window: tuple


def _shell_masses(rho: np.ndarray, grid: GridSpec, radii: np.ndarray) -> np.ndarray:
    """Tail masses integral_{|x| >= R} rho for each R (binned grid cells)."""
    r = grid.radius().ravel()
    vals = rho.ravel()
    order = np.argsort(r)
    r_sorted = r[order]
    csum = np.cumsum(vals[order][::-1])[::-1] * grid.volume_element
    idx = np.searchsorted(r_sorted, radii, side="left")
    idx = np.minimum(idx, r_sorted.size - 1)
    return csum[idx]


def fit_decay(rho: np.ndarray, grid: GridSpec, model: str, window: tuple | None = None) -> DecayFit:
    """Least-squares tail fit over the window [box/8, box/4].

    exponential: log(shell mass) - 2 log(R) = a - rate * R
                 (the 2 log R term absorbs the r^2 volume factor of an
                 exponentially decaying density's tail mass)
    power:       log(shell mass) = a - slope * log(R), exponent = 3 + slope
                 so a rho ~ r^{-p} density reports p.
    """
    if model not in ("exponential", "power"):
        raise ValueError(f"unknown decay model {model!r}")
    if np.any(rho < -1e-12):
        raise ValueError("density must be >= 0")
    L = grid.box_length
    window = window or (L / 8.0, L / 4.0)
    if window[0] < L / 8.0 - 1e-9 or window[1] > L / 4.0 + 1e-9:
        raise ValueError("fit window must lie inside [box/8, box/4]")
    radii = np.arange(window[0], window[1] + 0.5 * grid.spacing, grid.spacing)
    masses = _shell_masses(rho, grid, radii)
    if masses.min() <= TAIL_FLOOR * max(rho.sum() * grid.volume_element, 1.0):
        raise ValueError("tail mass at the numerical floor; fit refused")

    log_mass = np.log(masses)
    if model == "exponential":
        y = log_mass - 2.0 * np.log(radii)
        x = radii
        slope, intercept = np.polyfit(x, y, 1)
        value = -slope
    else:
        y = log_mass
        x = np.log(radii)
        slope, intercept = np.polyfit(x, y, 1)
        value = 3.0 - slope
    fitted = slope * x + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(radii, masses, model, float(value), r2, window)


@dataclass
class ShellCheckReport:
    descriptor: str
    exterior_radii: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    max_relative_error: float


def _smoothed_ball(grid: GridSpec, radius: float, width: float) -> np.ndarray:
    from scipy.special import erfc

    r = grid.radius()
    return 0.5 * erfc((r - radius) / width)


def shell_check(
    radius: float,
    theta: float,
    grid: GridSpec,
    exterior_radii,
    smoothing_width: float | None = None,
) -> ShellCheckReport:
    """Yukawa shell theorem: outside a radial source psi,

        (W_theta * psi)(x) = e^{-theta |x|}/(theta |x|)
                             * integral psi(y) sinh(theta |y|)/|y| dy.

    The numeric side is the 3-d spectral convolution; the closed form is
    evaluated by radial quadrature of the same smoothed-ball profile.
    """
    if theta <= 0:
        raise ValueError("the shell identity needs theta > 0")
    exterior_radii = np.asarray(list(exterior_radii), dtype=float)
    h = grid.spacing
    if np.any(exterior_radii <= radius + 3.0 * h):
        raise ValueError("exterior radii must exceed the source radius + 3 spacings")
    if np.any(exterior_radii > grid.box_length / 4.0):
        raise ValueError("exterior radius beyond box_length/4 (wrap-around contamination)")
    width = smoothing_width if smoothing_width is not None else 2.0 * h

    psi = _smoothed_ball(grid, radius, width)
    numeric = convolve_yukawa(psi, theta, grid)

    # effective source strength from 1-d quadrature of the same profile
    from scipy.special import erfc

    r_fine = np.linspace(1e-9, radius + 10.0 * width, 8000)
    profile = 0.5 * erfc((r_fine - radius) / width)
    strength = 4.0 * np.pi * np.trapezoid(r_fine * np.sinh(theta * r_fine) * profile, r_fine)

    r_grid = grid.radius()
    lhs_vals, rhs_vals, rel = [], [], []
    for R in exterior_radii:
        band = np.abs(r_grid - R) <= 0.5 * h
        pts_r = r_grid[band]
        pts_num = numeric[band]
        closed = np.exp(-theta * pts_r) / (theta * pts_r) * strength
        err = np.abs(pts_num - closed) / np.abs(closed)
        lhs_vals.append(float(pts_num.mean()))
        rhs_vals.append(float(closed.mean()))
        rel.append(float(err.max()))
    return ShellCheckReport(
        descriptor=f"smoothed ball radius={radius} width={width}",
        exterior_radii=exterior_radii,
        lhs=np.asarray(lhs_vals),
        rhs=np.asarray(rhs_vals),
        max_relative_error=float(max(rel)),
    )


def hardy_kato_audit(samples: int, grid: GridSpec, theta: float, seed: int = 0) -> float:
    """Worst ratio <psi, W_theta(. - y) psi> / <psi, sqrt(-Lap) psi> over
    random localized psi centered at grid points; bounded by pi/2."""
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    mult = sqrt_lap_multiplier(grid)
    h = grid.spacing
    n = grid.points_per_axis
    c = grid.center_index
    worst = 0.0
    for _ in range(samples):
        width = rng.uniform(1.5 * h, grid.box_length / 10.0)
        offset_idx = rng.integers(-n // 8, n // 8 + 1, size=3)
        center = tuple(float(o * h) for o in offset_idx)
        psi = gaussian_field(grid, width, center=center)
        rho = psi * psi
        pot = convolve_interaction(rho, theta, grid)
        y_index = tuple(int((c + o) % n) for o in offset_idx)
        num = float(pot[y_index])
        den = expectation_multiplier(psi, mult, grid)
        worst = max(worst, num / den)
    return worst


def theta_sensitivity(rows) -> list:
    """Monotonicity table over a theta sweep.

    Rows are dicts with at least 'theta' plus any of 'energy', 'beta_theta',
    'mu_theta', 'decay_rate', 'converged'.  Unconverged rows are excluded;
    energies and beta must be non-decreasing in theta, violations beyond 1e-6
    are flagged.
    """
    usable = [dict(r) for r in rows if r.get("converged", True)]
    usable.sort(key=lambda r: r["theta"])
    prev = {}
    out = []
    for row in usable:
        flags = []
        for key in ("energy", "beta_theta"):
            if key in row and key in prev and row[key] < prev[key] - 1e-6:
                flags.append(f"{key} decreased")
            if key in row:
                prev[key] = row[key]
        row["flags"] = ";".join(flags)
        out.append(row)
    return out
