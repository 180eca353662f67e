"""Thomas-Fermi variational constant tau_c and the Chandrasekhar-limit
asymptote.

The scale-free quotient minimized here is

    Q(f) = c_TF * 2 * (int f^{4/3}) (int f)^{2/3} / D(f, f),

with the ultra-relativistic Thomas-Fermi kinetic constant
c_TF = (3/4)(6 pi^2)^{1/3} and D the Coulomb double integral, evaluated by
the radial Newton decomposition.  The infimum of Q over nonnegative radial
densities is the Chandrasekhar constant tau_c ~= 2.677, which controls both
the critical-mass asymptote lambda(kappa) ~ (tau_c/kappa)^{3/2} q^{-1/2} and
the large-N trend of the HF critical coupling kappa_N ~ tau_c N^{-2/3}.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import cumulative_trapezoid

TF_KINETIC_PREFACTOR = 0.75 * (6.0 * np.pi**2) ** (1.0 / 3.0)

__all__ = [
    "RadialDensity",
    "TFReport",
    "TF_KINETIC_PREFACTOR",
    "default_radial_grid",
    "tf_quotient",
    "minimize_tf",
    "critical_mass_asymptote",
]


def default_radial_grid(n_points: int = 2000, r_min: float = 1e-3, r_max: float = 1e2) -> np.ndarray:
    """Logarithmic radial grid resolving both core and tail."""
    return np.logspace(np.log10(r_min), np.log10(r_max), n_points)


@dataclass
class RadialDensity:
    """Nonnegative radial profile f(r) with 3-d measure 4 pi r^2 dr."""

    radii: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        self.radii = np.asarray(self.radii, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.radii.ndim != 1 or self.radii.shape != self.values.shape:
            raise ValueError("radii and values must be matching 1-d arrays")
        if np.any(np.diff(self.radii) <= 0):
            raise ValueError("radii must be strictly ascending")
        if np.any(self.values < 0):
            raise ValueError("density values must be >= 0")

    def mass(self) -> float:
        return float(4.0 * np.pi * np.trapezoid(self.radii**2 * self.values, self.radii))

    def normalized(self) -> "RadialDensity":
        m = self.mass()
        if m <= 0:
            raise ValueError("cannot normalize a zero density")
        return RadialDensity(self.radii, self.values / m)


def newton_potential(f: RadialDensity) -> np.ndarray:
    """Coulomb potential phi(r) = 4 pi [ (1/r) int_0^r s^2 f ds + int_r^inf s f ds ]."""
    r, v = f.radii, f.values
    inner = cumulative_trapezoid(r * r * v, r, initial=0.0)
    outer_total = np.trapezoid(r * v, r)
    outer = outer_total - cumulative_trapezoid(r * v, r, initial=0.0)
    return 4.0 * np.pi * (inner / r + outer)


def coulomb_energy(f: RadialDensity, phi: np.ndarray | None = None) -> float:
    """D(f, f) = double integral of f(x) f(y) / |x - y|."""
    if phi is None:
        phi = newton_potential(f)
    return float(4.0 * np.pi * np.trapezoid(f.radii**2 * f.values * phi, f.radii))


def tf_quotient(f: RadialDensity) -> float:
    """Scale-invariant Thomas-Fermi quotient; its infimum is tau_c."""
    mass = f.mass()
    if mass <= 0:
        raise ValueError("quotient undefined for the zero density")
    i43 = float(4.0 * np.pi * np.trapezoid(f.radii**2 * f.values ** (4.0 / 3.0), f.radii))
    d = coulomb_energy(f)
    return TF_KINETIC_PREFACTOR * 2.0 * i43 * mass ** (2.0 / 3.0) / d


def _quotient_and_gradient(f: RadialDensity):
    r, v = f.radii, f.values
    mass = f.mass()
    i43 = float(4.0 * np.pi * np.trapezoid(r * r * v ** (4.0 / 3.0), r))
    phi = newton_potential(f)
    d = coulomb_energy(f, phi)
    c = TF_KINETIC_PREFACTOR
    q = c * 2.0 * i43 * mass ** (2.0 / 3.0) / d
    grad = (2.0 * c / d) * (
        (4.0 / 3.0) * v ** (1.0 / 3.0) * mass ** (2.0 / 3.0)
        + (2.0 / 3.0) * i43 * mass ** (-1.0 / 3.0)
    ) - (2.0 * q / d) * phi
    return q, grad


@dataclass
class TFReport:
    tau_estimate: float
    density: RadialDensity
    trajectory: list
    converged: bool
    el_residual: float


def _initial_profile(radii: np.ndarray, kind: str) -> np.ndarray:
    if kind == "gaussian":
        return np.exp(-(radii**2) / 2.0)
    if kind == "compact_bump":
        out = np.zeros_like(radii)
        inside = radii < 2.0
        out[inside] = np.exp(-1.0 / (1.0 - (radii[inside] / 2.0) ** 2 + 1e-300))
        return out
    if kind == "ball":
        return (radii <= 1.0).astype(float)
    raise ValueError(f"unknown initializer {kind!r}")


def minimize_tf(
    initializer: str = "gaussian",
    iterations: int = 20000,
    step: float = 0.5,
    radii: np.ndarray | None = None,
) -> TFReport:
    """Projected-gradient minimization of the quotient, f <- max(f - step*g, 0)."""
    r = radii if radii is not None else default_radial_grid()
    f = RadialDensity(r, _initial_profile(r, initializer))
    q, grad = _quotient_and_gradient(f)
    trajectory = [q]
    current_step = step
    for _ in range(iterations):
        scale = np.abs(grad).max()
        if scale == 0:
            break
        trial_values = np.maximum(f.values - current_step * grad / scale * f.values.max(), 0.0)
        trial = RadialDensity(r, trial_values)
        if trial.mass() <= 0:
            current_step *= 0.5
            continue
        qt, grad_t = _quotient_and_gradient(trial)
        if qt < q:
            f, q, grad = trial, qt, grad_t
            trajectory.append(q)
            current_step *= 1.1
        else:
            current_step *= 0.5
            if current_step < 1e-14:
                break

    # Euler-Lagrange residual on the support of f
    _, grad = _quotient_and_gradient(f)
    support = f.values > 1e-6 * f.values.max()
    mass = f.mass()
    i43 = float(4.0 * np.pi * np.trapezoid(r * r * f.values ** (4.0 / 3.0), r))
    d = coulomb_energy(f)
    scale_term = (2.0 * TF_KINETIC_PREFACTOR / d) * (
        (4.0 / 3.0) * f.values ** (1.0 / 3.0) * mass ** (2.0 / 3.0)
        + (2.0 / 3.0) * i43 * mass ** (-1.0 / 3.0)
    )
    el_residual = float(np.abs(grad[support]).max() / np.abs(scale_term[support]).max())
    converged = el_residual <= 1e-2
    return TFReport(q, f.normalized(), trajectory, converged, el_residual)


@lru_cache(maxsize=1)
def _cached_tau() -> float:
    return minimize_tf().tau_estimate


def critical_mass_asymptote(kappa: float, q: int = 1, tau_c: float | None = None) -> float:
    """Chandrasekhar-limit asymptote lambda(kappa) = (tau_c/kappa)^{3/2} q^{-1/2}."""
    if kappa <= 0:
        raise ValueError("kappa must be > 0")
    if q < 1:
        raise ValueError("q must be >= 1")
    tau = tau_c if tau_c is not None else _cached_tau()
    return float((tau / kappa) ** 1.5 / np.sqrt(q))
