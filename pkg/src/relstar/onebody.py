"""One-body operators and their low-lying spectrum.

Covers the screened-hydrogen operator K_theta = sqrt(-Lap + m^2)
- (kappa/2) W_theta, the HF mean-field operator H_gamma (with exchange) and
its exchange-free companion L_gamma, plus decay-rate prediction and the
exterior-spectrum probe.

Eigenpairs come from matrix-free LOBPCG with a kinetic-shift preconditioner;
sector constraints (odd parity, exterior exclusion) are imposed by a
projector penalty P A P + c (1 - P) that pushes the excluded subspace above
the spectrum of interest.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, lobpcg

from .energy import OrbitalSet
from .grid import (
    GridSpec,
    convolve_interaction,
    convolve_interaction_complex,
    interaction_kernel,
    kinetic_multiplier,
    odd_project,
)
from .params import PhysicalParams

__all__ = [
    "OneBodyOperator",
    "SpectralResult",
    "point_yukawa_potential",
    "ground_state",
    "decay_rate_prediction",
    "exterior_spectrum_probe",
    "beta_sweep_rows",
]

KINDS = ("K_theta", "H_gamma_theta", "L_gamma_theta")


def point_yukawa_potential(grid: GridSpec, theta: float) -> np.ndarray:
    """Potential of a unit point source at the box center.

    Exactly the circular convolution of the grid delta with the interaction
    kernel, so the one-body potential and the two-body interaction integrals
    share one discretization.  Potentials at different theta are mutually
    consistent, |V_t1 - V_t2| <= |t1 - t2| pointwise, which the raw
    multiplier's background convention (DC jump between theta = 0 and
    theta > 0) would break.
    """
    return interaction_kernel(grid, theta)


@dataclass
class OneBodyOperator:
    """Matrix-free one-body operator on the grid.

    kind 'K_theta':        sqrt(-Lap + m^2) - (kappa/2) W_theta  (note: no -m)
    kind 'H_gamma_theta':  T - kappa (W_theta * rho) + kappa X_gamma
    kind 'L_gamma_theta':  T - kappa (W_theta * rho)
    """

    kind: str
    params: PhysicalParams
    grid: GridSpec
    background_density: np.ndarray | None = None
    exchange_source: OrbitalSet | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}; expected one of {KINDS}")
        p, g = self.params, self.grid
        if self.kind == "K_theta":
            self._kin = np.sqrt(g.k_squared() + p.m**2)
            self._pot = 0.5 * p.kappa * point_yukawa_potential(g, p.theta)
        else:
            if self.background_density is None:
                raise ValueError(f"{self.kind} requires a background density")
            g.check_shape(self.background_density)
            if np.any(self.background_density < -1e-12):
                raise ValueError("background density must be >= 0")
            self._kin = kinetic_multiplier(g, p.m)
            self._pot = p.kappa * convolve_interaction(self.background_density, p.theta, g)
        if self.kind == "H_gamma_theta" and self.exchange_source is None:
            raise ValueError("H_gamma_theta requires exchange_source orbitals")

    def apply(self, psi: np.ndarray) -> np.ndarray:
        self.grid.check_shape(psi)
        out = np.fft.ifftn(self._kin * np.fft.fftn(psi))
        out -= self._pot * psi
        if self.kind == "H_gamma_theta":
            kappa, theta = self.params.kappa, self.params.theta
            for u in self.exchange_source.orbitals:
                out += kappa * u * convolve_interaction_complex(u.conj() * psi, theta, self.grid)
        if np.isrealobj(psi) and (
            self.exchange_source is None or np.isrealobj(self.exchange_source.orbitals)
        ):
            return out.real
        return out


@dataclass
class SpectralResult:
    eigenvalues: np.ndarray
    eigenfields: list
    residual_norms: np.ndarray
    iterations: int
    converged: bool


# ---------------------------------------------------------------------------
# eigensolver
# ---------------------------------------------------------------------------


def _lobpcg_lowest(
    op: OneBodyOperator,
    k: int,
    projector=None,
    tol: float = 1e-8,
    max_iterations: int = 2000,
    seed: int = 0,
    initial: np.ndarray | None = None,
):
    """Lowest-k eigenpairs of P A P + c (1 - P) restricted to range(P)."""
    grid = op.grid
    n3 = grid.n_total
    shape = grid.shape
    penalty = 10.0 * (abs(op.params.m) + 1.0)

    def project(f):
        return projector(f) if projector is not None else f

    def matvec(vec):
        f = project(vec.reshape(shape))
        out = project(op.apply(f)) + penalty * (vec.reshape(shape) - f)
        return out.ravel()

    # kinetic-shift preconditioner, restricted to range(P)
    shift = 0.5 * (op.params.m + 1.0)
    prec_mult = 1.0 / (op._kin - op._kin.min() + shift)

    def precvec(vec):
        f = project(vec.reshape(shape))
        out = project(np.fft.ifftn(prec_mult * np.fft.fftn(f)).real)
        return (out + (vec.reshape(shape) - f) / penalty).ravel()

    A = LinearOperator((n3, n3), matvec=matvec, dtype=np.float64)
    M = LinearOperator((n3, n3), matvec=precvec, dtype=np.float64)

    if initial is not None:
        X = np.stack([project(np.real(f)).ravel() for f in initial], axis=1)
    else:
        rng = np.random.default_rng(seed)
        w = grid.box_length / 8.0
        x, y, z = grid.coords()
        env = np.exp(-(x**2 + y**2 + z**2) / (2 * w * w))
        cols = []
        for _ in range(k):
            coef = rng.standard_normal(4)
            poly = coef[0] + coef[1] * x / w + coef[2] * y / w + coef[3] * z / w
            cols.append(project(poly * env).ravel())
        X = np.stack(cols, axis=1)
    X, _ = np.linalg.qr(X)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        vals, vecs = lobpcg(A, X, M=M, tol=tol, maxiter=max_iterations, largest=False)

    order = np.argsort(vals)
    vals = vals[order]
    vecs = vecs[:, order]
    fields, residuals = [], []
    for j in range(k):
        f = project(vecs[:, j].reshape(shape))
        nrm = np.linalg.norm(f)
        f = f / nrm
        res = np.linalg.norm(op.apply(f) - vals[j] * f)
        residuals.append(res)
        fields.append(f / np.sqrt(grid.volume_element))
    return np.asarray(vals), fields, np.asarray(residuals)


def ground_state(
    op: OneBodyOperator,
    k: int = 1,
    odd_sector: bool = False,
    tol: float = 1e-8,
    max_iterations: int = 2000,
    seed: int = 0,
    initial: np.ndarray | None = None,
) -> SpectralResult:
    """Lowest-k eigenpairs; odd_sector restricts to psi(-x) = -psi(x) using
    the lattice's exact inversion symmetry."""
    if k < 1:
        raise ValueError("k must be >= 1")
    projector = odd_project if odd_sector else None
    vals, fields, residuals = _lobpcg_lowest(
        op, k, projector=projector, tol=tol, max_iterations=max_iterations, seed=seed,
        initial=initial,
    )
    converged = bool(np.all(residuals <= 10.0 * tol * max(1.0, np.abs(vals).max())))
    return SpectralResult(vals, fields, residuals, max_iterations, converged)


def decay_rate_prediction(E: float, m: float) -> float:
    """nu_E = sqrt(|m^2 - (E+m)^2|) for a negative eigenvalue E of K_theta - m."""
    if E >= 0:
        raise ValueError("decay rate prediction requires a bound state, E < 0")
    return float(np.sqrt(abs(m * m - (E + m) ** 2)))


def exterior_spectrum_probe(op: OneBodyOperator, exclusion_radius: float, **kwargs) -> float:
    """Lowest Rayleigh quotient of L_gamma over fields vanishing on the ball
    of the given radius; approaches 0 from below as the radius grows."""
    if op.kind != "L_gamma_theta":
        raise ValueError("exterior probe is defined for the L_gamma_theta kind only")
    if exclusion_radius < 0:
        raise ValueError("exclusion_radius must be >= 0")
    L = op.grid.box_length
    if (4.0 / 3.0) * np.pi * exclusion_radius**3 > 0.5 * L**3:
        raise ValueError("exclusion ball covers more than half the box")
    if exclusion_radius == 0.0:
        res = ground_state(op, k=1, **kwargs)
        return float(res.eigenvalues[0])
    mask = (op.grid.radius() >= exclusion_radius).astype(float)

    def projector(f):
        return mask * f

    vals, _, _ = _lobpcg_lowest(op, 1, projector=projector, **kwargs)
    return float(vals[0])


def beta_sweep_rows(
    m: float,
    kappas,
    thetas,
    grid: GridSpec,
    tol: float = 1e-8,
    max_iterations: int = 2000,
    seed: int = 0,
) -> list:
    """beta_theta over a (kappa, theta) product; rows ready for CSV export."""
    rows = []
    for kappa in kappas:
        warm = None
        for theta in thetas:
            params = PhysicalParams(m=m, kappa=kappa, theta=theta, particle_number=1)
            params.require_coercive()
            op = OneBodyOperator("K_theta", params, grid)
            res = ground_state(
                op, k=1, tol=tol, max_iterations=max_iterations, seed=seed, initial=warm
            )
            warm = np.stack(res.eigenfields)
            rows.append(
                {
                    "theta": theta,
                    "kappa": kappa,
                    "m": m,
                    "beta_theta": float(res.eigenvalues[0]),
                    "residual": float(res.residual_norms[0]),
                    "iterations": res.iterations,
                }
            )
    return rows
