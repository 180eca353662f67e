"""Hartree-Fock energy functional, the D/Ex bilinear forms, the massless
Gagliardo-Nirenberg quotient and the Pohozaev residual.

All interaction integrals are evaluated spectrally (Parseval form) against
the minimum-image interaction kernel, which reproduces free-space values for
localized states; this is algebraically identical to the real-space
convolution form under the grid's transform convention and keeps the
direct/exchange values manifestly real.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import (
    GridSpec,
    expectation_multiplier,
    inner,
    integrate,
    interaction_multiplier,
    inv_sqrt_lap_multiplier,
    kinetic_multiplier,
    sqrt_lap_multiplier,
)
from .params import PhysicalParams

RESIDUAL_EPS = 1e-30

__all__ = [
    "OrbitalSet",
    "EnergyBreakdown",
    "GNReport",
    "dtheta",
    "extheta_orbitals",
    "energy_hf",
    "gn_quotient",
    "pohozaev_residual",
    "harmonic_gaussian_stack",
]


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------


@dataclass
class OrbitalSet:
    """N orthonormal complex fields; represents the Slater projection
    gamma = sum_j |u_j><u_j|."""

    orbitals: np.ndarray  # shape (N, n, n, n), complex
    grid: GridSpec

    def __post_init__(self) -> None:
        self.orbitals = np.asarray(self.orbitals)
        if self.orbitals.ndim != 4:
            raise ValueError("orbitals must be a stacked (N, n, n, n) array")
        self.grid.check_shape(self.orbitals[0])

    @property
    def count(self) -> int:
        return self.orbitals.shape[0]

    def gram(self) -> np.ndarray:
        flat = self.orbitals.reshape(self.count, -1)
        return self.grid.volume_element * (flat.conj() @ flat.T)

    @property
    def gram_residual(self) -> float:
        g = self.gram()
        return float(np.abs(g - np.eye(self.count)).max())

    def validate(self, tol: float = 1e-8) -> None:
        res = self.gram_residual
        if res > tol:
            raise ValueError(f"orbitals not orthonormal: gram residual {res:.3e} > {tol:.1e}")

    def density(self) -> np.ndarray:
        return np.sum(np.abs(self.orbitals) ** 2, axis=0)

    @classmethod
    def orthonormalized(cls, fields: np.ndarray, grid: GridSpec) -> "OrbitalSet":
        """QR-orthonormalize a stack of fields w.r.t. the h^3 inner product."""
        stack = np.asarray(fields, dtype=complex)
        n = stack.shape[0]
        mat = stack.reshape(n, -1).T
        q, r = np.linalg.qr(mat)
        # fix the gauge so restarts are deterministic
        signs = np.sign(np.real(np.diag(r)))
        signs[signs == 0] = 1.0
        q = q * signs
        q /= np.sqrt(grid.volume_element)
        return cls(q.T.reshape(stack.shape), grid)


@dataclass
class EnergyBreakdown:
    kinetic: float
    direct: float
    exchange: float
    pairing: float
    total: float

    def as_dict(self) -> dict:
        return {
            "kinetic": self.kinetic,
            "direct": self.direct,
            "exchange": self.exchange,
            "pairing": self.pairing,
            "total": self.total,
        }

    def to_json_dict(self, params: PhysicalParams) -> dict:
        out = self.as_dict()
        out.update(params.as_dict())
        return out


@dataclass
class GNReport:
    kinetic_massless: float
    interaction: float
    operator_norm: float
    quotient: float


# ---------------------------------------------------------------------------
# bilinear forms
# ---------------------------------------------------------------------------


def dtheta(rho_a: np.ndarray, rho_b: np.ndarray, theta: float, grid: GridSpec) -> float:
    """D_theta(rho_a, rho_b) = integral of rho_a(x) W_theta(x-y) rho_b(y)."""
    grid.check_shape(rho_a)
    grid.check_shape(rho_b)
    w = interaction_multiplier(grid, theta)
    fa = np.fft.fftn(rho_a)
    fb = np.fft.fftn(rho_b)
    weight = grid.volume_element**2 / grid.box_length**3
    return float(weight * np.sum(w * (fa.conj() * fb)).real)


def _pair_spectra(orbitals: np.ndarray) -> np.ndarray:
    """|fft of pair products u_i conj(u_j)|^2 summed over ordered pairs."""
    n = orbitals.shape[0]
    total = None
    for i in range(n):
        for j in range(i, n):
            f = np.abs(np.fft.fftn(orbitals[i] * orbitals[j].conj())) ** 2
            f = f if i == j else 2.0 * f
            total = f if total is None else total + f
    return total


def extheta_orbitals(orbitals: OrbitalSet, theta: float, grid: GridSpec) -> float:
    """Ex_theta(gamma) for a Slater state: sum over pair products of the
    Yukawa bilinear form.  Nonnegative; equals dtheta(rho, rho) for N = 1."""
    spectra = _pair_spectra(orbitals.orbitals)
    w = interaction_multiplier(grid, theta)
    weight = grid.volume_element**2 / grid.box_length**3
    return float(weight * np.sum(w * spectra))


# ---------------------------------------------------------------------------
# HF energy
# ---------------------------------------------------------------------------


def kinetic_energy(orbitals: OrbitalSet, m: float, grid: GridSpec) -> float:
    mult = kinetic_multiplier(grid, m)
    return float(sum(expectation_multiplier(u, mult, grid) for u in orbitals.orbitals))


def energy_hf(orbitals: OrbitalSet, params: PhysicalParams, grid: GridSpec) -> EnergyBreakdown:
    """Evaluate the HF functional Tr(T gamma) - (kappa/2)(D - Ex)."""
    if params.mode != "hf":
        raise ValueError("energy_hf needs params in HF mode (particle_number set)")
    orbitals.validate()
    kin = kinetic_energy(orbitals, params.m, grid)
    rho = orbitals.density()
    direct = dtheta(rho, rho, params.theta, grid)
    exchange = extheta_orbitals(orbitals, params.theta, grid)
    total = kin - 0.5 * params.kappa * (direct - exchange)
    return EnergyBreakdown(kin, direct, exchange, 0.0, total)


def gn_quotient(orbitals: OrbitalSet, grid: GridSpec) -> GNReport:
    """Massless quotient 2 ||gamma|| Tr(sqrt(-Lap) gamma) / (D - Ex) at theta=0."""
    mult = sqrt_lap_multiplier(grid)
    kin = float(sum(expectation_multiplier(u, mult, grid) for u in orbitals.orbitals))
    rho = orbitals.density()
    interaction = dtheta(rho, rho, 0.0, grid) - extheta_orbitals(orbitals, 0.0, grid)
    if interaction <= 1e-12 * max(kin, 1.0):
        raise ValueError(
            "interaction D - Ex is numerically zero (rank-one or disjoint orbitals); "
            "no quotient"
        )
    quotient = 2.0 * kin / interaction  # ||gamma|| = 1 for a Slater projection
    return GNReport(kin, interaction, 1.0, quotient)


def pohozaev_residual(
    orbitals: OrbitalSet,
    multipliers,
    params: PhysicalParams,
    grid: GridSpec,
) -> float:
    """Relative residual of the massive Pohozaev identity at theta = 0.

    For a stationary point of the HF functional:
        Tr(sqrt(-Lap+m^2) gamma) - (3m/2) N - (5 kappa/4)(D - Ex)
          + (m^2/2) Tr(gamma / sqrt(-Lap+m^2))  =  (3/2) sum_j mu_j
    """
    if params.theta != 0.0:
        raise ValueError("Pohozaev identity only available at theta = 0")
    m = params.m
    mult_k = np.sqrt(grid.k_squared() + m * m)
    kin_full = float(sum(expectation_multiplier(u, mult_k, grid) for u in orbitals.orbitals))
    inv_mult = inv_sqrt_lap_multiplier(grid, m)
    inv_term = float(sum(expectation_multiplier(u, inv_mult, grid) for u in orbitals.orbitals))
    rho = orbitals.density()
    interaction = dtheta(rho, rho, 0.0, grid) - extheta_orbitals(orbitals, 0.0, grid)
    n = orbitals.count
    lhs = kin_full - 1.5 * m * n - 1.25 * params.kappa * interaction + 0.5 * m * m * inv_term
    rhs = 1.5 * float(np.sum(multipliers))
    return abs(lhs - rhs) / (abs(lhs) + abs(rhs) + RESIDUAL_EPS)


# ---------------------------------------------------------------------------
# initializers
# ---------------------------------------------------------------------------

_HARMONICS = (
    lambda x, y, z: 1.0 + 0.0 * x,
    lambda x, y, z: x,
    lambda x, y, z: y,
    lambda x, y, z: z,
    lambda x, y, z: x * y,
    lambda x, y, z: y * z,
    lambda x, y, z: x * z,
    lambda x, y, z: x * x - y * y,
    lambda x, y, z: 2.0 * z * z - x * x - y * y,
)


def harmonic_gaussian_stack(grid: GridSpec, n: int, width: float | None = None) -> OrbitalSet:
    """N Gaussians at the box center times distinct low-order harmonic
    polynomials, orthonormalized — the default HF initializer."""
    if n > len(_HARMONICS):
        raise ValueError(f"harmonic stack supports at most {len(_HARMONICS)} orbitals")
    w = width if width is not None else grid.box_length / 10.0
    x, y, z = grid.coords()
    env = np.exp(-(x**2 + y**2 + z**2) / (2.0 * w * w))
    fields = np.stack([_HARMONICS[j](x, y, z) * env for j in range(n)])
    return OrbitalSet.orthonormalized(fields, grid)
