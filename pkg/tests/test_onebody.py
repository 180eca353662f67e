"""One-body operators and eigensolver.

Spectral oracles: the free operator's constant ground mode (eigenvalue m),
and the nonrelativistic hydrogen limit of K_theta at large mass, where the
binding energy approaches (m/2)(kappa/2)^2.
"""

from __future__ import annotations

import numpy as np
import pytest

from relstar.grid import GridSpec, integrate, parity_flip
from relstar.onebody import (
    OneBodyOperator,
    beta_sweep_rows,
    decay_rate_prediction,
    exterior_spectrum_probe,
    ground_state,
    point_yukawa_potential,
)
from relstar.params import PhysicalParams


def test_operator_kind_validation(grid16):
    params = PhysicalParams(m=1.0, kappa=0.5, particle_number=1)
    with pytest.raises(ValueError, match="kind"):
        OneBodyOperator("bogus", params, grid16)
    with pytest.raises(ValueError, match="background"):
        OneBodyOperator("L_gamma_theta", params, grid16)
    with pytest.raises(ValueError, match=">= 0"):
        OneBodyOperator(
            "L_gamma_theta", params, grid16,
            background_density=-np.ones(grid16.shape),
        )
    with pytest.raises(ValueError, match="exchange"):
        OneBodyOperator(
            "H_gamma_theta", params, grid16,
            background_density=np.ones(grid16.shape),
        )


def test_point_potential_theta_lipschitz(grid16):
    """|V_t1 - V_t2| <= |t1 - t2| pointwise (shared-kernel convention)."""
    v1 = point_yukawa_potential(grid16, 0.2)
    v2 = point_yukawa_potential(grid16, 0.7)
    assert np.abs(v1 - v2).max() <= 0.5 + 1e-9


def test_free_operator_ground_state(grid16):
    """kappa = 0: K_theta = sqrt(-Lap + m^2); bottom of spectrum is m with a
    constant eigenfield."""
    m = 1.4
    params = PhysicalParams(m=m, kappa=0.0, particle_number=1)
    op = OneBodyOperator("K_theta", params, grid16)
    res = ground_state(op, k=1, tol=1e-9)
    assert res.converged
    assert res.eigenvalues[0] == pytest.approx(m, abs=1e-7)
    psi = res.eigenfields[0]
    assert np.abs(psi - psi.mean()).max() < 1e-5 * np.abs(psi.mean())


def test_hydrogen_limit_oracle():
    """Large-mass limit of K_theta is the Coulomb problem with coupling
    kappa/2: binding (m/2)(kappa/2)^2 up to O((kappa/2)^2) relativistic and
    grid corrections."""
    m, kappa = 2.0, 0.5
    grid = GridSpec(32, 24.0)
    params = PhysicalParams(m=m, kappa=kappa, particle_number=1)
    op = OneBodyOperator("K_theta", params, grid)
    res = ground_state(op, k=1, tol=1e-8)
    assert res.converged
    binding = m - res.eigenvalues[0]
    assert binding > 0
    assert binding == pytest.approx(0.5 * m * (kappa / 2.0) ** 2, rel=0.10)


def test_odd_sector_above_even(grid24):
    params = PhysicalParams(m=1.0, kappa=1.0, theta=0.0, particle_number=1)
    op = OneBodyOperator("K_theta", params, grid24)
    even = ground_state(op, k=1, tol=1e-7)
    odd = ground_state(op, k=1, odd_sector=True, tol=1e-7)
    assert odd.eigenvalues[0] > even.eigenvalues[0]
    psi = odd.eigenfields[0]
    assert np.abs(parity_flip(psi) + psi).max() < 1e-10 * np.abs(psi).max()


def test_ground_state_k_validation(grid16):
    params = PhysicalParams(m=1.0, kappa=0.5, particle_number=1)
    op = OneBodyOperator("K_theta", params, grid16)
    with pytest.raises(ValueError):
        ground_state(op, k=0)


def test_decay_rate_prediction():
    # E = -m gives nu = m; shallow E -> nu ~ sqrt(2 m |E|)
    assert decay_rate_prediction(-1.0, 1.0) == pytest.approx(1.0)
    e = -1e-4
    assert decay_rate_prediction(e, 1.0) == pytest.approx(np.sqrt(2.0 * abs(e)), rel=1e-3)
    with pytest.raises(ValueError):
        decay_rate_prediction(0.1, 1.0)


def test_exterior_probe_monotone(grid16):
    rho = np.exp(-grid16.radius() ** 2)
    rho /= integrate(rho, grid16)
    params = PhysicalParams(m=1.0, kappa=1.0, theta=0.1, particle_number=1)
    op = OneBodyOperator("L_gamma_theta", params, grid16, background_density=rho)
    base = exterior_spectrum_probe(op, 0.0, tol=1e-7)
    excl = exterior_spectrum_probe(op, 1.5, tol=1e-7)
    assert base < excl <= 1e-6  # excluding the core raises the bottom toward 0
    with pytest.raises(ValueError, match="L_gamma"):
        kop = OneBodyOperator("K_theta", params, grid16)
        exterior_spectrum_probe(kop, 1.0)
    with pytest.raises(ValueError, match="half the box"):
        exterior_spectrum_probe(op, 0.9 * grid16.box_length)


def test_beta_sweep_rows_structure(grid24):
    rows = beta_sweep_rows(1.0, [0.5], [0.0, 0.1], grid24, tol=1e-7)
    assert len(rows) == 2
    assert set(rows[0]) == {"theta", "kappa", "m", "beta_theta", "residual", "iterations"}
    betas = [r["beta_theta"] for r in rows]
    # screening weakens the attraction: beta is non-decreasing in theta
    assert betas[1] >= betas[0] - 1e-8
    assert all(r["residual"] < 1e-5 for r in rows)
    # spectral window (m(1 - kappa pi/4), m)
    assert 1.0 * (1.0 - 0.5 * np.pi / 4.0) < betas[0] < 1.0


def test_beta_sweep_requires_coercive(grid16):
    with pytest.raises(ValueError, match="4/pi"):
        beta_sweep_rows(1.0, [2.0], [0.0], grid16)
