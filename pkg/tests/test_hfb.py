"""Finite-basis HFB: states, integrals, energy oracles, and the solver.

The basis energy is cross-checked against the grid HF functional (projector
states) and against closed pair-channel expressions built from the direct
bilinear form; the mean field is checked as the exact gradient.
"""

from __future__ import annotations

import numpy as np
import pytest

from relstar.energy import OrbitalSet, dtheta, energy_hf
from relstar.grid import GridSpec
from relstar.hfb import (
    BasisSet,
    HFBSolveConfig,
    HFBState,
    basis_from_hf,
    basis_from_onebody,
    build_basis_integrals,
    build_mean_field,
    check_subadditivity,
    energy_hfb,
    hfb_step,
    solve_hfb,
)
from relstar.params import PhysicalParams


@pytest.fixture(scope="module")
def hfb_grid():
    return GridSpec(16, 12.0)


@pytest.fixture(scope="module")
def hfb_params():
    return PhysicalParams(m=1.0, kappa=1.2, theta=0.05, total_mass=2.5)


@pytest.fixture(scope="module")
def hfb_basis(hfb_grid, hfb_params):
    return basis_from_onebody(hfb_params, hfb_grid, 6)


@pytest.fixture(scope="module")
def hfb_integrals(hfb_basis, hfb_params):
    return build_basis_integrals(hfb_basis, hfb_params)


def _interior_state(m_dim, rng, pairing_scale=0.05):
    """Random state strictly inside 0 <= Gamma <= 1."""
    w = np.linspace(0.2, 0.8, m_dim)
    q, _ = np.linalg.qr(rng.standard_normal((m_dim, m_dim))
                        + 1j * rng.standard_normal((m_dim, m_dim)))
    gamma = q @ np.diag(w) @ q.conj().T
    a = pairing_scale * (rng.standard_normal((m_dim, m_dim))
                         + 1j * rng.standard_normal((m_dim, m_dim)))
    alpha = 0.5 * (a - a.T)
    state = HFBState(gamma, alpha)
    while state.constraint_violation() > 1e-12:
        alpha = 0.5 * alpha
        state = HFBState(gamma, alpha)
    return state


# ---------------------------------------------------------------------------
# basis and states
# ---------------------------------------------------------------------------


def test_basis_validation_and_gram(hfb_basis, hfb_grid):
    assert hfb_basis.size == 6
    assert hfb_basis.gram_residual() < 1e-8
    with pytest.raises(ValueError, match="M >= 2"):
        BasisSet(hfb_basis.fields[:1], hfb_grid)


def test_basis_from_hf(hfb_grid):
    from relstar.hf import HFSolveConfig, minimize_hf

    params = PhysicalParams(m=1.0, kappa=0.5, theta=0.05, particle_number=2)
    report = minimize_hf(params, hfb_grid, HFSolveConfig(max_outer_iterations=200))
    basis = basis_from_hf(report, params, hfb_grid, 4)
    assert basis.provenance == "hf_orbitals_plus_virtuals"
    assert basis.size == 4
    assert basis.gram_residual() < 1e-8


def test_state_validate_branches(rng):
    m_dim = 4
    good = _interior_state(m_dim, rng)
    good.validate()
    with pytest.raises(ValueError, match="Hermitian"):
        HFBState(good.gamma + 0.1j * np.eye(m_dim), good.alpha).validate()
    with pytest.raises(ValueError, match="antisymmetric"):
        HFBState(good.gamma, np.eye(m_dim)).validate()
    with pytest.raises(ValueError, match="block constraint"):
        HFBState(2.0 * np.eye(m_dim), np.zeros((m_dim, m_dim))).validate()
    with pytest.raises(ValueError, match="square"):
        HFBState(np.zeros((3, 3)), np.zeros((4, 4)))


def test_vacuum_and_spectrum():
    vac = HFBState.vacuum(5)
    assert vac.constraint_violation() == 0.0
    assert vac.pairing_norm() == 0.0
    spec = vac.spectrum()
    assert np.allclose(np.sort(spec), [0.0] * 5 + [1.0] * 5)


def test_big_gamma_hermitian_and_ph_symmetry(rng):
    """The generalized density matrix is Hermitian and its spectrum is
    symmetric under e -> 1 - e (particle-hole structure)."""
    state = _interior_state(5, rng, pairing_scale=0.12)
    big = state.big_gamma()
    assert np.abs(big - big.conj().T).max() < 1e-13
    spec = np.sort(state.spectrum())
    assert np.allclose(spec, np.sort(1.0 - spec), atol=1e-12)


# ---------------------------------------------------------------------------
# integrals and energy oracles
# ---------------------------------------------------------------------------


def test_integral_symmetries(hfb_integrals):
    t, vt = hfb_integrals.tmat, hfb_integrals.vt
    assert np.abs(t - t.conj().T).max() < 1e-12
    # real symmetric kernel: swap of the two vertices and complex conjugation
    assert np.allclose(vt, vt.transpose(2, 3, 0, 1), atol=1e-12)
    assert np.allclose(vt.conj(), vt.transpose(1, 0, 3, 2), atol=1e-12)


def test_projector_state_matches_grid_hf(hfb_basis, hfb_integrals, hfb_grid):
    """gamma = occupation projector onto two basis fields reproduces the grid
    HF functional of those fields exactly (same T and W, no pairing)."""
    params = PhysicalParams(m=1.0, kappa=0.5, theta=0.05, particle_number=2)
    m_dim = hfb_basis.size
    gamma = np.zeros((m_dim, m_dim))
    gamma[0, 0] = gamma[1, 1] = 1.0
    state = HFBState(gamma, np.zeros((m_dim, m_dim)))
    basis_energy = energy_hfb(state, params, hfb_integrals)

    orbitals = OrbitalSet(hfb_basis.fields[:2], hfb_grid)
    grid_energy = energy_hf(orbitals, params, hfb_grid)
    for key in ("kinetic", "direct", "exchange", "total"):
        assert getattr(basis_energy, key) == pytest.approx(
            getattr(grid_energy, key), rel=1e-10, abs=1e-12
        )
    assert basis_energy.pairing == 0.0


def test_pairing_term_closed_form(hfb_basis, hfb_integrals, hfb_grid):
    """M = 2 pairing block: P = 2 |a01|^2 (D(rho0, rho1) - D(s, s)) with
    s = phi0 phi1, evaluated with the grid bilinear form."""
    params = hfb_integrals.params
    m_dim = hfb_basis.size
    amp = 0.3
    alpha = np.zeros((m_dim, m_dim), dtype=complex)
    alpha[0, 1], alpha[1, 0] = amp, -amp
    state = HFBState(0.5 * np.eye(m_dim), alpha)
    pairing = energy_hfb(state, params, hfb_integrals).pairing

    phi0 = hfb_basis.fields[0].real
    phi1 = hfb_basis.fields[1].real
    cross = phi0 * phi1
    expected = 2.0 * amp * amp * (
        dtheta(phi0 * phi0, phi1 * phi1, params.theta, hfb_grid)
        - dtheta(cross, cross, params.theta, hfb_grid)
    )
    assert pairing == pytest.approx(expected, rel=1e-10)


def test_pairing_term_nonnegative(hfb_integrals, rng):
    """P = int W(x-y) |P(x,y)|^2 >= 0 for the positive minimum-image kernel."""
    state = _interior_state(6, rng, pairing_scale=0.1)
    assert energy_hfb(state, hfb_integrals.params, hfb_integrals).pairing >= 0.0


def test_mean_field_is_energy_gradient(hfb_integrals, rng):
    """dE = (1/2) Tr(F dGamma) over Hermitian/antisymmetric perturbations."""
    params = hfb_integrals.params
    m_dim = 6
    state = _interior_state(m_dim, rng)
    f = build_mean_field(state, hfb_integrals, params)
    assert np.abs(f - f.conj().T).max() < 1e-10

    dg = rng.standard_normal((m_dim, m_dim)) + 1j * rng.standard_normal((m_dim, m_dim))
    dg = 0.5 * (dg + dg.conj().T)
    da = rng.standard_normal((m_dim, m_dim)) + 1j * rng.standard_normal((m_dim, m_dim))
    da = 0.5 * (da - da.T)
    dbig = np.zeros((2 * m_dim, 2 * m_dim), dtype=complex)
    dbig[:m_dim, :m_dim] = dg
    dbig[:m_dim, m_dim:] = da
    dbig[m_dim:, :m_dim] = da.conj().T
    dbig[m_dim:, m_dim:] = -dg.conj()
    predicted = 0.5 * float(np.trace(f @ dbig).real)

    t = 1e-6

    def energy_at(s):
        return energy_hfb(
            HFBState(state.gamma + s * dg, state.alpha + s * da), params, hfb_integrals
        ).total

    fd = (energy_at(t) - energy_at(-t)) / (2.0 * t)
    assert fd == pytest.approx(predicted, rel=1e-6)


# ---------------------------------------------------------------------------
# fixed-point step
# ---------------------------------------------------------------------------


def test_hfb_step_structure(hfb_integrals, rng):
    params = hfb_integrals.params
    state = _interior_state(6, rng)
    mixed, residual, info = hfb_step(state, hfb_integrals, params, mixing=0.4)
    mixed.validate(tol=1e-8)
    assert residual > 0.0
    assert {"zero_gap", "fractional_fill", "zero_mode_flag", "fill_distance"} <= set(info)
    assert info["zero_gap"] >= 0.0
    # a full targeted step lands exactly on the trace constraint
    full, _, _ = hfb_step(state, hfb_integrals, params, mixing=1.0, trace_target=2.5)
    assert np.trace(full.gamma).real == pytest.approx(2.5, abs=1e-9)
    # pairing channel can be switched off
    nopair, _, _ = hfb_step(state, hfb_integrals, params, mixing=1.0, pairing=False)
    assert nopair.pairing_norm() == 0.0


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def hfb_solution(hfb_params, hfb_integrals):
    return solve_hfb(hfb_params, hfb_integrals)


def test_solve_hfb_fractional_mass(hfb_params, hfb_integrals, hfb_solution):
    report = hfb_solution
    assert report.converged
    assert report.mu_theta < 0.0
    assert report.trace_gamma == pytest.approx(2.5, abs=1e-6)
    lam, m = 2.5, hfb_params.m
    assert -m * lam - 1e-9 <= report.energy.total < 0.0
    # variational: the solver beats the uniform-occupation reference state
    m_dim = hfb_integrals.basis.size
    uniform = HFBState((lam / m_dim) * np.eye(m_dim), np.zeros((m_dim, m_dim)))
    assert report.energy.total <= energy_hfb(uniform, hfb_params, hfb_integrals).total + 1e-10
    report.state.validate(tol=1e-6)
    assert report.pairing_norm >= 0.0
    assert len(report.residual_history) == report.iterations


def test_solve_hfb_integer_mass(hfb_integrals):
    params = PhysicalParams(m=1.0, kappa=1.2, theta=0.05, total_mass=2.0)
    report = solve_hfb(params, hfb_integrals)
    assert report.converged
    assert report.trace_gamma == pytest.approx(2.0, abs=1e-6)
    assert -2.0 - 1e-9 <= report.energy.total < 0.0


def test_solve_hfb_pairing_variational(hfb_params, hfb_integrals, hfb_solution):
    """Allowing the pairing channel can only lower the constrained minimum."""
    without = solve_hfb(hfb_params, hfb_integrals, HFBSolveConfig(pairing=False))
    assert hfb_solution.energy.total <= without.energy.total + 1e-8
    assert without.pairing_norm == 0.0


def test_solve_hfb_deterministic(hfb_params, hfb_integrals, hfb_solution):
    b = solve_hfb(hfb_params, hfb_integrals)
    assert hfb_solution.energy.total == b.energy.total
    assert hfb_solution.mu_theta == b.mu_theta
    assert np.array_equal(hfb_solution.state.gamma, b.state.gamma)


def test_solve_hfb_validation(hfb_integrals, hfb_grid):
    with pytest.raises(ValueError, match="HFB-mode"):
        solve_hfb(PhysicalParams(m=1.0, kappa=0.5, particle_number=2), hfb_integrals)
    with pytest.raises(ValueError, match="not representable"):
        solve_hfb(PhysicalParams(m=1.0, kappa=0.5, total_mass=7.0), hfb_integrals)
    with pytest.raises(ValueError, match="4/pi"):
        bad = PhysicalParams(m=1.0, kappa=2.0, total_mass=2.0)
        basis = BasisSet(hfb_integrals.basis.fields, hfb_grid)
        solve_hfb(bad, build_basis_integrals(basis, bad))


# ---------------------------------------------------------------------------
# subadditivity
# ---------------------------------------------------------------------------


def test_check_subadditivity_rows(hfb_integrals):
    params = PhysicalParams(m=1.0, kappa=1.2, theta=0.05, total_mass=2.0)
    rows = check_subadditivity(params, hfb_integrals, [1.0])
    assert len(rows) == 1
    row = rows[0]
    assert row["lambda_split"] == 1.0
    assert row["gap"] == pytest.approx(
        row["energy_split_sum"] - row["energy_full"], abs=1e-14
    )
    assert row["gap"] >= -1e-6
    assert row["all_converged"]
    with pytest.raises(ValueError, match="outside"):
        check_subadditivity(params, hfb_integrals, [2.5])
