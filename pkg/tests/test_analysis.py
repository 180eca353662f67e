"""Verification instruments: decay fits on planted profiles, the shell
identity, the Hardy-Kato audit, and the theta monotonicity table."""

from __future__ import annotations

import numpy as np
import pytest

from relstar.analysis import (
    fit_decay,
    hardy_kato_audit,
    shell_check,
    theta_sensitivity,
)
from relstar.grid import GridSpec


@pytest.fixture(scope="module")
def fit_grid():
    return GridSpec(48, 24.0)


def test_fit_decay_recovers_planted_exponential(fit_grid):
    """rho = e^{-b r} (plus r^2 volume factor in the tail mass) over the
    [box/8, box/4] window."""
    b = 1.4
    rho = np.exp(-b * fit_grid.radius())
    fit = fit_decay(rho, fit_grid, "exponential")
    assert fit.model == "exponential"
    # the log(1 + 2/(bR) + ...) subleading term biases the slope by ~2/(bR^2)
    assert fit.rate_or_exponent == pytest.approx(b, rel=0.10)
    assert fit.r_squared > 0.999
    assert fit.window == (3.0, 6.0)
    assert np.all(np.diff(fit.shell_masses) < 0)


def test_fit_decay_recovers_planted_power(fit_grid):
    """rho ~ r^{-8} tail reports exponent 8."""
    r = np.maximum(fit_grid.radius(), 0.5)
    rho = r**-8.0
    fit = fit_decay(rho, fit_grid, "power")
    assert fit.rate_or_exponent == pytest.approx(8.0, rel=0.05)
    assert fit.r_squared > 0.999


def test_fit_decay_validation(fit_grid):
    rho = np.exp(-fit_grid.radius())
    with pytest.raises(ValueError, match="model"):
        fit_decay(rho, fit_grid, "gaussian")
    with pytest.raises(ValueError, match=">= 0"):
        fit_decay(-rho, fit_grid, "exponential")
    with pytest.raises(ValueError, match="window"):
        fit_decay(rho, fit_grid, "exponential", window=(1.0, 6.0))
    with pytest.raises(ValueError, match="window"):
        fit_decay(rho, fit_grid, "exponential", window=(3.0, 12.0))


def test_fit_decay_refuses_floored_tail(fit_grid):
    """A density that has already hit round-off in the window is not fittable."""
    rho = np.exp(-8.0 * fit_grid.radius())
    with pytest.raises(ValueError, match="floor"):
        fit_decay(rho, fit_grid, "exponential")


def test_shell_check_identity(fit_grid):
    report = shell_check(1.0, 0.8, fit_grid, [3.5, 4.5, 5.5])
    assert report.max_relative_error < 1e-2
    assert report.lhs.shape == (3,)
    assert np.allclose(report.lhs, report.rhs, rtol=3e-2)
    # screened potential decays outward
    assert np.all(np.diff(report.lhs) < 0)


def test_shell_check_validation(fit_grid):
    with pytest.raises(ValueError, match="theta"):
        shell_check(1.0, 0.0, fit_grid, [4.0])
    with pytest.raises(ValueError, match="exceed the source"):
        shell_check(2.0, 0.5, fit_grid, [2.2])
    with pytest.raises(ValueError, match="wrap-around"):
        shell_check(1.0, 0.5, fit_grid, [10.0])


def test_hardy_kato_bounded(grid24):
    worst = hardy_kato_audit(6, grid24, theta=0.3, seed=5)
    assert 0.0 < worst <= np.pi / 2.0 + 1e-9
    with pytest.raises(ValueError, match="sample"):
        hardy_kato_audit(0, grid24, theta=0.3)


def test_hardy_kato_deterministic(grid16):
    assert hardy_kato_audit(3, grid16, 0.2, seed=9) == hardy_kato_audit(
        3, grid16, 0.2, seed=9
    )


def test_theta_sensitivity_table():
    rows = [
        {"theta": 0.2, "energy": -0.5, "beta_theta": 0.95},
        {"theta": 0.0, "energy": -0.6, "beta_theta": 0.90},
        {"theta": 0.4, "energy": -0.7, "beta_theta": 0.97},
        {"theta": 0.3, "energy": -0.45, "beta_theta": 0.96, "converged": False},
    ]
    out = theta_sensitivity(rows)
    # unconverged row dropped, remaining sorted by theta
    assert [r["theta"] for r in out] == [0.0, 0.2, 0.4]
    assert out[0]["flags"] == ""
    assert out[1]["flags"] == ""
    # the theta = 0.4 row breaks energy monotonicity
    assert "energy decreased" in out[2]["flags"]
    assert "beta" not in out[2]["flags"]
