"""Physical parameter bundle shared by every functional."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KAPPA_COERCIVE_BOUND = 4.0 / np.pi

__all__ = ["PhysicalParams", "KAPPA_COERCIVE_BOUND"]


@dataclass(frozen=True)
class PhysicalParams:
    """(m, kappa, theta, q) plus exactly one of particle_number (HF) or
    total_mass (HFB)."""

    m: float
    kappa: float
    theta: float = 0.0
    q: int = 1
    particle_number: int | None = None
    total_mass: float | None = None

    def __post_init__(self) -> None:
        if self.m < 0:
            raise ValueError("rest mass m must be >= 0")
        if self.kappa < 0:
            raise ValueError("coupling kappa must be >= 0")
        if self.theta < 0:
            raise ValueError("screening theta must be >= 0")
        if self.q < 1:
            raise ValueError("internal-degree count q must be >= 1")
        has_n = self.particle_number is not None
        has_lam = self.total_mass is not None
        if has_n == has_lam:
            raise ValueError("exactly one of particle_number / total_mass must be set")
        if has_n and self.particle_number < 1:
            raise ValueError("particle_number must be an integer >= 1")
        if has_lam and not self.total_mass > 0:
            raise ValueError("total_mass must be > 0")

    @property
    def mode(self) -> str:
        return "hf" if self.particle_number is not None else "hfb"

    def require_coercive(self) -> None:
        """Solvers relying on Hardy-Kato coercivity need kappa < 4/pi."""
        if self.kappa >= KAPPA_COERCIVE_BOUND:
            raise ValueError(
                f"kappa = {self.kappa} violates the coercivity bound kappa < 4/pi "
                f"= {KAPPA_COERCIVE_BOUND:.6f}"
            )

    def as_dict(self) -> dict:
        return {
            "m": self.m,
            "kappa": self.kappa,
            "theta": self.theta,
            "q": self.q,
            "particle_number": self.particle_number,
            "total_mass": self.total_mass,
        }
