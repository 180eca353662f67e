"""relstar: pseudo-relativistic Hartree-Fock / Hartree-Fock-Bogoliubov
solvers with attractive Yukawa interaction on a periodic spectral grid.

The package reproduces, at desk scale, the quantitative structure of the
underlying variational theory: energy windows, critical couplings, chemical
potential bounds, density decay rates, and the Chandrasekhar mass limit.
"""

__version__ = "0.1.0"

from .analysis import DecayFit, ShellCheckReport, fit_decay, hardy_kato_audit, shell_check, theta_sensitivity
from .chandrasekhar import (
    RadialDensity,
    TFReport,
    TF_KINETIC_PREFACTOR,
    critical_mass_asymptote,
    minimize_tf,
    tf_quotient,
)
from .energy import (
    EnergyBreakdown,
    GNReport,
    OrbitalSet,
    dtheta,
    energy_hf,
    extheta_orbitals,
    gn_quotient,
    pohozaev_residual,
)
from .fieldio import read_field, write_field
from .grid import (
    GridSpec,
    apply_kinetic,
    convolve_yukawa,
    green_kernel_check,
    kinetic_multiplier,
    yukawa_multiplier,
)
from .hf import (
    HFReport,
    HFSolveConfig,
    blowup_rescale,
    estimate_kappa_crit,
    extract_multipliers,
    hf_gradient,
    minimize_hf,
    scan_scaling_collapse,
    scf_hf,
)
from .hfb import (
    BasisSet,
    HFBReport,
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
from .onebody import (
    OneBodyOperator,
    SpectralResult,
    decay_rate_prediction,
    exterior_spectrum_probe,
    ground_state,
)
from .params import PhysicalParams
