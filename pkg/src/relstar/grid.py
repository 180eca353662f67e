"""Periodic-box spectral grid and Fourier-multiplier operators.

Conventions
-----------
* Natural units (hbar = c = 1).  The box is ``[-L/2, L/2)^3`` sampled on an
  even cubic lattice with the "origin" placed at index ``n//2`` per axis, so
  the lattice inversion ``x -> -x`` is an exact index permutation.
* The forward transform carries the quadrature weight ``spacing**3`` so that
  discrete sums approximate integrals directly:

      integral(f)        = h^3 * sum(f)
      <f, g>             = h^3 * sum(conj(f) * g)
      fhat(k)            = h^3 * fftn(f)        (implicitly)

  With this convention a multiplier convolution is simply
  ``ifftn(mult * fftn(rho))`` with no further normalization, because
  ``h^3 * n^3 = L^3``.
* Kinetic operator: ``T(k) = sqrt(|k|^2 + m^2) - m``.
* Yukawa interaction: ``W_theta(x) = exp(-theta |x|)/|x|`` with multiplier
  ``4*pi/(|k|^2 + theta^2)``; for ``theta = 0`` the ``k = 0`` mode is zeroed
  (uniform-background convention for the periodic Coulomb problem).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc, erfcx

__all__ = [
    "GridSpec",
    "kinetic_multiplier",
    "yukawa_multiplier",
    "convolve_yukawa",
    "apply_multiplier",
    "apply_kinetic",
    "integrate",
    "inner",
    "norm",
    "expectation_multiplier",
    "sqrt_lap_multiplier",
    "inv_sqrt_lap_multiplier",
    "parity_flip",
    "odd_project",
    "gaussian_field",
    "green_kernel_check",
    "interaction_kernel",
    "interaction_multiplier",
    "convolve_interaction",
    "convolve_interaction_complex",
]

# Cell averages of 1/|x| and |x| over a unit cube centered at the origin,
# used to give the interaction kernel's singular cell its analytic mean value.
CUBE_INV_R_AVG = 2.3800774
CUBE_R_AVG = 0.4802947


@dataclass
class GridSpec:
    """Cubic periodic grid: ``points_per_axis`` samples per axis, box side
    ``box_length``.  Treated as immutable after construction."""

    points_per_axis: int
    box_length: float

    def __post_init__(self) -> None:
        n = self.points_per_axis
        if n < 8 or n % 2 != 0:
            raise ValueError("points_per_axis must be an even integer >= 8")
        if not self.box_length > 0:
            raise ValueError("box_length must be positive")
        self._cache: dict = {}

    # -- basic geometry -------------------------------------------------

    @property
    def spacing(self) -> float:
        return self.box_length / self.points_per_axis

    @property
    def volume_element(self) -> float:
        return self.spacing**3

    @property
    def shape(self) -> tuple:
        n = self.points_per_axis
        return (n, n, n)

    @property
    def n_total(self) -> int:
        return self.points_per_axis**3

    @property
    def center_index(self) -> int:
        return self.points_per_axis // 2

    def axis_offsets(self) -> np.ndarray:
        """1-d coordinate offsets in [-L/2, L/2) relative to the box center."""
        n = self.points_per_axis
        return (np.arange(n) - n // 2) * self.spacing

    def coords(self):
        """Broadcastable (x, y, z) offset arrays relative to the box center."""
        if "coords" not in self._cache:
            o = self.axis_offsets()
            self._cache["coords"] = (
                o[:, None, None],
                o[None, :, None],
                o[None, None, :],
            )
        return self._cache["coords"]

    def radius(self) -> np.ndarray:
        """Minimum-image distance from the box center, per grid point."""
        if "radius" not in self._cache:
            x, y, z = self.coords()
            self._cache["radius"] = np.sqrt(x**2 + y**2 + z**2)
        return self._cache["radius"]

    def wavenumbers(self) -> np.ndarray:
        """1-d frequency lattice (2*pi/L)*Z folded to the symmetric window."""
        n = self.points_per_axis
        return 2.0 * np.pi * np.fft.fftfreq(n, d=self.spacing)

    def k_squared(self) -> np.ndarray:
        if "k2" not in self._cache:
            k = self.wavenumbers()
            self._cache["k2"] = (
                k[:, None, None] ** 2 + k[None, :, None] ** 2 + k[None, None, :] ** 2
            )
        return self._cache["k2"]

    def check_shape(self, arr: np.ndarray) -> None:
        if arr.shape != self.shape:
            raise ValueError(f"field shape {arr.shape} does not match grid {self.shape}")


# ---------------------------------------------------------------------------
# multipliers
# ---------------------------------------------------------------------------


def kinetic_multiplier(grid: GridSpec, m: float) -> np.ndarray:
    """T(k) = sqrt(|k|^2 + m^2) - m; nonnegative, zero at k = 0."""
    if m < 0:
        raise ValueError("mass must be >= 0")
    return np.sqrt(grid.k_squared() + m * m) - m


def sqrt_lap_multiplier(grid: GridSpec) -> np.ndarray:
    """|k|, the multiplier of sqrt(-Laplacian)."""
    return np.sqrt(grid.k_squared())


def inv_sqrt_lap_multiplier(grid: GridSpec, m: float = 0.0) -> np.ndarray:
    """1/sqrt(|k|^2 + m^2); the k = 0 value is 0 for m = 0 and 1/m otherwise."""
    k2 = grid.k_squared()
    if m > 0:
        return 1.0 / np.sqrt(k2 + m * m)
    out = np.zeros_like(k2)
    nz = k2 > 0
    out[nz] = 1.0 / np.sqrt(k2[nz])
    return out


def yukawa_multiplier(grid: GridSpec, theta: float) -> np.ndarray:
    """4*pi/(|k|^2 + theta^2); for theta = 0 the k = 0 mode is set to 0."""
    if theta < 0:
        raise ValueError("screening theta must be >= 0")
    k2 = grid.k_squared()
    if theta == 0.0:
        out = np.zeros_like(k2)
        nz = k2 > 0
        out[nz] = 4.0 * np.pi / k2[nz]
        return out
    return 4.0 * np.pi / (k2 + theta * theta)


# ---------------------------------------------------------------------------
# field operations
# ---------------------------------------------------------------------------


def apply_multiplier(field: np.ndarray, mult: np.ndarray, grid: GridSpec) -> np.ndarray:
    grid.check_shape(field)
    out = np.fft.ifftn(mult * np.fft.fftn(field))
    if np.isrealobj(field):
        return out.real
    return out


def apply_kinetic(field: np.ndarray, m: float, grid: GridSpec) -> np.ndarray:
    """Apply T = sqrt(-Laplacian + m^2) - m as a Fourier multiplier."""
    return apply_multiplier(field, kinetic_multiplier(grid, m), grid)


def convolve_yukawa(rho: np.ndarray, theta: float, grid: GridSpec) -> np.ndarray:
    """(W_theta * rho)(x); real in, real out."""
    grid.check_shape(rho)
    if np.iscomplexobj(rho):
        raise ValueError("convolve_yukawa expects a real density")
    mult = yukawa_multiplier(grid, theta)
    return np.fft.ifftn(mult * np.fft.fftn(rho)).real


def convolve_yukawa_complex(f: np.ndarray, theta: float, grid: GridSpec) -> np.ndarray:
    """(W_theta * f)(x) for complex pair products (exchange-term helper)."""
    grid.check_shape(f)
    return np.fft.ifftn(yukawa_multiplier(grid, theta) * np.fft.fftn(f))


def interaction_kernel(grid: GridSpec, theta: float) -> np.ndarray:
    """Minimum-image Yukawa kernel exp(-theta r)/r, centered at the box center.

    The singular cell carries the analytic cell average of the kernel, so
    circular convolution against this kernel reproduces free-space interaction
    integrals of localized densities up to tail leakage past box_length/2.
    (The raw multiplier 4*pi/(k^2+theta^2) with its background convention is
    off by O(mass^2 / box_length) for isolated systems, which is far too
    coarse for energy differences; see yukawa_multiplier for the multiplier
    form kept for periodic-kernel verification.)
    """
    if theta < 0:
        raise ValueError("screening theta must be >= 0")
    r = grid.radius()
    out = np.zeros_like(r)
    mask = r > 0
    out[mask] = np.exp(-theta * r[mask]) / r[mask]
    h = grid.spacing
    c = grid.center_index
    out[c, c, c] = CUBE_INV_R_AVG / h - theta + 0.5 * theta * theta * CUBE_R_AVG * h
    return out


def interaction_multiplier(grid: GridSpec, theta: float) -> np.ndarray:
    """Fourier multiplier (real) of the minimum-image interaction kernel."""
    key = ("imult", float(theta))
    if key not in grid._cache:
        kern = interaction_kernel(grid, theta)
        grid._cache[key] = np.fft.fftn(np.fft.ifftshift(kern)).real * grid.volume_element
    return grid._cache[key]


def convolve_interaction(rho: np.ndarray, theta: float, grid: GridSpec) -> np.ndarray:
    """(kernel * rho)(x) with the minimum-image kernel; real in, real out."""
    grid.check_shape(rho)
    if np.iscomplexobj(rho):
        raise ValueError("convolve_interaction expects a real density")
    mult = interaction_multiplier(grid, theta)
    return np.fft.ifftn(mult * np.fft.fftn(rho)).real


def convolve_interaction_complex(f: np.ndarray, theta: float, grid: GridSpec) -> np.ndarray:
    """(kernel * f)(x) for complex pair products (exchange-term helper)."""
    grid.check_shape(f)
    return np.fft.ifftn(interaction_multiplier(grid, theta) * np.fft.fftn(f))


def integrate(field: np.ndarray, grid: GridSpec) -> float:
    return grid.volume_element * field.sum()


def inner(f: np.ndarray, g: np.ndarray, grid: GridSpec) -> complex:
    """L2 inner product <f, g> = h^3 sum(conj(f) g)."""
    return grid.volume_element * np.vdot(f, g)


def norm(f: np.ndarray, grid: GridSpec) -> float:
    return float(np.sqrt(inner(f, f, grid).real))


def expectation_multiplier(psi: np.ndarray, mult: np.ndarray, grid: GridSpec) -> float:
    """<psi, A psi> for a Fourier multiplier A, via Parseval."""
    grid.check_shape(psi)
    spec = np.abs(np.fft.fftn(psi)) ** 2
    w = grid.volume_element**2 / grid.box_length**3
    return float(w * np.sum(mult * spec))


def parity_flip(field: np.ndarray) -> np.ndarray:
    """psi(x) -> psi(-x) using the exact lattice inversion about the center."""
    return np.roll(field[::-1, ::-1, ::-1], shift=(1, 1, 1), axis=(0, 1, 2))


def odd_project(field: np.ndarray) -> np.ndarray:
    """Project onto the odd sector: psi -> (psi(x) - psi(-x)) / 2."""
    return 0.5 * (field - parity_flip(field))


def gaussian_field(
    grid: GridSpec,
    width: float,
    center: tuple = (0.0, 0.0, 0.0),
    normalized: bool = True,
) -> np.ndarray:
    """Real Gaussian exp(-|x - c|^2 / (2 width^2)) with minimum-image distance
    measured from an offset ``center`` relative to the box center."""
    x, y, z = grid.coords()
    L = grid.box_length

    def wrap(d):
        return (d + 0.5 * L) % L - 0.5 * L

    r2 = wrap(x - center[0]) ** 2 + wrap(y - center[1]) ** 2 + wrap(z - center[2]) ** 2
    g = np.exp(-r2 / (2.0 * width * width))
    if normalized:
        g /= np.sqrt(integrate(g * g, grid))
    return g


# ---------------------------------------------------------------------------
# resolvent-kernel verification
# ---------------------------------------------------------------------------


def _gaussian_source_kernel(r: np.ndarray, nu: float, sigma: float) -> np.ndarray:
    """Exact screened-Coulomb potential of a unit-mass Gaussian source.

    Solves (nu^2 - Laplacian) V = rho for rho a normalized Gaussian of width
    sigma.  For sigma -> 0 this reduces to exp(-nu r)/(4 pi r).  Evaluated in
    an overflow-safe form via the scaled complementary error function.
    """
    a = nu * sigma / np.sqrt(2.0)
    b = r / (sigma * np.sqrt(2.0))
    term1 = np.exp(0.5 * nu * nu * sigma * sigma - nu * r) * erfc(a - b)
    term2 = np.exp(-(r * r) / (2.0 * sigma * sigma)) * erfcx(a + b)
    return (term1 - term2) / (8.0 * np.pi * r)


def green_kernel_check(s: float, m: float, grid: GridSpec, source_width: float | None = None) -> float:
    """Max relative error of the resolvent multiplier 1/(s + m^2 + |k|^2)
    against the analytic kernel, probed with a narrow Gaussian source.

    The comparison shell is radii in [4*spacing, box_length/4].
    """
    if s < 0 or m <= 0:
        raise ValueError("require s >= 0 and m > 0")
    h = grid.spacing
    sigma = source_width if source_width is not None else 1.8 * h
    nu = np.sqrt(s + m * m)

    rho = gaussian_field(grid, sigma, normalized=False)
    rho /= integrate(rho, grid)
    mult = 1.0 / (s + m * m + grid.k_squared())
    numeric = apply_multiplier(rho, mult, grid)

    r = grid.radius()
    mask = (r >= 4.0 * h) & (r <= grid.box_length / 4.0)
    analytic = _gaussian_source_kernel(r[mask], nu, sigma)
    rel = np.abs(numeric[mask] - analytic) / np.abs(analytic)
    return float(rel.max())
