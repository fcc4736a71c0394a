"""1D periodic grid, second-order difference operators, and mixture states.

Cell-centered finite volumes on a torus of length L: cell centers at
(i + 1/2) dx. Interface-indexed arrays put index i at x_{i+1/2}, the right
face of cell i; div_flux is the conservative difference of such arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Grid1D:
    n_cells: int
    length: float = 1.0

    def __post_init__(self) -> None:
        if self.n_cells < 8:
            raise ValueError("grid needs at least 8 cells")
        if not self.length > 0:
            raise ValueError("domain length must be positive")

    @property
    def dx(self) -> float:
        return self.length / self.n_cells

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.dx


def grad(grid: Grid1D, f: np.ndarray) -> np.ndarray:
    """Centered second-order gradient; periodic wrap. Works on (..., N)."""
    return (np.roll(f, -1, axis=-1) - np.roll(f, 1, axis=-1)) / (2.0 * grid.dx)


def laplacian(grid: Grid1D, f: np.ndarray) -> np.ndarray:
    """Standard three-point Laplacian; periodic wrap."""
    return (np.roll(f, -1, axis=-1) - 2.0 * f + np.roll(f, 1, axis=-1)) / grid.dx**2


def div_flux(grid: Grid1D, flux: np.ndarray) -> np.ndarray:
    """Conservative divergence of interface fluxes: (F_{i+1/2} - F_{i-1/2})/dx.

    The periodic telescoping sum makes integrate(div_flux(F)) vanish to
    machine precision for any F.
    """
    return (flux - np.roll(flux, 1, axis=-1)) / grid.dx


def interface_mean(f: np.ndarray) -> np.ndarray:
    """Arithmetic mean of cell values on each right face: (f_i + f_{i+1})/2."""
    return 0.5 * (f + np.roll(f, -1, axis=-1))


def integrate(grid: Grid1D, f: np.ndarray) -> float | np.ndarray:
    """Cell sum times dx; reduces over the last (spatial) axis."""
    return np.sum(f, axis=-1) * grid.dx


def div_kappa_grad(grid: Grid1D, kappa_mid: np.ndarray, f: np.ndarray) -> np.ndarray:
    """div(kappa grad f) with kappa given on interfaces (kappa_mid[i] at the
    right face of cell i); second order, conservative."""
    df = (np.roll(f, -1, axis=-1) - f) / grid.dx  # gradient on right faces
    return div_flux(grid, kappa_mid * df)


@dataclass
class MixtureState:
    """Per-species density and momentum fields on a shared grid, plus time.

    Shapes are (n_species, n_cells). Momentum is the stored conserved
    variable; velocities are derived.
    """

    grid: Grid1D
    rho: np.ndarray
    mom: np.ndarray
    t: float = 0.0

    def __post_init__(self) -> None:
        self.rho = np.asarray(self.rho, dtype=float)
        self.mom = np.asarray(self.mom, dtype=float)
        if self.rho.ndim != 2 or self.rho.shape[1] != self.grid.n_cells:
            raise ValueError("rho must have shape (n_species, n_cells)")
        if self.mom.shape != self.rho.shape:
            raise ValueError("mom must match rho's shape")

    @classmethod
    def from_velocity(cls, grid: Grid1D, rho: np.ndarray, v: np.ndarray, t: float = 0.0) -> "MixtureState":
        rho = np.asarray(rho, dtype=float)
        return cls(grid, rho, rho * np.asarray(v, dtype=float), t)

    @property
    def n_species(self) -> int:
        return self.rho.shape[0]

    def velocity(self) -> np.ndarray:
        return self.mom / self.rho

    def copy(self) -> "MixtureState":
        return MixtureState(self.grid, self.rho.copy(), self.mom.copy(), self.t)

    def validate(self, rho_floor: float) -> None:
        """Reject non-finite fields and densities under the physical floor."""
        if not (np.all(np.isfinite(self.rho)) and np.all(np.isfinite(self.mom))):
            raise ValueError("state contains non-finite values")
        if np.any(self.rho < rho_floor):
            raise ValueError(f"density fell below floor {rho_floor:g}")


def barycentric_velocity(state: MixtureState, rho_floor: float = 1e-300) -> np.ndarray:
    """Mass-weighted mean velocity (sum_i m_i) / (sum_i rho_i), pointwise."""
    total = state.rho.sum(axis=0)
    if np.any(total < rho_floor):
        raise ValueError("total density below floor")
    return state.mom.sum(axis=0) / total
