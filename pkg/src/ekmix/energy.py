"""Pointwise mixture thermodynamics.

Energy laws h(rho) with an optional Korteweg capillarity coefficient
kappa(rho), the derived pressure and chemical potential, capillary stress
components, and the Bregman-type relative quantities used by the
relative-energy diagnostics. Everything here is grid-agnostic: spatial
derivatives (the density gradient q and div(kappa*grad rho)) are inputs,
never computed internally.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

Scalar = Union[float, np.ndarray]

# Hard domain guard for the thermodynamic layer; solvers enforce a larger
# physical floor on top of this.
RHO_MIN = 1e-8

H_KINDS = ("quadratic", "gamma_law")
KAPPA_KINDS = ("none", "constant", "quantum", "power")


def _check_rho(rho: Scalar) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    if not np.all(np.isfinite(rho)):
        raise ValueError("density must be finite")
    if np.any(rho < RHO_MIN):
        raise ValueError(f"density below thermodynamic floor {RHO_MIN:g}")
    return rho


@dataclass(frozen=True)
class EnergyLaw:
    """Single-species energy law: internal energy h plus capillarity kappa.

    h_kind is one of ``quadratic`` (h = c*rho^2) or ``gamma_law``
    (h = c*rho^gamma/(gamma-1), gamma > 1). kappa_kind is one of ``none``,
    ``constant`` (kappa = k), ``quantum`` (kappa = k/(4 rho)) or ``power``
    (kappa = k*rho^s with s in [-1, 0]).
    """

    h_kind: str = "quadratic"
    c: float = 1.0
    gamma: float = 2.0
    kappa_kind: str = "none"
    k: float = 0.0
    s: float = 0.0

    def __post_init__(self) -> None:
        if self.h_kind not in H_KINDS:
            raise ValueError(f"unknown h_kind {self.h_kind!r}")
        if self.kappa_kind not in KAPPA_KINDS:
            raise ValueError(f"unknown kappa_kind {self.kappa_kind!r}")
        if not self.c > 0:
            raise ValueError("energy coefficient c must be positive (h must be strictly convex)")
        if self.h_kind == "gamma_law" and not self.gamma > 1:
            raise ValueError("gamma_law requires gamma > 1")
        if self.kappa_kind != "none" and not self.k > 0:
            raise ValueError("capillarity coefficient k must be positive")
        if self.kappa_kind == "power" and not -1.0 <= self.s <= 0.0:
            raise ValueError("power-law exponent s must lie in [-1, 0]")

    # -- internal energy -------------------------------------------------

    def h(self, rho: Scalar) -> Scalar:
        if self.h_kind == "quadratic":
            return self.c * rho**2
        return self.c * rho**self.gamma / (self.gamma - 1.0)

    def dh(self, rho: Scalar) -> Scalar:
        if self.h_kind == "quadratic":
            return 2.0 * self.c * rho
        g = self.gamma
        return self.c * g / (g - 1.0) * rho ** (g - 1.0)

    def d2h(self, rho: Scalar) -> Scalar:
        if self.h_kind == "quadratic":
            return 2.0 * self.c * np.ones_like(np.asarray(rho, dtype=float))
        g = self.gamma
        return self.c * g * rho ** (g - 2.0)

    # -- capillarity -----------------------------------------------------

    @property
    def has_capillarity(self) -> bool:
        return self.kappa_kind != "none"

    def kappa(self, rho: Scalar) -> Scalar:
        if self.kappa_kind == "none":
            return np.zeros_like(np.asarray(rho, dtype=float))
        if self.kappa_kind == "constant":
            return self.k * np.ones_like(np.asarray(rho, dtype=float))
        if self.kappa_kind == "quantum":
            return self.k / (4.0 * rho)
        return self.k * rho**self.s

    def dkappa(self, rho: Scalar) -> Scalar:
        if self.kappa_kind in ("none", "constant"):
            return np.zeros_like(np.asarray(rho, dtype=float))
        if self.kappa_kind == "quantum":
            return -self.k / (4.0 * rho**2)
        return self.k * self.s * rho ** (self.s - 1.0)

    def d2kappa(self, rho: Scalar) -> Scalar:
        if self.kappa_kind in ("none", "constant"):
            return np.zeros_like(np.asarray(rho, dtype=float))
        if self.kappa_kind == "quantum":
            return self.k / (2.0 * rho**3)
        return self.k * self.s * (self.s - 1.0) * rho ** (self.s - 2.0)

    def capillarity_margin(self, rho: Scalar) -> Scalar:
        """kappa*kappa'' - 2*kappa'^2, simplified per kind.

        The quantum and constant kinds give identically zero, returned as
        exact zeros rather than a rounded composition of derivatives. The
        power kind gives -k^2 s(s+1) rho^(2s-2), nonnegative on s in [-1, 0].
        """
        rho = np.asarray(rho, dtype=float)
        if self.kappa_kind in ("none", "constant", "quantum"):
            return np.zeros_like(rho)
        coeff = -self.k**2 * self.s * (self.s + 1.0)
        if coeff == 0.0:  # s = 0 or s = -1 degenerate to exact zero
            return np.zeros_like(rho)
        return coeff * rho ** (2.0 * self.s - 2.0)


@dataclass(frozen=True)
class MixtureModel:
    """A mixture: per-species energy laws, friction couplings, and epsilon.

    b is the symmetric n x n matrix of nonnegative friction coefficients;
    its diagonal is never used. eps scales the friction strength 1/eps.
    """

    laws: tuple[EnergyLaw, ...]
    b: np.ndarray
    eps: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "laws", tuple(self.laws))
        b = np.asarray(self.b, dtype=float)
        object.__setattr__(self, "b", b)
        n = len(self.laws)
        if n < 1:
            raise ValueError("at least one species required")
        if b.shape != (n, n):
            raise ValueError(f"friction matrix must be {n}x{n}, got {b.shape}")
        if not np.array_equal(b, b.T):
            raise ValueError("friction matrix not symmetric")
        off = b[~np.eye(n, dtype=bool)]
        if off.size and np.any(off < 0):
            raise ValueError("friction coefficients must be nonnegative")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")

    @property
    def n(self) -> int:
        return len(self.laws)


@dataclass(frozen=True)
class ThermoPoint:
    """State of one species at one point: density, density gradient q,
    and the value of div(kappa(rho) * grad rho) supplied by the grid layer."""

    rho: Scalar
    q: Scalar = 0.0
    div_kq: Scalar = 0.0


def pressure(law: EnergyLaw, rho: Scalar) -> Scalar:
    """p(rho) = rho*h'(rho) - h(rho); strictly increasing for convex h."""
    rho = _check_rho(rho)
    return rho * law.dh(rho) - law.h(rho)


def dpressure(law: EnergyLaw, rho: Scalar) -> Scalar:
    """p'(rho) = rho*h''(rho), the squared sound speed."""
    rho = _check_rho(rho)
    return rho * law.d2h(rho)


def sound_speed(law: EnergyLaw, rho: Scalar) -> Scalar:
    return np.sqrt(dpressure(law, rho))


def chemical_potential(law: EnergyLaw, pt: ThermoPoint) -> Scalar:
    """mu = h'(rho) + (1/2) kappa'(rho) q^2 - div(kappa grad rho).

    The last term is taken from pt.div_kq; for q = 0 and div_kq = 0 this
    reduces to h'(rho).
    """
    rho = _check_rho(pt.rho)
    mu = law.dh(rho)
    if law.has_capillarity:
        mu = mu + 0.5 * law.dkappa(rho) * np.asarray(pt.q) ** 2 - pt.div_kq
    return mu


def stress_components(law: EnergyLaw, pt: ThermoPoint) -> tuple[Scalar, Scalar, Scalar]:
    """Capillary stress components (s, r, H) at a point.

    s = p(rho) + (1/2)(kappa + rho*kappa') q^2, r = rho*kappa*q and
    H = kappa*q^2 (q (x) q collapses to a scalar in 1D). For the quantum
    kind kappa + rho*kappa' = 0, so s = p exactly.
    """
    rho = _check_rho(pt.rho)
    p = rho * law.dh(rho) - law.h(rho)
    if not law.has_capillarity:
        z = np.zeros_like(rho)
        return p, z, z
    q = np.asarray(pt.q, dtype=float)
    kap = law.kappa(rho)
    if law.kappa_kind == "quantum":
        s = p + np.zeros_like(rho)  # kappa + rho*kappa' vanishes identically
    else:
        s = p + 0.5 * (kap + rho * law.dkappa(rho)) * q**2
    r = rho * kap * q
    big_h = kap * q**2
    return s, r, big_h


def stress_partials(law: EnergyLaw, pt: ThermoPoint) -> dict[str, Scalar]:
    """First partials of (s, r, H) with respect to (rho, q) at a point.

    Used by the relative-stress diagnostics; keys are s_rho, s_q, r_rho,
    r_q, H_rho, H_q.
    """
    rho = _check_rho(pt.rho)
    q = np.asarray(pt.q, dtype=float)
    kap = law.kappa(rho)
    dk = law.dkappa(rho)
    d2k = law.d2kappa(rho)
    dp = rho * law.d2h(rho)
    return {
        "s_rho": dp + 0.5 * (2.0 * dk + rho * d2k) * q**2,
        "s_q": (kap + rho * dk) * q,
        "r_rho": (kap + rho * dk) * q,
        "r_q": rho * kap,
        "H_rho": dk * q**2,
        "H_q": 2.0 * kap * q,
    }


def relative_enthalpy(law: EnergyLaw, rho: Scalar, rho_hat: Scalar) -> Scalar:
    """Bregman distance of h: h(rho) - h(rho_hat) - h'(rho_hat)(rho - rho_hat).

    Nonnegative for convex h, with quadratic lower bound (alpha/2)(rho-rho_hat)^2
    where alpha is the minimum of h'' on the segment.
    """
    rho = _check_rho(rho)
    rho_hat = _check_rho(rho_hat)
    return law.h(rho) - law.h(rho_hat) - law.dh(rho_hat) * (rho - rho_hat)


def _neg_inv_kappa_bregman(law: EnergyLaw, rho: Scalar, rho_hat: Scalar) -> Scalar:
    # Bregman remainder of f = -1/kappa, in closed form per kind. Convex
    # exactly when kappa*kappa'' - 2*kappa'^2 >= 0, hence nonnegative for
    # every admissible law.
    rho = np.asarray(rho, dtype=float)
    rho_hat = np.asarray(rho_hat, dtype=float)
    if law.kappa_kind in ("constant", "quantum"):
        # -1/kappa is affine in rho (constant resp. -4 rho/k): remainder 0.
        return np.zeros(np.broadcast(rho, rho_hat).shape)
    # power kind: f(rho) = -rho^(-s)/k, f'(rho) = (s/k) rho^(-s-1)
    f = lambda r: -(r ** (-law.s)) / law.k
    df = lambda r: (law.s / law.k) * r ** (-law.s - 1.0)
    return f(rho) - f(rho_hat) - df(rho_hat) * (rho - rho_hat)


def relative_potential(law: EnergyLaw, pt: ThermoPoint, pt_hat: ThermoPoint) -> Scalar:
    """Relative potential F(rho, q | rho_hat, q_hat) of one species.

    Evaluated through the weighted-gradient identity

        h(rho|rho_hat) + (1/(2 kappa(rho))) (kappa(rho) q - kappa(rho_hat) q_hat)^2
        + (kappa(rho_hat)^2 q_hat^2 / 2) * B(rho|rho_hat)

    with B the Bregman remainder of -1/kappa (closed form per kind). For
    kappa_kind none this falls back to relative_enthalpy alone.
    """
    rel_h = relative_enthalpy(law, pt.rho, pt_hat.rho)
    if not law.has_capillarity:
        return rel_h
    rho = np.asarray(pt.rho, dtype=float)
    q = np.asarray(pt.q, dtype=float)
    q_hat = np.asarray(pt_hat.q, dtype=float)
    kap = law.kappa(rho)
    kap_hat = law.kappa(np.asarray(pt_hat.rho, dtype=float))
    grad_term = (kap * q - kap_hat * q_hat) ** 2 / (2.0 * kap)
    breg = _neg_inv_kappa_bregman(law, pt.rho, pt_hat.rho)
    return rel_h + grad_term + 0.5 * kap_hat**2 * q_hat**2 * breg


@dataclass(frozen=True)
class AdmissibilityReport:
    """Sampled admissibility of an energy law on a density range.

    alpha is the sampled minimum of h'' (the convexity constant on the
    range, not a global one). min_capillarity_margin is the sampled minimum
    of kappa*kappa'' - 2*kappa'^2, which must be nonnegative for the
    relative-potential identity to produce a nonnegative value.
    """

    rho_lo: float
    rho_hi: float
    min_convexity: float
    min_kappa: float
    min_capillarity_margin: float
    passed: bool

    @property
    def alpha(self) -> float:
        return self.min_convexity


def check_admissibility(
    law: EnergyLaw, rho_range: tuple[float, float], samples: int = 512
) -> AdmissibilityReport:
    """Sample h'', kappa, and the capillarity margin over a density range.

    Passes iff all sampled minima are >= -1e-12. Failure is reported, not
    raised.
    """
    lo, hi = float(rho_range[0]), float(rho_range[1])
    if not (0.0 < lo < hi):
        raise ValueError("need 0 < rho_lo < rho_hi")
    rho = np.linspace(lo, hi, samples)
    min_h2 = float(np.min(law.d2h(rho)))
    if law.has_capillarity:
        min_kap = float(np.min(law.kappa(rho)))
        min_margin = float(np.min(law.capillarity_margin(rho)))
    else:
        min_kap = 0.0
        min_margin = 0.0
    tol = -1e-12
    passed = min_h2 >= tol and min_kap >= tol and min_margin >= tol
    return AdmissibilityReport(
        rho_lo=lo,
        rho_hi=hi,
        min_convexity=min_h2,
        min_kappa=min_kap,
        min_capillarity_margin=min_margin,
        passed=passed,
    )
