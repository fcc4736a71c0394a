"""Energy functionals, the relative-distance metric between trajectories,
dissipation audits, and rate fitting for relaxation sweeps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .energy import (
    EnergyLaw,
    MixtureModel,
    ThermoPoint,
    relative_potential,
    stress_components,
    stress_partials,
)
from .friction import batched_diffusion_flux
from .grid import Grid1D, MixtureState, barycentric_velocity, grad, integrate, interface_mean


@dataclass(frozen=True)
class DiagnosticsRecord:
    """Per-step scalars emitted by the solvers.

    masses holds one entry per species. max_grad_v and max_grad_div_v
    monitor the uniform-bound hypotheses the convergence theory assumes but
    the solver cannot enforce; they are recorded, never acted on.
    """

    t: float
    dt: float
    e_tot: float
    masses: tuple[float, ...]
    momentum: float
    friction_dissipation: float
    min_rho: float
    max_grad_v: float
    max_grad_div_v: float
    chi: Optional[float] = None

    def __post_init__(self) -> None:
        vals = [self.t, self.dt, self.e_tot, self.momentum,
                self.friction_dissipation, self.min_rho,
                self.max_grad_v, self.max_grad_div_v, *self.masses]
        if not np.all(np.isfinite(vals)):
            raise ValueError("diagnostics record contains non-finite values")


@dataclass(frozen=True)
class EnergyAuditReport:
    """Outcome of the discrete energy-inequality audit.

    excess is the signed maximum over snapshots of
    E(t) + cumulative dissipation/eps - E(0); the inequality demands it stay
    below tolerance. max_abs_imbalance additionally tracks how far the
    balance drifts in either direction (numerical dissipation makes it
    negative on well-resolved runs).
    """

    e_initial: float
    excess: float
    max_abs_imbalance: float
    tolerance: float
    passed: bool


@dataclass(frozen=True)
class SweepResult:
    """(eps, sup_t chi, wall seconds) rows plus the fitted log-log line."""

    eps: tuple[float, ...]
    sup_chi: tuple[float, ...]
    wall_times: tuple[float, ...]
    slope: float
    intercept: float

    def __post_init__(self) -> None:
        if len(self.eps) < 2:
            raise ValueError("a sweep needs at least two epsilon values")
        if not all(a > b for a, b in zip(self.eps, self.eps[1:])):
            raise ValueError("epsilon values must be strictly decreasing")


# -- field-level thermodynamics -----------------------------------------


def chemical_potential_field(law: EnergyLaw, grid: Grid1D, rho: np.ndarray) -> np.ndarray:
    """mu over a density field: h'(rho) + kappa'(rho) q^2/2 - div(kappa grad rho).

    The divergence uses interface-averaged kappa so the capillary flux it
    implies is conservative.
    """
    mu = np.asarray(law.dh(rho), dtype=float)
    if law.has_capillarity:
        q = grad(grid, rho)
        kap_face = interface_mean(np.asarray(law.kappa(rho), dtype=float))
        df = (np.roll(rho, -1) - rho) / grid.dx
        div_kq = (kap_face * df - np.roll(kap_face * df, 1)) / grid.dx
        mu = mu + 0.5 * law.dkappa(rho) * q**2 - div_kq
    return mu


def mu_fields(model: MixtureModel, grid: Grid1D, rho: np.ndarray) -> np.ndarray:
    return np.stack([
        chemical_potential_field(law, grid, rho[i]) for i, law in enumerate(model.laws)
    ])


def species_velocities_effective(model: MixtureModel, state: MixtureState) -> np.ndarray:
    """Species velocities v_hat + u_i reconstructed from an effective-system
    state, with rho_i u_i the Maxwell-Stefan diffusion flux at the state's
    densities. For eps = 0 every species moves with the barycentric velocity.
    """
    v_hat = barycentric_velocity(state)
    if model.eps == 0.0 or model.n == 1:
        return np.broadcast_to(v_hat, state.rho.shape).copy()
    gm = grad(state.grid, mu_fields(model, state.grid, state.rho))
    flux = batched_diffusion_flux(model.b, state.rho, gm, model.eps)
    return v_hat[None, :] + flux / state.rho


# -- energies -----------------------------------------------------------


def total_energy(model: MixtureModel, state: MixtureState) -> float:
    """E_tot = integral of sum_i (h_i + kappa_i |grad rho_i|^2 / 2 + rho_i v_i^2 / 2)."""
    g = state.grid
    total = 0.0
    for i, law in enumerate(model.laws):
        rho = state.rho[i]
        dens = np.asarray(law.h(rho), dtype=float)
        if law.has_capillarity:
            dens = dens + 0.5 * law.kappa(rho) * grad(g, rho) ** 2
        dens = dens + 0.5 * state.mom[i] ** 2 / rho
        total += float(integrate(g, dens))
    return total


def _check_same_grid(state: MixtureState, ref: MixtureState) -> None:
    if state.grid != ref.grid:
        raise ValueError("states live on different grids")
    if state.rho.shape != ref.rho.shape:
        raise ValueError("states have different species counts")


def chi(
    model: MixtureModel,
    state: MixtureState,
    ref: MixtureState,
    ref_velocity: Optional[np.ndarray] = None,
    kappa_from: str = "state",
) -> float:
    """Relative-distance metric between a state and a reference state.

    Per species: rho (v - v_ref)^2 / 2 + (rho - rho_ref)^2, plus for
    capillary laws |kappa(rho) grad rho - kappa(rho_ref) grad rho_ref|^2
    / (2 kappa(rho)), all integrated. The gradient weight 1/(2 kappa) is
    taken at the relaxation state's density (kappa_from="state"); pass
    kappa_from="reference" for the alternate reading when the two density
    fields differ appreciably.

    ref_velocity overrides the reference's stored velocities, e.g. with the
    reconstructed v_hat + u_i of an effective system or the single
    barycentric velocity of the limit system.
    """
    _check_same_grid(state, ref)
    if kappa_from not in ("state", "reference"):
        raise ValueError("kappa_from must be 'state' or 'reference'")
    g = state.grid
    v = state.velocity()
    v_ref = ref.velocity() if ref_velocity is None else np.asarray(ref_velocity, dtype=float)
    total = 0.0
    for i, law in enumerate(model.laws):
        rho, rho_ref = state.rho[i], ref.rho[i]
        dens = 0.5 * rho * (v[i] - v_ref[i]) ** 2 + (rho - rho_ref) ** 2
        if law.has_capillarity:
            kq = law.kappa(rho) * grad(g, rho)
            kq_ref = law.kappa(rho_ref) * grad(g, rho_ref)
            weight_rho = rho if kappa_from == "state" else rho_ref
            dens = dens + (kq - kq_ref) ** 2 / (2.0 * law.kappa(weight_rho))
        total += float(integrate(g, dens))
    return total


def l2_distance(
    state: MixtureState, ref: MixtureState, ref_velocity: Optional[np.ndarray] = None
) -> float:
    """Unweighted surrogate: integral of sum_i ((rho_i - rho_ref_i)^2 + (v_i - v_ref_i)^2)."""
    _check_same_grid(state, ref)
    v = state.velocity()
    v_ref = ref.velocity() if ref_velocity is None else np.asarray(ref_velocity, dtype=float)
    dens = ((state.rho - ref.rho) ** 2 + (v - v_ref) ** 2).sum(axis=0)
    return float(integrate(state.grid, dens))


def relative_total_energy(
    model: MixtureModel,
    state: MixtureState,
    ref: MixtureState,
    ref_velocity: Optional[np.ndarray] = None,
) -> float:
    """Bregman-type relative energy: relative potential plus relative
    kinetic energy, integrated. Dominates chi by min(1, alpha/2) when the
    admissibility margins are nonnegative."""
    _check_same_grid(state, ref)
    g = state.grid
    v = state.velocity()
    v_ref = ref.velocity() if ref_velocity is None else np.asarray(ref_velocity, dtype=float)
    total = 0.0
    for i, law in enumerate(model.laws):
        pt = ThermoPoint(rho=state.rho[i], q=grad(g, state.rho[i]))
        pt_ref = ThermoPoint(rho=ref.rho[i], q=grad(g, ref.rho[i]))
        dens = relative_potential(law, pt, pt_ref) + 0.5 * state.rho[i] * (v[i] - v_ref[i]) ** 2
        total += float(integrate(g, dens))
    return total


# -- audits and rates ---------------------------------------------------


def energy_audit(trajectory, tol_coefficient: float = 20.0) -> EnergyAuditReport:
    """Check the discrete energy inequality over a recorded trajectory.

    Accumulates dt * friction_dissipation / eps across step records and
    requires E(t) plus the accumulated dissipation never to exceed E(0) by
    more than C (dx^2 + max dt) T. Effective-system runs record their
    dissipation as eps^2 grad-mu D grad-mu, which makes the same formula
    meaningful for every solver; eps = 0 runs dissipate nothing.
    """
    records: Sequence[DiagnosticsRecord] = trajectory.records
    if not records:
        raise ValueError("trajectory has no diagnostics records")
    eps = trajectory.model.eps
    e0 = records[0].e_tot
    cum = 0.0
    worst = -np.inf
    worst_abs = 0.0
    max_dt = 0.0
    for rec in records:
        if rec.dt > 0 and eps > 0:
            cum += rec.dt * rec.friction_dissipation / eps
        imbalance = rec.e_tot + cum - e0
        worst = max(worst, imbalance)
        worst_abs = max(worst_abs, abs(imbalance))
        max_dt = max(max_dt, rec.dt)
    grid = trajectory.states[0].grid
    horizon = records[-1].t - records[0].t
    tol = tol_coefficient * (grid.dx**2 + max_dt) * horizon
    return EnergyAuditReport(
        e_initial=e0,
        excess=float(worst),
        max_abs_imbalance=float(worst_abs),
        tolerance=float(tol),
        passed=bool(worst <= tol),
    )


def loglog_fit(eps: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Least-squares line through (log eps, log value); returns (slope, intercept)."""
    slope, intercept = np.polyfit(np.log(np.asarray(eps, dtype=float)),
                                  np.log(np.asarray(values, dtype=float)), 1)
    return float(slope), float(intercept)


def convergence_rate(rows: Sequence[tuple[float, float]]) -> float:
    """Fitted slope of log sup-chi against log eps.

    Rows with nonpositive chi carry no information on a log scale and are
    dropped; fewer than two surviving rows is an error.
    """
    usable = [(e, c) for e, c in rows if c > 0 and e > 0]
    if len(usable) < 2:
        raise ValueError("need at least two rows with positive chi for a rate fit")
    eps = np.array([e for e, _ in usable])
    vals = np.array([c for _, c in usable])
    slope, _ = loglog_fit(eps, vals)
    return slope


def relative_stresses(
    law: EnergyLaw, pt: ThermoPoint, pt_hat: ThermoPoint
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Taylor remainders of the stress triple (s, r, H) about pt_hat.

    Each component is g(pt) - g(pt_hat) - g_rho(pt_hat) drho - g_q(pt_hat) dq,
    which vanishes to second order as pt -> pt_hat.
    """
    s, r, big_h = stress_components(law, pt)
    s_hat, r_hat, h_hat = stress_components(law, pt_hat)
    partials = stress_partials(law, pt_hat)
    drho = np.asarray(pt.rho, dtype=float) - np.asarray(pt_hat.rho, dtype=float)
    dq = np.asarray(pt.q, dtype=float) - np.asarray(pt_hat.q, dtype=float)
    s_rel = s - s_hat - partials["s_rho"] * drho - partials["s_q"] * dq
    r_rel = r - r_hat - partials["r_rho"] * drho - partials["r_q"] * dq
    h_rel = big_h - h_hat - partials["H_rho"] * drho - partials["H_q"] * dq
    return s_rel, r_rel, h_rel
