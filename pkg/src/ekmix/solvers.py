"""Time integration for the friction-coupled Euler-Korteweg mixture and its
effective systems.

Three integrators share one method-of-lines core: the stiff relaxation
system (per-species momenta, friction handled by an exact per-cell implicit
solve inside a Strang composition), the first-order effective system (single
barycentric momentum plus cross-species diffusion fluxes), and the
zeroth-order limit (the same with diffusion removed). Convective terms use a
Rusanov flux; capillary terms use centered second-order stencils.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diagnostics import DiagnosticsRecord, mu_fields, species_velocities_effective, total_energy
from .energy import MixtureModel
from .friction import batched_diffusion_flux, batched_friction_matrix, dissipation_density
from .grid import (
    Grid1D,
    MixtureState,
    barycentric_velocity,
    div_flux,
    grad,
    integrate,
    interface_mean,
    laplacian,
)

DT_MIN = 1e-12
MAX_RETRIES = 10

FLUX_KINDS = ("rusanov",)
FRICTION_MODES = ("implicit_exact", "explicit")
SYSTEMS = ("relaxation", "chapman_enskog", "limit")


class SolverFailure(RuntimeError):
    """A step could not be completed at any admissible dt."""


class _StepRejected(Exception):
    # internal signal: retry the step with a smaller dt
    pass


@dataclass(frozen=True)
class SolverParams:
    """Time-integration controls shared by all three systems.

    freeze_velocity pins the barycentric velocity of the effective systems
    to zero, reducing them to a pure Maxwell-Stefan gradient flow; it has no
    effect on the relaxation system.
    """

    t_end: float
    cfl: float = 0.4
    parabolic_safety: float = 0.25
    rho_floor: float = 1e-6
    flux: str = "rusanov"
    friction_mode: str = "implicit_exact"
    snapshots: int = 11
    freeze_velocity: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError("cfl must lie in (0, 1]")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.parabolic_safety <= 0:
            raise ValueError("parabolic_safety must be positive")
        if self.rho_floor <= 0:
            raise ValueError("rho_floor must be positive")
        if self.flux not in FLUX_KINDS:
            raise ValueError(f"unknown flux {self.flux!r}")
        if self.friction_mode not in FRICTION_MODES:
            raise ValueError(f"unknown friction_mode {self.friction_mode!r}")
        if self.snapshots < 1:
            raise ValueError("need at least one snapshot")


@dataclass
class Trajectory:
    """Snapshots at configured times plus the per-step diagnostics stream."""

    model: MixtureModel
    params: SolverParams
    which: str
    times: list[float] = field(default_factory=list)
    states: list[MixtureState] = field(default_factory=list)
    records: list[DiagnosticsRecord] = field(default_factory=list)

    def add_snapshot(self, state: MixtureState) -> None:
        if self.times and state.t <= self.times[-1]:
            raise ValueError("snapshot times must increase strictly")
        self.times.append(state.t)
        self.states.append(state.copy())


# -- spatial right-hand sides -------------------------------------------


def _capillary_face_flux(law, grid: Grid1D, rho: np.ndarray) -> np.ndarray | float:
    """Interface values of the capillary momentum flux C, where the species
    momentum equation reads d/dt m + d/dx(rho v^2 + p - C) = 0 with
    C = -(kappa + rho kappa') q^2 / 2 - kappa q^2 + d/dx(rho kappa q)."""
    if not law.has_capillarity:
        return 0.0
    q = grad(grid, rho)
    kap = law.kappa(rho)
    r = rho * kap * q
    if law.kappa_kind == "quantum":
        s_excess = 0.0  # kappa + rho kappa' = 0 identically
    else:
        s_excess = 0.5 * (kap + rho * law.dkappa(rho)) * q**2
    c_cell = -s_excess - kap * q**2 + grad(grid, r)
    return interface_mean(c_cell)


def _rusanov_pair(
    grid: Grid1D,
    u: np.ndarray,
    flux_cells: np.ndarray,
    a_face: np.ndarray,
) -> np.ndarray:
    """Rusanov interface flux for one conserved field: central average of
    the cell fluxes minus a_face/2 times the jump of u."""
    return 0.5 * (flux_cells + np.roll(flux_cells, -1)) - 0.5 * a_face * (np.roll(u, -1) - u)


def rhs_transport_capillary(model: MixtureModel, state: MixtureState) -> tuple[np.ndarray, np.ndarray]:
    """Convective, pressure and capillary increments of the relaxation
    system; friction is deliberately excluded (the step routines own it).

    Returns (d rho / dt, d m / dt) as (n, cells) arrays.
    """
    g = state.grid
    rho, mom = state.rho, state.mom
    v = mom / rho
    drho = np.empty_like(rho)
    dmom = np.empty_like(mom)
    for i, law in enumerate(model.laws):
        p = rho[i] * law.dh(rho[i]) - law.h(rho[i])
        sound2 = rho[i] * law.d2h(rho[i])
        if np.any(sound2 <= 0) or not np.all(np.isfinite(sound2)):
            raise ValueError("wave speed undefined: density out of range")
        a_cell = np.abs(v[i]) + np.sqrt(sound2)
        a_face = np.maximum(a_cell, np.roll(a_cell, -1))
        f_rho = _rusanov_pair(g, rho[i], mom[i], a_face)
        f_mom = _rusanov_pair(g, mom[i], mom[i] * v[i] + p, a_face)
        f_mom = f_mom - _capillary_face_flux(law, g, rho[i])
        drho[i] = -div_flux(g, f_rho)
        dmom[i] = -div_flux(g, f_mom)
    return drho, dmom


def _explicit_friction_force(model: MixtureModel, rho: np.ndarray, v: np.ndarray) -> np.ndarray:
    tau = batched_friction_matrix(model.b, rho)  # (cells, n, n)
    return -np.einsum("pij,jp->ip", tau, v) / model.eps


def _effective_rhs(
    model: MixtureModel,
    grid: Grid1D,
    rho: np.ndarray,
    p_total: np.ndarray,
    params: SolverParams,
) -> tuple[np.ndarray, np.ndarray]:
    """Transport and capillary increments of the effective systems:
    (d rho_i/dt, d(rho v_hat)/dt). Diffusion fluxes are handled separately
    by _diffusion_substep.

    Species densities are transported by the common barycentric velocity;
    the single momentum equation carries the total pressure and the summed
    capillary fluxes.
    """
    rho_tot = rho.sum(axis=0)
    drho = np.zeros_like(rho)
    if params.freeze_velocity:
        dp = np.zeros_like(p_total)
    else:
        v_hat = p_total / rho_tot
        sound2_mix = np.zeros_like(rho_tot)
        p_sum = np.zeros_like(rho_tot)
        for i, law in enumerate(model.laws):
            p_sum += rho[i] * law.dh(rho[i]) - law.h(rho[i])
            sound2_mix += rho[i] * (rho[i] * law.d2h(rho[i]))
        sound2_mix = sound2_mix / rho_tot
        if np.any(sound2_mix <= 0) or not np.all(np.isfinite(sound2_mix)):
            raise ValueError("wave speed undefined: density out of range")
        a_cell = np.abs(v_hat) + np.sqrt(sound2_mix)
        a_face = np.maximum(a_cell, np.roll(a_cell, -1))
        for i in range(model.n):
            f_i = _rusanov_pair(grid, rho[i], rho[i] * v_hat, a_face)
            drho[i] = -div_flux(grid, f_i)
        f_p = _rusanov_pair(grid, p_total, p_total * v_hat + p_sum, a_face)
        for i, law in enumerate(model.laws):
            f_p = f_p - _capillary_face_flux(law, grid, rho[i])
        dp = -div_flux(grid, f_p)
    return drho, dp


def _diffusion_matrix_norm(model: MixtureModel, rho: np.ndarray) -> float:
    """Pointwise infinity norm of D = G d_tilde G^T, maximized over cells."""
    m = model.n - 1
    tau = batched_friction_matrix(model.b, rho)
    tau_red_inv = np.linalg.inv(tau[:, :m, :m])
    rho_t = rho.T
    idx = np.arange(m)
    q_inv = -rho_t[:, :m, None] * rho_t[:, None, :m] / rho_t.sum(axis=1)[:, None, None]
    q_inv[:, idx, idx] += rho_t[:, :m]
    d_tilde = q_inv @ tau_red_inv @ q_inv
    row_abs = np.abs(d_tilde).sum(axis=2)
    row_sum = d_tilde.sum(axis=2)
    lead = (row_abs + np.abs(row_sum)).max(axis=1)
    last = np.abs(row_sum).sum(axis=1) + np.abs(row_sum.sum(axis=1))
    return float(np.maximum(lead, last).max())


def _diffusion_substep(model: MixtureModel, grid: Grid1D, rho: np.ndarray, dt: float) -> np.ndarray:
    """Advance the Maxwell-Stefan diffusion sub-flow by dt.

    The capillary part of mu makes div(D grad mu) fourth order, so a naive
    explicit treatment would need dt of order dx^4/eps. Instead the flux is
    evaluated explicitly and filtered through (I + dt L)^(-1), where L is a
    constant-coefficient stabilizer -s2 Delta + s4 Delta^2 whose symbol
    dominates the frozen-coefficient linearization of the flux. L is
    diagonalized exactly by the FFT on the periodic grid; using one shared
    stabilizer for every species keeps the exact cross-species flux
    cancellation, so total density is still conserved.
    """
    rho_face = interface_mean(rho)
    mu = mu_fields(model, grid, rho)
    dmu_face = (np.roll(mu, -1, axis=-1) - mu) / grid.dx
    g_flux = batched_diffusion_flux(model.b, rho_face, dmu_face, model.eps)
    rhs = -div_flux(grid, g_flux)

    d_norm = _diffusion_matrix_norm(model, rho)
    s2 = model.eps * d_norm * max(float(np.max(law.d2h(rho[i]))) for i, law in enumerate(model.laws))
    s4 = model.eps * d_norm * max(
        (float(np.max(law.kappa(rho[i]))) for i, law in enumerate(model.laws) if law.has_capillarity),
        default=0.0,
    )
    sym = (2.0 - 2.0 * np.cos(2.0 * np.pi * np.fft.rfftfreq(grid.n_cells))) / grid.dx**2
    denom = 1.0 + dt * (s2 * sym + s4 * sym**2)
    delta = np.fft.irfft(np.fft.rfft(rhs, axis=-1) / denom, n=grid.n_cells, axis=-1)
    return rho + dt * delta


# -- friction substep ---------------------------------------------------


def implicit_friction_step(model: MixtureModel, state: MixtureState, dt: float) -> MixtureState:
    """Exact backward-Euler friction update at frozen densities.

    Per cell, solves (diag(rho) + (dt/eps) tau) v' = m; densities are
    untouched and the cell's total momentum is conserved (tau has the
    constant vector in its kernel).
    """
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if model.n == 1 or not np.any(model.b):
        return state.copy()
    if model.eps <= 0:
        raise SolverFailure("implicit friction step requires eps > 0")
    a = (dt / model.eps) * batched_friction_matrix(model.b, state.rho)
    idx = np.arange(model.n)
    a[:, idx, idx] += state.rho.T
    v_new = np.linalg.solve(a, state.mom.T[:, :, None])[..., 0].T
    return MixtureState(state.grid, state.rho.copy(), state.rho * v_new, state.t)


# -- time-step control --------------------------------------------------


def _dt_hyperbolic(grid: Grid1D, model: MixtureModel, state: MixtureState, params: SolverParams) -> float:
    v = state.mom / state.rho
    a_max = 0.0
    for i, law in enumerate(model.laws):
        sound = np.sqrt(state.rho[i] * law.d2h(state.rho[i]))
        a_max = max(a_max, float((np.abs(v[i]) + sound).max()))
    return params.cfl * grid.dx / a_max if a_max > 0 else np.inf


def _dt_hyperbolic_effective(grid, model, rho, p_total, params) -> float:
    rho_tot = rho.sum(axis=0)
    v_hat = p_total / rho_tot
    sound2 = sum(rho[i] ** 2 * model.laws[i].d2h(rho[i]) for i in range(model.n)) / rho_tot
    a_max = float((np.abs(v_hat) + np.sqrt(sound2)).max())
    return params.cfl * grid.dx / a_max if a_max > 0 else np.inf


def _dt_capillary(grid: Grid1D, model: MixtureModel, rho: np.ndarray, params: SolverParams) -> float:
    """Dispersive restriction: the capillary branch of the symbol grows like
    sqrt(rho kappa) k^2, so dt scales with dx^2 over that coefficient."""
    coeff = 0.0
    for i, law in enumerate(model.laws):
        if law.has_capillarity:
            coeff = max(coeff, 2.0 * float(np.sqrt(rho[i] * law.kappa(rho[i])).max()))
    return params.parabolic_safety * grid.dx**2 / coeff if coeff > 0 else np.inf


def _dt_diffusive(grid: Grid1D, model: MixtureModel, rho: np.ndarray, params: SolverParams) -> float:
    """Restriction from the eps-scaled Maxwell-Stefan fluxes: dt below
    dx^2 / (eps * ||D|| * max h''), measured with the infinity norm."""
    if model.eps <= 0 or model.n == 1:
        return np.inf
    n, m = model.n, model.n - 1
    tau = batched_friction_matrix(model.b, rho)
    tau_red_inv = np.linalg.inv(tau[:, :m, :m])
    rho_t = rho.T
    idx = np.arange(m)
    q_inv = -rho_t[:, :m, None] * rho_t[:, None, :m] / rho_t.sum(axis=1)[:, None, None]
    q_inv[:, idx, idx] += rho_t[:, :m]
    d_tilde = q_inv @ tau_red_inv @ q_inv
    # infinity norm of D = G d_tilde G^T assembled from row sums of d_tilde
    row_abs = np.abs(d_tilde).sum(axis=2)
    row_sum = d_tilde.sum(axis=2)
    lead = (row_abs + np.abs(row_sum)).max(axis=1)
    last = np.abs(row_sum).sum(axis=1) + np.abs(row_sum.sum(axis=1))
    d_norm = float(np.maximum(lead, last).max())
    h2_max = max(float(np.max(model.laws[i].d2h(rho[i]))) for i in range(n))
    denom = model.eps * d_norm * h2_max
    return params.parabolic_safety * grid.dx**2 / denom if denom > 0 else np.inf


# -- step drivers -------------------------------------------------------


def _guarded(grid: Grid1D, rho: np.ndarray, mom: np.ndarray, t: float, floor: float) -> MixtureState:
    state = MixtureState(grid, rho, mom, t)
    try:
        state.validate(floor)
    except ValueError as exc:
        raise _StepRejected from exc
    return state


def _attempt_relaxation(model, state, params, dt) -> MixtureState:
    half_friction = params.friction_mode == "implicit_exact" and model.n > 1 and np.any(model.b)
    s = implicit_friction_step(model, state, 0.5 * dt) if half_friction else state

    def rhs(st: MixtureState) -> tuple[np.ndarray, np.ndarray]:
        try:
            drho, dmom = rhs_transport_capillary(model, st)
        except ValueError as exc:  # thermodynamic domain violation at a stage
            raise _StepRejected from exc
        if params.friction_mode == "explicit" and np.any(model.b):
            dmom = dmom + _explicit_friction_force(model, st.rho, st.mom / st.rho)
        return drho, dmom

    d1r, d1m = rhs(s)
    mid = _guarded(s.grid, s.rho + dt * d1r, s.mom + dt * d1m, s.t, params.rho_floor)
    d2r, d2m = rhs(mid)
    out = _guarded(
        s.grid,
        0.5 * (s.rho + mid.rho + dt * d2r),
        0.5 * (s.mom + mid.mom + dt * d2m),
        s.t,
        params.rho_floor,
    )
    if half_friction:
        out = implicit_friction_step(model, out, 0.5 * dt)
    out.t = state.t + dt
    return out


def step_relaxation(
    model: MixtureModel, state: MixtureState, params: SolverParams, dt_limit: float | None = None
) -> tuple[MixtureState, float]:
    """One adaptive step of the stiff relaxation system.

    Strang composition: half implicit friction, SSP-RK2 transport and
    capillarity, half implicit friction. Floor or finiteness violations
    halve dt and retry up to MAX_RETRIES times.
    """
    dt = min(
        _dt_hyperbolic(state.grid, model, state, params),
        _dt_capillary(state.grid, model, state.rho, params),
        dt_limit if dt_limit is not None else np.inf,
    )
    if not np.isfinite(dt):
        raise SolverFailure("no finite dt restriction; state carries no dynamics")
    for _ in range(MAX_RETRIES + 1):
        if dt < DT_MIN:
            break
        try:
            return _attempt_relaxation(model, state, params, dt), dt
        except _StepRejected:
            dt *= 0.5
    raise SolverFailure(
        f"relaxation step failed at t={state.t:.6g}: dt underflow after repeated rejections"
    )


def _reject_unless_admissible(rho: np.ndarray, p_total: np.ndarray, floor: float) -> None:
    if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(p_total))):
        raise _StepRejected
    if rho.min() < floor:
        raise _StepRejected


def _attempt_effective(model, state, params, dt, include_diffusion) -> MixtureState:
    g = state.grid
    rho0 = state.rho
    p0 = state.mom.sum(axis=0)

    def rhs(rho, p_total):
        try:
            return _effective_rhs(model, g, rho, p_total, params, include_diffusion)
        except ValueError as exc:
            raise _StepRejected from exc

    d1r, d1p = rhs(rho0, p0)
    rho1 = rho0 + dt * d1r
    p1 = p0 + dt * d1p
    _reject_unless_admissible(rho1, p1, params.rho_floor)
    d2r, d2p = rhs(rho1, p1)
    rho2 = 0.5 * (rho0 + rho1 + dt * d2r)
    p2 = 0.5 * (p0 + p1 + dt * d2p)
    _reject_unless_admissible(rho2, p2, params.rho_floor)
    v_hat = p2 / rho2.sum(axis=0)
    out = MixtureState(g, rho2, rho2 * v_hat, state.t + dt)
    return out


def _step_effective(model, state, params, dt_limit, include_diffusion):
    rho = state.rho
    p_total = state.mom.sum(axis=0)
    dt = min(
        _dt_hyperbolic_effective(state.grid, model, rho, p_total, params),
        _dt_capillary(state.grid, model, rho, params),
        _dt_diffusive(state.grid, model, rho, params) if include_diffusion else np.inf,
        dt_limit if dt_limit is not None else np.inf,
    )
    if not np.isfinite(dt):
        raise SolverFailure("no finite dt restriction; state carries no dynamics")
    for _ in range(MAX_RETRIES + 1):
        if dt < DT_MIN:
            break
        try:
            return _attempt_effective(model, state, params, dt, include_diffusion), dt
        except _StepRejected:
            dt *= 0.5
    raise SolverFailure(
        f"effective step failed at t={state.t:.6g}: dt underflow after repeated rejections"
    )


def step_chapman_enskog(
    model: MixtureModel, state: MixtureState, params: SolverParams, dt_limit: float | None = None
) -> tuple[MixtureState, float]:
    """One step of the first-order effective system. At eps = 0 the
    diffusion branch is skipped entirely, so the increments are bitwise
    those of step_limit."""
    return _step_effective(model, state, params, dt_limit, include_diffusion=model.eps > 0)


def step_limit(
    model: MixtureModel, state: MixtureState, params: SolverParams, dt_limit: float | None = None
) -> tuple[MixtureState, float]:
    """One step of the zeroth-order limit system (no diffusion fluxes)."""
    return _step_effective(model, state, params, dt_limit, include_diffusion=False)


_STEPPERS = {
    "relaxation": step_relaxation,
    "chapman_enskog": step_chapman_enskog,
    "limit": step_limit,
}


# -- trajectory driver --------------------------------------------------


def _species_velocities_for(model: MixtureModel, state: MixtureState, which: str) -> np.ndarray:
    if which == "relaxation":
        return state.mom / state.rho
    if which == "chapman_enskog":
        return species_velocities_effective(model, state)
    return np.broadcast_to(barycentric_velocity(state), state.rho.shape)


def _make_record(model, state, which, dt) -> DiagnosticsRecord:
    g = state.grid
    v_species = _species_velocities_for(model, state, which)
    diss = float(integrate(g, dissipation_density(model.b, state.rho, v_species)))
    v_hat = barycentric_velocity(state)
    return DiagnosticsRecord(
        t=state.t,
        dt=dt,
        e_tot=total_energy(model, state),
        masses=tuple(float(m) for m in integrate(g, state.rho)),
        momentum=float(integrate(g, state.mom.sum(axis=0))),
        friction_dissipation=diss,
        min_rho=float(state.rho.min()),
        max_grad_v=float(np.abs(grad(g, v_hat)).max()),
        max_grad_div_v=float(np.abs(laplacian(g, v_hat)).max()),
    )


def run(model: MixtureModel, init: MixtureState, params: SolverParams, which: str) -> Trajectory:
    """Integrate to t_end, capturing snapshots at evenly spaced times and a
    diagnostics record for the initial state and every accepted step.

    Deterministic: identical inputs give bitwise-identical trajectories.
    """
    if which not in _STEPPERS:
        raise ValueError(f"unknown system {which!r}; expected one of {SYSTEMS}")
    init.validate(params.rho_floor)
    step = _STEPPERS[which]
    state = init.copy()
    traj = Trajectory(model=model, params=params, which=which)
    traj.add_snapshot(state)
    traj.records.append(_make_record(model, state, which, 0.0))
    if params.t_end == 0:
        return traj
    snap_times = np.linspace(0.0, params.t_end, max(2, params.snapshots))
    for target in snap_times[1:]:
        while target - state.t > 1e-12:
            state, dt_used = step(model, state, params, dt_limit=target - state.t)
            traj.records.append(_make_record(model, state, which, dt_used))
        traj.add_snapshot(state)
    return traj


# -- initial data -------------------------------------------------------


@dataclass(frozen=True)
class InitSpec:
    """Sinusoidal well-prepared initial data.

    Per species: rho_i = base_i (1 + amp_i sin(2 pi mode_i x / L)). Zeroth
    order gives every species the same base velocity; first order adds the
    Maxwell-Stefan drift u_i implied by the initial chemical potentials.
    """

    base_density: tuple[float, ...]
    amplitude: tuple[float, ...]
    mode: tuple[int, ...]
    base_velocity: float = 0.0
    order: str = "zeroth"

    def __post_init__(self) -> None:
        if self.order not in ("zeroth", "first"):
            raise ValueError("order must be 'zeroth' or 'first'")
        if not len(self.base_density) == len(self.amplitude) == len(self.mode):
            raise ValueError("per-species init lists must have equal length")
        if any(b <= 0 for b in self.base_density):
            raise ValueError("base densities must be positive")


def well_prepared_init(
    model: MixtureModel, grid: Grid1D, spec: InitSpec, rho_floor: float = 1e-6
) -> MixtureState:
    """Build relaxation initial data whose distance to the matching
    effective-system initial data vanishes (first order) or whose velocity
    agrees with the limit system (zeroth order)."""
    if len(spec.base_density) != model.n:
        raise ValueError("init spec species count does not match the model")
    x = grid.x
    rho = np.stack([
        base * (1.0 + amp * np.sin(2.0 * np.pi * k * x / grid.length))
        for base, amp, k in zip(spec.base_density, spec.amplitude, spec.mode)
    ])
    if rho.min() < rho_floor:
        raise ValueError("perturbation drives a density below the floor")
    if spec.order == "zeroth" or model.n == 1:
        v = np.full_like(rho, spec.base_velocity)
    else:
        gm = grad(grid, mu_fields(model, grid, rho))
        flux = batched_diffusion_flux(model.b, rho, gm, model.eps)
        v = spec.base_velocity + flux / rho
    return MixtureState(grid, rho, rho * v, 0.0)


def barycentric_projection(state: MixtureState) -> MixtureState:
    """Collapse species momenta onto the common barycentric velocity; this
    is how the effective systems interpret any initial state."""
    v_hat = barycentric_velocity(state)
    return MixtureState(state.grid, state.rho.copy(), state.rho * v_hat[None, :], state.t)
