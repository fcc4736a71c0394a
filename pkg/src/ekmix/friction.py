"""Dense small-matrix algebra for the interspecies friction operator.

Everything operates on a single density vector (one spatial point); the
solver layer batches these over grid cells. Central objects: the friction
matrix (a weighted graph Laplacian built from couplings b and densities),
its reduced inverse, the Maxwell-Stefan diffusion matrix, and the
parabolicity / coercivity certificates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Rank and connectivity decisions use singular-value ratios against this
# threshold; n is small and the algebra well conditioned, so one value serves.
SVD_RTOL = 1e-10


def _check_b(b: np.ndarray) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValueError("friction coupling matrix must be square")
    if not np.array_equal(b, b.T):
        raise ValueError("friction matrix not symmetric")
    off = b[~np.eye(b.shape[0], dtype=bool)]
    if off.size and np.any(off < 0):
        raise ValueError("friction couplings must be nonnegative")
    return b


def _check_rho_vec(rho: np.ndarray, n: int) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (n,):
        raise ValueError(f"density vector must have shape ({n},)")
    if np.any(rho <= 0):
        raise ValueError("densities must be positive")
    return rho


@dataclass(frozen=True)
class ConnectivityReport:
    connected: bool
    rank_ok: bool
    sigma_ratio_kept: float  # sigma_{n-1}/sigma_1, should exceed SVD_RTOL
    sigma_ratio_dropped: float  # sigma_n/sigma_1, should fall below SVD_RTOL

    @property
    def passed(self) -> bool:
        return self.connected and self.rank_ok


def check_connectivity(b: np.ndarray, rng: np.random.Generator | None = None) -> ConnectivityReport:
    """Check that the coupling graph {b_ij > 0} connects all species.

    Connectivity guarantees the friction operator's null space is exactly
    the constant velocity vector. The report also confirms rank n-1 of the
    friction matrix at a random positive density via singular values.
    """
    b = _check_b(b)
    n = b.shape[0]
    # breadth-first search over the positive-coupling graph
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        i = stack.pop()
        for j in np.nonzero(b[i] > 0)[0]:
            if j != i and not seen[j]:
                seen[j] = True
                stack.append(j)
    connected = bool(seen.all())

    if n == 1:
        return ConnectivityReport(True, True, 1.0, 0.0)
    rng = rng or np.random.default_rng(0)
    rho = rng.uniform(0.5, 2.0, size=n)
    sig = np.linalg.svd(friction_matrix(b, rho), compute_uv=False)
    kept = float(sig[n - 2] / sig[0]) if sig[0] > 0 else 0.0
    dropped = float(sig[n - 1] / sig[0]) if sig[0] > 0 else 0.0
    rank_ok = kept > SVD_RTOL and dropped < SVD_RTOL
    return ConnectivityReport(connected, rank_ok, kept, dropped)


def friction_matrix(b: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Friction matrix at one point: off-diagonal -b_ij rho_i rho_j, rows
    summing to zero. Symmetric PSD with rank n-1 on a connected graph."""
    b = _check_b(b)
    n = b.shape[0]
    rho = _check_rho_vec(rho, n)
    w = b * np.outer(rho, rho)
    np.fill_diagonal(w, 0.0)
    tau = -w
    np.fill_diagonal(tau, w.sum(axis=1))
    return tau


@dataclass(frozen=True)
class ReducedOperators:
    """Pointwise reduced friction operators for a density vector.

    tau_red_inv inverts the leading principal (n-1) block of the friction
    matrix; q_inv has entries delta_ij rho_i - rho_i rho_j / rho; d_tilde is
    the SPD core q_inv @ tau_red_inv @ q_inv; d_full is the n x n diffusion
    matrix G @ d_tilde @ G^T with the mass-conservation kernel D 1 = 0.
    """

    rho: np.ndarray
    tau_red_inv: np.ndarray
    q_inv: np.ndarray
    d_tilde: np.ndarray
    d_full: np.ndarray
    g: np.ndarray


def reduced_operators(b: np.ndarray, rho: np.ndarray) -> ReducedOperators:
    """Build the reduced solve/diffusion operators at one density vector.

    The leading principal (n-1) block is always the one inverted; on a
    connected coupling graph every principal block is invertible, so a
    singular block is a structural error, not a case to work around.
    """
    b = _check_b(b)
    n = b.shape[0]
    rho = _check_rho_vec(rho, n)
    tau = friction_matrix(b, rho)
    m = n - 1
    tau_red = tau[:m, :m]
    if m > 0:
        sig = np.linalg.svd(tau_red, compute_uv=False)
        if sig[0] == 0.0 or sig[-1] / sig[0] <= SVD_RTOL:
            raise ValueError(
                "leading principal block of the friction matrix is singular; "
                "coupling graph is not connected"
            )
        tau_red_inv = np.linalg.inv(tau_red)
    else:
        tau_red_inv = np.zeros((0, 0))
    total = rho.sum()
    q_inv = np.diag(rho[:m]) - np.outer(rho[:m], rho[:m]) / total
    d_tilde = q_inv @ tau_red_inv @ q_inv
    g = np.zeros((n, m))
    g[:m, :] = np.eye(m)
    g[m, :] = -1.0
    d_full = g @ d_tilde @ g.T
    return ReducedOperators(
        rho=rho, tau_red_inv=tau_red_inv, q_inv=q_inv, d_tilde=d_tilde,
        d_full=d_full, g=g,
    )


def q_matrix(rho: np.ndarray) -> np.ndarray:
    """The (n-1) x (n-1) matrix Q with Q_ij = delta_ij / rho_j + 1/rho_n,
    the inverse of the q_inv block of ReducedOperators."""
    rho = np.asarray(rho, dtype=float)
    n = rho.shape[0]
    m = n - 1
    return np.diag(1.0 / rho[:m]) + 1.0 / rho[m]


def solve_constrained(b: np.ndarray, rho: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Solve the friction system for relative velocities u.

    Returns the unique u with -sum_j b_ij rho_i rho_j (u_i - u_j) = d_i for
    every i and the constraint sum_i rho_i u_i = 0. The data d must sum to
    zero (the friction rows do); an unbalanced d is a precondition error.
    """
    b = _check_b(b)
    n = b.shape[0]
    rho = _check_rho_vec(rho, n)
    d = np.asarray(d, dtype=float)
    if d.shape != (n,):
        raise ValueError(f"data vector must have shape ({n},)")
    norm_d = float(np.linalg.norm(d))
    if abs(d.sum()) > 1e-10 * max(norm_d, 1e-300):
        raise ValueError("friction data must sum to zero across species")
    if n == 1:
        return np.zeros(1)
    ops = reduced_operators(b, rho)
    m = n - 1
    rho_u = np.empty(n)
    rho_u[:m] = -ops.q_inv @ (ops.tau_red_inv @ d[:m])
    rho_u[m] = -rho_u[:m].sum()
    return rho_u / rho


def driving_force(rho: np.ndarray, grad_mu: np.ndarray) -> np.ndarray:
    """Maxwell-Stefan driving force from chemical-potential gradients.

    d_i = rho_i grad_mu_i - (rho_i / rho) sum_j rho_j grad_mu_j; the last
    entry is set to minus the sum of the others so that sum_i d_i = 0
    exactly, which the constrained solver requires.
    """
    rho = np.asarray(rho, dtype=float)
    grad_mu = np.asarray(grad_mu, dtype=float)
    n = rho.shape[0]
    mean = (rho * grad_mu).sum() / rho.sum()
    d = np.empty(n)
    d[: n - 1] = rho[: n - 1] * (grad_mu[: n - 1] - mean)
    d[n - 1] = -d[: n - 1].sum()
    return d


def relative_velocity_flux(ops: ReducedOperators, eps: float, grad_mu: np.ndarray) -> np.ndarray:
    """First-order mass fluxes rho_i u_i = -eps sum_j D_ij grad_mu_j.

    Fluxes sum to zero exactly; equivalent to rho_i times the constrained
    solve applied to eps times the driving force.
    """
    grad_mu = np.asarray(grad_mu, dtype=float)
    n = ops.rho.shape[0]
    m = n - 1
    flux = np.empty(n)
    # D rows 1..n-1 equal d_tilde @ (grad_mu_j - grad_mu_n)
    flux[:m] = -eps * (ops.d_tilde @ (grad_mu[:m] - grad_mu[m]))
    flux[m] = -flux[:m].sum()
    return flux


def reduced_energy_hessian(h2: np.ndarray) -> np.ndarray:
    """Reduced Hessian of the total internal energy at fixed total density.

    With the last density eliminated, the reduction map has Jacobian
    A = [I; -1 ... -1], so A^T diag(h_i''(rho_i)) A has entries
    delta_jk h_j'' + h_n''. Takes the vector of h_i''(rho_i) values.
    """
    h2 = np.asarray(h2, dtype=float)
    n = h2.shape[0]
    m = n - 1
    return np.diag(h2[:m]) + h2[m]


@dataclass(frozen=True)
class ParabolicitySpectrum:
    eigenvalues: np.ndarray
    min_eigenvalue: float
    passed: bool


def parabolicity_check(ops: ReducedOperators, hessian_red: np.ndarray) -> ParabolicitySpectrum:
    """Spectrum of d_tilde @ hessian_red via Cholesky similarity.

    With hessian_red = L L^T, the product is similar to the symmetric
    L^T d_tilde L, so the spectrum is real; it is positive exactly when
    d_tilde is positive definite. Passes iff the minimum eigenvalue is
    positive.
    """
    hess = np.asarray(hessian_red, dtype=float)
    if hess.size and not np.allclose(hess, hess.T, rtol=0, atol=1e-12 * max(1.0, float(np.abs(hess).max()))):
        raise ValueError("reduced Hessian must be symmetric")
    try:
        chol = np.linalg.cholesky(hess) if hess.size else np.zeros((0, 0))
    except np.linalg.LinAlgError as exc:
        raise ValueError("reduced Hessian must be positive definite") from exc
    sym = chol.T @ ops.d_tilde @ chol
    eig = np.linalg.eigvalsh(sym) if sym.size else np.zeros(0)
    min_eig = float(eig.min()) if eig.size else np.inf
    return ParabolicitySpectrum(eigenvalues=eig, min_eigenvalue=min_eig, passed=min_eig > 0.0)


def coercivity_constant(b: np.ndarray, rho: np.ndarray) -> float:
    """Largest certified nu with
    friction_dissipation >= nu * sum_i rho_i^2 |v_i - v|^2 (v barycentric).

    nu = lambda_min(Q^T tau_red Q) / n with Q from q_matrix. For a single
    species the right-hand side is identically zero and nu is +inf.
    """
    b = _check_b(b)
    n = b.shape[0]
    rho = _check_rho_vec(rho, n)
    if n == 1:
        return float("inf")
    tau_red = friction_matrix(b, rho)[: n - 1, : n - 1]
    q = q_matrix(rho)
    mu = float(np.linalg.eigvalsh(q.T @ tau_red @ q).min())
    return mu / n


def friction_dissipation(b: np.ndarray, rho: np.ndarray, v: np.ndarray) -> float:
    """(1/2) sum_ij b_ij rho_i rho_j |v_i - v_j|^2.

    Equals minus the velocity-weighted sum of friction forces; zero exactly
    when all velocities coincide.
    """
    b = _check_b(b)
    n = b.shape[0]
    rho = _check_rho_vec(rho, n)
    v = np.asarray(v, dtype=float)
    w = b * np.outer(rho, rho)
    np.fill_diagonal(w, 0.0)
    dv = v[:, None] - v[None, :]
    return 0.5 * float((w * dv**2).sum())


def friction_force(b: np.ndarray, rho: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Per-species friction force f_i = -sum_j b_ij rho_i rho_j (v_i - v_j)."""
    b = _check_b(b)
    n = b.shape[0]
    rho = _check_rho_vec(rho, n)
    v = np.asarray(v, dtype=float)
    w = b * np.outer(rho, rho)
    np.fill_diagonal(w, 0.0)
    return -(w * (v[:, None] - v[None, :])).sum(axis=1)


# -- field-batched variants ---------------------------------------------
#
# The solvers evaluate the algebra above at every grid cell of every step;
# these batched forms carry shape (n_species, n_points) fields through
# stacked (n_points, n, n) dense solves instead of a Python loop.


def batched_friction_matrix(b: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """tau at each point of a density field; rho is (n, p), result (p, n, n)."""
    b = _check_b(b)
    n = b.shape[0]
    rho = np.asarray(rho, dtype=float)
    w = b[None, :, :] * rho.T[:, :, None] * rho.T[:, None, :]
    idx = np.arange(n)
    w[:, idx, idx] = 0.0
    tau = -w
    tau[:, idx, idx] = w.sum(axis=2)
    return tau


def batched_diffusion_flux(
    b: np.ndarray, rho: np.ndarray, grad_mu: np.ndarray, eps: float
) -> np.ndarray:
    """Diffusion fluxes rho_i u_i = -eps sum_j D_ij grad mu_j at each point.

    rho and grad_mu are (n, p) fields; the result matches
    relative_velocity_flux applied pointwise. The last species' flux is the
    negated sum of the others, so the fluxes cancel across species exactly.
    """
    rho = np.asarray(rho, dtype=float)
    grad_mu = np.asarray(grad_mu, dtype=float)
    n = rho.shape[0]
    if n == 1:
        return np.zeros_like(rho)
    m = n - 1
    tau = batched_friction_matrix(b, rho)
    try:
        tau_red_inv = np.linalg.inv(tau[:, :m, :m])
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            "leading principal block of the friction matrix is singular; "
            "coupling graph is not connected"
        ) from exc
    rho_t = rho.T  # (p, n)
    total = rho_t.sum(axis=1)
    idx = np.arange(m)
    q_inv = -rho_t[:, :m, None] * rho_t[:, None, :m] / total[:, None, None]
    q_inv[:, idx, idx] += rho_t[:, :m]
    d_tilde = q_inv @ tau_red_inv @ q_inv
    rhs = (grad_mu[:m] - grad_mu[m]).T  # (p, m)
    flux_lead = -eps * np.einsum("pij,pj->pi", d_tilde, rhs)
    flux = np.empty_like(rho)
    flux[:m] = flux_lead.T
    flux[m] = -flux[:m].sum(axis=0)
    return flux


def dissipation_density(b: np.ndarray, rho: np.ndarray, v: np.ndarray) -> np.ndarray:
    """friction_dissipation at each point of (n, p) density/velocity fields."""
    b = _check_b(b)
    rho = np.asarray(rho, dtype=float)
    v = np.asarray(v, dtype=float)
    w = b[:, :, None] * rho[:, None, :] * rho[None, :, :]
    dv = v[:, None, :] - v[None, :, :]
    return 0.5 * np.einsum("ijp,ijp->p", w, dv**2)
