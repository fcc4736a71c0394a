"""Friction-graph algebra: tau construction, reduced operators, the
constrained solver, diffusion fluxes, and the certificates."""

from __future__ import annotations

import numpy as np
import pytest

from helpers import random_connected_coupling, random_rho

from ekmix.friction import (
    check_connectivity,
    coercivity_constant,
    driving_force,
    friction_dissipation,
    friction_force,
    friction_matrix,
    parabolicity_check,
    q_matrix,
    reduced_energy_hessian,
    reduced_operators,
    relative_velocity_flux,
    solve_constrained,
)

B2 = np.array([[0.0, 1.0], [1.0, 0.0]])
PATH3 = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])


def ensemble(seed=0, count=50, n_lo=2, n_hi=8):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(n_lo, n_hi + 1))
        yield rng, random_connected_coupling(rng, n), random_rho(rng, n)


# -- tau ----------------------------------------------------------------


def test_tau_two_species():
    tau = friction_matrix(B2, np.array([1.0, 2.0]))
    assert np.array_equal(tau, np.array([[2.0, -2.0], [-2.0, 2.0]]))


def test_tau_path_graph():
    tau = friction_matrix(PATH3, np.ones(3))
    expected = np.array([[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]])
    assert np.array_equal(tau, expected)


def test_tau_laplacian_structure():
    for _, b, rho in ensemble(seed=1):
        tau = friction_matrix(b, rho)
        n = len(rho)
        assert np.abs(tau.sum(axis=1)).max() <= 1e-14 * max(1.0, np.abs(tau).max())
        assert np.array_equal(tau, tau.T)
        eigs = np.linalg.eigvalsh(tau)
        assert eigs.min() >= -1e-12 * max(1.0, eigs.max())
        # connected graph: exactly one zero eigenvalue
        assert eigs[1] > 1e-10 * eigs.max() or n == 1


def test_tau_rejects_asymmetric_b():
    with pytest.raises(ValueError, match="friction matrix not symmetric"):
        friction_matrix(np.array([[0.0, 1.0], [2.0, 0.0]]), np.ones(2))


# -- connectivity -------------------------------------------------------


def test_connectivity_path_graph():
    rep = check_connectivity(PATH3)
    assert rep.connected and rep.rank_ok and rep.passed


def test_connectivity_disconnected_blocks():
    b = np.zeros((4, 4))
    b[0, 1] = b[1, 0] = 1.0
    b[2, 3] = b[3, 2] = 1.0  # two components
    rep = check_connectivity(b)
    assert not rep.connected
    assert not rep.passed


def test_connectivity_single_species():
    rep = check_connectivity(np.zeros((1, 1)))
    assert rep.passed


# -- reduced operators --------------------------------------------------


def test_reduced_operators_symmetric_pair():
    ops = reduced_operators(B2, np.array([1.0, 1.0]))
    assert ops.tau_red_inv == pytest.approx(np.array([[1.0]]))
    assert ops.q_inv == pytest.approx(np.array([[0.5]]))
    assert ops.d_tilde == pytest.approx(np.array([[0.25]]))
    assert ops.d_full == pytest.approx(np.array([[0.25, -0.25], [-0.25, 0.25]]))


def test_q_inverse_is_inverse_of_q():
    for _, b, rho in ensemble(seed=2):
        ops = reduced_operators(b, rho)
        m = len(rho) - 1
        if m == 0:
            continue
        prod = q_matrix(rho) @ ops.q_inv
        assert np.abs(prod - np.eye(m)).max() <= 1e-12


def test_diffusion_matrix_structure():
    for _, b, rho in ensemble(seed=3):
        ops = reduced_operators(b, rho)
        d = ops.d_full
        n = len(rho)
        assert np.abs(d - d.T).max() <= 1e-12 * max(1.0, np.abs(d).max())
        assert np.abs(d @ np.ones(n)).max() <= 1e-10 * max(1.0, np.abs(d).max())
        eigs = np.linalg.eigvalsh(0.5 * (d + d.T))
        assert eigs.min() >= -1e-10 * max(1.0, eigs.max())
        if n > 1:
            # d_tilde strictly positive definite
            dt_eigs = np.linalg.eigvalsh(0.5 * (ops.d_tilde + ops.d_tilde.T))
            assert dt_eigs.min() > 0


def test_disconnected_graph_rejected_by_reduction():
    b = np.zeros((4, 4))
    b[0, 1] = b[1, 0] = 1.0
    b[2, 3] = b[3, 2] = 1.0
    with pytest.raises(ValueError, match="not connected"):
        reduced_operators(b, np.ones(4))


# -- constrained solve --------------------------------------------------


def test_solve_constrained_symmetric_pair():
    u = solve_constrained(B2, np.array([1.0, 1.0]), np.array([1.0, -1.0]))
    assert u == pytest.approx(np.array([-0.5, 0.5]))


def test_solve_constrained_rejects_unbalanced_data():
    with pytest.raises(ValueError, match="sum to zero"):
        solve_constrained(B2, np.ones(2), np.array([1.0, 0.0]))


def test_solve_constrained_residuals_and_ls_oracle():
    """-tau u = d and sum(rho u) = 0, cross-checked against a stacked
    least-squares solve of the same constrained system."""
    for _, b, rho in ensemble(seed=4, count=60):
        n = len(rho)
        tau = friction_matrix(b, rho)
        raw = np.random.default_rng(n).normal(size=n)
        d = raw - np.full(n, raw.sum() / n)
        d[-1] -= d.sum()  # exact zero sum
        u = solve_constrained(b, rho, d)

        scale = np.linalg.norm(d) + 1.0
        assert np.linalg.norm(-tau @ u - d) <= 1e-10 * scale
        assert abs(rho @ u) <= 1e-10 * scale

        stacked = np.vstack([-tau, rho[None, :]])
        target = np.concatenate([d, [0.0]])
        u_ls, *_ = np.linalg.lstsq(stacked, target, rcond=None)
        assert np.linalg.norm(u - u_ls) <= 1e-9 * (1.0 + np.linalg.norm(u_ls))


def test_solve_constrained_single_species():
    u = solve_constrained(np.zeros((1, 1)), np.array([2.0]), np.array([0.0]))
    assert np.array_equal(u, np.zeros(1))


# -- driving force and flux ---------------------------------------------


def test_driving_force_example():
    d = driving_force(np.array([1.0, 1.0]), np.array([1.0, 0.0]))
    assert d == pytest.approx(np.array([0.5, -0.5]))
    assert d.sum() == 0.0  # exact, last entry is the negated partial sum


def test_driving_force_uniform_gradient_vanishes():
    rho = np.array([1.0, 2.0, 3.0])
    d = driving_force(rho, np.full(3, 1.7))
    assert np.abs(d).max() <= 1e-15


def test_flux_example_and_two_path_equivalence():
    rho = np.array([1.0, 1.0])
    ops = reduced_operators(B2, rho)
    flux = relative_velocity_flux(ops, 1.0, np.array([1.0, 0.0]))
    assert flux == pytest.approx(np.array([-0.25, 0.25]))
    assert flux.sum() == 0.0

    # path 2: solve the friction system with the driving force, then rho*u
    for eps in (1.0, 0.05):
        for _, b, rho in ensemble(seed=5, count=40):
            rng = np.random.default_rng(len(rho))
            grad_mu = rng.normal(size=len(rho))
            ops = reduced_operators(b, rho)
            f1 = relative_velocity_flux(ops, eps, grad_mu)
            u = solve_constrained(b, rho, driving_force(rho, grad_mu))
            f2 = eps * rho * u
            assert np.abs(f1 - f2).max() <= 1e-10 * max(1.0, np.abs(f1).max())


# -- parabolicity -------------------------------------------------------


def test_parabolicity_reduced_pair():
    ops = reduced_operators(B2, np.array([1.0, 1.0]))
    e2 = reduced_energy_hessian(np.array([1.0, 1.0]))
    assert e2 == pytest.approx(np.array([[2.0]]))
    spec = parabolicity_check(ops, e2)
    assert spec.passed
    assert spec.eigenvalues == pytest.approx(np.array([0.5]))


def test_parabolicity_identity_pair():
    ops = reduced_operators(B2, np.array([1.0, 1.0]))
    spec = parabolicity_check(ops, np.eye(1) * 4.0)
    assert spec.eigenvalues == pytest.approx(np.array([1.0]))


def test_parabolicity_matches_general_eigensolver():
    for _, b, rho in ensemble(seed=6, count=40):
        n = len(rho)
        if n == 1:
            continue
        rng = np.random.default_rng(n + 100)
        h2 = rng.uniform(0.5, 4.0, size=n)
        ops = reduced_operators(b, rho)
        e2 = reduced_energy_hessian(h2)
        spec = parabolicity_check(ops, e2)
        assert spec.passed and spec.min_eigenvalue > 0
        assert np.all(np.isreal(spec.eigenvalues))

        raw = np.linalg.eigvals(ops.d_tilde @ e2)
        assert np.abs(np.imag(raw)).max() <= 1e-8
        assert np.allclose(np.sort(np.real(raw)), np.sort(spec.eigenvalues), atol=1e-8)


def test_parabolicity_rejects_indefinite_hessian():
    ops = reduced_operators(random_connected_coupling(np.random.default_rng(0), 3), np.ones(3))
    bad = np.array([[1.0, 0.0], [0.0, -1.0]])
    with pytest.raises(ValueError, match="positive definite"):
        parabolicity_check(ops, bad)


# -- coercivity ---------------------------------------------------------


def test_coercivity_symmetric_pair_equality():
    nu = coercivity_constant(B2, np.array([1.0, 1.0]))
    assert nu == pytest.approx(2.0)
    rng = np.random.default_rng(11)
    rho = np.array([1.0, 1.0])
    for _ in range(20):
        v = rng.normal(size=2)
        vbar = (rho * v).sum() / rho.sum()
        lhs = friction_dissipation(B2, rho, v)
        rhs = nu * (rho**2 * (v - vbar) ** 2).sum()
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_coercivity_scales_linearly_in_b():
    rho = np.array([0.7, 2.2, 1.4])
    b = random_connected_coupling(np.random.default_rng(3), 3)
    assert coercivity_constant(2.0 * b, rho) == pytest.approx(
        2.0 * coercivity_constant(b, rho), rel=1e-12
    )


def test_coercivity_bound_monte_carlo():
    rng = np.random.default_rng(12)
    b = random_connected_coupling(rng, 3)
    rho = random_rho(rng, 3)
    nu = coercivity_constant(b, rho)
    assert nu > 0
    for _ in range(1000):
        v = rng.normal(0.0, 2.0, size=3)
        vbar = (rho * v).sum() / rho.sum()
        lhs = friction_dissipation(b, rho, v)
        rhs = nu * (rho**2 * (v - vbar) ** 2).sum()
        assert lhs >= rhs - 1e-10 * max(1.0, lhs)


def test_coercivity_single_species_unconstrained():
    assert coercivity_constant(np.zeros((1, 1)), np.array([1.0])) == np.inf


# -- dissipation --------------------------------------------------------


def test_dissipation_equal_velocities():
    assert friction_dissipation(B2, np.ones(2), np.full(2, 3.3)) == 0.0


def test_dissipation_symmetric_pair():
    assert friction_dissipation(B2, np.ones(2), np.array([1.0, 0.0])) == pytest.approx(1.0)


def test_dissipation_equals_force_power():
    for _, b, rho in ensemble(seed=7, count=40):
        rng = np.random.default_rng(len(rho) + 7)
        v = rng.normal(size=len(rho))
        diss = friction_dissipation(b, rho, v)
        force = friction_force(b, rho, v)
        assert diss >= 0
        assert abs(diss + v @ force) <= 1e-12 * max(1.0, diss)
