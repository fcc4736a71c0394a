"""Periodic grid operators and mixture states."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ekmix.grid import (
    Grid1D,
    MixtureState,
    barycentric_velocity,
    div_flux,
    div_kappa_grad,
    grad,
    integrate,
    interface_mean,
    laplacian,
)


def wave(grid, freq=1):
    return np.sin(2.0 * np.pi * freq * grid.x / grid.length)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid1D(4)
    with pytest.raises(ValueError):
        Grid1D(16, length=0.0)
    g = Grid1D(10, 2.0)
    assert g.dx == pytest.approx(0.2)
    assert g.x[0] == pytest.approx(0.1)


@pytest.mark.parametrize("op,exact", [
    (grad, lambda g: 2 * np.pi * np.cos(2 * np.pi * g.x)),
    (laplacian, lambda g: -((2 * np.pi) ** 2) * np.sin(2 * np.pi * g.x)),
])
def test_operators_second_order(op, exact):
    errs = []
    for n in (64, 128, 256):
        g = Grid1D(n, 1.0)
        errs.append(np.abs(op(g, wave(g)) - exact(g)).max())
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates >= 1.9)


@given(
    flux=arrays(
        np.float64,
        st.integers(min_value=8, max_value=40),
        elements=st.floats(min_value=-1e6, max_value=1e6),
    )
)
@settings(max_examples=60, deadline=None)
def test_div_flux_telescopes_to_zero(flux):
    g = Grid1D(len(flux), 3.0)
    total = integrate(g, div_flux(g, flux))
    assert abs(total) <= 1e-12 * max(1.0, np.abs(flux).max())


def test_grad_is_skew_adjoint():
    # periodic centered difference: <f, grad g> + <grad f, g> = 0 exactly
    rng = np.random.default_rng(5)
    g = Grid1D(33, 2.0)
    f1, f2 = rng.normal(size=(2, 33))
    lhs = integrate(g, f1 * grad(g, f2)) + integrate(g, grad(g, f1) * f2)
    assert abs(lhs) <= 1e-12


def test_integrate_constant():
    g = Grid1D(17, 2.5)
    assert integrate(g, np.full(17, 3.0)) == pytest.approx(7.5)


def test_interface_mean_constant():
    assert np.array_equal(interface_mean(np.full(9, 2.0)), np.full(9, 2.0))


def test_div_kappa_grad_constant_kappa_is_laplacian():
    g = Grid1D(64, 1.0)
    f = wave(g, freq=2)
    k = 0.3
    got = div_kappa_grad(g, np.full(64, k), f)
    assert np.allclose(got, k * laplacian(g, f), atol=1e-13)


def test_div_kappa_grad_conserves():
    g = Grid1D(48, 2.0)
    rng = np.random.default_rng(9)
    f = rng.normal(size=48)
    kap = rng.uniform(0.5, 2.0, size=48)
    assert abs(integrate(g, div_kappa_grad(g, kap, f))) <= 1e-12


def test_state_shapes_and_velocity():
    g = Grid1D(16)
    rho = np.ones((2, 16))
    state = MixtureState.from_velocity(g, rho, np.vstack([np.full(16, 2.0), np.zeros(16)]))
    assert state.n_species == 2
    assert np.allclose(state.velocity()[0], 2.0)
    with pytest.raises(ValueError):
        MixtureState(g, np.ones((2, 8)), np.ones((2, 8)))
    with pytest.raises(ValueError):
        MixtureState(g, np.ones((2, 16)), np.ones((2, 15)))


def test_state_validation_floor_and_nan():
    g = Grid1D(16)
    ok = MixtureState(g, np.ones((1, 16)), np.zeros((1, 16)))
    ok.validate(rho_floor=1e-6)
    bad = MixtureState(g, np.full((1, 16), 1e-9), np.zeros((1, 16)))
    with pytest.raises(ValueError, match="floor"):
        bad.validate(rho_floor=1e-6)
    nanstate = MixtureState(g, np.ones((1, 16)), np.full((1, 16), np.nan))
    with pytest.raises(ValueError, match="finite"):
        nanstate.validate(rho_floor=1e-6)


def test_barycentric_velocity_weighted_mean():
    g = Grid1D(8)
    rho = np.vstack([np.full(8, 1.0), np.full(8, 3.0)])
    v = np.vstack([np.full(8, 2.0), np.zeros(8)])
    state = MixtureState.from_velocity(g, rho, v)
    assert np.allclose(barycentric_velocity(state), 0.5)
