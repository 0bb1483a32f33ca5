"""Discretization: lockstep age grid, tail truncation, Neumann Laplacian."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

import settleflow as sf
from conftest import constant_params


def test_finite_horizon_cell_count():
    p = constant_params(5, a_max=1.0)
    g = sf.build_grid(p, 5, 0.1)
    assert g.A == 1.0
    assert g.n_a == 10
    assert g.dt == pytest.approx(0.1)
    assert g.da == g.dt  # lockstep


def test_infinite_horizon_tail_truncation():
    # smallest multiple of dt=0.05 with exp(-A) < 1e-8 is 18.45 (369 cells)
    p = constant_params(5)
    g = sf.build_grid(p, 5, 0.05, tail_tol=1e-8)
    assert g.n_a == 369
    assert g.A == pytest.approx(18.45)
    assert math.exp(-p.mu_lower * g.A) < 1e-8


def test_infinite_horizon_fine_step():
    p = constant_params(5)
    g = sf.build_grid(p, 5, 0.02)
    assert g.n_a == 922
    assert g.A == pytest.approx(18.44)


def test_spacing_formula():
    p = constant_params(3)
    g = sf.build_grid(p, 3, 0.1)
    assert g.dx == pytest.approx(0.5)
    np.testing.assert_allclose(g.x, [0.0, 0.5, 1.0])


def test_dt_adjusted_down_to_keep_lockstep():
    p = constant_params(5, a_max=1.0)
    g = sf.build_grid(p, 5, 0.3)
    assert g.n_a == 4
    assert g.dt == pytest.approx(0.25)
    assert g.dt == g.da


def test_ages_are_cell_midpoints():
    p = constant_params(5, a_max=2.0)
    g = sf.build_grid(p, 5, 0.5)
    np.testing.assert_allclose(g.ages, [0.25, 0.75, 1.25, 1.75])


def test_x_weights_trapezoid():
    p = constant_params(5, L=2.0)
    g = sf.build_grid(p, 5, 0.1)
    assert g.x_weights.sum() == pytest.approx(2.0)
    assert g.x_weights[0] == pytest.approx(g.dx / 2)
    assert g.x_weights[-1] == pytest.approx(g.dx / 2)
    np.testing.assert_allclose(g.x_weights[1:-1], g.dx)


def test_build_grid_errors():
    p = constant_params(5, a_max=1.0)
    with pytest.raises(sf.ConfigError):
        sf.build_grid(p, 2, 0.1)  # too few nodes
    with pytest.raises(sf.ConfigError):
        sf.build_grid(p, 5, 0.0)
    with pytest.raises(sf.ConfigError):
        sf.build_grid(p, 5, 1.5)  # dt > a_max
    with pytest.raises(sf.ConfigError):
        sf.build_grid(p, 5, 0.1, tail_tol=0.0)


def test_laplacian_constant_in_kernel():
    p = constant_params(9)
    g = sf.build_grid(p, 9, 0.1)
    out = sf.grid.laplacian_apply(g, np.full(9, 3.7))
    np.testing.assert_allclose(out, 0.0, atol=1e-12)


def test_laplacian_cosine_is_discrete_eigenvector():
    """cos(k pi x / L) is an exact eigenvector of the reflected stencil."""
    p = constant_params(41, L=1.0)
    g = sf.build_grid(p, 41, 0.1)
    for k in (1, 2, 3):
        v = np.cos(k * np.pi * g.x / g.L)
        lam = -(2.0 - 2.0 * math.cos(k * np.pi * g.dx / g.L)) / g.dx**2
        np.testing.assert_allclose(sf.grid.laplacian_apply(g, v), lam * v, atol=1e-10)
        # and the discrete eigenvalue is within O(dx^2) of -(k pi / L)^2
        assert abs(lam + (k * np.pi / g.L) ** 2) < (k * np.pi) ** 4 * g.dx**2 / 12.0 + 1e-12


def test_laplacian_linear_field_boundary_reflection():
    p = constant_params(9)
    g = sf.build_grid(p, 9, 0.1)
    out = sf.grid.laplacian_apply(g, g.x.copy())
    np.testing.assert_allclose(out[1:-1], 0.0, atol=1e-12)
    assert out[0] != 0.0 and out[-1] != 0.0  # reflection breaks linearity


def test_laplacian_length_mismatch():
    p = constant_params(9)
    g = sf.build_grid(p, 9, 0.1)
    with pytest.raises(sf.ConfigError):
        sf.grid.laplacian_apply(g, np.ones(8))


@given(
    u=hnp.arrays(
        np.float64,
        shape=11,
        elements=st.floats(min_value=-5.0, max_value=5.0, allow_nan=False),
    )
)
@settings(max_examples=50, deadline=None)
def test_laplacian_mass_neutral_and_symmetric(u):
    p = constant_params(11)
    g = sf.build_grid(p, 11, 0.1)
    out = sf.grid.laplacian_apply(g, u)
    # zero weighted row sum: diffusion moves mass around, never creates it
    assert abs(np.dot(g.x_weights, out)) < 1e-9 * max(1.0, np.abs(u).max())


def test_laplacian_tridiagonal_matches_apply():
    rng = np.random.default_rng(7)
    p = constant_params(13)
    g = sf.build_grid(p, 13, 0.1)
    sub, diag, sup = sf.grid.laplacian_tridiagonal(g)
    for _ in range(5):
        v = rng.normal(size=13)
        expect = sf.grid.laplacian_apply(g, v)
        got = diag * v
        got[:-1] += sup[:-1] * v[1:]
        got[1:] += sub[1:] * v[:-1]
        np.testing.assert_allclose(got, expect, atol=1e-11)


def test_laplacian_weighted_symmetry():
    # trapezoid weights symmetrize the stencil: w_i L_ij == w_j L_ji
    p = constant_params(9)
    g = sf.build_grid(p, 9, 0.1)
    sub, _, sup = sf.grid.laplacian_tridiagonal(g)
    w = g.x_weights
    np.testing.assert_allclose(w[:-1] * sup[:-1], w[1:] * sub[1:], rtol=1e-13)


def test_integrate_x():
    p = constant_params(33, L=1.0)
    g = sf.build_grid(p, 33, 0.1)
    assert sf.integrate_x(g, np.ones(33)) == pytest.approx(1.0)
    # odd cosine integrates to zero exactly under trapezoid symmetry
    assert sf.integrate_x(g, np.cos(np.pi * g.x)) == pytest.approx(0.0, abs=1e-14)
