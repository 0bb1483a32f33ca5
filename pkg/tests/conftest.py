"""Shared parameter factories for the test suite.

Two families recur everywhere: the all-constant benchmark (closed forms for
R0, eigenvalues, growth roots) and the saturating-birth benchmark whose
positive equilibrium is P* = 1, u* = 1, w* = exp(-a).
"""

import dataclasses
import math

import numpy as np

from settleflow import (
    AgeProfile,
    DensityResponse,
    ModelParams,
    RateLaw,
    SpatialField,
    build_grid,
)


def constant_params(
    n_x=33,
    beta=6.0,
    *,
    d=1.0,
    m=1.0,
    e=1.0,
    c=1.0,
    mu=1.0,
    chi=1.0,
    a_max=math.inf,
    L=1.0,
):
    return ModelParams(
        d=d,
        m=SpatialField.constant(n_x, m),
        e=SpatialField.constant(n_x, e),
        c=SpatialField.constant(n_x, c),
        beta=RateLaw(spatial=SpatialField.constant(n_x, beta)),
        mu=RateLaw(spatial=SpatialField.constant(n_x, mu)),
        chi=RateLaw(spatial=SpatialField.constant(n_x, chi)),
        a_max=a_max,
        mu_lower=mu,
        L=L,
    )


def saturating_params(n_x=33, beta0=6.0, scale=1.0, **kwargs):
    """Constant benchmark with birth response beta0 / (1 + P/scale)."""
    base = constant_params(n_x, beta0, **kwargs)
    beta = RateLaw(
        spatial=SpatialField.constant(n_x, beta0),
        response=DensityResponse.saturating(scale),
    )
    return dataclasses.replace(base, beta=beta)


def replace(params, **kwargs):
    return dataclasses.replace(params, **kwargs)


def cosine_field(rng, n_x, *, L=1.0, base=1.0, spread=0.4, floor=0.05, modes=3):
    """Random smooth positive field built from low-frequency cosines."""
    x = np.linspace(0.0, L, n_x)
    f = np.full(n_x, base)
    for k in range(1, modes + 1):
        f += rng.normal(0.0, spread / k) * np.cos(k * np.pi * x / L)
    return SpatialField(np.maximum(f, floor))


def exp_age_start(params, grid, amplitude=1.0):
    """Initial settled density amplitude * exp(-mu_lower * a), x-constant."""
    col = amplitude * np.exp(-params.mu_lower * grid.ages)
    return np.broadcast_to(col, (grid.n_x, grid.n_a)).copy()


def grid_for(params, n_x=None, dt=0.05, tail_tol=1e-8):
    return build_grid(params, params.n_x if n_x is None else n_x, dt, tail_tol)
