"""Uniform space/age discretization and the Neumann Laplacian stencil.

Space uses n_x nodes on [0, L] with trapezoid quadrature.  Age uses cells of
width dt (aging and time share one step so transport along characteristics is
an exact shift); samples sit at cell midpoints and integrals use the midpoint
rule.  The age horizon A is a_max when finite, otherwise the smallest
dt-multiple at which the guaranteed survival factor exp(-mu_lower * A) drops
below the truncation tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .rates import ModelParams

__all__ = ["Discretization", "build_grid", "laplacian_apply", "laplacian_tridiagonal", "integrate_x"]


@dataclass(frozen=True)
class Discretization:
    L: float
    n_x: int
    A: float
    n_a: int
    dt: float
    dx: float
    da: float
    tail_tol: float
    x: np.ndarray
    ages: np.ndarray
    x_weights: np.ndarray


def build_grid(
    params: ModelParams,
    n_x: int,
    dt: float,
    tail_tol: float = 1e-8,
) -> Discretization:
    """Lay out the lattice for a given parameter set.

    For finite a_max, dt is adjusted downward (if needed) so that an integer
    number of age cells tiles [0, a_max] exactly.  For infinite a_max the
    requested dt is kept and the horizon A = ceil(ln(1/tail_tol)/mu_lower/dt)*dt
    guarantees exp(-mu_lower * A) < tail_tol.
    """
    if n_x < 3:
        raise ConfigError("n_x must be at least 3")
    if not (dt > 0 and math.isfinite(dt)):
        raise ConfigError("dt must be positive and finite")
    if not (0 < tail_tol < 1):
        raise ConfigError("tail_tol must lie in (0, 1)")
    if dt > params.a_max:
        raise ConfigError(f"dt={dt} exceeds a_max={params.a_max}; no age cell fits")
    if math.isinf(params.a_max):
        horizon = math.log(1.0 / tail_tol) / params.mu_lower
        n_a = max(1, math.ceil(horizon / dt - 1e-12))
        step = dt
    else:
        n_a = max(1, math.ceil(params.a_max / dt - 1e-12))
        step = params.a_max / n_a
    A = n_a * step
    dx = params.L / (n_x - 1)
    x = np.linspace(0.0, params.L, n_x)
    ages = (np.arange(n_a) + 0.5) * step
    w = np.full(n_x, dx)
    w[0] = w[-1] = dx / 2.0
    for arr in (x, ages, w):
        arr.flags.writeable = False
    return Discretization(
        L=params.L, n_x=n_x, A=A, n_a=n_a, dt=step, dx=dx, da=step,
        tail_tol=tail_tol, x=x, ages=ages, x_weights=w,
    )


def laplacian_apply(grid: Discretization, u: np.ndarray) -> np.ndarray:
    """Second difference with reflecting (zero-flux) ghost nodes."""
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.n_x,):
        raise ConfigError(f"field has shape {u.shape}, grid expects ({grid.n_x},)")
    out = np.empty_like(u)
    inv = 1.0 / grid.dx**2
    out[1:-1] = (u[:-2] - 2.0 * u[1:-1] + u[2:]) * inv
    out[0] = 2.0 * (u[1] - u[0]) * inv
    out[-1] = 2.0 * (u[-2] - u[-1]) * inv
    return out


def laplacian_tridiagonal(grid: Discretization) -> tuple:
    """Stencil bands (sub, diag, super) of the Neumann Laplacian.

    sub[i] multiplies u[i-1] in row i (sub[0] unused); super[i] multiplies
    u[i+1] in row i (super[-1] unused).  The half-weighted boundary rows carry
    doubled neighbor coefficients from the ghost reflection.
    """
    inv = 1.0 / grid.dx**2
    diag = np.full(grid.n_x, -2.0 * inv)
    sub = np.full(grid.n_x, inv)
    sup = np.full(grid.n_x, inv)
    sup[0] = 2.0 * inv
    sub[-1] = 2.0 * inv
    sub[0] = 0.0
    sup[-1] = 0.0
    return sub, diag, sup


def integrate_x(grid: Discretization, values: np.ndarray) -> float:
    """Trapezoid quadrature over the spatial interval."""
    return float(grid.x_weights @ np.asarray(values, dtype=float))
