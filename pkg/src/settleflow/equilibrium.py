"""Stationary states of the coupled system.

At a steady state the settled density is the survival profile laid down by a
time-independent recruitment flux, which collapses the system to a scalar
fixed-point problem.  For a candidate settled total P the disperser profile
solves the stationary reaction-diffusion (FKPP-type) equation

    d Lap(u) + K_P(x) u - (m(x) + e(x)) u - c(x) u^2 = 0,

where K_P is the lifetime recruitment kernel frozen at population P.  The
positive profile exists exactly when the principal eigenvalue of the
linearization is positive; feeding it back through establishment and
survival gives the settled total the profile would sustain,

    H(P) = integral chi(x, P) e(x) u_P(x) integral exp(-cum_mu) da dx,

and an equilibrium is a fixed point H(P) = P.  When both lifetime kernels
decrease in P the positive fixed point is unique; the audit flag for that
condition is recorded and, when it fails, the report is marked so rather
than refused.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded

from dataclasses import dataclass

from .errors import BracketError, ConvergenceError, NumericalError
from .grid import Discretization, integrate_x, laplacian_apply, laplacian_tridiagonal
from .rates import (
    ModelParams,
    audit_assumptions,
    birth_kernel,
    cumulative_mortality,
    eval_chi,
    population_ceilings,
    presence_kernel,
)
from .spectral import _principal_eigenpair_dense, compute_r0

__all__ = ["EquilibriumReport", "solve_fkpp", "H_map", "positive_equilibrium"]

FKPP_TOL = 1e-9
FP_TOL = 1e-10
_SUBCRITICAL_CUTOFF = 1e-10


@dataclass(frozen=True)
class EquilibriumReport:
    """Stationary-state summary.

    ``h_samples`` records every (P, H(P)) evaluation made while locating the
    fixed point, sorted by P; it doubles as a monotonicity diagnostic.  The
    trivial (extinction) report carries p_star = 0 and zero profiles.
    """

    p_star: float
    u_star: np.ndarray
    w_star: np.ndarray
    fkpp_residual: float
    fixed_point_residual: float
    h_samples: np.ndarray
    r0: float
    notes: tuple


def _fkpp_rhs(params: ModelParams, grid: Discretization, q: np.ndarray, u: np.ndarray) -> np.ndarray:
    return params.d * laplacian_apply(grid, u) + q * u - params.c.values * u * u


def solve_fkpp(params: ModelParams, grid: Discretization, P: float, tol: float = FKPP_TOL):
    """Largest nonnegative stationary disperser profile at frozen population P.

    Returns (u, residual).  Subcritical kernels (principal eigenvalue of the
    linearization <= 1e-10) yield the zero profile.  Newton starts from a
    constant supersolution; the reaction term is concave in u, so the
    iterates descend monotonically onto the maximal solution.  A damped
    retry and a plain monotone relaxation sweep guard the unexpected.
    """
    q = birth_kernel(params, grid.ages, grid.da, P) - params.m.values - params.e.values
    lam, _, _ = _principal_eigenpair_dense(grid, params.d, q)
    if lam <= _SUBCRITICAL_CUTOFF:
        return np.zeros(grid.n_x), 0.0

    c = params.c.values
    sub, diag, sup = laplacian_tridiagonal(grid)
    u = np.full(grid.n_x, max(float(q.max()), 0.0) / float(c.min()) + 1.0)
    res = float(np.abs(_fkpp_rhs(params, grid, q, u)).max())
    ab = np.zeros((3, grid.n_x))
    ab[0, 1:] = params.d * sup[:-1]
    ab[2, :-1] = params.d * sub[1:]
    for _ in range(60):
        if res < tol:
            return u, res
        F = _fkpp_rhs(params, grid, q, u)
        ab[1] = params.d * diag + q - 2.0 * c * u
        delta = solve_banded((1, 1), ab, -F, check_finite=False)
        scale = 1.0
        for _ in range(30):
            trial = np.maximum(u + scale * delta, 0.0)
            trial_res = float(np.abs(_fkpp_rhs(params, grid, q, trial)).max())
            if trial_res < res:
                u, res = trial, trial_res
                break
            scale *= 0.5
        else:
            break  # Newton stalled; fall through to the relaxation sweep.
    if res < tol:
        return u, res

    gamma = max(1.0, float(q.max()))
    ab[1] = gamma - params.d * diag
    ab[0, 1:] = -params.d * sup[:-1]
    ab[2, :-1] = -params.d * sub[1:]
    for _ in range(100_000):
        rhs = gamma * u + q * u - c * u * u
        u = solve_banded((1, 1), ab, rhs, check_finite=False)
        res = float(np.abs(_fkpp_rhs(params, grid, q, u)).max())
        if res < tol:
            return u, res
    raise ConvergenceError(f"stationary profile solve stalled at residual {res:.3e}")


def H_map(params: ModelParams, grid: Discretization, P: float) -> float:
    """Settled total sustained by the stationary profile at frozen P."""
    u_p, _ = solve_fkpp(params, grid, P)
    return integrate_x(grid, presence_kernel(params, grid.ages, grid.da, P) * u_p)


def positive_equilibrium(params: ModelParams, grid: Discretization, fp_tol: float = FP_TOL) -> EquilibriumReport:
    """Locate the equilibrium settled total and reconstruct the full state.

    Subcritical populations (r0 <= 1) get the trivial report.  Otherwise the
    fixed point of H is found by bisection on an expanding bracket seeded by
    the a priori settled-population ceiling; when the rate laws carry no
    density response at all, H is constant and a single evaluation suffices.
    """
    r0, _, _ = compute_r0(params, grid)
    notes = []
    audit = audit_assumptions(params, grid)
    if not audit.kernels_decreasing_in_p:
        notes.append("uniqueness unverified: lifetime kernels are not monotone decreasing in P")

    if r0 <= 1.0:
        notes.append(f"subcritical (r0={r0:.6g}); extinction equilibrium only")
        return EquilibriumReport(
            p_star=0.0,
            u_star=np.zeros(grid.n_x),
            w_star=np.zeros((grid.n_x, grid.n_a)),
            fkpp_residual=0.0,
            fixed_point_residual=0.0,
            h_samples=np.empty((0, 2)),
            r0=r0,
            notes=tuple(notes),
        )

    samples = []

    def H(P: float) -> float:
        val = H_map(params, grid, P)
        samples.append((P, val))
        return val

    if params.density_independent:
        p_star = H(0.0)
        notes.append("density-independent rates: fixed point from a single evaluation")
        fixed_residual = 0.0
    else:
        h0 = H(0.0)
        if h0 <= 0.0:
            raise NumericalError("supercritical population sustains no settled mass; inconsistent state")
        _, n2 = population_ceilings(params)
        hi = max(n2, 1.0)
        for _ in range(60):
            if H(hi) - hi < 0.0:
                break
            hi *= 2.0
        else:
            raise BracketError("equilibrium bracket: H stayed above the identity past the ceiling")
        lo = 0.0
        fixed_residual = None
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            gap = H(mid) - mid
            if abs(gap) < fp_tol:
                p_star, fixed_residual = mid, abs(gap)
                break
            if gap > 0.0:
                lo = mid
            else:
                hi = mid
        if fixed_residual is None:
            raise ConvergenceError("equilibrium bisection stalled before meeting fp_tol")

    u_star, fkpp_residual = solve_fkpp(params, grid, p_star)
    survival = np.exp(-cumulative_mortality(params, grid.ages, grid.da, p_star))
    front = eval_chi(params, p_star) * params.e.values * u_star
    w_star = front[:, None] * survival
    h_samples = np.array(sorted(samples)) if samples else np.empty((0, 2))
    return EquilibriumReport(
        p_star=p_star,
        u_star=u_star,
        w_star=w_star,
        fkpp_residual=fkpp_residual,
        fixed_point_residual=fixed_residual,
        h_samples=h_samples,
        r0=r0,
        notes=tuple(notes),
    )
