"""Lockstep time integration of the coupled disperser/settler system.

The disperser density u obeys a reaction-diffusion balance with zero-flux
boundaries; the settled density w ages at unit rate and decays by mortality.
Time step and age cell share one width, so aging is an exact shift along the
age lattice:

1. recruitment B(x) integrates births over the current settled population;
2. u advances by an implicit step: diffusion, linear losses, and the
   crowding term (linearized about the current u, keeping the update an
   M-matrix solve and hence sign-preserving) are treated implicitly, the
   recruitment source explicitly;
3. surviving settlers shift one age cell, decayed by exp(-dt * mu) evaluated
   at the source cell and the pre-step population total;
4. the renewal cell receives chi * e * u_new, aged half a cell so the sample
   lives at the cell midpoint like every other age sample;
5. the settled total P updates by quadrature, and guard rails check for
   blow-up and for mass lost off the truncated age axis.

Sub-step 4 carries the half-cell survival factor exp(-(dt/2) mu(x, a_0, P));
without it the stationary profiles reconstructed from the survival integral
would not be fixed points of the discrete step map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_banded

from .errors import BlowupError, ConfigError, NumericalError, SeamError, TailMassError
from .grid import Discretization, integrate_x, laplacian_tridiagonal
from .rates import ModelParams

__all__ = [
    "PopulationState",
    "Trajectory",
    "total_population",
    "recruitment_field",
    "initial_state",
    "step",
    "simulate",
    "characteristic_oracle",
    "p_balance_residual",
]

BLOWUP_LIMIT = 1e12
_DUST = 1e-12
_LATTICE_TOL = 1e-9


@dataclass(frozen=True)
class PopulationState:
    """Full model state at one time level.

    ``p_sup`` tracks the largest settled total seen so far along the run; the
    age-tail guard measures discarded mass against this scale, so that a
    decaying population is not aborted over truncation mass that is already
    negligible relative to everything the run has reported.
    """

    t: float
    u: np.ndarray
    w: np.ndarray
    P: float
    B: np.ndarray
    p_sup: float = 0.0


@dataclass
class Trajectory:
    """Recorded output of a simulation run.

    ``snapshots`` holds full states at the requested output times; the dense
    per-step series carry the scalars needed by the balance and bound checks:
    settled total P, max/min of u, settlement influx integral(chi e u) dx,
    mortality outflux integral(mu w) dx da, and the sup over x of the
    age-integrated settled density.  ``u_series`` is populated on request
    (it backs the characteristic-solution comparisons).
    """

    snapshots: list
    t_series: np.ndarray
    P_series: np.ndarray
    u_norm_series: np.ndarray
    u_min_series: np.ndarray
    settle_series: np.ndarray
    mortality_series: np.ndarray
    settled_sup_series: np.ndarray
    u_series: np.ndarray | None = None
    clamped_entries: int = 0

    @property
    def final(self) -> PopulationState:
        return self.snapshots[-1]


def total_population(grid: Discretization, w: np.ndarray) -> float:
    """Trapezoid-in-x, midpoint-in-age quadrature of the settled density."""
    return float(grid.x_weights @ w.sum(axis=1)) * grid.da


def recruitment_field(params: ModelParams, grid: Discretization, w: np.ndarray, P: float) -> np.ndarray:
    """Birth input to the disperser equation, B(x) = integral beta * w da."""
    base = params.beta.base_matrix(grid.ages)
    return np.einsum("xj,xj->x", base, w) * (params.beta.response.at(P) * grid.da)


class _Workspace:
    """Grid-resolved coefficient tables shared across steps."""

    def __init__(self, params: ModelParams, grid: Discretization):
        self.params = params
        self.grid = grid
        self.beta_base = params.beta.base_matrix(grid.ages)
        self.mu_base = params.mu.matrix(grid.ages, 0.0)  # response(0) = 1
        self.chi_spatial = params.chi.spatial.values
        self.e = params.e.values
        self.c = params.c.values
        dt = grid.dt
        sub, diag, sup = laplacian_tridiagonal(grid)
        self.ab = np.zeros((3, grid.n_x))
        self.ab[0, 1:] = -dt * params.d * sup[:-1]
        self.ab[2, :-1] = -dt * params.d * sub[1:]
        self.static_diag = 1.0 + dt * (params.m.values + params.e.values) - dt * params.d * diag
        if params.mu.response.is_constant:
            self.survival_const = np.exp(-dt * self.mu_base)
            self.renewal_decay_const = np.exp(-0.5 * dt * self.mu_base[:, 0])
        else:
            self.survival_const = None
            self.renewal_decay_const = None
        self.clamped = 0

    def survival(self, P: float) -> np.ndarray:
        if self.survival_const is not None:
            return self.survival_const
        return np.exp(-self.grid.dt * self.params.mu.response.at(P) * self.mu_base)

    def renewal_decay(self, P: float) -> np.ndarray:
        if self.renewal_decay_const is not None:
            return self.renewal_decay_const
        return np.exp(-0.5 * self.grid.dt * self.params.mu.response.at(P) * self.mu_base[:, 0])


def initial_state(params: ModelParams, grid: Discretization, u0: np.ndarray, w0: np.ndarray, t0: float = 0.0) -> PopulationState:
    u0 = np.asarray(u0, dtype=float)
    w0 = np.asarray(w0, dtype=float)
    if u0.shape != (grid.n_x,):
        raise ConfigError(f"u0 must have shape ({grid.n_x},), got {u0.shape}")
    if w0.shape != (grid.n_x, grid.n_a):
        raise ConfigError(f"w0 must have shape ({grid.n_x}, {grid.n_a}), got {w0.shape}")
    if not (np.all(np.isfinite(u0)) and np.all(np.isfinite(w0))):
        raise ConfigError("initial data must be finite")
    if u0.min() < 0 or w0.min() < 0:
        raise ConfigError("initial data must be nonnegative")
    P0 = total_population(grid, w0)
    B0 = recruitment_field(params, grid, w0, P0)
    return PopulationState(t=t0, u=u0.copy(), w=w0.copy(), P=P0, B=B0, p_sup=P0)


def step(params: ModelParams, grid: Discretization, state: PopulationState, _ws: "_Workspace | None" = None) -> PopulationState:
    """Advance one time level.  Raises on blow-up or age-tail mass loss."""
    ws = _ws if _ws is not None else _Workspace(params, grid)
    dt = grid.dt
    P_n = state.P
    B_n = state.B if state.B is not None else recruitment_field(params, grid, state.w, P_n)

    ws.ab[1] = ws.static_diag + dt * ws.c * state.u
    rhs = state.u + dt * B_n
    u_new = solve_banded((1, 1), ws.ab, rhs, overwrite_b=True, check_finite=False)

    negative = u_new < 0.0
    if np.any(negative):
        worst = float(u_new.min())
        if worst < -_DUST:
            raise NumericalError(
                f"disperser density fell below the positivity floor ({worst:.3e}) at t={state.t + dt:.6g}"
            )
        ws.clamped += int(np.count_nonzero(negative))
        u_new = np.where(negative, 0.0, u_new)

    survival = ws.survival(P_n)
    discarded = grid.da * float(grid.x_weights @ (state.w[:, -1] * survival[:, -1]))
    w_new = np.empty_like(state.w)
    w_new[:, 1:] = state.w[:, :-1] * survival[:, :-1]
    chi_now = ws.chi_spatial * params.chi.response.at(P_n)
    w_new[:, 0] = chi_now * ws.e * u_new * ws.renewal_decay(P_n)

    p_scale = max(state.p_sup, P_n)
    if math.isinf(params.a_max) and discarded > grid.tail_tol * p_scale:
        raise TailMassError(
            f"age-tail mass {discarded:.3e} exceeds tail_tol * P = {grid.tail_tol * p_scale:.3e} "
            f"at t={state.t + dt:.6g}; the truncated horizon is too short for this state"
        )

    P_new = total_population(grid, w_new)
    u_peak = float(u_new.max()) if u_new.size else 0.0
    if not (math.isfinite(P_new) and math.isfinite(u_peak)) or u_peak > BLOWUP_LIMIT or P_new > BLOWUP_LIMIT:
        raise BlowupError(
            f"state exceeded the blow-up guard at t={state.t + dt:.6g} (max u={u_peak:.3e}, P={P_new:.3e})"
        )

    B_new = recruitment_field(params, grid, w_new, P_new)
    return PopulationState(
        t=state.t + dt, u=u_new, w=w_new, P=P_new, B=B_new, p_sup=max(p_scale, P_new)
    )


def _mortality_outflux(ws: _Workspace, w: np.ndarray, P: float) -> float:
    rate = ws.params.mu.response.at(P)
    return float(ws.grid.x_weights @ np.einsum("xj,xj->x", ws.mu_base, w)) * rate * ws.grid.da


def simulate(
    params: ModelParams,
    grid: Discretization,
    u0: np.ndarray,
    w0: np.ndarray,
    t_end: float,
    *,
    t0: float = 0.0,
    output_times: Sequence[float] | None = None,
    record_u: bool = False,
) -> Trajectory:
    """Run the stepper from (u0, w0) to t_end, recording dense diagnostics.

    ``output_times`` selects the times at which full states are retained
    (default: the final time only); each must sit on the step lattice.
    """
    span = t_end - t0
    if span < 0:
        raise ConfigError("t_end must not precede t0")
    n_steps = int(round(span / grid.dt))
    if abs(n_steps * grid.dt - span) > _LATTICE_TOL * max(1.0, abs(t_end)):
        raise ConfigError(f"t_end - t0 = {span} is not a multiple of dt = {grid.dt}")
    if output_times is None:
        output_times = [t_end]
    snap_steps = {}
    for T in output_times:
        k = int(round((T - t0) / grid.dt))
        if abs(t0 + k * grid.dt - T) > _LATTICE_TOL * max(1.0, abs(T)) or not (0 <= k <= n_steps):
            raise ConfigError(f"output time {T} is not on the step lattice within [t0, t_end]")
        snap_steps.setdefault(k, T)

    ws = _Workspace(params, grid)
    state = initial_state(params, grid, u0, w0, t0=t0)

    t_series = np.empty(n_steps + 1)
    P_series = np.empty(n_steps + 1)
    u_max = np.empty(n_steps + 1)
    u_min = np.empty(n_steps + 1)
    settle = np.empty(n_steps + 1)
    mortality = np.empty(n_steps + 1)
    settled_sup = np.empty(n_steps + 1)
    u_series = np.empty((n_steps + 1, grid.n_x)) if record_u else None
    snapshots = []

    for k in range(n_steps + 1):
        if k > 0:
            state = step(params, grid, state, _ws=ws)
        t_series[k] = state.t
        P_series[k] = state.P
        u_max[k] = state.u.max()
        u_min[k] = state.u.min()
        chi_now = ws.chi_spatial * params.chi.response.at(state.P)
        settle[k] = integrate_x(grid, chi_now * ws.e * state.u)
        mortality[k] = _mortality_outflux(ws, state.w, state.P)
        settled_sup[k] = float(state.w.sum(axis=1).max()) * grid.da
        if u_series is not None:
            u_series[k] = state.u
        if k in snap_steps:
            snapshots.append(state)

    if not snapshots:
        snapshots.append(state)
    return Trajectory(
        snapshots=snapshots,
        t_series=t_series,
        P_series=P_series,
        u_norm_series=u_max,
        u_min_series=u_min,
        settle_series=settle,
        mortality_series=mortality,
        settled_sup_series=settled_sup,
        u_series=u_series,
        clamped_entries=ws.clamped,
    )


def p_balance_residual(params: ModelParams, grid: Discretization, traj: Trajectory) -> float:
    """Defect of the settled-mass balance dP/dt = influx - outflux.

    Centered differences of the recorded P series are compared against the
    recorded settlement influx and mortality outflux at interior time levels.
    The fluxes are the continuum integrals evaluated by the grid quadratures,
    not the stepper's own ledger, so the residual measures the scheme's
    first-order-in-dt consistency rather than tautological bookkeeping.
    """
    P = traj.P_series
    if P.size < 3:
        raise ValueError("balance residual needs at least three recorded levels")
    lhs = (P[2:] - P[:-2]) / (2.0 * grid.dt)
    rhs = traj.settle_series[1:-1] - traj.mortality_series[1:-1]
    return float(np.abs(lhs - rhs).max())


def characteristic_oracle(
    params: ModelParams,
    grid: Discretization,
    w0: np.ndarray,
    u_series: np.ndarray,
    P_series: np.ndarray,
    a: float,
    t: float,
) -> np.ndarray:
    """Closed-form settled density along characteristics, for cross-checks.

    For a > t the initial cohort at age a - t decays by the mortality
    accumulated along its path; for a < t the cohort was recruited at time
    t - a with density chi * e * u and decays likewise.  The line a = t
    separates the branches and carries no well-defined value; querying it
    raises SeamError (checked before any lattice validation).

    Queries must sit on the lattice the histories were recorded on:
    t a multiple of dt covered by the series, a an age-cell midpoint.
    Mortality integrals use the midpoint rule on the same dt lattice, with
    recorded P (and u) linearly interpolated at half-step times.
    """
    if abs(a - t) < 1e-12 * max(1.0, abs(t)):
        raise SeamError(f"characteristic solution undefined on the seam a = t = {t}")
    dt = grid.dt
    k = int(round(t / dt))
    if t < 0 or abs(k * dt - t) > _LATTICE_TOL * max(1.0, t):
        raise ValueError(f"t={t} is not on the recorded step lattice")
    if k > len(P_series) - 1:
        raise ValueError(f"history covers {len(P_series) - 1} steps; t={t} is beyond it")
    j = int(round(a / grid.da - 0.5))
    if not (0 <= j < grid.n_a) or abs(grid.ages[j] - a) > _LATTICE_TOL * max(1.0, a):
        raise ValueError(f"a={a} is not an age-cell midpoint within the horizon")

    mu_sp = params.mu.spatial.values
    age_profile = params.mu.age

    def mu_column(age_val: float, P_val: float) -> np.ndarray:
        return mu_sp * float(age_profile.at(np.asarray([age_val]))[0]) * params.mu.response.at(P_val)

    if a > t:
        # Initial cohort: survival over s in [0, t], ages a - s, full panels.
        acc = np.zeros(grid.n_x)
        for i in range(k):
            age_mid = a - (i + 0.5) * dt
            P_mid = 0.5 * (P_series[k - i - 1] + P_series[k - i])
            acc += dt * mu_column(age_mid, P_mid)
        return w0[:, j - k] * np.exp(-acc)

    # Recruited cohort: born at t - a (a half-step time), survival over [0, a].
    if u_series is None:
        raise ValueError("the a < t branch needs the disperser history; simulate with record_u=True")
    born_idx = k - j  # birth time sits between steps born_idx - 1 and born_idx
    u_birth = 0.5 * (u_series[born_idx - 1] + u_series[born_idx])
    P_birth = 0.5 * (P_series[born_idx - 1] + P_series[born_idx])
    acc = np.zeros(grid.n_x)
    for i in range(j):
        age_mid = a - (i + 0.5) * dt
        P_mid = 0.5 * (P_series[k - i - 1] + P_series[k - i])
        acc += dt * mu_column(age_mid, P_mid)
    # Final half panel [j dt, a]: width dt/2, midpoint age dt/4.
    P_tail = 0.25 * P_series[born_idx - 1] + 0.75 * P_series[born_idx]
    acc += 0.5 * dt * mu_column(0.25 * dt, P_tail)
    chi_birth = params.chi.spatial.values * params.chi.response.at(P_birth)
    return chi_birth * params.e.values * u_birth * np.exp(-acc)
