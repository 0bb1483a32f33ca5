"""Dynamical verification checks: extinction, persistence, bounds, ordering.

Each check turns a qualitative statement about the model into a concrete
pass/fail measurement on simulator output:

* extinction: subcritical populations decay to negligible size;
* persistence and convergence: supercritical populations are squeezed
  between a constant-in-x super-solution and a small multiple of the
  principal eigenfunction pair, both of which flow monotonically onto the
  positive equilibrium;
* bounds: late-time disperser and settled densities respect the a priori
  ceilings from the coefficient extremes;
* comparison: ordered initial data stay ordered under the step map.

Checks guard their own regime of validity and raise GateError when misused
(for example, asking for extinction in a supercritical population); the
suite runner converts out-of-regime checks into skipped verdicts instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .equilibrium import positive_equilibrium
from .errors import GateError
from .grid import Discretization
from .rates import AssumptionReport, ModelParams, audit_assumptions, population_ceilings
from .solver import Trajectory, initial_state, simulate, step, total_population
from .spectral import SpectralReport, principal_eigenvalue, spectral_report

__all__ = [
    "SuperSubPair",
    "VerdictReport",
    "super_solution_constraints",
    "build_super_sub",
    "check_extinction",
    "check_persistence_and_convergence",
    "check_bounds",
    "check_comparison",
    "run_suite",
]

EXTINCT_TOL = 1e-3
CONVERGE_TOL = 1e-3
MONOTONE_TOL = 1e-10
ORDER_TOL = 1e-10
BOUND_SLACK = 1.05


@dataclass(frozen=True)
class SuperSubPair:
    """Bracketing states for the persistence sandwich.

    ``upper`` and ``lower`` are (u, w) array pairs: the upper state is the
    constant ceiling (M1, M2 exp(-mu_lower a)); the lower state is epsilon
    times the principal eigenfunction pair.
    """

    upper: tuple
    lower: tuple
    m1: float
    m2: float
    epsilon: float


@dataclass(frozen=True)
class VerdictReport:
    name: str
    passed: bool
    measured: float
    expected: float
    tolerance: float
    notes: tuple[str, ...] = ()
    skipped: bool = False


def super_solution_constraints(params: ModelParams, m1: float, m2: float) -> bool:
    """Mass constraints making (M1, M2 exp(-mu_lower a)) a super-solution.

    Recruitment fed by the settled ceiling must be absorbed by disperser
    crowding (m2 * sup(beta) / mu_lower <= inf(c) * m1^2) and settlement of
    the disperser ceiling must fit under the settled ceiling
    (sup(chi) sup(e) m1 <= m2).  Zero birth rate makes the first constraint
    vacuous.
    """
    beta_sup = params.beta.sup(params.a_max)
    chi_sup = min(1.0, params.chi.spatial.max * params.chi.response.sup)
    e_sup = params.e.max
    c_inf = params.c.min
    return (
        m2 * beta_sup / params.mu_lower <= c_inf * m1 * m1 * (1.0 + 1e-12)
        and chi_sup * e_sup * m1 <= m2 * (1.0 + 1e-12)
    )


def _subsolution_scale(
    params: ModelParams,
    grid: Discretization,
    lambda0: float,
    phi: np.ndarray,
    phi_age: np.ndarray,
) -> float:
    """Halve epsilon from 1 until eps * (phi, phi_age) is a discrete sub-solution.

    The three inequalities compare the baseline (P = 0) rates against the
    rates at the candidate's own settled total: recruitment lost to density
    response must be covered by the eigenvalue margin minus crowding, and
    neither mortality increase nor establishment loss may be adverse.
    """
    beta_base = params.beta.base_matrix(grid.ages)
    mu_base = params.mu.matrix(grid.ages, 0.0)
    chi_sp = params.chi.spatial.values
    e = params.e.values
    c = params.c.values
    birth_at_zero = (beta_base * phi_age).sum(axis=1) * grid.da
    p_age = total_population(grid, phi_age)
    tol = 1e-12 * max(1.0, float(np.abs(phi).max()))

    eps = 1.0
    for _ in range(60):
        p_tilde = eps * p_age
        beta_resp = params.beta.response.at(p_tilde)
        ineq1 = lambda0 * phi + (beta_resp - 1.0) * birth_at_zero - c * eps * phi * phi
        mu_resp = params.mu.response.at(p_tilde)
        ineq2 = lambda0 + (1.0 - mu_resp) * mu_base
        chi_resp = params.chi.response.at(p_tilde)
        ineq3 = (chi_resp - 1.0) * chi_sp * e * phi
        if ineq1.min() >= -tol and ineq2.min() >= -tol and ineq3.min() >= -tol:
            return eps
        eps *= 0.5
    raise GateError(
        "no admissible sub-solution scale: density responses overpower the "
        "eigenvalue margin at every tested epsilon"
    )


def build_super_sub(params: ModelParams, grid: Discretization, report: SpectralReport) -> SuperSubPair:
    """Construct the persistence sandwich for a supercritical population."""
    if report.r0 <= 1.0:
        raise GateError(f"super/sub construction needs r0 > 1 (got {report.r0:.6g})")
    if report.s_l0 is None:
        raise GateError("super/sub construction needs the growth bound root")
    n1, _ = population_ceilings(params)
    chi_sup = min(1.0, params.chi.spatial.max * params.chi.response.sup)
    e_sup = params.e.max
    m1 = max(chi_sup * e_sup, n1, 1.0)
    m2 = chi_sup * e_sup * m1
    for _ in range(200):
        if super_solution_constraints(params, m1, m2):
            break
        m1 *= 2.0
        m2 = chi_sup * e_sup * m1
    else:
        raise GateError("super-solution constraints unreachable by scaling")
    upper_u = np.full(grid.n_x, m1)
    upper_w = np.broadcast_to(m2 * np.exp(-params.mu_lower * grid.ages), (grid.n_x, grid.n_a)).copy()
    eps = _subsolution_scale(params, grid, report.s_l0, report.phi, report.phi_age)
    lower_u = eps * report.phi
    lower_w = eps * report.phi_age
    return SuperSubPair(
        upper=(upper_u, upper_w),
        lower=(lower_u, lower_w),
        m1=m1,
        m2=m2,
        epsilon=eps,
    )


def _default_settled(params: ModelParams, grid: Discretization) -> np.ndarray:
    return np.broadcast_to(np.exp(-params.mu_lower * grid.ages), (grid.n_x, grid.n_a)).copy()


def _round_up_to_lattice(t: float, dt: float) -> float:
    return math.ceil(t / dt - 1e-9) * dt


def check_extinction(
    params: ModelParams,
    grid: Discretization,
    *,
    t_end: float | None = None,
    u0: np.ndarray | None = None,
    w0: np.ndarray | None = None,
) -> VerdictReport:
    """Subcritical decay: the population shrinks below EXTINCT_TOL of its start."""
    audit = audit_assumptions(params, grid)
    if not audit.crowding_monotone:
        raise GateError(
            "extinction check needs crowding-monotone rates: "
            + audit.first_violations.get("crowding_monotone", "")
        )
    lam0, _, _, _ = principal_eigenvalue(params, grid, 0.0)
    if lam0 >= 0.0:
        raise GateError(f"extinction check misused: lambda_hat_0={lam0:.6g} is not negative")
    if t_end is None:
        t_end = 50.0 / abs(lam0)
    t_end = _round_up_to_lattice(t_end, grid.dt)
    u0 = np.ones(grid.n_x) if u0 is None else u0
    w0 = _default_settled(params, grid) if w0 is None else w0
    traj = simulate(params, grid, u0, w0, t_end)
    start = traj.u_norm_series[0] + traj.P_series[0]
    final = traj.u_norm_series[-1] + traj.P_series[-1]
    measured = final / start if start > 0 else 0.0
    return VerdictReport(
        name="extinction",
        passed=measured < EXTINCT_TOL,
        measured=measured,
        expected=0.0,
        tolerance=EXTINCT_TOL,
        notes=(f"t_end={t_end:.6g}, lambda_hat_0={lam0:.6g}, start norm={start:.6g}",),
    )


def check_persistence_and_convergence(
    params: ModelParams,
    grid: Discretization,
    *,
    t_end: float = 60.0,
    require_age_tail_bound: bool = True,
    generic_u0: np.ndarray | None = None,
    generic_w0: np.ndarray | None = None,
) -> VerdictReport:
    """Supercritical sandwich: monotone flows onto the positive equilibrium.

    Three sub-checks: (a) the super-trajectory's max_x u never rises and the
    sub-trajectory's never falls (per-step, MONOTONE_TOL); (b) both final
    states match the computed equilibrium within CONVERGE_TOL in relative
    sup-norm (u, w, and P); (c) a generic positive run stays above half the
    sub-trajectory's late-time floor, witnessing uniform persistence.

    ``require_age_tail_bound`` enforces the admissible-initial-data envelope
    w0 <= M2 exp(-mu_lower a) on the generic run; disable it for the regime
    (unbounded ages, crowding-monotone rates, density-independent
    establishment) where that hypothesis is not needed.
    """
    report = spectral_report(params, grid)
    if report.r0 <= 1.0:
        raise GateError(f"persistence check misused: r0={report.r0:.6g} <= 1")
    audit = audit_assumptions(params, grid)
    if not audit.comparison_ready:
        raise GateError(
            "persistence check needs order-preserving rates: "
            + "; ".join(audit.first_violations.values())
        )
    if not audit.kernels_decreasing_in_p:
        raise GateError("persistence check needs lifetime kernels decreasing in P")

    pair = build_super_sub(params, grid, report)
    eq = positive_equilibrium(params, grid)
    if math.isinf(params.a_max):
        # The initial age distribution is only flushed out after one full
        # horizon; convergence cannot be judged before that.
        t_end = max(t_end, grid.A + 10.0)
    t_end = _round_up_to_lattice(t_end, grid.dt)

    u0_gen = np.ones(grid.n_x) if generic_u0 is None else generic_u0
    w0_gen = _default_settled(params, grid) if generic_w0 is None else generic_w0
    notes = [f"epsilon={pair.epsilon:.6g}, M1={pair.m1:.6g}, M2={pair.m2:.6g}, t_end={t_end:.6g}"]
    if require_age_tail_bound:
        envelope = pair.m2 * np.exp(-params.mu_lower * grid.ages)
        excess = float((w0_gen - envelope[None, :]).max())
        if excess > 1e-12:
            raise GateError(
                f"generic settled initial data exceeds the admissible age envelope by {excess:.3e}"
            )
        notes.append("generic initial data inside the age envelope")
    else:
        notes.append("age-envelope hypothesis waived (monotone unbounded-age regime)")

    upper = simulate(params, grid, *pair.upper, t_end)
    lower = simulate(params, grid, *pair.lower, t_end)
    generic = simulate(params, grid, u0_gen, w0_gen, t_end)

    up_rise = float(np.diff(upper.u_norm_series).max())
    low_fall = float(-np.diff(lower.u_norm_series).min())
    mono_ok = up_rise <= MONOTONE_TOL and low_fall <= MONOTONE_TOL
    notes.append(f"monotone: upper rise {up_rise:.3e}, lower fall {low_fall:.3e}")

    u_scale = float(np.abs(eq.u_star).max())
    w_scale = float(np.abs(eq.w_star).max())
    gaps = []
    for traj in (upper, lower):
        st = traj.final
        gaps.append(float(np.abs(st.u - eq.u_star).max()) / u_scale)
        gaps.append(float(np.abs(st.w - eq.w_star).max()) / w_scale)
        gaps.append(abs(st.P - eq.p_star) / eq.p_star)
    worst_gap = max(gaps)
    notes.append(f"worst equilibrium gap {worst_gap:.3e}")

    tail = slice(3 * (lower.P_series.size - 1) // 4, None)
    floor = 0.5 * float(lower.u_min_series[tail].min())
    floors = [float(t.u_min_series[tail].min()) for t in (upper, lower, generic)]
    persist_ok = all(f > floor for f in floors)
    notes.append(f"persistence floor {floor:.6g}, trajectory floors {[f'{f:.6g}' for f in floors]}")

    passed = mono_ok and worst_gap < CONVERGE_TOL and persist_ok
    return VerdictReport(
        name="persistence_convergence",
        passed=passed,
        measured=worst_gap,
        expected=0.0,
        tolerance=CONVERGE_TOL,
        notes=tuple(notes),
    )


def check_bounds(params: ModelParams, grid: Discretization, traj: Trajectory, slack: float = BOUND_SLACK) -> VerdictReport:
    """Late-time densities respect the a priori ceilings (with slack).

    The tail window is the last quarter of the recorded series; the measure
    is the worse of max u / ceiling_u and sup_x settled density / ceiling_w.
    """
    n1, n2 = population_ceilings(params)
    n = traj.P_series.size
    tail = slice(3 * (n - 1) // 4, None)
    u_ratio = float(traj.u_norm_series[tail].max()) / n1
    w_ratio = float(traj.settled_sup_series[tail].max()) / n2
    measured = max(u_ratio, w_ratio)
    return VerdictReport(
        name="bounds",
        passed=measured <= slack,
        measured=measured,
        expected=1.0,
        tolerance=slack,
        notes=(f"ceiling_u={n1:.6g} (ratio {u_ratio:.4f}), ceiling_w={n2:.6g} (ratio {w_ratio:.4f})",),
    )


def _cosine_mixture(rng: np.random.Generator, grid: Discretization, n_modes: int = 3) -> np.ndarray:
    f = np.full(grid.n_x, rng.uniform(0.5, 1.5))
    for k in range(1, n_modes + 1):
        f += rng.normal(0.0, 0.3 / k) * np.cos(k * np.pi * grid.x / grid.L)
    return f - f.min() + 0.05


def check_comparison(
    params: ModelParams,
    grid: Discretization,
    seed: int = 0,
    *,
    t_end: float = 8.0,
) -> VerdictReport:
    """Ordered initial data stay ordered under the step map.

    Draws a random smooth pair (x1 <= x2), co-evolves both states, and
    records the worst ordering violation across all steps and components.
    """
    audit = audit_assumptions(params, grid)
    if not audit.comparison_ready:
        raise GateError(
            "comparison check needs order-preserving rates: "
            + "; ".join(audit.first_violations.values())
        )
    rng = np.random.default_rng(seed)
    age_shape = np.exp(-params.mu_lower * grid.ages)
    u1 = _cosine_mixture(rng, grid)
    u2 = u1 + 0.5 * _cosine_mixture(rng, grid)
    w1 = 0.5 * np.outer(_cosine_mixture(rng, grid), age_shape)
    w2 = w1 + 0.5 * np.outer(_cosine_mixture(rng, grid), age_shape)

    s1 = initial_state(params, grid, u1, w1)
    s2 = initial_state(params, grid, u2, w2)
    n_steps = int(round(t_end / grid.dt))
    worst = 0.0
    for _ in range(n_steps):
        s1 = step(params, grid, s1)
        s2 = step(params, grid, s2)
        worst = max(
            worst,
            float((s1.u - s2.u).max()),
            float((s1.w - s2.w).max()),
            s1.P - s2.P,
        )
    worst = max(worst, 0.0)
    return VerdictReport(
        name="comparison",
        passed=worst <= ORDER_TOL,
        measured=worst,
        expected=0.0,
        tolerance=ORDER_TOL,
        notes=(f"seed={seed}, steps={n_steps}",),
    )


def _skip(name: str, reason: str) -> VerdictReport:
    return VerdictReport(
        name=name, passed=True, measured=float("nan"), expected=float("nan"),
        tolerance=float("nan"), notes=(f"skipped: {reason}",), skipped=True,
    )


def run_suite(
    params: ModelParams,
    grid: Discretization,
    checks: tuple = ("extinction", "persistence", "bounds", "comparison"),
    seed: int = 0,
    t_end_bounds: float = 40.0,
) -> list:
    """Run the applicable checks, skipping those outside their regime."""
    lam0, _, _, _ = principal_eigenvalue(params, grid, 0.0)
    audit = audit_assumptions(params, grid)
    verdicts = []
    for name in checks:
        if name == "extinction":
            if lam0 >= 0.0:
                verdicts.append(_skip(name, f"population is not subcritical (lambda_hat_0={lam0:.6g})"))
            elif not audit.crowding_monotone:
                verdicts.append(_skip(name, "rates are not crowding-monotone"))
            else:
                verdicts.append(check_extinction(params, grid))
        elif name == "persistence":
            if lam0 <= 0.0:
                verdicts.append(_skip(
                    "persistence_convergence",
                    f"R0 < 1 regime (lambda_hat_0={lam0:.6g}), nothing persists",
                ))
            elif not (audit.comparison_ready and audit.kernels_decreasing_in_p):
                verdicts.append(_skip(
                    "persistence_convergence",
                    "rates lack the monotone structure for the sandwich",
                ))
            else:
                verdicts.append(check_persistence_and_convergence(params, grid))
        elif name == "bounds":
            t_end = _round_up_to_lattice(t_end_bounds, grid.dt)
            traj = simulate(params, grid, np.ones(grid.n_x), _default_settled(params, grid), t_end)
            verdicts.append(check_bounds(params, grid, traj))
        elif name == "comparison":
            if not audit.comparison_ready:
                verdicts.append(_skip(name, "rates are not order-preserving"))
            else:
                verdicts.append(check_comparison(params, grid, seed=seed))
        else:
            raise ValueError(f"unknown check {name!r}")
    return verdicts
