"""Linear stability analysis at the extinction state.

Two routes measure whether a sparse population grows.  The basic
reproduction number r0 is the spectral radius of the next-generation
operator: lifetime recruitment per disperser, diag(K_0), composed with the
disperser resolvent (m + s - d Lap)^{-1}, where the resolvent loss field s is
the settlement rate e by default (an override hook exists for variant loss
accounting).  The growth-rate route studies the discounted kernels

    K_k(x) = chi(x, 0) e(x) * integral beta(x, a, 0) exp(-cum_mu(x, a) - k a) da

through lambda_hat(k), the principal eigenvalue of d Lap + diag(K_k - m - e).
lambda_hat is strictly decreasing in k with slope <= -1, so g(k) =
lambda_hat(k) - k has at most one root; that root is the exponential growth
bound of the linearized dynamics.  Both routes must agree in sign with each
other: sign(r0 - 1) = sign(lambda_hat(0)) = sign(root).

With an unbounded age span the discount must stay integrable, so the root is
only reported when lambda_hat(0) >= 0 (supercritical or critical); in the
subcritical case the report stores None for it.

The eigenvalue solves run on the symmetrized operator: with W the trapezoid
weight matrix, W L is symmetric, so S = W^(1/2) (d L + diag(q)) W^(-1/2) is a
symmetric tridiagonal matrix and LAPACK's tridiagonal eigensolver applies.
A shifted power iteration is kept as an alternate method for cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh, eigh_tridiagonal, solve_banded

from .errors import BracketError, ConvergenceError, NumericalError
from .grid import Discretization, laplacian_apply, laplacian_tridiagonal
from .rates import ModelParams, birth_kernel, cumulative_mortality, eval_beta, eval_chi

__all__ = [
    "SpectralReport",
    "kernel_K",
    "principal_eigenvalue",
    "compute_r0",
    "r0_via_eigenproblem",
    "growth_bound",
    "eigenfunction_pair",
    "spectral_report",
]

EIG_TOL = 1e-10
ROOT_TOL = 1e-9
MAX_ITER = 100_000
_SIGN_BAND = 1e-8


@dataclass(frozen=True)
class SpectralReport:
    """Spectral summary at the extinction state.

    ``iterations`` counts the r0 power iteration; ``residual`` is the worst
    operator residual across the r0 iteration and the eigenvalue solve.
    ``s_l0`` is the growth bound root, or None when the age span is
    unbounded and the population is subcritical (no point-spectrum root).
    ``phi_age`` pairs ``phi`` with the age direction using the growth bound
    when present, else lambda_hat_0.
    """

    r0: float
    lambda_hat_0: float
    s_l0: float | None
    phi: np.ndarray
    phi_age: np.ndarray
    iterations: int
    residual: float


def kernel_K(params: ModelParams, grid: Discretization, k: float = 0.0) -> np.ndarray:
    """Discounted lifetime recruitment kernel K_k at the extinction state."""
    return birth_kernel(params, grid.ages, grid.da, 0.0, extra_decay=k)


def _principal_eigenpair_dense(grid: Discretization, d: float, q: np.ndarray):
    sub, diag, sup = laplacian_tridiagonal(grid)
    main = d * diag + q
    off = d * np.sqrt(sup[:-1] * sub[1:])
    vals, vecs = eigh_tridiagonal(main, off, select="i", select_range=(grid.n_x - 1, grid.n_x - 1))
    lam = float(vals[0])
    psi = vecs[:, 0]
    phi = psi / np.sqrt(grid.x_weights)
    peak = np.argmax(np.abs(phi))
    if phi[peak] < 0:
        phi = -phi
    if d > 0 and phi.min() < -1e-10 * phi.max():
        raise NumericalError("principal eigenvector is not single-signed")
    phi = np.maximum(phi, 0.0)
    phi /= phi.max()
    return lam, phi, 1


def _principal_eigenpair_power(grid: Discretization, d: float, q: np.ndarray, tol: float, max_iter: int):
    shift = 2.0 * d / grid.dx**2 + max(0.0, -float(q.min())) + 1.0
    v = np.ones(grid.n_x)
    w = grid.x_weights

    def apply(vec: np.ndarray) -> np.ndarray:
        return d * laplacian_apply(grid, vec) + q * vec + shift * vec

    for it in range(1, max_iter + 1):
        y = apply(v)
        norm = float(np.abs(y).max())
        if norm == 0.0:
            raise NumericalError("power iteration collapsed to zero")
        y /= norm
        if it % 8 == 0 or it == max_iter:
            z = apply(y)
            lam_shifted = float((y * w) @ z / ((y * w) @ y))
            res = float(np.abs(z - lam_shifted * y).max())
            # the shift cancels inside res, so scale by the unshifted eigenvalue
            if res < tol * max(1.0, abs(lam_shifted - shift)):
                phi = np.maximum(y, 0.0)
                phi /= phi.max()
                return lam_shifted - shift, phi, it
        v = y
    raise ConvergenceError(f"power iteration did not meet tol={tol} in {max_iter} iterations")


def principal_eigenvalue(
    params: ModelParams,
    grid: Discretization,
    k: float = 0.0,
    method: str = "dense",
    tol: float = EIG_TOL,
    max_iter: int = MAX_ITER,
):
    """Top eigenpair of d Lap + diag(K_k - m - e).

    Returns (lambda, phi, iterations, residual) with phi max-normalized and
    nonnegative.  ``method`` selects the symmetrized tridiagonal solve
    ("dense", default) or the shifted power iteration ("power").
    """
    q = kernel_K(params, grid, k) - params.m.values - params.e.values
    if method == "dense":
        lam, phi, its = _principal_eigenpair_dense(grid, params.d, q)
    elif method == "power":
        lam, phi, its = _principal_eigenpair_power(grid, params.d, q, tol, max_iter)
    else:
        raise ValueError(f"unknown eigenvalue method {method!r}")
    residual = float(np.abs(params.d * laplacian_apply(grid, phi) + q * phi - lam * phi).max())
    return lam, phi, its, residual


def _resolvent_bands(params: ModelParams, grid: Discretization, s_field: np.ndarray) -> np.ndarray:
    sub, diag, sup = laplacian_tridiagonal(grid)
    ab = np.zeros((3, grid.n_x))
    ab[0, 1:] = -params.d * sup[:-1]
    ab[2, :-1] = -params.d * sub[1:]
    ab[1] = params.m.values + s_field - params.d * diag
    return ab



def _settlement(params: ModelParams, override) -> np.ndarray:
    """Loss field s in the disperser resolvent: e(x) unless overridden."""
    if override is None:
        return params.e.values
    values = np.asarray(getattr(override, "values", override), dtype=float)
    if values.shape != params.e.values.shape:
        raise NumericalError(
            f"settlement override has shape {values.shape}, expected {params.e.values.shape}"
        )
    return values


def compute_r0(
    params: ModelParams,
    grid: Discretization,
    settlement_field: np.ndarray | None = None,
    tol: float = 1e-12,
    max_iter: int = MAX_ITER,
):
    """Spectral radius of the next-generation operator, by power iteration.

    Returns (r0, iterations, residual).  The disperser resolvent makes the
    iteration gap O(1), so convergence takes tens of iterations.  A zero
    recruitment kernel short-circuits to r0 = 0.
    """
    s_field = _settlement(params, settlement_field)
    k0 = kernel_K(params, grid, 0.0)
    if k0.max() == 0.0:
        return 0.0, 0, 0.0
    ab = _resolvent_bands(params, grid, s_field)

    def apply(vec: np.ndarray) -> np.ndarray:
        return k0 * solve_banded((1, 1), ab, vec, check_finite=False)

    v = np.ones(grid.n_x)
    for it in range(1, max_iter + 1):
        y = apply(v)
        nu = float(np.abs(y).max())
        if nu == 0.0:
            return 0.0, it, 0.0
        y /= nu
        drift = float(np.abs(y - v).max())
        v = y
        if drift * max(1.0, nu) < tol:
            z = apply(v)
            nu = float(np.abs(z).max())
            res = float(np.abs(z - nu * v).max())
            return nu, it, res
    raise ConvergenceError(f"r0 power iteration did not meet tol={tol} in {max_iter} iterations")


def r0_via_eigenproblem(
    params: ModelParams,
    grid: Discretization,
    settlement_field: np.ndarray | None = None,
) -> float:
    """Independent r0 route: dense generalized symmetric eigenproblem.

    diag(K_0) psi = nu * S psi with S the W-symmetrized disperser loss
    operator; the largest nu equals the spectral radius of the
    next-generation operator.
    """
    s_field = _settlement(params, settlement_field)
    k0 = kernel_K(params, grid, 0.0)
    sub, diag, sup = laplacian_tridiagonal(grid)
    n = grid.n_x
    S = np.zeros((n, n))
    main = params.m.values + s_field - params.d * diag
    off = params.d * np.sqrt(sup[:-1] * sub[1:])
    S[np.arange(n), np.arange(n)] = main
    S[np.arange(n - 1), np.arange(1, n)] = -off
    S[np.arange(1, n), np.arange(n - 1)] = -off
    A = np.diag(k0)
    vals = eigh(A, S, eigvals_only=True, subset_by_index=[n - 1, n - 1])
    return float(vals[0])


def _lambda_hat_factory(params: ModelParams, grid: Discretization):
    """Cache the k-independent kernel factor for repeated lambda_hat evals."""
    cum0 = cumulative_mortality(params, grid.ages, grid.da, 0.0)
    base = eval_beta(params, grid.ages, 0.0) * np.exp(-cum0)
    front = eval_chi(params, 0.0) * params.e.values * grid.da
    loss = params.m.values + params.e.values

    def lam_hat(k: float) -> float:
        kk = front * (base @ np.exp(-k * grid.ages))
        lam, _, _ = _principal_eigenpair_dense(grid, params.d, kk - loss)
        return lam

    return lam_hat


def growth_bound(params: ModelParams, grid: Discretization, root_tol: float = ROOT_TOL):
    """Root of lambda_hat(k) = k, the linearized exponential growth rate.

    Returns None when a_max is infinite and lambda_hat(0) < 0 (the root
    leaves the admissible discount range).  Bisection exploits that
    g(k) = lambda_hat(k) - k is strictly decreasing.
    """
    lam_hat = _lambda_hat_factory(params, grid)

    def g(k: float) -> float:
        return lam_hat(k) - k

    if math.isinf(params.a_max):
        lam0 = lam_hat(0.0)
        if lam0 < 0.0:
            return None
        lo, hi = 0.0, lam0 + 1e-12
        if g(lo) < 0.0:  # lam0 == 0 up to round-off
            return 0.0
    else:
        lo, hi = -1.0, 1.0
        for _ in range(80):
            if g(hi) <= 0.0:
                break
            lo, hi = hi, 2.0 * abs(hi)
        else:
            raise BracketError("growth bound: no upper bracket within expansion budget")
        for _ in range(80):
            if g(lo) >= 0.0:
                break
            hi, lo = lo, -2.0 * abs(lo)
        else:
            raise BracketError("growth bound: no lower bracket within expansion budget")

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = g(mid)
        if abs(val) < root_tol:
            return mid
        if val > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * max(1.0, abs(mid)):
            return mid
    raise ConvergenceError("growth bound bisection stalled before meeting tolerance")


def eigenfunction_pair(
    params: ModelParams,
    grid: Discretization,
    lambda0: float,
    phi: np.ndarray,
) -> np.ndarray:
    """Age component paired with a spatial eigenfunction.

    phi_age(x, a) = chi(x, 0) e(x) phi(x) exp(-cum_mu(x, a) - lambda0 a):
    the stationary age profile laid down by recruitment chi e phi growing at
    rate lambda0.  Its renewal row (first age cell) equals chi e phi up to
    the half-cell survival of the midpoint convention.
    """
    cum0 = cumulative_mortality(params, grid.ages, grid.da, 0.0)
    front = eval_chi(params, 0.0) * params.e.values * np.asarray(phi, float)
    return front[:, None] * np.exp(-cum0 - lambda0 * grid.ages[None, :])


def spectral_report(
    params: ModelParams,
    grid: Discretization,
    settlement_field: np.ndarray | None = None,
) -> SpectralReport:
    """Assemble the full linear-analysis summary, enforcing sign consistency."""
    r0, its, res_r0 = compute_r0(params, grid, settlement_field)
    lam0, phi, _, res_eig = principal_eigenvalue(params, grid, 0.0)
    if abs(r0 - 1.0) > _SIGN_BAND and abs(lam0) > _SIGN_BAND:
        if math.copysign(1.0, r0 - 1.0) != math.copysign(1.0, lam0):
            raise NumericalError(
                f"criticality sign mismatch: r0={r0:.12g} vs lambda_hat_0={lam0:.12g}"
            )
    s_l0 = growth_bound(params, grid)
    pair_rate = s_l0 if s_l0 is not None else lam0
    phi_age = eigenfunction_pair(params, grid, pair_rate, phi)
    return SpectralReport(
        r0=r0,
        lambda_hat_0=lam0,
        s_l0=s_l0,
        phi=phi,
        phi_age=phi_age,
        iterations=its,
        residual=max(res_r0, res_eig),
    )
