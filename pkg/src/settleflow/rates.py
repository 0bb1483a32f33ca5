"""Model coefficients for the two-stage population engine.

The model couples a diffusing dispersal stage u(x, t) on an interval to a
settled, age-structured stage w(x, a, t).  Five coefficient families enter:

* ``m``    per-capita loss rate of dispersers (spatial field),
* ``e``    settlement rate of dispersers (spatial field),
* ``c``    crowding coefficient of the disperser logistic term (spatial field),
* ``beta`` per-capita birth rate of settled individuals (rate law),
* ``mu``   per-capita mortality of settled individuals (rate law),
* ``chi``  fraction of settling dispersers that establish (rate law, no age
  dependence, values in (0, 1]).

A rate law is separable by construction:

    law(x, a, P) = spatial_profile(x) * age_profile(a) * density_response(P)

where P is the total settled population.  Every density response satisfies
``response(0) = 1`` so the spatial and age profiles fix the baseline scale.
This algebra keeps suprema, infima, and monotonicity probes exact while still
covering the qualitative regimes of interest (density-damped reproduction,
density-driven mortality, crowding-limited establishment).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError

__all__ = [
    "SpatialField",
    "AgeProfile",
    "DensityResponse",
    "RateLaw",
    "ModelParams",
    "AssumptionReport",
    "eval_beta",
    "eval_mu",
    "eval_chi",
    "cumulative_mortality",
    "birth_kernel",
    "presence_kernel",
    "population_ceilings",
    "audit_assumptions",
]

_MONOTONE_TOL = 1e-12


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.asarray(a, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class SpatialField:
    """Nodal values of a coefficient on the uniform spatial grid."""

    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.atleast_1d(np.asarray(self.values, dtype=float))
        if vals.ndim != 1 or vals.size == 0:
            raise ConfigError("spatial field must be a non-empty 1-D array")
        if not np.all(np.isfinite(vals)):
            raise ConfigError("spatial field contains non-finite values")
        object.__setattr__(self, "values", _freeze(vals))

    @classmethod
    def constant(cls, n_x: int, value: float) -> "SpatialField":
        return cls(np.full(n_x, float(value)))

    @classmethod
    def from_callable(cls, n_x: int, length: float, fn) -> "SpatialField":
        x = np.linspace(0.0, length, n_x)
        return cls(np.asarray([fn(xi) for xi in x], dtype=float))

    @property
    def n_x(self) -> int:
        return self.values.size

    @property
    def min(self) -> float:
        return float(self.values.min())

    @property
    def max(self) -> float:
        return float(self.values.max())


@dataclass(frozen=True)
class AgeProfile:
    """Age dependence of a rate law.

    Kinds:

    * ``constant``      -- level ``value`` at every age,
    * ``exponential``   -- ``value * exp(-decay * a)``,
    * ``table``         -- piecewise-linear through ``(knots, knot_values)``,
      constant beyond the last knot (and before the first).
    """

    kind: str
    value: float = 1.0
    decay: float = 0.0
    knots: tuple = ()
    knot_values: tuple = ()

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "exponential", "table"):
            raise ConfigError(f"unknown age profile kind {self.kind!r}")
        if self.kind in ("constant", "exponential"):
            if not (math.isfinite(self.value) and self.value >= 0.0):
                raise ConfigError("age profile level must be finite and >= 0")
            if self.kind == "exponential" and not (
                math.isfinite(self.decay) and self.decay >= 0.0
            ):
                raise ConfigError("age profile decay must be finite and >= 0")
        else:
            knots = tuple(float(k) for k in self.knots)
            vals = tuple(float(v) for v in self.knot_values)
            if len(knots) < 2 or len(knots) != len(vals):
                raise ConfigError("table age profile needs matching knots/values, >= 2 points")
            if any(b <= a for a, b in zip(knots, knots[1:])):
                raise ConfigError("table age profile knots must be strictly increasing")
            if any(not math.isfinite(v) or v < 0.0 for v in vals):
                raise ConfigError("table age profile values must be finite and >= 0")
            object.__setattr__(self, "knots", knots)
            object.__setattr__(self, "knot_values", vals)

    @classmethod
    def constant(cls, value: float = 1.0) -> "AgeProfile":
        return cls("constant", value=value)

    @classmethod
    def exponential(cls, value: float, decay: float) -> "AgeProfile":
        return cls("exponential", value=value, decay=decay)

    @classmethod
    def table(cls, knots: Sequence[float], values: Sequence[float]) -> "AgeProfile":
        return cls("table", knots=tuple(knots), knot_values=tuple(values))

    def at(self, ages: np.ndarray) -> np.ndarray:
        ages = np.asarray(ages, dtype=float)
        if self.kind == "constant":
            return np.full_like(ages, self.value)
        if self.kind == "exponential":
            return self.value * np.exp(-self.decay * ages)
        return np.interp(ages, self.knots, self.knot_values)

    def sup(self, a_max: float) -> float:
        if self.kind == "constant":
            return self.value
        if self.kind == "exponential":
            return self.value
        upper = [v for k, v in zip(self.knots, self.knot_values) if k <= a_max]
        upper.append(float(self.at(np.asarray([min(a_max, self.knots[-1])]))[0]))
        return max(upper)

    def inf(self, a_max: float) -> float:
        if self.kind == "constant":
            return self.value
        if self.kind == "exponential":
            if math.isinf(a_max):
                return 0.0 if self.decay > 0 else self.value
            return self.value * math.exp(-self.decay * a_max)
        lower = [v for k, v in zip(self.knots, self.knot_values) if k <= a_max]
        lower.append(float(self.at(np.asarray([min(a_max, self.knots[-1])]))[0]))
        return min(lower)


@dataclass(frozen=True)
class DensityResponse:
    """Dependence of a rate law on the total settled population P >= 0.

    Kinds (all normalized to ``response(0) = 1``):

    * ``constant``          -- 1,
    * ``saturating``        -- ``1 / (1 + P / scale)``,
    * ``exponential``       -- ``exp(-rate * P)``,
    * ``linear_threshold``  -- ``min(1 + rate * P, cap)``; the one increasing
      response in the family, capped so suprema stay finite.
    """

    kind: str
    scale: float = 1.0
    rate: float = 0.0
    cap: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "saturating", "exponential", "linear_threshold"):
            raise ConfigError(f"unknown density response kind {self.kind!r}")
        if self.kind == "saturating" and not (math.isfinite(self.scale) and self.scale > 0):
            raise ConfigError("saturating response needs scale > 0")
        if self.kind in ("exponential", "linear_threshold") and not (
            math.isfinite(self.rate) and self.rate >= 0.0
        ):
            raise ConfigError("response rate must be finite and >= 0")
        if self.kind == "linear_threshold" and not (math.isfinite(self.cap) and self.cap >= 1.0):
            raise ConfigError("linear_threshold response needs cap >= 1")

    @classmethod
    def constant(cls) -> "DensityResponse":
        return cls("constant")

    @classmethod
    def saturating(cls, scale: float) -> "DensityResponse":
        return cls("saturating", scale=scale)

    @classmethod
    def exponential(cls, rate: float) -> "DensityResponse":
        return cls("exponential", rate=rate)

    @classmethod
    def linear_threshold(cls, rate: float, cap: float) -> "DensityResponse":
        return cls("linear_threshold", rate=rate, cap=cap)

    def at(self, P):
        P = np.asarray(P, dtype=float)
        if np.any(P < 0):
            raise ValueError("density response evaluated at negative P")
        if self.kind == "constant":
            out = np.ones_like(P)
        elif self.kind == "saturating":
            out = 1.0 / (1.0 + P / self.scale)
        elif self.kind == "exponential":
            out = np.exp(-self.rate * P)
        else:
            out = np.minimum(1.0 + self.rate * P, self.cap)
        return out if out.ndim else float(out)

    @property
    def sup(self) -> float:
        return self.cap if self.kind == "linear_threshold" and self.rate > 0 else 1.0

    @property
    def inf(self) -> float:
        if self.kind in ("saturating", "exponential"):
            return 0.0 if (self.kind == "saturating" or self.rate > 0) else 1.0
        return 1.0

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant" or (
            self.kind in ("exponential", "linear_threshold") and self.rate == 0.0
        )


@dataclass(frozen=True)
class RateLaw:
    """Separable rate ``spatial(x) * age(a) * response(P)``."""

    spatial: SpatialField
    age: AgeProfile = field(default_factory=AgeProfile.constant)
    response: DensityResponse = field(default_factory=DensityResponse.constant)

    def matrix(self, ages: np.ndarray, P: float) -> np.ndarray:
        """Values on the (x, age) lattice at settled population P."""
        return np.outer(self.spatial.values, self.age.at(ages)) * self.response.at(P)

    def base_matrix(self, ages: np.ndarray) -> np.ndarray:
        """The P-independent factor ``spatial(x) * age(a)``."""
        return np.outer(self.spatial.values, self.age.at(ages))

    def sup(self, a_max: float) -> float:
        return self.spatial.max * self.age.sup(a_max) * self.response.sup

    def inf(self, a_max: float) -> float:
        return self.spatial.min * self.age.inf(a_max) * self.response.inf


def _require_positive(field_values: np.ndarray, name: str) -> None:
    if np.any(field_values <= 0.0):
        raise ConfigError(f"{name} must be strictly positive everywhere")


@dataclass(frozen=True)
class ModelParams:
    """Complete coefficient set for the model on the interval (0, L).

    ``mu_lower`` is the declared uniform lower bound on settled mortality.
    It is validated against the exact infimum implied by the separable
    descriptor (product of the factor infima), so an inconsistent
    declaration fails loudly at construction time.
    """

    d: float
    m: SpatialField
    e: SpatialField
    c: SpatialField
    beta: RateLaw
    mu: RateLaw
    chi: RateLaw
    a_max: float
    mu_lower: float
    L: float = 1.0

    def __post_init__(self) -> None:
        n = self.m.n_x
        spatial_sizes = {
            "m": self.m.n_x,
            "e": self.e.n_x,
            "c": self.c.n_x,
            "beta": self.beta.spatial.n_x,
            "mu": self.mu.spatial.n_x,
            "chi": self.chi.spatial.n_x,
        }
        if len(set(spatial_sizes.values())) != 1:
            raise ConfigError(f"spatial fields disagree on grid size: {spatial_sizes}")
        if not (math.isfinite(self.d) and self.d >= 0.0):
            raise ConfigError("diffusivity d must be finite and >= 0")
        if not (math.isfinite(self.L) and self.L > 0.0):
            raise ConfigError("domain length L must be finite and > 0")
        if not (self.a_max > 0.0):
            raise ConfigError("a_max must be positive (or infinite)")
        if not (math.isfinite(self.mu_lower) and self.mu_lower > 0.0):
            raise ConfigError("mu_lower must be finite and > 0")
        _require_positive(self.m.values, "m")
        _require_positive(self.e.values, "e")
        _require_positive(self.c.values, "c")
        if np.any(self.beta.spatial.values < 0.0):
            raise ConfigError("beta spatial profile must be >= 0")
        _require_positive(self.mu.spatial.values, "mu spatial profile")
        _require_positive(self.chi.spatial.values, "chi spatial profile")
        mu_inf = self.mu.inf(self.a_max)
        if self.mu_lower > mu_inf + 1e-12:
            raise ConfigError(
                f"declared mu_lower={self.mu_lower} exceeds the infimum {mu_inf:.6g} "
                "implied by the mortality law"
            )
        chi_sup = self.chi.spatial.max * self.chi.response.sup
        if chi_sup > 1.0 + 1e-12:
            raise ConfigError(f"chi exceeds 1 (sup {chi_sup:.6g}); establishment is a fraction")
        if self.chi.response.inf <= 0.0 and self.chi.response.kind == "linear_threshold":
            raise ConfigError("chi response must stay positive")
        if self.chi.age.kind != "constant" or self.chi.age.value != 1.0:
            raise ConfigError("chi carries no age profile")

    @property
    def n_x(self) -> int:
        return self.m.n_x

    @property
    def density_independent(self) -> bool:
        """True when no coefficient reacts to the settled population."""
        return (
            self.beta.response.is_constant
            and self.mu.response.is_constant
            and self.chi.response.is_constant
        )


def eval_beta(params: ModelParams, ages: np.ndarray, P: float) -> np.ndarray:
    """Birth rate on the (x, age) lattice at settled population P."""
    return params.beta.matrix(ages, P)


def eval_mu(params: ModelParams, ages: np.ndarray, P: float) -> np.ndarray:
    """Mortality rate on the (x, age) lattice at settled population P."""
    return params.mu.matrix(ages, P)


def eval_chi(params: ModelParams, P: float) -> np.ndarray:
    """Establishment fraction per node at settled population P."""
    return params.chi.spatial.values * params.chi.response.at(P)


def cumulative_mortality(
    params: ModelParams, ages: np.ndarray, da: float, P: float
) -> np.ndarray:
    """Midpoint-rule cumulative mortality integral up to each age sample.

    With age samples at cell midpoints a_j, the integral of mu from 0 to a_j
    is da * (sum of mu over cells 0..j-1 plus half the cell-j value), which
    reproduces mu * a_j exactly for age-constant mortality.
    """
    mu = eval_mu(params, ages, P)
    return da * np.cumsum(mu, axis=1) - 0.5 * da * mu


def birth_kernel(
    params: ModelParams,
    ages: np.ndarray,
    da: float,
    P: float,
    extra_decay: float = 0.0,
) -> np.ndarray:
    """Expected recruitment per unit disperser density over a settled lifetime.

    chi(x, P) e(x) * integral over age of beta(x, a, P) * survival(x, a, P)
    * exp(-extra_decay * a), with the optional exponential discount used by
    the growth-rate analysis.
    """
    survival = np.exp(-cumulative_mortality(params, ages, da, P) - extra_decay * ages)
    integrand = eval_beta(params, ages, P) * survival
    return eval_chi(params, P) * params.e.values * integrand.sum(axis=1) * da


def presence_kernel(params: ModelParams, ages: np.ndarray, da: float, P: float) -> np.ndarray:
    """Expected settled lifetime (person-time) per unit disperser density.

    chi(x, P) e(x) * integral over age of the survival probability.
    """
    survival = np.exp(-cumulative_mortality(params, ages, da, P))
    return eval_chi(params, P) * params.e.values * survival.sum(axis=1) * da


def population_ceilings(params: ModelParams) -> tuple:
    """A priori (disperser sup, settled total) bounds from the coefficient extremes.

    ceiling_u = sup(beta) sup(chi) sup(e) / (inf(c) mu_lower)
    ceiling_w = sup(beta) sup(chi)^2 sup(e)^2 / (inf(c) mu_lower^2)
    """
    beta_sup = params.beta.sup(params.a_max)
    chi_sup = min(1.0, params.chi.spatial.max * params.chi.response.sup)
    e_sup = params.e.max
    c_inf = params.c.min
    n1 = beta_sup * chi_sup * e_sup / (c_inf * params.mu_lower)
    n2 = beta_sup * chi_sup**2 * e_sup**2 / (c_inf * params.mu_lower**2)
    return n1, n2


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of the structural audits backing the qualitative theory.

    Each flag is a sampled necessary condition on the probe lattice, not a
    proof; a False comes with the first violating sample in
    ``first_violations``.
    """

    birth_map_increasing: bool
    mortality_nonincreasing_in_p: bool
    settlement_nondecreasing_in_p: bool
    crowding_monotone: bool
    kernels_decreasing_in_p: bool
    first_violations: dict
    notes: tuple

    @property
    def comparison_ready(self) -> bool:
        """All hypotheses of the order-preservation machinery hold."""
        return (
            self.birth_map_increasing
            and self.mortality_nonincreasing_in_p
            and self.settlement_nondecreasing_in_p
        )


def _first_decrease(values: np.ndarray, lattice: np.ndarray, tol: float):
    diffs = np.diff(values)
    bad = np.nonzero(diffs < -tol)[0]
    if bad.size == 0:
        return None
    i = int(bad[0])
    return f"at P={lattice[i + 1]:.6g}: drops by {-diffs[i]:.3e} from value {values[i]:.6g}"


def _first_increase(values: np.ndarray, lattice: np.ndarray, tol: float):
    return _first_decrease(-values, lattice, tol)


def audit_assumptions(
    params: ModelParams,
    grid,
    n_probe_x: int = 33,
    n_probe_p: int = 17,
) -> AssumptionReport:
    """Sample the monotonicity structure the qualitative results rely on.

    Probes use a lattice of settled-population values [0, 10 * ceiling_u]
    (17 by default), a subsample of spatial nodes (33 by default), and the
    grid's own age lattice for the survival integrals.  The separable rate
    algebra makes the response factor carry all P dependence, so the response
    functions are probed directly; the lifetime kernels are probed in full
    since cumulative mortality couples age and P.
    """
    n1, _ = population_ceilings(params)
    p_max = 10.0 * max(n1, 1e-12)
    p_lattice = np.linspace(0.0, p_max, n_probe_p)
    violations: dict = {}
    notes = []

    # Recruitment from a scaled family of settled densities: with separable
    # rates the integrated birth term along the ray s * w_ref is proportional
    # to s * beta_response(s * P_ref), so monotonicity in s is scale-free.
    s_lattice = np.linspace(0.0, 1.0, n_probe_p)
    ray = s_lattice * params.beta.response.at(s_lattice * p_max)
    msg = _first_decrease(ray, s_lattice * p_max, _MONOTONE_TOL * max(1.0, ray.max()))
    birth_ok = msg is None
    if msg:
        violations["birth_map_increasing"] = f"scaled-family recruitment {msg}"

    mu_resp = np.asarray(params.mu.response.at(p_lattice))
    msg = _first_increase(mu_resp, p_lattice, _MONOTONE_TOL)
    mu_ok = msg is None
    if msg:
        violations["mortality_nonincreasing_in_p"] = f"mortality response rises: {msg}"
    gamma_star = params.mu.sup(params.a_max)
    notes.append(
        f"pointwise comparison shift gamma={gamma_star:.6g} covers the "
        "density-independent mortality part"
    )

    chi_resp = np.asarray(params.chi.response.at(p_lattice))
    msg = _first_decrease(chi_resp, p_lattice, _MONOTONE_TOL)
    chi_up_ok = msg is None
    if msg:
        violations["settlement_nondecreasing_in_p"] = f"establishment response {msg}"

    beta_resp = np.asarray(params.beta.response.at(p_lattice))
    crowd_msgs = []
    msg = _first_increase(beta_resp, p_lattice, _MONOTONE_TOL)
    if msg:
        crowd_msgs.append(f"birth response rises: {msg}")
    msg = _first_increase(chi_resp, p_lattice, _MONOTONE_TOL)
    if msg:
        crowd_msgs.append(f"establishment response rises: {msg}")
    msg = _first_decrease(mu_resp, p_lattice, _MONOTONE_TOL)
    if msg:
        crowd_msgs.append(f"mortality response drops: {msg}")
    crowding_ok = not crowd_msgs
    if crowd_msgs:
        violations["crowding_monotone"] = "; ".join(crowd_msgs)
    if chi_up_ok and crowding_ok and not params.chi.response.is_constant:
        notes.append(
            "chi passes both directional probes yet is not constant; "
            "monotonicity flags are lattice-resolution limited"
        )

    x_idx = np.unique(np.round(np.linspace(0, params.n_x - 1, n_probe_x)).astype(int))
    births = np.empty((n_probe_p, x_idx.size))
    presence = np.empty_like(births)
    for i, p in enumerate(p_lattice):
        births[i] = birth_kernel(params, grid.ages, grid.da, p)[x_idx]
        presence[i] = presence_kernel(params, grid.ages, grid.da, p)[x_idx]
    kernel_ok = True
    for name, table in (("lifetime birth kernel", births), ("lifetime presence kernel", presence)):
        diffs = np.diff(table, axis=0)
        tol = _MONOTONE_TOL * max(1.0, float(np.abs(table).max()))
        bad = np.argwhere(diffs > tol)
        if bad.size:
            i, j = bad[0]
            kernel_ok = False
            violations.setdefault(
                "kernels_decreasing_in_p",
                f"{name} rises by {diffs[i, j]:.3e} at P={p_lattice[i + 1]:.6g}, "
                f"node {x_idx[j]}",
            )

    return AssumptionReport(
        birth_map_increasing=birth_ok,
        mortality_nonincreasing_in_p=mu_ok,
        settlement_nondecreasing_in_p=chi_up_ok,
        crowding_monotone=crowding_ok,
        kernels_decreasing_in_p=kernel_ok,
        first_violations=violations,
        notes=tuple(notes),
    )
