"""Rate-law algebra: separable evaluation, bounds, and the structure audit."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import settleflow as sf
from conftest import constant_params, grid_for, replace, saturating_params


def test_spatial_field_constant_and_bounds():
    f = sf.SpatialField.constant(5, 2.5)
    assert f.n_x == 5
    assert f.min == f.max == 2.5
    with pytest.raises((ValueError, RuntimeError)):
        f.values[0] = 1.0  # frozen


def test_spatial_field_from_callable():
    f = sf.SpatialField.from_callable(9, 2.0, lambda x: x**2)
    x = np.linspace(0.0, 2.0, 9)
    np.testing.assert_allclose(f.values, x**2)


def test_spatial_field_rejects_nonfinite():
    with pytest.raises(sf.ConfigError):
        sf.SpatialField(np.array([1.0, np.nan, 1.0]))


def test_age_profile_constant():
    prof = sf.AgeProfile.constant(3.0)
    np.testing.assert_allclose(prof.at(np.array([0.0, 1.0, 7.5])), 3.0)
    assert prof.sup(math.inf) == 3.0
    assert prof.inf(math.inf) == 3.0


def test_age_profile_exponential():
    prof = sf.AgeProfile.exponential(2.0, 0.5)
    ages = np.array([0.0, 1.0, 4.0])
    np.testing.assert_allclose(prof.at(ages), 2.0 * np.exp(-0.5 * ages))
    assert prof.sup(math.inf) == 2.0
    assert prof.inf(math.inf) == 0.0
    assert prof.inf(4.0) == pytest.approx(2.0 * math.exp(-2.0))


def test_age_profile_table_interp_and_extrapolation():
    prof = sf.AgeProfile.table([0.0, 1.0, 2.0], [1.0, 0.5, 0.25])
    assert prof.at(np.array([0.5]))[0] == pytest.approx(0.75)
    assert prof.at(np.array([1.5]))[0] == pytest.approx(0.375)
    # constant extrapolation beyond the last knot
    assert prof.at(np.array([3.0]))[0] == pytest.approx(0.25)
    assert prof.at(np.array([100.0]))[0] == pytest.approx(0.25)
    assert prof.sup(math.inf) == 1.0
    assert prof.inf(math.inf) == 0.25


def test_density_response_formulas():
    assert sf.DensityResponse.saturating(1.0).at(1.0) == pytest.approx(0.5)
    assert sf.DensityResponse.exponential(0.3).at(2.0) == pytest.approx(math.exp(-0.6))
    lt = sf.DensityResponse.linear_threshold(0.5, 2.0)
    assert lt.at(1.0) == pytest.approx(1.5)
    assert lt.at(4.0) == pytest.approx(2.0)  # capped
    assert lt.sup == 2.0


def test_density_response_rejects_negative_population():
    with pytest.raises(ValueError):
        sf.DensityResponse.saturating(1.0).at(-0.5)


@given(
    kind=st.sampled_from(["constant", "saturating", "exponential", "linear_threshold"]),
    a=st.floats(min_value=0.01, max_value=10.0),
    b=st.floats(min_value=1.0, max_value=10.0),
)
@settings(max_examples=60, deadline=None)
def test_density_response_is_one_at_zero(kind, a, b):
    """Every response kind is normalized so the P=0 linearization is bare."""
    resp = {
        "constant": sf.DensityResponse.constant(),
        "saturating": sf.DensityResponse.saturating(a),
        "exponential": sf.DensityResponse.exponential(a),
        "linear_threshold": sf.DensityResponse.linear_threshold(a, b),
    }[kind]
    assert resp.at(0.0) == 1.0


@given(p1=st.floats(min_value=0.0, max_value=50.0), p2=st.floats(min_value=0.0, max_value=50.0))
@settings(max_examples=60, deadline=None)
def test_saturating_and_exponential_nonincreasing(p1, p2):
    lo, hi = min(p1, p2), max(p1, p2)
    for resp in (sf.DensityResponse.saturating(2.0), sf.DensityResponse.exponential(0.7)):
        assert resp.at(lo) >= resp.at(hi)


def test_eval_beta_separable():
    p = constant_params(9, beta=6.0)
    p = replace(
        p,
        beta=sf.RateLaw(
            spatial=sf.SpatialField.constant(9, 6.0),
            age=sf.AgeProfile.exponential(1.0, 0.5),
            response=sf.DensityResponse.saturating(1.0),
        ),
    )
    ages = np.array([0.0, 2.0])
    out = sf.rates.eval_beta(p, ages, 1.0)
    assert out.shape == (9, 2)
    np.testing.assert_allclose(out[:, 0], 6.0 * 1.0 * 0.5)
    np.testing.assert_allclose(out[:, 1], 6.0 * math.exp(-1.0) * 0.5)


def test_eval_beta_saturating_benchmark_value():
    # base 6 with saturating(K=1) response at P=1 gives 3
    p = saturating_params(5, beta0=6.0)
    out = sf.rates.eval_beta(p, np.array([1.0]), 1.0)
    np.testing.assert_allclose(out, 3.0)


def test_eval_beta_zero_profile():
    p = constant_params(5, beta=0.0)
    out = sf.rates.eval_beta(p, np.array([0.3, 1.7]), 4.0)
    assert np.all(out == 0.0)


def test_eval_chi_has_no_age_axis():
    p = constant_params(5)
    out = sf.rates.eval_chi(p, 0.0)
    assert out.shape == (5,)
    np.testing.assert_allclose(out, 1.0)


def test_model_params_validation_errors():
    n = 7
    good = constant_params(n)
    with pytest.raises(sf.ConfigError):
        replace(good, d=-0.5)
    with pytest.raises(sf.ConfigError):
        replace(good, m=sf.SpatialField.constant(n, 0.0))  # must be > 0
    with pytest.raises(sf.ConfigError):
        replace(good, e=sf.SpatialField.constant(n + 1, 1.0))  # size mismatch
    with pytest.raises(sf.ConfigError):
        replace(good, chi=sf.RateLaw(spatial=sf.SpatialField.constant(n, 1.5)))  # chi > 1
    with pytest.raises(sf.ConfigError):
        replace(good, mu_lower=2.0)  # exceeds actual infimum of mu
    with pytest.raises(sf.ConfigError):
        replace(good, a_max=-1.0)
    with pytest.raises(sf.ConfigError):
        # chi cannot carry an age profile
        replace(
            good,
            chi=sf.RateLaw(
                spatial=sf.SpatialField.constant(n, 1.0),
                age=sf.AgeProfile.exponential(1.0, 1.0),
            ),
        )


def test_cumulative_mortality_exact_for_constant_rate():
    p = constant_params(5, mu=2.0)
    g = grid_for(p, dt=0.05)
    cum = sf.cumulative_mortality(p, g.ages, g.da, P=0.0)
    np.testing.assert_allclose(cum, np.broadcast_to(2.0 * g.ages, cum.shape), rtol=1e-13)


def test_cumulative_mortality_piecewise_linear_rate():
    # mu(a) linear on [0,2] then flat; closed-form integral available
    n = 5
    p = constant_params(n)
    p = replace(
        p,
        mu=sf.RateLaw(
            spatial=sf.SpatialField.constant(n, 1.0),
            age=sf.AgeProfile.table([0.0, 2.0, 4.0], [1.0, 0.5, 0.5]),
        ),
        mu_lower=0.5,
        a_max=4.0,
    )
    g = grid_for(p, dt=0.05)
    cum = sf.cumulative_mortality(p, g.ages, g.da, P=0.0)
    a = g.ages
    exact = np.where(a <= 2.0, a - a**2 / 8.0, 1.5 + 0.5 * (a - 2.0))
    # full cells are exact for a linear integrand; the closing half cell is O(da^2)
    assert np.abs(cum - exact).max() < g.da**2


def test_birth_kernel_matches_presence_kernel_for_unit_age_profile():
    p = saturating_params(9)
    g = grid_for(p, dt=0.05)
    birth = sf.birth_kernel(p, g.ages, g.da, P=0.7)
    presence = sf.presence_kernel(p, g.ages, g.da, P=0.7)
    # beta has a unit age profile here, so the kernels differ by the response factor
    np.testing.assert_allclose(birth, 6.0 / 1.7 * presence, rtol=1e-12)


def test_population_ceilings_benchmark():
    p = saturating_params(17)
    n1, n2 = sf.population_ceilings(p)
    assert n1 == pytest.approx(6.0)
    assert n2 == pytest.approx(6.0)


def test_population_ceilings_formula():
    p = constant_params(9, beta=4.0, c=2.0, mu=0.5, chi=0.5, e=3.0)
    n1, n2 = sf.population_ceilings(p)
    assert n1 == pytest.approx(4.0 * 0.5 * 3.0 / (2.0 * 0.5))
    assert n2 == pytest.approx(4.0 * 0.25 * 9.0 / (2.0 * 0.25))


class TestAudit:
    def test_constant_rates_fully_monotone(self):
        p = constant_params(17)
        g = grid_for(p)
        rep = sf.audit_assumptions(p, g)
        assert rep.birth_map_increasing
        assert rep.mortality_nonincreasing_in_p
        assert rep.settlement_nondecreasing_in_p
        assert rep.crowding_monotone
        assert rep.kernels_decreasing_in_p
        assert rep.comparison_ready

    def test_saturating_birth_keeps_order_structure(self):
        p = saturating_params(17)
        g = grid_for(p)
        rep = sf.audit_assumptions(p, g)
        assert rep.comparison_ready
        assert rep.kernels_decreasing_in_p

    def test_decreasing_settlement_breaks_order(self):
        p = constant_params(17)
        p = replace(
            p,
            chi=sf.RateLaw(
                spatial=sf.SpatialField.constant(17, 1.0),
                response=sf.DensityResponse.saturating(1.0),
            ),
        )
        g = grid_for(p)
        rep = sf.audit_assumptions(p, g)
        assert not rep.settlement_nondecreasing_in_p
        assert not rep.comparison_ready
        assert "settlement_nondecreasing_in_p" in rep.first_violations

    def test_vanishing_mortality_floor_rejected(self):
        # a mortality response decaying to zero contradicts the declared floor
        with pytest.raises(sf.ConfigError):
            replace(
                constant_params(17),
                mu=sf.RateLaw(
                    spatial=sf.SpatialField.constant(17, 1.0),
                    response=sf.DensityResponse.saturating(5.0),
                ),
            )

    def test_crowding_raised_mortality_breaks_comparison(self):
        # mortality rising with P keeps dissipativity but breaks order preservation
        p = replace(
            constant_params(17),
            mu=sf.RateLaw(
                spatial=sf.SpatialField.constant(17, 1.0),
                response=sf.DensityResponse.linear_threshold(0.5, 3.0),
            ),
        )
        g = grid_for(p, dt=0.1)
        rep = sf.audit_assumptions(p, g)
        assert not rep.mortality_nonincreasing_in_p
        assert not rep.comparison_ready
        assert rep.crowding_monotone
        assert rep.kernels_decreasing_in_p

    def test_rising_birth_response_breaks_kernel_decrease(self):
        p = constant_params(17, beta=2.0)
        p = replace(
            p,
            beta=sf.RateLaw(
                spatial=sf.SpatialField.constant(17, 2.0),
                response=sf.DensityResponse.linear_threshold(0.5, 3.0),
            ),
        )
        g = grid_for(p)
        rep = sf.audit_assumptions(p, g)
        assert rep.birth_map_increasing
        assert not rep.kernels_decreasing_in_p

    def test_report_is_deterministic(self):
        p = saturating_params(17)
        g = grid_for(p)
        assert sf.audit_assumptions(p, g) == sf.audit_assumptions(p, g)
