import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mgseir.dynamics import death_rates, integrate
from mgseir.economics import (
    TERMS,
    gdp_years,
    instantaneous_loss,
    objective,
    pct_gdp,
    summary,
    total_economic_loss,
    total_mortality,
)
from mgseir.model import ModelState, germany_baseline
from mgseir.policy import Family, PolicySchedule

from conftest import zero_policy


def _psi(state, L, p):
    """Loss rates written out from the five-term formula."""
    w = p.group_array("income")
    xi = p.group_array("shielded_productivity")
    ee = p.group_array("undetected_exposed")
    ei = p.group_array("undetected_infectious")
    ka = p.group_array("immunity_passport")
    dl = p.group_array("remaining_employment")
    io = p.group_array("icu_share")
    dd = death_rates(state, p)
    S, E, I, R = state.S, state.E, state.I, state.R
    c = (1 - xi) * w
    return np.column_stack([
        c * S * L,
        c * E * (1 - ee * (1 - L)),
        c * I * (1 - ee * ei * (1 - L)),
        c * (1 - ka) * R * L,
        w * dl * io * dd * I,
    ])


def _random_state(rng, p):
    n = p.group_array("population_share")
    parts = rng.dirichlet(np.ones(5), 3) * n[:, None]
    return ModelState(parts)


def test_no_disease_no_shielding(base):
    s = ModelState.from_groups([[0.46, 0, 0, 0, 0], [0.28, 0, 0, 0, 0], [0.26, 0, 0, 0, 0]])
    assert all(b.total == 0 for b in instantaneous_loss(s, 0.0, base))


def test_hand_case(base):
    s = ModelState.from_groups([[0.4, 0, 0, 0.06, 0], [0.28, 0, 0, 0, 0], [0.26, 0, 0, 0, 0]])
    b = instantaneous_loss(s, (0.5, 0, 0), base)[0]
    assert b.susceptible_shielding == pytest.approx(0.14, abs=1e-15)
    assert b.recovered_shielding == 0.0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_matches_formula(seed):
    rng = np.random.default_rng(seed)
    p = germany_baseline().with_group_values("immunity_passport", rng.uniform(0, 1, 3))
    p = p.with_group_values("undetected_exposed", rng.uniform(0, 1, 3))
    s = _random_state(rng, p)
    L = rng.uniform(0, 1, 3)
    got = np.array([[getattr(b, t) for t in TERMS] for b in instantaneous_loss(s, L, p)])
    np.testing.assert_allclose(got, _psi(s, L, p), rtol=1e-13, atol=0)
    assert np.all(got >= 0)
    for b in instantaneous_loss(s, L, p):
        assert b.total == pytest.approx(sum(getattr(b, t) for t in TERMS), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_no_detection_reduces_to_shielding(seed):
    rng = np.random.default_rng(seed)
    p = germany_baseline().with_group_values("undetected_exposed", 1.0).with_group_values("undetected_infectious", 1.0)
    s = _random_state(rng, p)
    L = rng.uniform(0, 1, 3)
    c = (1 - p.group_array("shielded_productivity")) * p.group_array("income")
    got = instantaneous_loss(s, L, p)
    np.testing.assert_allclose([b.exposed + b.infectious for b in got], c * (s.E + s.I) * L, rtol=1e-12)


def test_loss_monotone_in_shielding(base):
    rng = np.random.default_rng(3)
    s = _random_state(rng, base)
    prev = None
    for lv in np.linspace(0, 1, 11):
        tot = np.array([b.total for b in instantaneous_loss(s, lv, base)])
        if prev is not None:
            assert np.all(tot >= prev)
        prev = tot


def test_disease_free_zero_loss(base):
    p = base.replace(initial_exposed_share=0.0)
    tr = integrate(p, zero_policy(p))
    assert total_economic_loss(tr) == 0 and total_mortality(tr) == 0
    assert objective(tr, 1e6) == 0


def test_full_shielding_closed_form(base):
    p = base.replace(initial_exposed_share=0.0)
    tr = integrate(p, PolicySchedule.constant(Family.UNIFORM, p.horizon, 1.0))
    wn = float(np.dot(p.group_array("income"), p.group_array("population_share")))
    assert total_economic_loss(tr) == pytest.approx(0.7 * wn * 546, rel=1e-12)
    assert gdp_years(total_economic_loss(tr), p) == pytest.approx(0.7 * 546 / 365, rel=1e-12)
    assert round(gdp_years(total_economic_loss(tr), p), 3) == 1.047
    assert pct_gdp(total_economic_loss(tr), p) == pytest.approx(70 * 546 / 365, rel=1e-12)


def test_mortality_by_quadrature(base):
    tr = integrate(base, zero_policy(base), terminal=False)
    I = tr.series("I")
    dd = np.minimum(
        base.group_array("baseline_death_rate") * (1 + base.mortality_lambda * tr.icu[:, None]),
        base.group_array("infectious_exit"),
    )
    rate = (dd * base.group_array("icu_share") * I).sum(axis=1)
    assert abs(np.trapezoid(rate, tr.t) - total_mortality(tr)) < 1e-6


def test_mortality_non_decreasing_in_prefix(base):
    tr = integrate(base, zero_policy(base))
    assert np.all(np.diff(tr.series("D").sum(axis=1)) >= 0)


def test_objective_affine(base):
    tr = integrate(base, PolicySchedule.constant(Family.UNIFORM, base.horizon, 0.3))
    assert objective(tr, 0) == total_economic_loss(tr)
    a, b = 1234.5, 6789.0
    assert objective(tr, a) + objective(tr, b) == pytest.approx(objective(tr, a + b) + objective(tr, 0), rel=1e-14)
    with pytest.raises(ValueError):
        objective(tr, -1.0)


def test_breakdown_sums_to_loss(base):
    tr = integrate(base, PolicySchedule.constant(Family.FULLY_TARGETED, base.horizon, 0.5))
    assert tr.loss_breakdown.sum() == pytest.approx(total_economic_loss(tr), rel=1e-12)
    out = summary(tr, 10.0)
    assert set(out) == {"mortality", "econ_loss", "econ_loss_pct_gdp", "objective", "chi", "loss_breakdown_integrals"}
    assert set(out["loss_breakdown_integrals"]) == {"young", "middle", "senior"}


def test_incomplete_trajectory_rejected(base):
    from dataclasses import replace

    tr = integrate(base, zero_policy(base))
    cut = replace(tr, t=tr.t[:-1], y=tr.y[:-1])
    with pytest.raises(ValueError):
        total_economic_loss(cut)
