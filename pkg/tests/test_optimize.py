import numpy as np
import pytest

from mgseir.dynamics import integrate
from mgseir.optimize import (
    FrontierPoint,
    InfeasibleCapError,
    OptimizationError,
    SearchConfig,
    default_chi_grid,
    evaluate_policy,
    frontier,
    nested_frontiers,
    optimize_policy,
    pareto_filter,
    safety_policy,
)
from mgseir.policy import Family, PolicySchedule

QUICK = SearchConfig(population=10, generations=10, polish_rounds=1, polish_start=0.05, polish_stop=0.01)


def corner(params, level, family=Family.UNIFORM):
    return PolicySchedule.constant(family, params.horizon, level)


def test_pareto_examples():
    assert pareto_filter([(0.2, 5), (0.3, 4), (0.25, 6)]) == [(0.3, 4), (0.2, 5)]
    assert pareto_filter([(0.1, 1)]) == [(0.1, 1)]
    pts = [(0.5, 1), (0.4, 2), (0.4, 3), (0.3, 2), (0.1, 9), (0.2, 9)]
    once = pareto_filter(pts)
    assert pareto_filter(once) == once
    assert all(a[0] > b[0] and a[1] < b[1] for a, b in zip(once, once[1:]))


def test_evaluate_disease_free(base):
    p = base.replace(initial_exposed_share=0.0)
    out = evaluate_policy(corner(p, 0.0), p, 1e5)
    assert (out.mortality, out.econ_loss, out.objective) == (0.0, 0.0, 0.0)


def test_evaluate_matches_trajectory(base):
    pol = PolicySchedule.from_vector(Family.SEMI_TARGETED, base.horizon, np.linspace(0, 1, 26))
    out = evaluate_policy(pol, base, 0.0)
    tr = integrate(base, pol)
    assert out.objective == out.econ_loss == tr.loss[-1]
    assert out.mortality == pytest.approx(tr.series("D")[-1].sum(), rel=1e-15)


def test_full_shielding_saves_lives(base):
    assert evaluate_policy(corner(base, 1.0), base, 0).mortality < evaluate_policy(corner(base, 0.0), base, 0).mortality


def test_horizon_mismatch(base):
    with pytest.raises(ValueError):
        evaluate_policy(PolicySchedule.zero(364), base, 0.0)


@pytest.mark.parametrize("family", list(Family))
def test_zero_weight_on_lives(base, family):
    p = optimize_policy(family, base, 0.0, QUICK)
    zero = evaluate_policy(corner(base, 0.0), base, 0.0)
    assert abs(p.econ_loss - zero.econ_loss) < 1e-6


def test_huge_weight_on_lives(base):
    p = optimize_policy(Family.UNIFORM, base, 1e12, QUICK)
    corners = [evaluate_policy(corner(base, lv), base, 0).mortality for lv in (0.0, 1.0)]
    # the gap is bounded by the loss range over chi
    assert p.mortality <= min(corners) + 1e-9


def test_point_invariants(base):
    chi = 300.0
    p = optimize_policy(Family.SEMI_TARGETED, base, chi, QUICK)
    assert p.objective == pytest.approx(p.econ_loss + chi * p.mortality, abs=1e-9)
    again = evaluate_policy(p.policy, base, chi)
    assert (again.mortality, again.econ_loss) == (p.mortality, p.econ_loss)
    assert p.evaluations > 0 and p.seed == QUICK.seed


def test_deterministic(base):
    a = optimize_policy(Family.SEMI_TARGETED, base, 500.0, QUICK)
    b = optimize_policy(Family.SEMI_TARGETED, base, 500.0, QUICK)
    assert a.policy == b.policy and a.econ_loss == b.econ_loss


def test_seed_is_never_beaten_by_result(base):
    seed = PolicySchedule.from_vector(Family.UNIFORM, base.horizon, np.full(13, 0.37))
    chi = 800.0
    p = optimize_policy(Family.FULLY_TARGETED, base, chi, QUICK, [seed])
    assert p.objective <= evaluate_policy(seed, base, chi).objective + 1e-12


def test_dimension_limit(base):
    with pytest.raises(OptimizationError):
        optimize_policy(Family.FULLY_TARGETED, base, 1.0, SearchConfig(knots=100))


def test_negative_chi(base):
    with pytest.raises(ValueError):
        optimize_policy(Family.UNIFORM, base, -1.0, QUICK)


def test_chi_grid_probe(base):
    grid = default_chi_grid(base, 6)
    assert len(grid) == 6 and np.all(np.diff(grid) > 0) and grid[0] > 0


def test_nested_frontiers_dominate(base):
    grid = np.geomspace(50, 5e4, 4)
    sweeps, fronts = nested_frontiers(base, grid, config=QUICK)
    for coarse, fine in zip(list(Family), list(Family)[1:]):
        for a, b in zip(sweeps[coarse], sweeps[fine]):
            assert b.objective <= a.objective + 1e-6
        for p in fronts[coarse]:
            assert any(q.mortality <= p.mortality and q.econ_loss <= p.econ_loss for q in fronts[fine])
    f = fronts[Family.FULLY_TARGETED]
    assert all(a.mortality > b.mortality and a.econ_loss < b.econ_loss for a, b in zip(f, f[1:]))


def test_frontier_single_chi(base):
    pts = frontier(Family.UNIFORM, base, [1000.0], QUICK)
    assert len(pts) == 1 and isinstance(pts[0], FrontierPoint)
    with pytest.raises(ValueError):
        frontier(Family.UNIFORM, base, [10.0, 1.0], QUICK)


def test_safety_vacuous_cap(base):
    p = safety_policy(Family.UNIFORM, base, 1.0, QUICK)
    q = optimize_policy(Family.UNIFORM, base, 0.0, QUICK)
    assert p.policy == q.policy and p.econ_loss == q.econ_loss


def test_safety_caps_ordered(base):
    loose = safety_policy(Family.UNIFORM, base, 0.004, QUICK)
    tight = safety_policy(Family.UNIFORM, base, 0.002, QUICK)
    assert loose.mortality <= 0.004 and tight.mortality <= 0.002
    assert loose.econ_loss <= tight.econ_loss


def test_safety_infeasible(base):
    with pytest.raises(InfeasibleCapError):
        safety_policy(Family.UNIFORM, base, 1e-6, QUICK)


def test_icu_cap_respected(base):
    p = base.replace(icu_cap=0.0008)
    pt = optimize_policy(Family.SEMI_TARGETED, p, 0.0, QUICK)
    assert pt.penalty == 0.0
    assert integrate(p, pt.policy).icu.max() <= 0.0008 + 1e-12
