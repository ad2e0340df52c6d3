import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from restricted_auctions.allocation import AllocationSet, ell
from restricted_auctions.errors import InputError
from restricted_auctions.measure import SignedMeasure
from restricted_auctions.menu import Menu, revenue_via_measure
from restricted_auctions.presets import SQRT3
from restricted_auctions.transport import (TransportInstance, discretize_dual, duality_gap,
                                           feasibility_violation, grid_dual, mechanism_value, plan_residuals,
                                           recovered_mechanism, solve)

from conftest import AT_MOST_ONE, EXACTLY_ONE, expo_mu, uniform_mu

DETERMINISTIC = AllocationSet([[0, 0], [1, 0], [0, 1], [1, 1]], hull=False)


def lp_oracle(inst: TransportInstance) -> float:
    """Transportation LP solved by HiGHS: min sum c_ij f_ij with both marginals fixed."""
    m, n = inst.size
    c = inst.cost(inst.sources[:, None, :], inst.sinks[None, :, :]).ravel()
    rows = np.zeros((m + n, m * n))
    for i in range(m):
        rows[i, i * n:(i + 1) * n] = 1
    for j in range(n):
        rows[m + j, j::n] = 1
    b = np.concatenate([inst.source_weights, inst.sink_weights])
    b[m:] *= inst.source_weights.sum() / b[m:].sum()
    res = linprog(c, A_eq=rows, b_eq=b, bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun


def _random_instance(rng, m, n, S):
    src = rng.uniform(0, 1, (m, 2))
    snk = rng.uniform(0, 1, (n, 2))
    a = rng.uniform(0.1, 1, m)
    b = rng.uniform(0.1, 1, n)
    b *= a.sum() / b.sum()
    return TransportInstance(src, a, snk, b, S)


def test_counts_at_resolution_four():
    inst = discretize_dual(uniform_mu(4), AT_MOST_ONE)
    # origin atom plus 4 + 4 facet cells, against 16 interior cells
    assert inst.size == (9, 16)
    assert inst.source_weights.sum() == pytest.approx(3.0)


def test_empty_measure_has_empty_plan():
    inst, plan = grid_dual(SignedMeasure.empty([1, 1]), AT_MOST_ONE)
    assert inst.size == (0, 0) and plan.cost == 0.0


def test_one_signed_measure_rejected():
    with pytest.raises(InputError):
        discretize_dual(SignedMeasure.from_atoms([[0.2, 0.2]], [1e-12], [1, 1]), AT_MOST_ONE)


def test_nonzero_total_mass_rejected():
    mu = SignedMeasure.from_atoms([[0.2, 0.2], [0.5, 0.5]], [1.0, -0.5], [1, 1])
    with pytest.raises(InputError):
        discretize_dual(mu, AT_MOST_ONE)


def test_single_arc_cost():
    mu = SignedMeasure.from_atoms([[0.9, 0.2], [0.1, 0.6]], [1.0, -1.0], [1, 1])
    _, plan = grid_dual(mu, AT_MOST_ONE)
    assert plan.cost == pytest.approx(ell(AT_MOST_ONE, [0.9, 0.2], [0.1, 0.6]))


@pytest.mark.parametrize("S", [AT_MOST_ONE, EXACTLY_ONE, DETERMINISTIC,
                               AllocationSet([[0, 0], [1, 0], [0, 1], [2, 2]])])
def test_matches_highs_on_random_instances(S):
    rng = np.random.default_rng(42)
    for _ in range(5):
        inst = _random_instance(rng, int(rng.integers(3, 25)), int(rng.integers(3, 25)), S)
        assert solve(inst).cost == pytest.approx(lp_oracle(inst), rel=1e-6, abs=1e-9)


@pytest.mark.parametrize("mu_f", [lambda: uniform_mu(8), lambda: expo_mu(8)])
def test_matches_highs_on_grid_measures(mu_f):
    inst = discretize_dual(mu_f(), DETERMINISTIC)
    assert solve(inst).cost == pytest.approx(lp_oracle(inst), rel=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 15), st.integers(1, 15))
def test_plan_invariants(seed, m, n):
    rng = np.random.default_rng(seed)
    inst = _random_instance(rng, m, n, AT_MOST_ONE)
    plan = solve(inst)
    res = plan_residuals(inst, plan)
    assert res["source_marginal"] <= 1e-9 and res["sink_marginal"] <= 1e-9
    assert res["min_flow"] >= 0
    assert res["min_reduced_cost"] >= -1e-9
    assert res["max_flow_slack"] <= 1e-9
    assert res["duality"] <= 1e-9 * max(1.0, plan.cost)


def test_permutation_invariance(rng):
    inst = _random_instance(rng, 20, 30, DETERMINISTIC)
    ps, pk = rng.permutation(20), rng.permutation(30)
    shuffled = TransportInstance(inst.sources[ps], inst.source_weights[ps], inst.sinks[pk],
                                 inst.sink_weights[pk], inst.S)
    assert solve(shuffled).cost == pytest.approx(solve(inst).cost, rel=1e-12)


def test_recovered_mechanism_is_feasible_and_optimal():
    mu = uniform_mu(16)
    inst, plan = grid_dual(mu, AT_MOST_ONE)
    mech = recovered_mechanism(plan, inst)
    assert feasibility_violation(mech, AT_MOST_ONE, pairs=100_000) <= 1e-9
    assert mechanism_value(mech, inst) == pytest.approx(plan.cost, abs=1e-9)
    assert mech.values.min() == 0.0


def test_recovered_allocations_lie_in_s():
    inst, plan = grid_dual(uniform_mu(8), AT_MOST_ONE)
    mech = recovered_mechanism(plan, inst)
    idx = mech.allocations(AT_MOST_ONE, inst, plan)
    assert idx.min() >= 0 and idx.max() < len(AT_MOST_ONE.vertices)


def test_dual_optimum_converges_to_revenue():
    revenue = 2 / (3 * SQRT3)
    costs = [grid_dual(uniform_mu(r), AT_MOST_ONE)[1].cost for r in (16, 32, 64)]
    errs = [abs(c - revenue) for c in costs]
    assert errs[0] >= errs[1] >= errs[2]
    assert errs[2] <= 0.02 * revenue


def test_weak_duality_for_random_menus(rng):
    from restricted_auctions.menu import random_menu
    mu = uniform_mu(32)
    _, plan = grid_dual(mu, AT_MOST_ONE)
    for _ in range(100):
        assert duality_gap(random_menu(AT_MOST_ONE, rng), plan, mu) >= -1e-8


def test_mispriced_menu_has_large_gap():
    mu = uniform_mu(32)
    _, plan = grid_dual(mu, AT_MOST_ONE)
    bad = Menu.with_zero_option([[1, 0], [0, 1]], [0.4, 0.4])
    assert duality_gap(bad, plan, mu) > 0.05 * revenue_via_measure(bad, mu)


def test_csv_has_one_row_per_arc():
    inst, plan = grid_dual(uniform_mu(4), AT_MOST_ONE)
    lines = plan.to_csv(inst).strip().splitlines()
    assert lines[0] == "x0,x1,y0,y1,weight,arc_cost"
    assert len(lines) == 1 + len(plan.weight)
