import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from restricted_auctions.allocation import AllocationSet, ell
from restricted_auctions.calibrate import calibrate_extrapolated, calibrate_prices, damped_newton, richardson
from restricted_auctions.density import DensitySpec
from restricted_auctions.errors import ConvergenceError, InputError
from restricted_auctions.measure import total_mass, transform
from restricted_auctions.menu import (Menu, cell_measures, partition_defect, random_menu, revenue_direct,
                                      revenue_via_measure, utilities, utility)
from restricted_auctions.presets import SQRT3, get_preset

from conftest import UNIT_SQUARE, uniform_mu

SIMPLEX = AllocationSet([[0, 0], [1, 0], [0, 1]])
ITEMS = [[1, 0], [0, 1]]
MENU = Menu.with_zero_option([[1, 0], [0, 1]], [0.6, 0.6])

unit = st.floats(0, 1, allow_nan=False)
point = st.tuples(unit, unit)


def test_utility_examples():
    assert utility(MENU, [0.9, 0.2]) == (pytest.approx(0.3), 1)
    assert utility(MENU, [0.2, 0.3]) == (0.0, 0)
    # tie between the items: larger s.x first, then lower index
    assert utility(MENU, [0.8, 0.8])[1] == 1


def test_tie_prefers_larger_allocation_value():
    m = Menu.with_zero_option([[1, 0]], [0.5])
    assert utility(m, [0.5, 0.0]) == (0.0, 1)


def test_menu_needs_participation():
    with pytest.raises(InputError):
        Menu([[1, 0]], [0.5])
    with pytest.raises(InputError):
        Menu([[1, 0], [0, 0]], [0.5])
    Menu([[1, 0], [0, 1]], [0.3, 0.0])


def test_check_feasible():
    MENU.check_feasible(SIMPLEX)
    with pytest.raises(InputError):
        Menu.with_zero_option([[1, 1]], [1.0]).check_feasible(SIMPLEX)


def test_dimension_mismatch():
    with pytest.raises(InputError):
        utilities(MENU, [[0.1, 0.2, 0.3]])


@settings(max_examples=200, deadline=None)
@given(point, point, st.floats(0, 1))
def test_surplus_is_convex(x, y, t):
    x, y = np.array(x), np.array(y)
    u = lambda z: utility(MENU, z)[0]
    assert u(t * x + (1 - t) * y) <= t * u(x) + (1 - t) * u(y) + 1e-12


@settings(max_examples=200, deadline=None)
@given(point, point)
def test_chosen_allocation_is_subgradient(x, y):
    x, y = np.array(x), np.array(y)
    ux, k = utility(MENU, x)
    uy, _ = utility(MENU, y)
    assert uy >= ux + MENU.allocations[k] @ (y - x) - 1e-12
    # so differences are bounded by ell_S
    assert ux - uy <= ell(SIMPLEX, x, y) + 1e-12


def test_random_menus_are_ell_lipschitz(rng):
    for S in (SIMPLEX, AllocationSet([[0, 0], [1, 0], [0, 1], [1.5, 1.5]]),
              AllocationSet([[1, 0], [0, 1]])):
        for _ in range(30):
            m = random_menu(S, rng)
            m.check_feasible(S)
            x, y = rng.uniform(0, 1, (2, 500, 2))
            assert np.all(utilities(m, x)[0] - utilities(m, y)[0] <= ell(S, x, y) + 1e-12)
            assert np.all(utilities(m, x)[0] >= -1e-12)


def test_cells_partition_the_measure(rng):
    mu = uniform_mu(32)
    for _ in range(20):
        m = random_menu(SIMPLEX, rng)
        for method in ("midpoint", "fractional"):
            rep = cell_measures(m, mu, method)
            assert partition_defect(rep, mu) <= 1e-12
            assert np.allclose(rep.measures, rep.atoms + rep.interior + rep.boundary)


def test_unknown_cell_method():
    with pytest.raises(InputError):
        cell_measures(MENU, uniform_mu(4), "exact")


def test_exactly_one_cell_masses():
    menu = Menu([[1, 0], [0, 1]], [1 / 3, 0.0])
    rep = cell_measures(menu, uniform_mu(128), "fractional")
    assert rep.interior[0] == pytest.approx(-2 / 3, abs=2e-2)
    assert rep.boundary[0] == pytest.approx(2 / 3, abs=2e-2)
    assert rep.measures[0] == pytest.approx(0, abs=1e-6)


def test_single_item_cell_is_minus_revenue_slope():
    # cell of the item at price p: +1 on the facet, -2(1 - p) inside; slope of p(1-p) is 1 - 2p
    mu = transform(DensitySpec.uniform([1.0]), resolution=256)
    for p in (0.2, 0.5, 0.7):
        m = Menu.with_zero_option([[1.0]], [p])
        assert cell_measures(m, mu, "fractional").measures[1] == pytest.approx(2 * p - 1, abs=1e-9)


def test_cell_measure_is_minus_price_derivative():
    mu = uniform_mu(128)
    p = np.array([0.5, 0.65])
    rep = cell_measures(Menu.with_zero_option([[1, 0], [0, 1]], p), mu, "fractional")
    h = 1e-4
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        rp = revenue_via_measure(Menu.with_zero_option([[1, 0], [0, 1]], p + e), mu)
        rm = revenue_via_measure(Menu.with_zero_option([[1, 0], [0, 1]], p - e), mu)
        assert -(rp - rm) / (2 * h) == pytest.approx(rep.measures[k + 1], abs=2e-2)


def test_revenue_two_ways_single_menu():
    m = Menu.with_zero_option([[1, 0], [0, 1]], [1 / SQRT3] * 2)
    est, se = revenue_direct(m, UNIT_SQUARE, 400_000, seed=7)
    exact = 2 / (3 * SQRT3)
    assert abs(est - exact) <= 4 * se
    assert revenue_via_measure(m, uniform_mu(128)) == pytest.approx(exact, abs=1e-4)


def test_revenue_direct_is_seeded():
    assert revenue_direct(MENU, UNIT_SQUARE, 1000, seed=3) == revenue_direct(MENU, UNIT_SQUARE, 1000, seed=3)
    with pytest.raises(InputError):
        revenue_direct(MENU, UNIT_SQUARE, 0)


def test_richardson_removes_second_order_term():
    exact, c = 2.0, 3.0
    assert richardson(exact + c / 64 ** 2, exact + c / 128 ** 2) == pytest.approx(exact)


def test_damped_newton_solves_and_reports_failure():
    x, _ = damped_newton(lambda v: np.array([v[0] ** 2 - 2]), np.array([1.0]))
    assert x[0] == pytest.approx(np.sqrt(2), abs=1e-9)
    with pytest.raises(ConvergenceError):
        damped_newton(lambda v: np.array([v[0] ** 2 + 1]), np.array([1.0]), max_iter=10)


def test_single_item_calibrates_to_half():
    cal = calibrate_extrapolated([[1.0]], DensitySpec.uniform([1.0]), [0.3], (128, 256))
    assert cal.menu.prices[1] == pytest.approx(0.5, abs=1e-6)


def test_brute_force_single_item_price():
    # grid search of p(1 - p)
    ps = np.linspace(0, 1, 100_001)
    assert ps[np.argmax(ps * (1 - ps))] == pytest.approx(0.5, abs=1e-5)


def test_at_most_one_calibration():
    cal = calibrate_extrapolated(ITEMS, UNIT_SQUARE, [0.5, 0.5], (64, 128))
    assert np.allclose(cal.menu.prices[1:], 1 / SQRT3, atol=1e-4)


def test_exactly_one_calibration():
    cal = calibrate_extrapolated(ITEMS, UNIT_SQUARE, [0.4, 0.0], (64, 128), outside_option=False)
    assert np.allclose(cal.menu.prices, [1 / 3, 0.0], atol=1e-4)


def test_bundle_calibration():
    c = get_preset("bundle-alpha", alpha=2.0)
    cal = calibrate_extrapolated(c.shape, c.density, c.initial_prices, c.calibration)
    assert cal.menu.prices[1] == pytest.approx(np.sqrt(8 / 3), abs=1e-4)


def test_calibrated_cells_integrate_to_zero():
    mu = uniform_mu(64)
    menu = calibrate_prices(ITEMS, mu, [0.5, 0.5])
    rep = cell_measures(menu, mu, "fractional")
    assert np.all(np.abs(rep.measures[1:]) <= 1e-9)


def test_calibration_is_a_revenue_stationary_point():
    mu = uniform_mu(64)
    menu = calibrate_prices(ITEMS, mu, [0.5, 0.5])
    base = revenue_via_measure(menu, mu)
    for d in np.random.default_rng(2).normal(size=(8, 2)):
        moved = Menu.with_zero_option(ITEMS, menu.prices[1:] + 1e-3 * d / np.linalg.norm(d))
        assert revenue_via_measure(moved, mu) <= base + 1e-6


def test_bad_initial_prices():
    with pytest.raises(InputError):
        calibrate_prices(ITEMS, uniform_mu(8), [0.5])


def test_transform_mass_at_calibration_grid():
    assert abs(total_mass(uniform_mu(64))) <= 1e-6
