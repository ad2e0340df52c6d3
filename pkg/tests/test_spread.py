import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from restricted_auctions.allocation import AllocationSet
from restricted_auctions.errors import InputError
from restricted_auctions.measure import SignedMeasure, total_mass
from restricted_auctions.menu import Menu, random_menu
from restricted_auctions.spread import (Move, SpreadSpec, apply_spread, dominance_check, first_moment,
                                        fuse_pairs)

from conftest import uniform_mu

PAIR = SignedMeasure.from_atoms([[0.3, 0.7], [0.7, 0.3]], [1.0, 1.0], [1, 1])
VERTICAL = SpreadSpec((Move((0.3, 0.7), [(0.3, 0.9)], [1.0]),
                       Move((0.7, 0.3), [(0.7, 0.1)], [1.0])))


def test_symmetric_split_is_mean_preserving():
    mu = SignedMeasure.from_atoms([[0.5, 0.5]], [1.0], [1, 1])
    spec = SpreadSpec((Move((0.5, 0.5), [(0.4, 0.6), (0.6, 0.4)], [0.5, 0.5]),), mean_preserving=True)
    out = apply_spread(mu, spec)
    assert total_mass(out) == pytest.approx(1.0)
    assert np.allclose(first_moment(out), [0.5, 0.5], atol=1e-12)


def test_vertical_moves_change_each_centroid():
    out = apply_spread(PAIR, VERTICAL)
    assert total_mass(out) == total_mass(PAIR)
    for mv in VERTICAL.moves:
        assert np.abs(mv.centroid_shift()).max() == pytest.approx(0.2)
    with pytest.raises(InputError):
        SpreadSpec(VERTICAL.moves, mean_preserving=True)


def test_overdrawn_source_rejected():
    mu = SignedMeasure.from_atoms([[0.5, 0.5]], [1.0], [1, 1])
    with pytest.raises(InputError):
        apply_spread(mu, SpreadSpec((Move((0.5, 0.5), [(0.4, 0.4)], [2.0]),)))


def test_missing_source_rejected():
    with pytest.raises(InputError):
        apply_spread(PAIR, SpreadSpec((Move((0.1, 0.1), [(0.2, 0.2)], [0.5]),)))


def test_move_validation():
    with pytest.raises(InputError):
        Move((0, 0), [(1, 1), (2, 2)], [1.0])
    with pytest.raises(InputError):
        Move((0, 0), [(1, 1), (2, 2)], [1.0, -1.0])


def test_dominance_reflexive():
    mu = uniform_mu(8)
    rng = np.random.default_rng(3)
    S = AllocationSet([[0, 0], [1, 0], [0, 1]])
    rep = dominance_check(mu, mu, [random_menu(S, rng) for _ in range(20)])
    assert rep.passed and np.all(rep.differences == 0)


def test_vertical_spread_passes_deterministic_menus():
    S = AllocationSet([[0, 0], [1, 0], [1, 1]], hull=False)
    rng = np.random.default_rng(11)
    menus = [random_menu(S, rng, options=int(rng.integers(1, 4))) for _ in range(1000)]
    rep = dominance_check(apply_spread(PAIR, VERTICAL), PAIR, menus)
    assert rep.passed


def test_vertical_spread_fails_for_half_allocation():
    menu = Menu.with_zero_option([[1, 0.5]], [0.75])
    rep = dominance_check(apply_spread(PAIR, VERTICAL), PAIR, [menu])
    assert not rep.passed
    assert rep.differences[0] == pytest.approx(-0.1)


def test_dominance_check_needs_menus():
    with pytest.raises(InputError):
        dominance_check(PAIR, PAIR, [lambda p: p[:, 0]])


def test_fuse_pairs_dominates_for_convex_surplus():
    mu = SignedMeasure.from_atoms([[0.2, 0.8], [0.8, 0.2], [0.5, 0.1]], [-1.0, -1.0, 1.0], [1, 1])
    fused = fuse_pairs(mu, [(0, 1)])
    assert total_mass(fused) == pytest.approx(total_mass(mu))
    assert np.allclose(first_moment(fused), first_moment(mu))
    rng = np.random.default_rng(5)
    S = AllocationSet([[0, 0], [1, 0], [0, 1]])
    rep = dominance_check(fused, mu, [random_menu(S, rng) for _ in range(300)])
    assert rep.passed


def test_fuse_pairs_needs_same_sign():
    mu = SignedMeasure.from_atoms([[0.2, 0.8], [0.8, 0.2]], [-1.0, 1.0], [1, 1])
    with pytest.raises(InputError):
        fuse_pairs(mu, [(0, 1)])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 63), st.floats(0.01, 1.0), st.floats(0, 1), st.floats(0, 1)),
                min_size=1, max_size=5, unique_by=lambda t: t[0]))
def test_apply_spread_keeps_total_mass(moves):
    mu = uniform_mu(8)
    pts, w = mu.support()
    specs = []
    for idx, frac, dx, dy in moves:
        k = 1 + idx  # skip the origin atom
        specs.append(Move(pts[k], [(dx, dy)], [frac * w[k]]))
    out = apply_spread(mu, SpreadSpec(tuple(specs)))
    assert total_mass(out) == pytest.approx(total_mass(mu), abs=1e-12)
