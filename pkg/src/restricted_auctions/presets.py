"""Built-in instances and the example-specific geometry used to certify them.

Each preset is an :class:`InstanceConfig`; ``bundle-alpha`` takes the
complementarity factor ``alpha`` as a parameter. The matching-condition
builders return closed-form A/B sets for one representative cell of the
corresponding preset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .allocation import AllocationSet
from .certify import (MatchingCondition, dominance_margin, interior_density, line_mass,
                      stochastic_dominance_1d)
from .config import InstanceConfig
from .density import DensitySpec
from .errors import InputError, UnsupportedError
from .measure import SignedMeasure, transform
from .menu import Menu
from .spread import fuse_pairs

SQRT3 = float(np.sqrt(3.0))

# prices of the optimal randomized mechanism for the exponential pair,
# quoted for comparison only
RANDOMIZED_BUNDLE_PRICE = 1.2319
RANDOMIZED_LOTTERY_PRICE = 1.0


def single_item() -> InstanceConfig:
    """One item, value uniform on [0, 1]."""
    return InstanceConfig(
        name="single-item",
        density=DensitySpec.uniform([1.0]),
        S=AllocationSet([[0.0], [1.0]]),
        shape=[[1.0]],
        initial_prices=[0.4],
        resolutions=(64, 128, 256),
        calibration=(128, 256),
        reference={"prices": [0.5], "revenue": 0.25},
    )


def at_most_one() -> InstanceConfig:
    """Two uniform items, at most one may be sold."""
    return InstanceConfig(
        name="at-most-one",
        density=DensitySpec.uniform([1.0, 1.0]),
        S=AllocationSet([[0, 0], [1, 0], [0, 1]]),
        shape=[[1, 0], [0, 1]],
        initial_prices=[0.5, 0.5],
        resolutions=(32, 64, 128),
        calibration=(64, 128),
        reference={"prices": [1 / SQRT3] * 2, "revenue": 2 / (3 * SQRT3)},
    )


def exactly_one() -> InstanceConfig:
    """Two uniform items, exactly one must be allocated."""
    return InstanceConfig(
        name="exactly-one",
        density=DensitySpec.uniform([1.0, 1.0]),
        S=AllocationSet([[1, 0], [0, 1]]),
        shape=[[1, 0], [0, 1]],
        initial_prices=[0.4, 0.0],
        outside_option=False,
        dual_measure="diagonal-fusion",
        resolutions=(32, 64, 128),
        calibration=(64, 128),
        reference={"prices": [1 / 3, 0.0], "revenue": 2 / 27},
    )


def deterministic_expo() -> InstanceConfig:
    """Two exponential items (rates 2, 1), deterministic allocations only."""
    return InstanceConfig(
        name="deterministic-expo",
        density=DensitySpec.exponential([2.0, 1.0], [8.0, 8.0]),
        S=AllocationSet([[0, 0], [1, 0], [0, 1], [1, 1]], hull=False),
        shape=[[1, 0], [1, 1]],
        initial_prices=[0.9, 1.2],
        resolutions=(32, 64, 128),
        calibration=(256, 512),
        reference={"prices": [0.9288, 1.2286], "randomized_bundle_price": RANDOMIZED_BUNDLE_PRICE},
    )


def bundle_alpha(alpha: float = 2.0) -> InstanceConfig:
    """Two uniform items whose pair is worth alpha times the sum of values."""
    alpha = float(alpha)
    if alpha < 1:
        raise InputError("bundle-alpha needs alpha >= 1 (complements)")
    price = float(alpha * np.sqrt(2 / 3))
    return InstanceConfig(
        name="bundle-alpha",
        density=DensitySpec.uniform([1.0, 1.0]),
        S=AllocationSet([[0, 0], [1, 0], [0, 1], [alpha, alpha]]),
        shape=[[alpha, alpha]],
        initial_prices=[0.8 * alpha],
        resolutions=(16, 32, 64),
        calibration=(64, 128),
        reference={"prices": [price], "revenue": price * 2 / 3},
        params={"alpha": alpha},
    )


PRESETS = {
    "single-item": single_item,
    "at-most-one": at_most_one,
    "exactly-one": exactly_one,
    "deterministic-expo": deterministic_expo,
    "bundle-alpha": bundle_alpha,
}


def get_preset(name: str, **params) -> InstanceConfig:
    if name not in PRESETS:
        raise InputError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}")
    try:
        return PRESETS[name](**params)
    except TypeError as exc:
        raise InputError(f"preset {name!r} does not take {sorted(params)}") from exc


# -- dominating measures for the dual -----------------------------------------

def diagonal_fusion(mu: SignedMeasure, menu: Menu) -> SignedMeasure:
    """Fuse mirrored interior cells of the exactly-one instance onto the diagonal.

    With item 1 at price ``p`` above item 2, the boundary mass on the upper
    and right edges of the item-2 cell is matched down 45-degree lines,
    which leaves the negative mass of ``[0, 1 - p]^2`` with ``|x1 - x2| <= p``
    unmatched. Fusing each cell there with its mirror image moves that mass
    onto the diagonal, where the origin atom absorbs it at cost
    ``u(0) - u(t, t)``.
    """
    if mu.dim != 2 or np.any(mu.domain != 1.0):
        raise UnsupportedError("diagonal fusion is defined for two items on the unit square")
    e1 = np.flatnonzero(np.all(menu.allocations == (1, 0), axis=1))
    e2 = np.flatnonzero(np.all(menu.allocations == (0, 1), axis=1))
    if len(menu) != 2 or not (e1.size and e2.size):
        raise UnsupportedError("diagonal fusion needs the menu {(1,0), (0,1)}")
    p = float(menu.prices[e1[0]] - menu.prices[e2[0]])
    if not 0 < p < 1:
        raise UnsupportedError("diagonal fusion needs item 1 priced above item 2 by less than 1")
    inner = ~mu.facet_mask
    mid = mu.cell_mid
    h = mu.cell_hi[inner][0] - mu.cell_lo[inner][0]
    key = {tuple(np.rint(m / h - 0.5).astype(int)): k for k, m in zip(np.flatnonzero(inner), mid[inner])}
    na = len(mu.atom_weights)
    pairs = []
    for (i, j), k in key.items():
        m = mid[k]
        w = m[0] - m[1]
        if i > j and w <= p + 1e-12 and m.max() <= 1 - p + 1e-12 and mu.cell_weights[k] < 0:
            pairs.append((na + k, na + key[(j, i)]))
    return fuse_pairs(mu, pairs)


DUAL_MEASURES = {"diagonal-fusion": diagonal_fusion}


def dual_measure(name: str | None):
    if name is None:
        return None
    if name not in DUAL_MEASURES:
        raise InputError(f"unknown dual measure {name!r}; known: {', '.join(DUAL_MEASURES)}")
    return DUAL_MEASURES[name]


# -- matching conditions ------------------------------------------------------

def _right_edge(mu: SignedMeasure) -> SignedMeasure:
    """Facet pieces of mu lying on the face x1 = M."""
    m = mu.domain[0]
    on = (mu.cell_lo[:, 0] == m) & (mu.cell_hi[:, 0] == m)
    return mu._replace(np.zeros(len(mu.atom_weights), bool), on)


def _interior_negative(mu: SignedMeasure) -> SignedMeasure:
    keep = ~mu.facet_mask & (mu.cell_weights < 0)
    return mu._replace(np.zeros(len(mu.atom_weights), bool), keep, cell_weights=-mu.cell_weights)


def matching_at_most_one(mu: SignedMeasure, price: float = 1 / SQRT3) -> MatchingCondition:
    """Cell of (1, 0): ``x1 >= price`` and ``x1 >= x2``, matched to the right edge.

    The boundary point ``(1, 1 - a)`` may absorb cell points with
    ``x1 - x2 <= a`` and sits above the part ``x2 >= 1 - a`` of the edge.
    """
    cell = [((-1.0, 0.0), -price), ((-1.0, 1.0), 0.0)]
    return MatchingCondition(
        nu_plus=_right_edge(mu),
        nu_minus=_interior_negative(mu),
        A=lambda a: cell + [((1.0, -1.0), a)],
        B=lambda a: [((0.0, -1.0), -(1.0 - a))],
        a_range=(0.0, 1.0),
        name="at-most-one, cell (1,0)",
    )


def matching_exactly_one(mu: SignedMeasure, price: float = 1 / 3) -> MatchingCondition:
    """Cell of (1, 0): ``x1 - x2 >= price``; boundary points ``(1, a)``, ``a <= 1 - price``."""
    cell = [((-1.0, 1.0), -price)]
    return MatchingCondition(
        nu_plus=_right_edge(mu),
        nu_minus=_interior_negative(mu),
        A=lambda a: cell + [((1.0, -1.0), 1.0 - a)],
        B=lambda a: cell + [((0.0, -1.0), -a)],
        a_range=(0.0, 1.0 - price),
        name="exactly-one, cell (1,0)",
    )


def matching_bundle(mu: SignedMeasure, alpha: float, price: float | None = None) -> MatchingCondition:
    """Lower half of the bundle cell, ``x1 >= x2`` and ``alpha (x1 + x2) >= price``.

    The boundary point ``(1, a)`` may absorb ``x`` when the bundle is the
    best allocation in direction ``(1, a) - x``, i.e.
    ``alpha (1 - x1 + a - x2) >= 1 - x1``; it sits above ``x2 <= a``.
    """
    price = alpha * np.sqrt(2 / 3) if price is None else price
    t = price / alpha
    cell = [((-1.0, 1.0), 0.0), ((-1.0, -1.0), -t)]
    return MatchingCondition(
        nu_plus=_right_edge(mu),
        nu_minus=_interior_negative(mu),
        A=lambda a: cell + [((alpha - 1.0, alpha), alpha - 1.0 + alpha * a)],
        B=lambda a: [((0.0, 1.0), a)],
        a_range=(0.0, 1.0),
        name=f"bundle alpha={alpha:g}, lower half cell",
    )


# -- deterministic exponential witness ---------------------------------------

@dataclass(frozen=True)
class DeterministicWitness:
    """Tabulated excess masses for the item-1 cell of the deterministic preset.

    ``pos`` is the net mass of each horizontal line inside the cell at depth
    ``z`` below its top edge (clipped at zero); ``neg`` the mass of each
    vertical line at distance ``z`` right of the cell's left edge that lies
    below the balance line. ``imbalance`` is their total difference
    relative to ``pos`` before ``neg`` is rescaled to match.
    ``availability`` is the least mass on a 45-degree line in the zero cell
    divided by the largest ``neg`` value.
    """

    z: np.ndarray
    pos: np.ndarray
    neg: np.ndarray
    imbalance: float
    dominates: bool
    margin: float
    line_min: float
    neg_max: float
    availability: float
    x1_star: float


def balance_x1(f: DensitySpec, x2: float) -> float:
    """``r`` with zero transformed mass on the horizontal ray ``x1 >= r`` at height x2.

    For product exponentials that ray integral is
    ``exp(-lam1 r) (lam . x - n) * (...)``, so the balance line is ``lam . x = n``.
    """
    if f.kind != "exponential_product" or f.dim != 2:
        raise InputError("the balance line is only defined for 2-d exponential densities")
    lam = f.params
    return (f.dim - lam[1] * x2) / lam[0]


def deterministic_witness(f: DensitySpec, p1: float, p2: float, samples: int = 512,
                          lines: int = 65) -> DeterministicWitness:
    """Tabulate the item-1 cell excess masses and the 45-degree line masses."""
    if not 0 < p1 < p2:
        raise InputError("need 0 < p1 < p2")
    lam = f.params
    h = p2 - p1                         # top of the item-1 cell
    x1_edge = balance_x1(f, 0.0)        # balance line meets x2 = 0
    zmax = max(h, x1_edge - p1)
    dz = zmax / samples
    z = (np.arange(samples) + 0.5) * dz
    pos = np.array([line_mass(f, (0.0, h - t), (1.0, 0.0), p1, np.inf) if t < h else 0.0 for t in z])
    pos = np.maximum(pos, 0.0) * dz
    neg = []
    for t in z:
        x1 = p1 + t
        top = (f.dim - lam[0] * x1) / lam[1]
        neg.append(-line_mass(f, (x1, 0.0), (0.0, 1.0), 0.0, top) if top > 0 else 0.0)
    neg = np.maximum(np.array(neg), 0.0) * dz
    tp, tn = pos.sum(), neg.sum()
    imbalance = (tn - tp) / tp
    neg_scaled = neg * (tp / tn)
    nu_p = np.column_stack([z, pos])
    nu_m = np.column_stack([z, neg_scaled])
    dom = stochastic_dominance_1d(nu_p, nu_m)
    margin = dominance_margin(nu_p, nu_m)
    # 45-degree lines x1 + x2 = c through the zero cell, left of x1*
    x1_star = (f.dim - lam[1] * p2) / (lam[0] - lam[1])
    cs = np.linspace(p1, p2, lines)
    line = np.array([-line_mass(f, (0.0, c), (1.0, -1.0), 0.0, min(c, x1_star)) for c in cs])
    neg_max = float((neg / dz).max())
    return DeterministicWitness(z, pos, neg_scaled, float(imbalance), bool(dom), float(margin),
                                float(line.min()), neg_max, float(line.min() / neg_max),
                                float(x1_star))


def zero_cell_mass(f: DensitySpec, resolution: int, alpha: float, price: float) -> float:
    """mu of the zero cell of the grand-bundle menu, with boxes split exactly."""
    from .menu import Menu, cell_measures
    mu = transform(f, resolution=resolution)
    menu = Menu.with_zero_option([[alpha, alpha]], [price])
    return float(cell_measures(menu, mu, "fractional").measures[0])


__all__ = [
    "PRESETS", "get_preset", "single_item", "at_most_one", "exactly_one", "deterministic_expo",
    "bundle_alpha", "matching_at_most_one", "matching_exactly_one", "matching_bundle",
    "DeterministicWitness", "deterministic_witness", "balance_x1", "zero_cell_mass",
    "diagonal_fusion", "DUAL_MEASURES", "dual_measure",
    "interior_density",
]
