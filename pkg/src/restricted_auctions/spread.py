"""Mass-moving operations on discretised measures and an empirical dominance test.

A move takes signed weight from one support point of a measure and places
it on destination atoms. Mean-preserving moves keep the weighted centroid;
the others are only admissible when the allocation set makes them so, which
:func:`dominance_check` can probe (but never prove).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .measure import SignedMeasure, integrate
from .menu import Menu, surplus

POINT_TOL = 1e-12
CENTROID_TOL = 1e-10


@dataclass(frozen=True)
class Move:
    """Take ``sum(weights)`` from the mass at ``source`` and put ``weights[k]`` at ``destinations[k]``."""

    source: tuple
    destinations: tuple
    weights: tuple

    def __post_init__(self):
        src = np.asarray(self.source, dtype=float).ravel()
        dst = np.atleast_2d(np.asarray(self.destinations, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if dst.shape[0] != w.size or dst.shape[1] != src.size:
            raise InputError("move needs one weight per destination, in the source's dimension")
        if w.size == 0:
            raise InputError("move has no destinations")
        if len(set(np.sign(w[w != 0]))) > 1:
            raise InputError("destination weights of one move must share a sign")
        object.__setattr__(self, "source", tuple(src))
        object.__setattr__(self, "destinations", tuple(map(tuple, dst)))
        object.__setattr__(self, "weights", tuple(w))

    @property
    def amount(self) -> float:
        return float(np.sum(self.weights))

    def centroid_shift(self) -> np.ndarray:
        """Change in first moment caused by the move."""
        dst = np.asarray(self.destinations)
        w = np.asarray(self.weights)
        return w @ dst - self.amount * np.asarray(self.source)


@dataclass(frozen=True)
class SpreadSpec:
    moves: tuple
    mean_preserving: bool = False

    def __post_init__(self):
        object.__setattr__(self, "moves", tuple(self.moves))
        if self.mean_preserving:
            for k, mv in enumerate(self.moves):
                shift = np.max(np.abs(mv.centroid_shift()))
                if shift > CENTROID_TOL:
                    raise InputError(f"move {k} shifts the centroid by {shift:.3g}")


def _locate(mu: SignedMeasure, point):
    p = np.asarray(point, dtype=float)
    hit = np.flatnonzero(np.all(np.abs(mu.atom_points - p) <= POINT_TOL, axis=1))
    if hit.size:
        return "atom", hit
    hit = np.flatnonzero(np.all(np.abs(mu.cell_mid - p) <= POINT_TOL, axis=1))
    if hit.size:
        return "cell", hit
    raise InputError(f"no mass at {p.tolist()}")


def apply_spread(mu: SignedMeasure, spec: SpreadSpec) -> SignedMeasure:
    """Apply every move in order and return the new measure.

    Each move draws its amount from the atoms (or, failing that, the cells
    whose midpoint is) at the source point; that mass must have the same
    sign as the amount and at least its magnitude.
    """
    aw = mu.atom_weights.copy()
    cw = mu.cell_weights.copy()
    new_pts, new_w = [], []
    for k, mv in enumerate(spec.moves):
        amount = mv.amount
        kind, idx = _locate(mu, mv.source)
        arr = aw if kind == "atom" else cw
        have = arr[idx].sum()
        if abs(amount) > abs(have) + POINT_TOL or (amount != 0 and np.sign(have) != np.sign(amount)):
            raise InputError(f"move {k} needs {amount:.6g} but the source carries {have:.6g}")
        # take proportionally from coincident pieces
        arr[idx] -= arr[idx] * (amount / have) if have != 0 else 0.0
        new_pts.extend(mv.destinations)
        new_w.extend(mv.weights)
    if mu.dim and new_pts:
        pts = np.vstack([mu.atom_points, np.asarray(new_pts)])
        aw = np.concatenate([aw, new_w])
    else:
        pts = mu.atom_points
    return SignedMeasure(pts, aw, mu.cell_lo, mu.cell_hi, cw, mu.domain)


def first_moment(mu: SignedMeasure) -> np.ndarray:
    pts, w = mu.support()
    return w @ pts


@dataclass(frozen=True)
class DominanceReport:
    differences: np.ndarray
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.all(self.differences >= -self.tol))

    @property
    def worst(self) -> int:
        return int(np.argmin(self.differences)) if self.differences.size else -1


def dominance_check(mu_prime: SignedMeasure, mu: SignedMeasure, menus, tol: float = 1e-8) -> DominanceReport:
    """``integral u d(mu') - integral u d(mu)`` for the surplus of each menu.

    Passing is only a necessary condition for ``mu'`` to dominate ``mu``
    over all mechanisms; a single negative difference refutes it.
    """
    if mu_prime.dim != mu.dim:
        raise InputError("measures live in different dimensions")
    diffs = []
    for m in menus:
        if not isinstance(m, Menu):
            raise InputError("dominance_check expects Menu objects")
        u = surplus(m)
        diffs.append(integrate(mu_prime, u) - integrate(mu, u))
    return DominanceReport(np.asarray(diffs, dtype=float), tol)


def fuse_pairs(mu: SignedMeasure, pairs) -> SignedMeasure:
    """Merge each pair of same-signed support points into one atom at their barycentre.

    ``pairs`` indexes the support as returned by ``mu.support()`` (atoms
    first, then cells). Fusing negative mass is the reverse of a
    mean-preserving spread of mu_minus, so the result dominates mu over
    every convex surplus function; each pair is checked on its own.
    """
    pts, w = mu.support()
    moves = []
    for i, j in pairs:
        wi, wj = w[i], w[j]
        if wi == 0 or wj == 0 or np.sign(wi) != np.sign(wj):
            raise InputError(f"pair ({i}, {j}) does not carry same-signed mass")
        c = (wi * pts[i] + wj * pts[j]) / (wi + wj)
        pair = SpreadSpec((Move(pts[i], [c], [wi]), Move(pts[j], [c], [wj])))
        shift = sum(mv.centroid_shift() for mv in pair.moves)
        if np.max(np.abs(shift)) > CENTROID_TOL * max(1.0, abs(wi + wj)):
            raise InputError(f"pair ({i}, {j}) moves the centroid by {shift}")
        moves.extend(pair.moves)
    return apply_spread(mu, SpreadSpec(tuple(moves)))
