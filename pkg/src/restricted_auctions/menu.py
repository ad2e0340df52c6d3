"""Finite menus: utility, cell decomposition and revenue."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .allocation import AllocationSet
from .density import DensitySpec
from .errors import InputError
from .geometry import box_fraction
from .measure import SignedMeasure, integrate, total_mass

TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Menu:
    """Options ``(allocation, price)``; the buyer takes ``argmax s.x - p``.

    A zero option ``0 @ 0`` is the usual way to keep utilities nonnegative.
    It may be left out when another option already guarantees this on the
    nonnegative orthant (a nonnegative allocation offered at price <= 0),
    which is how allocation sets excluding the zero vector are handled.
    """

    allocations: np.ndarray
    prices: np.ndarray

    def __post_init__(self):
        s = np.array(self.allocations, dtype=float)
        if s.ndim == 1:
            s = s.reshape(-1, 1)
        p = np.array(self.prices, dtype=float).ravel()
        if s.shape[0] == 0 or s.shape[0] != p.size:
            raise InputError("menu needs one price per allocation and at least one option")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(p))):
            raise InputError("menu prices and allocations must be finite")
        if not self._individually_rational(s, p):
            raise InputError("menu needs a zero option (or a free nonnegative allocation)")
        s.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "allocations", s)
        object.__setattr__(self, "prices", p)

    @staticmethod
    def _individually_rational(s, p):
        return bool(np.any(np.all(s >= 0, axis=1) & (p <= 0)))

    @classmethod
    def with_zero_option(cls, allocations, prices):
        s = np.atleast_2d(np.asarray(allocations, dtype=float))
        return cls(np.vstack([np.zeros((1, s.shape[1])), s]), np.concatenate([[0.0], np.ravel(prices)]))

    @property
    def dim(self) -> int:
        return self.allocations.shape[1]

    def __len__(self):
        return self.prices.size

    @property
    def zero_index(self) -> int | None:
        hit = np.flatnonzero(np.all(self.allocations == 0, axis=1) & (self.prices == 0))
        return int(hit[0]) if hit.size else None

    def with_prices(self, prices) -> "Menu":
        return Menu(self.allocations, prices)

    def check_feasible(self, S: AllocationSet, tol: float = 1e-9) -> None:
        """Raise unless every non-zero option's allocation lies in S."""
        if S.dim != self.dim:
            raise InputError("menu and allocation set differ in dimension")
        z = self.zero_index
        for k, s in enumerate(self.allocations):
            if k != z and not S.contains(s, tol):
                raise InputError(f"option {k} allocation {s.tolist()} is not in S")

    def __repr__(self):
        opts = ", ".join(f"{np.round(s, 6).tolist()}@{p:.6g}" for s, p in zip(self.allocations, self.prices))
        return f"Menu({opts})"


def utilities(menu: Menu, x) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`utility` over rows of ``x``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != menu.dim:
        raise InputError("type dimension does not match menu")
    sx = x @ menu.allocations.T
    vals = sx - menu.prices
    best = vals.max(axis=1, keepdims=True)
    cand = vals >= best - TIE_TOL
    sx_c = np.where(cand, sx, -np.inf)
    cand &= sx_c >= sx_c.max(axis=1, keepdims=True) - TIE_TOL
    return best[:, 0], np.argmax(cand, axis=1)


def utility(menu: Menu, x) -> tuple[float, int]:
    """Buyer utility at ``x`` and the chosen option.

    Ties go to the option with larger ``s . x``, then to the lower index.
    """
    vals, win = utilities(menu, np.reshape(x, (1, -1)))
    return float(vals[0]), int(win[0])


def surplus(menu: Menu):
    """``u`` as a vectorised callable, for :func:`integrate`."""
    return lambda pts: utilities(menu, pts)[0]


@dataclass(frozen=True)
class CellReport:
    """Signed measure of each option's cell.

    ``measures[k] = atoms[k] + interior[k] + boundary[k]``; ``boundary``
    collects the facet cells on the upper faces of X. ``tie_fraction[k]`` is
    the share of the option's absolute weight assigned through a tie (or,
    for fractional assignment, through a box cut by a cell boundary).
    ``assignment`` gives the winner per support point of the measure
    (atoms first, then cells) under midpoint assignment.
    """

    measures: np.ndarray
    atoms: np.ndarray
    interior: np.ndarray
    boundary: np.ndarray
    tie_fraction: np.ndarray
    assignment: np.ndarray
    method: str

    def rows(self, menu: Menu):
        for k in range(len(menu)):
            yield (menu.allocations[k], menu.prices[k], self.measures[k], self.interior[k],
                   self.boundary[k], self.atoms[k], self.tie_fraction[k])


def _tied(menu, pts):
    vals = pts @ menu.allocations.T - menu.prices
    top = np.sort(vals, axis=1)
    return top[:, -1] - top[:, -2] <= 1e-9 if vals.shape[1] > 1 else np.zeros(len(pts), bool)


def cell_measures(menu: Menu, mu: SignedMeasure, method: str = "midpoint") -> CellReport:
    """Signed measure of every option's cell.

    ``method="midpoint"`` assigns each atom and each cell (by its midpoint)
    wholly to its winning option. ``method="fractional"`` splits every box
    among the options in proportion to the exact area (or length) of its
    intersection with each cell, treating the box weight as uniform; the
    result is then continuous in the prices, which calibration relies on.
    """
    if method not in ("midpoint", "fractional"):
        raise InputError(f"unknown cell assignment method {method!r}")
    k = len(menu)
    pts, w = mu.support()
    _, win = utilities(menu, pts)
    na = len(mu.atom_weights)
    facet = np.concatenate([np.zeros(na, bool), mu.facet_mask])
    is_atom = np.arange(len(w)) < na

    frac = np.zeros((len(w), k))
    frac[np.arange(len(w)), win] = 1.0
    tie = _tied(menu, pts)
    if method == "fractional" and len(mu.cell_weights):
        cut = _cut_cells(menu, mu)
        for i in np.flatnonzero(cut):
            frac[na + i] = _split_box(menu, mu.cell_lo[i], mu.cell_hi[i])
        tie = tie.copy()
        tie[na:] = cut

    contrib = frac * w[:, None]
    part = lambda mask: contrib[mask].sum(axis=0)
    absw = np.abs(contrib)
    denom = absw.sum(axis=0)
    tie_frac = np.divide(absw[tie].sum(axis=0), denom, out=np.zeros(k), where=denom > 0)
    return CellReport(
        measures=contrib.sum(axis=0),
        atoms=part(is_atom),
        interior=part(~is_atom & ~facet),
        boundary=part(facet),
        tie_fraction=tie_frac,
        assignment=win,
        method=method,
    )


def _cut_cells(menu, mu):
    """Boxes whose corners do not all share one strict winner."""
    lo, hi = mu.cell_lo, mu.cell_hi
    n = mu.dim
    corners = [np.where(np.array(bits, bool), hi, lo)
               for bits in np.ndindex(*(2,) * n)]
    vals = np.stack([c @ menu.allocations.T - menu.prices for c in corners], axis=1)
    win = np.argmax(vals, axis=2)
    srt = np.sort(vals, axis=2)
    margin = srt[..., -1] - srt[..., -2] if len(menu) > 1 else np.full(win.shape, np.inf)
    same = np.all(win == win[:, :1], axis=1)
    return ~(same & np.all(margin > 1e-12, axis=1))


def _split_box(menu, lo, hi):
    s, p = menu.allocations, menu.prices
    k = len(p)
    out = np.zeros(k)
    for i in range(k):
        hs = []
        dup = False
        for j in range(k):
            if j == i:
                continue
            if j < i and np.array_equal(s[j], s[i]) and p[j] == p[i]:
                dup = True
                break
            # s_i.x - p_i >= s_j.x - p_j  <=>  (s_j - s_i).x <= p_j - p_i
            hs.append((s[j] - s[i], p[j] - p[i]))
        if not dup:
            out[i] = box_fraction(lo, hi, hs)
    tot = out.sum()
    return out / tot if tot > 0 else out


def revenue_via_measure(menu: Menu, mu: SignedMeasure) -> float:
    """Expected revenue as ``integral of u d(mu)`` for a transformed measure."""
    return integrate(mu, surplus(menu))


def revenue_direct(menu: Menu, f: DensitySpec, samples: int, seed=0,
                   chunk: int = 200_000) -> tuple[float, float]:
    """Monte Carlo revenue: mean price paid and its standard error."""
    if samples < 1:
        raise InputError("samples must be at least 1")
    rng = np.random.default_rng(seed)
    total = total_sq = 0.0
    left = samples
    while left > 0:
        m = min(chunk, left)
        _, win = utilities(menu, f.sample(rng, m))
        paid = menu.prices[win]
        total += paid.sum()
        total_sq += np.dot(paid, paid)
        left -= m
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    se = np.sqrt(var / (samples - 1)) if samples > 1 else 0.0
    return float(mean), float(se)


def partition_defect(report: CellReport, mu: SignedMeasure) -> float:
    return float(abs(report.measures.sum() - total_mass(mu)))


def random_menu(S: AllocationSet, rng: np.random.Generator, options: int = 3,
                price_scale: float = 1.0) -> Menu:
    """A menu with allocations drawn from S and uniform random prices.

    Allocations are vertices, or random convex combinations of them when S
    is a hull. When S contains the origin a zero option is added; otherwise
    prices are shifted so the cheapest option is free, which keeps
    utilities nonnegative without leaving S.
    """
    V = S.vertices
    if S.hull:
        lam = rng.dirichlet(np.full(len(V), 0.5), size=options)
        picks = np.where(rng.random((options, 1)) < 0.5, V[rng.integers(0, len(V), options)], lam @ V)
    else:
        picks = V[rng.integers(0, len(V), options)]
    prices = rng.uniform(0.0, price_scale, options) * np.maximum(picks.sum(axis=1), 1e-3)
    if S.contains(np.zeros(S.dim)):
        return Menu.with_zero_option(picks, prices)
    if np.any(picks < 0):
        raise InputError("random menus without a zero option need nonnegative allocations")
    return Menu(picks, prices - prices.min())
