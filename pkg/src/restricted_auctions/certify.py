"""Optimality certificates for menus.

Two routes, kept separate on purpose:

* the grid route solves the transportation dual on a ladder of resolutions
  and compares its value with the menu's revenue (weak duality);
* the matching route checks the one-dimensional Strassen-type condition
  ``nu_minus(A(a)) >= nu_plus(B(a))`` that guarantees a tight matching
  inside a single cell.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate as spi

from .allocation import AllocationSet
from .density import DensitySpec
from .errors import InputError, StructuralError
from .geometry import box_fraction
from .measure import SignedMeasure, transform
from .menu import Menu, cell_measures, revenue_via_measure
from .transport import discretize_dual, plan_residuals, solve

CERTIFIED = "certified-at-grid"
INCONCLUSIVE = "inconclusive"
REFUTED = "refuted"

WEAK_DUALITY_TOL = 1e-8
SLACK_TOL = 1e-9


@dataclass(frozen=True)
class Rung:
    resolution: int
    primal: float
    dual: float
    gap: float
    rel_gap: float
    slackness: float
    sources: int
    sinks: int
    seconds: float


@dataclass
class CertificateReport:
    """Weak-duality certificate for one menu over a resolution ladder.

    ``gap = dual - primal`` at the finest resolution; ``rel_gap`` divides by
    the primal value. ``extrapolated_gap`` is the first-order Richardson
    estimate of the continuum gap from the last two rungs and
    ``gap_error`` the change between them, used as its uncertainty.
    """

    primal: float
    dual: float
    gap: float
    rel_gap: float
    slackness: float
    cell_residuals: np.ndarray
    verdict: str
    tol: float
    extrapolated_gap: float
    gap_error: float
    trend_ok: bool
    rungs: list = field(default_factory=list)
    dual_measure: str = "mu"

    @property
    def resolutions(self):
        return [r.resolution for r in self.rungs]

    def to_text(self, menu: Menu | None = None) -> str:
        lines = []
        if menu is not None:
            lines.append("menu:")
            for s, p in zip(menu.allocations, menu.prices):
                lines.append(f"  allocation {np.round(s, 6).tolist()}  price {p:.6f}")
        lines.append("resolution  primal        dual          gap           rel_gap     slackness")
        for r in self.rungs:
            lines.append(f"{r.resolution:>10d}  {r.primal:.10f}  {r.dual:.10f}  {r.gap:+.6e}  "
                         f"{100 * r.rel_gap:8.4f}%  {r.slackness:.2e}")
        lines.append(f"cell residuals (integrate to zero): "
                     + ", ".join(f"{v:+.3e}" for v in self.cell_residuals))
        lines.append(f"gap trend nonincreasing: {self.trend_ok}")
        lines.append(f"extrapolated gap: {self.extrapolated_gap:+.3e} (+/- {self.gap_error:.1e})")
        lines.append(f"dual solved on: {self.dual_measure}")
        lines.append(f"tolerance: {100 * self.tol:.3g}% of revenue")
        lines.append(f"verdict: {self.verdict}")
        return "\n".join(lines) + "\n"

    def to_record(self) -> dict:
        return {
            "verdict": self.verdict,
            "primal": self.primal,
            "dual": self.dual,
            "gap": self.gap,
            "rel_gap": self.rel_gap,
            "slackness": self.slackness,
            "tol": self.tol,
            "extrapolated_gap": self.extrapolated_gap,
            "gap_error": self.gap_error,
            "trend_ok": self.trend_ok,
            "dual_measure": self.dual_measure,
            "cell_residuals": [float(v) for v in self.cell_residuals],
            "rungs": [r.__dict__ for r in self.rungs],
        }


def _verdict(rungs, tol, slackness):
    gaps = np.array([r.gap for r in rungs])
    scale = max(abs(rungs[-1].primal), 1e-12)
    trend_ok = bool(np.all(np.diff(gaps) <= 1e-12 * scale))
    residual_ok = slackness <= SLACK_TOL and np.all(gaps >= -WEAK_DUALITY_TOL)
    if len(rungs) >= 2:
        rho = rungs[-1].resolution / rungs[-2].resolution
        err = abs(gaps[-1] - gaps[-2])
        extra = gaps[-1] + (gaps[-1] - gaps[-2]) / (rho - 1)
    else:
        err, extra = abs(gaps[-1]), gaps[-1]
    if not residual_ok:
        verdict = INCONCLUSIVE
    elif len(rungs) >= 2 and extra > err and extra > 1e-6 * scale:
        # the gap is not closing fast enough to vanish under refinement
        verdict = REFUTED
    elif rungs[-1].rel_gap <= tol and trend_ok:
        verdict = CERTIFIED
    else:
        verdict = INCONCLUSIVE
    return verdict, trend_ok, float(extra), float(err)


def certify_menu(menu: Menu, density: DensitySpec, S: AllocationSet, resolutions,
                 tol: float = 0.02, on_rung: Callable | None = None,
                 dual_measure: Callable | None = None) -> CertificateReport:
    """Grid certificate for ``menu`` on each resolution of the ladder.

    ``dual_measure(mu, menu)`` may replace mu by a measure that dominates
    it over feasible mechanisms (a spread of mu_plus or a fusion of
    mu_minus) before the transport dual is solved; the primal is always
    evaluated on mu itself, so weak duality still bounds the gap below.
    Without it the dual uses exact marginals, which can be loose when the
    pairwise constraint admits non-convex surplus functions.

    Verdicts: ``certified-at-grid`` when the solver residuals pass, the gap
    at the finest resolution is at most ``tol`` of revenue and the gaps do
    not increase; ``refuted`` when the extrapolated gap stays above its own
    error estimate (the gap is not closing); ``inconclusive`` otherwise.
    """
    res = [int(r) for r in resolutions]
    if not res or sorted(res) != res or len(set(res)) != len(res):
        raise InputError("resolutions must be strictly ascending")
    if tol <= 0:
        raise InputError("tolerance must be positive")
    menu.check_feasible(S)
    rungs = []
    worst_slack = 0.0
    mu = None
    for r in res:
        t0 = time.perf_counter()
        mu = transform(density, resolution=r)
        mu_dual = mu if dual_measure is None else dual_measure(mu, menu)
        inst = discretize_dual(mu_dual, S)
        plan = solve(inst)
        resid = plan_residuals(inst, plan)
        slack = max(resid["duality"], -resid["min_reduced_cost"], resid["max_flow_slack"],
                    resid["source_marginal"], resid["sink_marginal"])
        worst_slack = max(worst_slack, slack)
        primal = revenue_via_measure(menu, mu)
        dual = plan.cost
        gap = dual - primal
        rung = Rung(r, primal, dual, gap, gap / primal if primal > 0 else gap, slack,
                    inst.size[0], inst.size[1], time.perf_counter() - t0)
        rungs.append(rung)
        if on_rung is not None:
            on_rung(rung, inst, plan, mu)
    verdict, trend_ok, extra, err = _verdict(rungs, tol, worst_slack)
    cells = cell_measures(menu, mu, method="fractional").measures
    last = rungs[-1]
    name = "mu" if dual_measure is None else getattr(dual_measure, "__name__", "modified mu")
    return CertificateReport(last.primal, last.dual, last.gap, last.rel_gap, worst_slack, cells,
                             verdict, tol, extra, err, trend_ok, rungs, name)


# -- one-dimensional dominance ------------------------------------------------

def _as_pairs(nu):
    a = np.asarray(nu, dtype=float)
    if a.size == 0:
        return np.zeros(0), np.zeros(0)
    a = a.reshape(-1, 2)
    if np.any(a[:, 1] < 0):
        raise InputError("dominance inputs must be unsigned measures")
    return a[:, 0], a[:, 1]


def dominance_margin(nu_plus, nu_minus, tol: float = 1e-10) -> float:
    """``min_t nu_plus([t, inf)) - nu_minus([t, inf))`` over all support positions."""
    xp, wp = _as_pairs(nu_plus)
    xm, wm = _as_pairs(nu_minus)
    tp, tm = wp.sum(), wm.sum()
    if abs(tp - tm) > tol * max(1.0, tp, tm):
        raise InputError(f"totals differ: {tp:.12g} vs {tm:.12g}")
    pos = np.unique(np.concatenate([xp, xm]))[::-1]
    if pos.size == 0:
        return 0.0
    # upper tails at each support position, highest first
    return float(np.min(_tails(xp, wp, pos) - _tails(xm, wm, pos)))


def _tails(x, w, pos):
    order = np.argsort(-x, kind="stable")
    xs, cw = x[order], np.cumsum(w[order])
    k = np.searchsorted(-xs, -pos, side="right")
    return np.where(k > 0, cw[np.maximum(k - 1, 0)], 0.0)


def stochastic_dominance_1d(nu_plus, nu_minus, tol: float = 1e-10) -> bool:
    """True iff ``nu_plus`` first-order dominates ``nu_minus``.

    That is, ``nu_plus([t, inf)) >= nu_minus([t, inf))`` for every ``t``,
    which by Strassen's theorem is exactly when the two can be coupled with
    every ``nu_plus`` point at or above its ``nu_minus`` partner.
    """
    _, wp = _as_pairs(nu_plus)
    scale = max(1.0, wp.sum())
    return dominance_margin(nu_plus, nu_minus, tol) >= -tol * scale


# -- matching condition -------------------------------------------------------

def region_mass(nu: SignedMeasure, region) -> float:
    """Weight of ``nu`` inside ``region``.

    ``region`` is a vectorised point predicate (cells then count by their
    midpoint) or a list of halfspaces ``(a, b)`` meaning ``a . x <= b`` (cells
    then count by the exact fraction of their box inside, for boxes of
    dimension at most two).
    """
    if callable(region):
        am = np.asarray(region(nu.atom_points), bool) if len(nu.atom_weights) else np.zeros(0, bool)
        cm = np.asarray(region(nu.cell_mid), bool) if len(nu.cell_weights) else np.zeros(0, bool)
        return float(nu.atom_weights[am].sum() + nu.cell_weights[cm].sum())
    hs = [(np.asarray(a, float), float(b)) for a, b in region]
    tot = 0.0
    if len(nu.atom_weights):
        inside = np.ones(len(nu.atom_weights), bool)
        for a, b in hs:
            inside &= nu.atom_points @ a <= b + 1e-12
        tot += nu.atom_weights[inside].sum()
    if len(nu.cell_weights):
        lo, hi = nu.cell_lo, nu.cell_hi
        n = nu.dim
        corners = np.stack([np.where(np.array(bits, bool), hi, lo) for bits in np.ndindex(*(2,) * n)], 1)
        all_in = np.ones(len(lo), bool)
        any_out = np.zeros(len(lo), bool)
        for a, b in hs:
            v = corners @ a - b
            all_in &= np.all(v <= 0, axis=1)
            any_out |= np.all(v >= 0, axis=1) & np.any(v > 0, axis=1)
        tot += nu.cell_weights[all_in].sum()
        for i in np.flatnonzero(~all_in & ~any_out):
            tot += nu.cell_weights[i] * box_fraction(lo[i], hi[i], hs)
    return float(tot)


def _membership(nu: SignedMeasure, region) -> np.ndarray:
    pts, _ = nu.support()
    if callable(region):
        return np.asarray(region(pts), bool)
    inside = np.ones(len(pts), bool)
    for a, b in region:
        inside &= pts @ np.asarray(a, float) <= b + 1e-12
    return inside


@dataclass(frozen=True)
class MatchingCondition:
    """Hypothesis of the one-dimensional matching lemma for one cell.

    ``nu_plus`` holds the positive mass, all of it on the boundary piece P;
    ``nu_minus`` holds the (unsigned) negative mass of the cell. ``A(a)`` is
    the set of cell points that the boundary point with parameter ``a`` may
    be matched to and ``B(a)`` the part of P below it in the induced order,
    both as regions accepted by :func:`region_mass`. ``B`` must be nested
    in ``a``.
    """

    nu_plus: SignedMeasure
    nu_minus: SignedMeasure
    A: Callable
    B: Callable
    a_range: tuple
    name: str = ""


@dataclass(frozen=True)
class MatchingReport:
    a: np.ndarray
    available: np.ndarray   # nu_minus(A(a))
    required: np.ndarray    # nu_plus(B(a))
    tol: float

    @property
    def slack(self) -> np.ndarray:
        return self.available - self.required

    @property
    def min_slack(self) -> float:
        return float(self.slack.min())

    @property
    def worst_a(self) -> float:
        return float(self.a[np.argmin(self.slack)])

    @property
    def passed(self) -> bool:
        return self.min_slack >= -self.tol


def check_matching_condition(cond: MatchingCondition, a_samples: int = 257,
                             tol: float = 1e-6) -> MatchingReport:
    """Evaluate ``nu_minus(A(a)) - nu_plus(B(a))`` on an even grid of ``a``.

    Raises :class:`StructuralError` if the sets ``B(a)`` are not nested
    (neither increasing nor decreasing in ``a``) on the support of
    ``nu_plus``, since the order on P is then not total.
    """
    if a_samples < 2:
        raise InputError("need at least two parameter samples")
    a = np.linspace(cond.a_range[0], cond.a_range[1], a_samples)
    masks = np.array([_membership(cond.nu_plus, cond.B(t)) for t in a])
    grow = np.all(masks[:-1] <= masks[1:])
    shrink = np.all(masks[:-1] >= masks[1:])
    if not (grow or shrink):
        raise StructuralError("B(a) is not nested in a")
    avail = np.array([region_mass(cond.nu_minus, cond.A(t)) for t in a])
    req = np.array([region_mass(cond.nu_plus, cond.B(t)) for t in a])
    return MatchingReport(a, avail, req, tol)


# -- line integrals of the transformed density -------------------------------

def interior_density(f: DensitySpec, x) -> float:
    """Density of the transformed measure at an interior point: ``-(grad f . x + (n+1) f)``."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return float(-(f.grad(x)[0] @ x[0] + (f.dim + 1) * f.pdf(x)[0]))


def line_mass(f: DensitySpec, point, direction, t0: float, t1: float) -> float:
    """``integral_{t0}^{t1} rho(point + t direction) dt`` for the interior density rho.

    ``t1`` may be infinite for densities on unbounded support.
    """
    p = np.asarray(point, dtype=float)
    d = np.asarray(direction, dtype=float)
    if t1 <= t0:
        return 0.0
    val, _ = spi.quad(lambda t: interior_density(f, p + t * d), t0, t1, epsabs=1e-13, epsrel=1e-11,
                      limit=200)
    return float(val)
