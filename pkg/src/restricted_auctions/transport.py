"""Grid dual: min-cost transport from mu_plus to mu_minus under cost l_S.

On a grid, maximising ``sum mu u`` over functions with
``u(x) - u(y) <= l_S(x, y)`` is a linear program whose dual is the
transportation problem between the two Jordan parts of mu; l_S obeys the
triangle inequality, so direct arcs already realise shortest paths.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass

import numpy as np

from . import _ssp
from .allocation import AllocationSet
from .errors import InputError, SolverError
from .measure import MASS_TOL, SignedMeasure, jordan_parts, total_mass
from .menu import Menu, revenue_via_measure

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TransportInstance:
    """Balanced sources (from mu_plus) and sinks (from mu_minus) with cost l_S."""

    sources: np.ndarray
    source_weights: np.ndarray
    sinks: np.ndarray
    sink_weights: np.ndarray
    S: AllocationSet
    scale: float = 1.0

    def cost(self, x, y):
        return _pair_cost(self.S, x, y)

    def cost_row(self, i) -> np.ndarray:
        return _pair_cost(self.S, self.sources[i][None, :], self.sinks)

    @property
    def size(self):
        return len(self.source_weights), len(self.sink_weights)


def _pair_cost(S, x, y):
    """l_S between matched rows of x and y (broadcasting)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    return ((x - y) @ S.vertices.T).max(axis=-1)


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Optimal flows plus dual potentials.

    ``source_potential[i] - sink_potential[j] <= l_S(x_i, y_j)`` on every
    arc, with equality where flow is carried; the plan cost equals
    ``sum a_i source_potential[i] - sum b_j sink_potential[j]``.
    """

    source_index: np.ndarray
    sink_index: np.ndarray
    weight: np.ndarray
    source_potential: np.ndarray
    sink_potential: np.ndarray
    arc_cost: np.ndarray

    @property
    def cost(self) -> float:
        return float(np.sum(self.weight * self.arc_cost))

    def dual_value(self, instance: TransportInstance) -> float:
        return float(np.sum(instance.source_weights * self.source_potential)
                     - np.sum(instance.sink_weights * self.sink_potential))

    def to_csv(self, instance: TransportInstance) -> str:
        n = instance.sources.shape[1]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{k}" for k in range(n)] + [f"y{k}" for k in range(n)] + ["weight", "arc_cost"])
        for i, j, wt, c in zip(self.source_index, self.sink_index, self.weight, self.arc_cost):
            w.writerow([repr(float(v)) for v in instance.sources[i]]
                       + [repr(float(v)) for v in instance.sinks[j]]
                       + [repr(float(wt)), repr(float(c))])
        return buf.getvalue()


def discretize_dual(mu: SignedMeasure, S: AllocationSet) -> TransportInstance:
    """Split mu into sources (positive weights) and sinks (negative weights).

    Zero-weight points are dropped. Sink weights are rescaled so both sides
    carry exactly the same total.
    """
    if S.dim != mu.dim:
        raise InputError("allocation set and measure differ in dimension")
    tm = total_mass(mu)
    if abs(tm) > MASS_TOL:
        raise InputError(f"measure has total mass {tm:.3g}; the dual needs mu(X) = 0")
    plus, minus = jordan_parts(mu)
    sp, sw = plus.support()
    kp, kw = minus.support()
    scale = 1.0
    if sw.size and kw.size:
        scale = sw.sum() / kw.sum()
        kw = kw * scale
    elif sw.size or kw.size:
        raise InputError("measure has mass of only one sign")
    return TransportInstance(sp, sw, kp, kw, S, scale)


def solve(instance: TransportInstance, neg_tol: float = 1e-9) -> TransportPlan:
    """Exact optimum of the transportation LP by successive shortest paths."""
    a, b = instance.source_weights, instance.sink_weights
    if abs(a.sum() - b.sum()) > MASS_TOL * max(1.0, a.sum()):
        raise InputError("unbalanced transport instance")
    if np.any(a <= 0) or np.any(b <= 0):
        raise InputError("transport weights must be positive")
    if a.size == 0:
        z = np.zeros(0)
        return TransportPlan(z.astype(int), z.astype(int), z, z, z, z)
    V = instance.S.vertices
    A = np.ascontiguousarray(instance.sources @ V.T)
    B = np.ascontiguousarray(instance.sinks @ V.T)
    total = a.sum()
    # close the tiny residual of the balancing rescale on the largest sink
    b = b.copy()
    b[np.argmax(b)] += total - b.sum()
    eps = 1e-13 * total
    stats = np.zeros(4, dtype=np.int64)
    flow, pot_src, pot_snk, status = _ssp.solve_dense(A, B, a.astype(float), b, eps, neg_tol, stats)
    log.debug("ssp: %d phases, %d augmentations, %d source scans, %d admissible arcs", *stats)
    if status == 1:
        raise SolverError("negative reduced cost: cost violates the triangle inequality")
    if status == 2:
        raise SolverError("no augmenting path found for remaining supply")
    si, ki = np.nonzero(flow)
    w = flow[si, ki]
    cost = _pair_cost(instance.S, instance.sources[si], instance.sinks[ki])
    return TransportPlan(si, ki, w, -pot_src, -pot_snk, cost)


def plan_residuals(instance: TransportInstance, plan: TransportPlan) -> dict:
    """Marginal, sign and reduced-cost residuals of a plan (all should be ~0)."""
    m, n = instance.size
    out_flow = np.bincount(plan.source_index, plan.weight, minlength=m)
    in_flow = np.bincount(plan.sink_index, plan.weight, minlength=n)
    worst = 0.0
    for i in range(m):
        rc = instance.cost_row(i) - plan.source_potential[i] + plan.sink_potential
        worst = min(worst, rc.min())
    slack = plan.arc_cost - (plan.source_potential[plan.source_index]
                             - plan.sink_potential[plan.sink_index])
    return {
        "source_marginal": float(np.max(np.abs(out_flow - instance.source_weights), initial=0.0)),
        "sink_marginal": float(np.max(np.abs(in_flow - instance.sink_weights), initial=0.0)),
        "min_flow": float(plan.weight.min(initial=0.0)),
        "min_reduced_cost": float(worst),
        "max_flow_slack": float(np.max(np.abs(slack), initial=0.0)),
        "duality": abs(plan.cost - plan.dual_value(instance)),
    }


@dataclass(frozen=True, eq=False)
class GridMechanism:
    """Consumer surplus recovered on the grid nodes (sources, then sinks)."""

    points: np.ndarray
    values: np.ndarray
    n_sources: int

    @property
    def source_values(self):
        return self.values[: self.n_sources]

    @property
    def sink_values(self):
        return self.values[self.n_sources:]

    def allocations(self, S: AllocationSet, instance: TransportInstance,
                    plan: TransportPlan) -> np.ndarray:
        """A maximising vertex of l_S(x*, z) for the source x* attaining u(z)."""
        best = _argmax_source(instance, plan.source_potential, self.points)
        d = instance.sources[best] - self.points
        return np.argmax(d @ S.vertices.T, axis=1)


def _argmax_source(instance, potential, points, chunk=2048):
    best = np.empty(len(points), dtype=int)
    V = instance.S.vertices
    A = instance.sources @ V.T
    for s in range(0, len(points), chunk):
        B = points[s:s + chunk] @ V.T
        c = (A[:, None, :] - B[None, :, :]).max(axis=2)
        best[s:s + chunk] = np.argmax(potential[:, None] - c, axis=0)
    return best


def recovered_mechanism(plan: TransportPlan, instance: TransportInstance,
                        chunk: int = 2048) -> GridMechanism:
    """``u(z) = max_x (potential(x) - l_S(x, z))`` over sources, shifted to min 0."""
    pts = np.vstack([instance.sources, instance.sinks])
    if len(pts) == 0:
        return GridMechanism(pts, np.zeros(0), 0)
    V = instance.S.vertices
    A = instance.sources @ V.T
    vals = np.empty(len(pts))
    for s in range(0, len(pts), chunk):
        B = pts[s:s + chunk] @ V.T
        c = (A[:, None, :] - B[None, :, :]).max(axis=2)
        vals[s:s + chunk] = np.max(plan.source_potential[:, None] - c, axis=0)
    vals -= vals.min()
    return GridMechanism(pts, vals, len(instance.source_weights))


def mechanism_value(mech: GridMechanism, instance: TransportInstance) -> float:
    """``sum u dmu`` over the (rescaled) grid measure."""
    return float(np.sum(mech.source_values * instance.source_weights)
                 - np.sum(mech.sink_values * instance.sink_weights))


def feasibility_violation(mech: GridMechanism, S: AllocationSet, pairs: int = 100_000,
                          seed=0) -> float:
    """Largest ``u(x) - u(y) - l_S(x, y)`` over random grid pairs."""
    if len(mech.values) < 2:
        return 0.0
    rng = np.random.default_rng(seed)
    i = rng.integers(0, len(mech.values), pairs)
    j = rng.integers(0, len(mech.values), pairs)
    lhs = mech.values[i] - mech.values[j]
    rhs = _pair_cost(S, mech.points[i], mech.points[j])
    return float(np.max(lhs - rhs))


def duality_gap(menu: Menu, plan: TransportPlan, mu: SignedMeasure) -> float:
    """Plan cost minus the menu's revenue; nonnegative by weak duality."""
    return plan.cost - revenue_via_measure(menu, mu)


def grid_dual(mu: SignedMeasure, S: AllocationSet):
    """Convenience: discretise, solve, return ``(instance, plan)``."""
    inst = discretize_dual(mu, S)
    return inst, solve(inst)
