"""Discretised signed measures: atoms plus weighted axis-aligned boxes.

Boxes may be degenerate (zero width along one axis); those carry the facet
terms of the transformed measure. All operations return new measures.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .density import DensitySpec
from .errors import InputError

MASS_TOL = 1e-8


def _frozen(a, shape_tail, dtype=float):
    a = np.array(a, dtype=dtype).reshape((-1,) + shape_tail)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SignedMeasure:
    """Signed measure on ``X = [0, M]^n`` made of atoms and uniform boxes.

    A box contributes its weight at its midpoint when integrating, so the
    box extents only matter for geometric queries (fractional cell
    assignment, plotting).
    """

    atom_points: np.ndarray
    atom_weights: np.ndarray
    cell_lo: np.ndarray
    cell_hi: np.ndarray
    cell_weights: np.ndarray
    domain: np.ndarray

    def __post_init__(self):
        dom = _frozen(self.domain, ()).ravel()
        n = dom.size
        object.__setattr__(self, "domain", dom)
        object.__setattr__(self, "atom_points", _frozen(self.atom_points, (n,)))
        object.__setattr__(self, "atom_weights", _frozen(self.atom_weights, ()))
        object.__setattr__(self, "cell_lo", _frozen(self.cell_lo, (n,)))
        object.__setattr__(self, "cell_hi", _frozen(self.cell_hi, (n,)))
        object.__setattr__(self, "cell_weights", _frozen(self.cell_weights, ()))
        if len(self.atom_points) != len(self.atom_weights):
            raise InputError("atom points and weights differ in length")
        if not (len(self.cell_lo) == len(self.cell_hi) == len(self.cell_weights)):
            raise InputError("cell bounds and weights differ in length")
        if np.any(self.cell_hi < self.cell_lo):
            raise InputError("cell upper corner below lower corner")
        eps = 1e-12 * max(1.0, float(dom.max()))
        for pts in (self.atom_points, self.cell_lo, self.cell_hi):
            if np.any(pts < -eps) or np.any(pts > dom + eps):
                raise InputError("measure support leaves X = [0, M]^n")

    # -- construction --------------------------------------------------------

    @classmethod
    def empty(cls, domain):
        n = np.size(domain)
        return cls(np.zeros((0, n)), [], np.zeros((0, n)), np.zeros((0, n)), [], domain)

    @classmethod
    def from_atoms(cls, points, weights, domain):
        n = np.size(domain)
        return cls(points, weights, np.zeros((0, n)), np.zeros((0, n)), [], domain)

    @property
    def dim(self) -> int:
        return self.domain.size

    @property
    def cell_mid(self) -> np.ndarray:
        return (self.cell_lo + self.cell_hi) / 2

    @property
    def facet_mask(self) -> np.ndarray:
        """True for degenerate boxes (boundary facet pieces)."""
        return np.any(self.cell_hi == self.cell_lo, axis=1)

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        """All evaluation points (atoms, then cell midpoints) and their weights."""
        return (np.vstack([self.atom_points, self.cell_mid]),
                np.concatenate([self.atom_weights, self.cell_weights]))

    def __len__(self):
        return len(self.atom_weights) + len(self.cell_weights)

    def _replace(self, atom_mask=None, cell_mask=None, atom_weights=None, cell_weights=None):
        am = slice(None) if atom_mask is None else atom_mask
        cm = slice(None) if cell_mask is None else cell_mask
        aw = self.atom_weights if atom_weights is None else atom_weights
        cw = self.cell_weights if cell_weights is None else cell_weights
        return SignedMeasure(self.atom_points[am], aw[am], self.cell_lo[cm], self.cell_hi[cm],
                             cw[cm], self.domain)

    # -- serialisation -------------------------------------------------------

    def to_csv(self) -> str:
        n = self.dim
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind"] + [f"lo{i}" for i in range(n)] + [f"hi{i}" for i in range(n)] + ["weight"])
        for p, wt in zip(self.atom_points, self.atom_weights):
            w.writerow(["atom"] + [repr(float(c)) for c in p] * 2 + [repr(float(wt))])
        for lo, hi, wt in zip(self.cell_lo, self.cell_hi, self.cell_weights):
            w.writerow(["cell"] + [repr(float(c)) for c in lo] + [repr(float(c)) for c in hi]
                       + [repr(float(wt))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, domain):
        rows = list(csv.reader(io.StringIO(text)))
        n = (len(rows[0]) - 2) // 2
        atoms, aw, lo, hi, cw = [], [], [], [], []
        for row in rows[1:]:
            vals = [float(v) for v in row[1:]]
            if row[0] == "atom":
                atoms.append(vals[:n]); aw.append(vals[-1])
            else:
                lo.append(vals[:n]); hi.append(vals[n:2 * n]); cw.append(vals[-1])
        return cls(np.reshape(atoms, (-1, n)), aw, np.reshape(lo, (-1, n)),
                   np.reshape(hi, (-1, n)), cw, domain)


def transform(f: DensitySpec, z0=None, resolution: int = 64, quadrature: str = "exact") -> SignedMeasure:
    """Transformed measure of ``f`` on a uniform grid over ``[0, M]^n``.

    Produces a unit atom at ``z0``, facet cells on the upper faces weighted by
    ``f (z . n_hat)``, and interior cells weighted by
    ``-(grad f . z + (n + 1) f)``. With ``quadrature="exact"`` cell weights
    are exact integrals over each cell, so the total mass vanishes to
    rounding; ``"midpoint"`` evaluates the integrands at cell midpoints.
    For densities with unbounded support the part of the measure outside
    X is projected onto the boundary of X (exact quadrature only).
    """
    if quadrature not in ("exact", "midpoint"):
        raise InputError(f"unknown quadrature {quadrature!r}")
    n, m = f.dim, f.truncation
    z0 = np.zeros(n) if z0 is None else np.asarray(z0, dtype=float).reshape(n)
    if np.any(z0 > 0) or np.any(z0 < 0):
        # support starts at the origin and X = [0, M]^n, so only the origin
        # is both dominated-by-support and inside X
        raise InputError("z0 must be coordinate-wise below the support and inside X (the origin)")
    res = np.broadcast_to(np.asarray(resolution, dtype=int), (n,))
    if np.any(res < 1):
        raise InputError("grid resolution must be at least 1 per axis")
    edges = [np.linspace(0.0, m[k], res[k] + 1) for k in range(n)]

    lo, hi = _grid_boxes(edges)
    if quadrature == "exact":
        w_int = f.interior_weights(edges).ravel()
    else:
        f._require_separable()
        mid = (lo + hi) / 2
        vol = np.prod(hi - lo, axis=1)
        w_int = -(np.einsum("ij,ij->i", f.grad(mid), mid) + (n + 1) * f.pdf(mid)) * vol

    los, his, ws = [lo], [hi], [w_int]
    for face in _faces(n):
        other = [e for i, e in enumerate(edges) if i not in face]
        if other:
            flo, fhi = _grid_boxes(other)
            for k in face:
                flo = np.insert(flo, k, m[k], axis=1)
                fhi = np.insert(fhi, k, m[k], axis=1)
        else:
            flo = fhi = m[None, :].copy()
        if quadrature == "exact":
            wf = f.face_weights(face, edges)
            if wf is None:
                continue
            wf = np.atleast_1d(wf).ravel()
        else:
            if len(face) != 1:
                continue
            k = face[0]
            mid = (flo + fhi) / 2
            area = np.prod(np.delete(fhi - flo, k, axis=1), axis=1)
            wf = f.pdf(mid) * m[k] * area
        los.append(flo); his.append(fhi); ws.append(wf)

    return SignedMeasure(z0[None, :], [1.0], np.vstack(los), np.vstack(his),
                         np.concatenate(ws), m)


def _faces(n):
    return [tuple(k for k in range(n) if mask >> k & 1) for mask in range(1, 2 ** n)]


def _grid_boxes(edges):
    lo = np.stack(np.meshgrid(*[e[:-1] for e in edges], indexing="ij"), -1)
    hi = np.stack(np.meshgrid(*[e[1:] for e in edges], indexing="ij"), -1)
    return lo.reshape(-1, len(edges)), hi.reshape(-1, len(edges))


def density_measure(f: DensitySpec, resolution: int = 64) -> SignedMeasure:
    """The (positive) probability measure of ``f`` as grid cells."""
    n, m = f.dim, f.truncation
    res = np.broadcast_to(np.asarray(resolution, dtype=int), (n,))
    edges = [np.linspace(0.0, m[k], res[k] + 1) for k in range(n)]
    lo, hi = _grid_boxes(edges)
    return SignedMeasure(np.zeros((0, n)), [], lo, hi, f.mass_weights(edges).ravel(), m)


def _evaluate(h, pts):
    if len(pts) == 0:
        return np.zeros(0)
    try:
        vals = np.asarray(h(pts), dtype=float)
        if vals.shape == (len(pts),):
            return vals
    except (TypeError, ValueError, IndexError):
        pass
    return np.array([float(h(p)) for p in pts])


def integrate(mu: SignedMeasure, h) -> float:
    """``sum_atoms w h(point) + sum_cells w h(midpoint)``.

    ``h`` is called once on the full ``(k, n)`` array of points when it
    supports that, otherwise point by point.
    """
    pts, w = mu.support()
    return float(np.sum(w * _evaluate(h, pts)))


def total_mass(mu: SignedMeasure) -> float:
    return float(np.sum(mu.atom_weights) + np.sum(mu.cell_weights))


def jordan_parts(mu: SignedMeasure) -> tuple[SignedMeasure, SignedMeasure]:
    """``(mu_plus, mu_minus)`` with both parts nonnegative and ``mu = plus - minus``."""
    plus = mu._replace(mu.atom_weights > 0, mu.cell_weights > 0)
    neg_a, neg_c = mu.atom_weights < 0, mu.cell_weights < 0
    minus = mu._replace(neg_a, neg_c, -mu.atom_weights, -mu.cell_weights)
    return plus, minus


def restrict(mu: SignedMeasure, region) -> SignedMeasure:
    """Keep atoms and cells whose point / midpoint lies in ``region``.

    ``region`` is either a ``(lo, hi)`` pair of corners (closed box) or a
    vectorised membership predicate on ``(k, n)`` point arrays.
    """
    if isinstance(region, tuple) and len(region) == 2 and not callable(region[0]):
        lo, hi = (np.asarray(c, dtype=float) for c in region)
        pred = lambda p: np.all((p >= lo) & (p <= hi), axis=1)
    else:
        pred = region
    am = np.asarray(pred(mu.atom_points), dtype=bool) if len(mu.atom_points) else np.zeros(0, bool)
    cm = np.asarray(pred(mu.cell_mid), dtype=bool) if len(mu.cell_weights) else np.zeros(0, bool)
    return mu._replace(am, cm)


def combine(mu: SignedMeasure, other: SignedMeasure, scale: float = 1.0) -> SignedMeasure:
    """``mu + scale * other`` as a plain concatenation of supports."""
    if mu.dim != other.dim:
        raise InputError("measures live in different dimensions")
    return SignedMeasure(
        np.vstack([mu.atom_points, other.atom_points]),
        np.concatenate([mu.atom_weights, scale * other.atom_weights]),
        np.vstack([mu.cell_lo, other.cell_lo]),
        np.vstack([mu.cell_hi, other.cell_hi]),
        np.concatenate([mu.cell_weights, scale * other.cell_weights]),
        np.maximum(mu.domain, other.domain),
    )
