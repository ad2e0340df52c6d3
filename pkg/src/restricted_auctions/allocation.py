"""Restricted allocation sets and their support function.

An allocation set S is stored as an explicit vertex list. For the hull
variant S is ``conv(vertices)``; for the deterministic variant S is exactly
the finite list. Both have the same support function, since a linear
function attains its supremum over a polytope at a vertex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class AllocationSet:
    """Feasible allocations ``S``.

    Parameters
    ----------
    vertices : array_like, shape (k, n)
        Vertex rows. Must be non-empty and finite.
    hull : bool
        True if S is the convex hull of the vertices, False if S is exactly
        the finite vertex set (deterministic mechanisms).
    """

    vertices: np.ndarray
    hull: bool = True

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim == 1:
            v = v.reshape(-1, 1)
        if v.ndim != 2 or v.shape[0] == 0:
            raise InputError("allocation set needs a non-empty list of vertex rows")
        if not np.all(np.isfinite(v)):
            raise InputError("allocation vertices must be finite (S closed and bounded)")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def deterministic(self) -> bool:
        return not self.hull

    def __len__(self):
        return self.vertices.shape[0]

    def contains(self, s, tol: float = DEFAULT_TOL) -> bool:
        """Membership test: exact vertex match, or hull membership via LP."""
        s = _as_direction(s, self.dim)
        if np.any(np.all(np.abs(self.vertices - s) <= tol, axis=1)):
            return True
        if not self.hull:
            return False
        from scipy.optimize import linprog

        k = len(self)
        a_eq = np.vstack([self.vertices.T, np.ones((1, k))])
        b_eq = np.concatenate([s, [1.0]])
        res = linprog(np.zeros(k), A_eq=a_eq, b_eq=b_eq, bounds=[(0, None)] * k, method="highs")
        return res.status == 0

    def vertex_index(self, s, tol: float = DEFAULT_TOL) -> int:
        s = _as_direction(s, self.dim)
        hits = np.flatnonzero(np.all(np.abs(self.vertices - s) <= tol, axis=1))
        if hits.size == 0:
            raise InputError(f"{s.tolist()} is not a vertex of S")
        return int(hits[0])


def _as_direction(d, n: int) -> np.ndarray:
    d = np.atleast_1d(np.asarray(d, dtype=float))
    if d.shape[-1] != n:
        raise InputError(f"direction has dimension {d.shape[-1]}, allocation set has {n}")
    return d


def support_value(S: AllocationSet, d) -> float | np.ndarray:
    """``max_{s in S} s . d``; vectorised over leading axes of ``d``."""
    d = _as_direction(d, S.dim)
    vals = d @ S.vertices.T
    out = vals.max(axis=-1)
    return float(out) if out.ndim == 0 else out


def ell(S: AllocationSet, x, y) -> float | np.ndarray:
    """Cost ``l_S(x, y) = support_value(S, x - y)``, the tight bound on u(x) - u(y)."""
    return support_value(S, np.asarray(x, dtype=float) - np.asarray(y, dtype=float))


def argmax_vertices(S: AllocationSet, d, tol: float = DEFAULT_TOL) -> list[int]:
    """Indices of all vertices within ``tol`` of the support value in direction ``d``."""
    if tol < 0:
        raise InputError("tol must be nonnegative")
    d = _as_direction(d, S.dim)
    if d.ndim != 1:
        raise InputError("argmax_vertices takes a single direction")
    vals = S.vertices @ d
    return np.flatnonzero(vals >= vals.max() - tol).tolist()


def is_exposed(S: AllocationSet, s, direction_samples, tol: float = DEFAULT_TOL,
               unique: bool = True) -> bool:
    """Sampling test for exposure of the vertex ``s``.

    Returns True if some sampled direction has ``s`` among its maximisers.
    With ``unique=True`` (default) ``s`` must be the only maximiser up to
    ``tol``, so relative-interior points of an exposed face do not count.
    Vertices equal to ``s`` (duplicates) are not counted as competitors.
    A negative answer only means no sampled direction exposed ``s``.
    """
    idx = S.vertex_index(s, tol)
    s_vec = S.vertices[idx]
    dirs = np.atleast_2d(_as_direction(direction_samples, S.dim))
    vals = dirs @ S.vertices.T
    best = vals.max(axis=1)
    mine = dirs @ s_vec
    hit = mine >= best - tol
    if unique:
        same = np.all(np.abs(S.vertices - s_vec) <= tol, axis=1)
        rivals = np.where(same[None, :], -np.inf, vals)
        hit &= rivals.max(axis=1, initial=-np.inf) < mine - tol
    return bool(np.any(hit))


def exposed_vertices(S: AllocationSet, direction_samples, tol: float = DEFAULT_TOL) -> dict:
    """Both exposure variants for every vertex: ``{index: (unique, tied)}``."""
    return {
        i: (is_exposed(S, v, direction_samples, tol, unique=True),
            is_exposed(S, v, direction_samples, tol, unique=False))
        for i, v in enumerate(S.vertices)
    }
