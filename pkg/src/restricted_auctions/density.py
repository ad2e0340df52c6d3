"""Type densities on a box ``[0, M]^n`` with the pieces the transformed
measure needs: pointwise density and gradient, exact per-cell integrals of
the interior and facet integrands, and sampling."""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import InputError, UnsupportedError

KINDS = ("uniform_box", "exponential_product", "tabulated")


@dataclass(frozen=True)
class DensitySpec:
    """A product-form or tabulated density restricted to ``[0, M]^n``.

    ``params`` depends on ``kind``:

    * ``uniform_box``: unused; the density is ``1 / prod(M)`` on the box.
    * ``exponential_product``: rates ``lambda_i`` per coordinate on the
      whole orthant. ``truncation`` only fixes the box X; measure that
      falls outside it is projected onto the nearest boundary face.
    * ``tabulated``: an n-d array of nonnegative cell values on a uniform
      grid over the box (cell-centred). Normalised on construction.
    """

    kind: str
    truncation: np.ndarray
    params: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown density kind {self.kind!r}; expected one of {KINDS}")
        m = np.atleast_1d(np.asarray(self.truncation, dtype=float))
        if np.any(~np.isfinite(m)) or np.any(m <= 0):
            raise InputError("truncation bounds must be positive and finite")
        m.setflags(write=False)
        object.__setattr__(self, "truncation", m)
        if self.kind == "exponential_product":
            lam = np.atleast_1d(np.asarray(self.params, dtype=float))
            if lam.shape != m.shape or np.any(lam <= 0):
                raise InputError("exponential rates must be positive, one per coordinate")
            lam.setflags(write=False)
            object.__setattr__(self, "params", lam)
        elif self.kind == "tabulated":
            tab = np.asarray(self.params, dtype=float)
            if tab.ndim != m.size or np.any(tab < 0) or tab.sum() <= 0:
                raise InputError("tabulated density needs a nonnegative n-d grid with positive mass")
            cell_vol = np.prod(m / np.array(tab.shape))
            tab = tab / (tab.sum() * cell_vol)
            tab.setflags(write=False)
            object.__setattr__(self, "params", tab)

    @classmethod
    def uniform(cls, bounds):
        return cls("uniform_box", bounds)

    @classmethod
    def exponential(cls, rates, truncation):
        rates = np.atleast_1d(np.asarray(rates, dtype=float))
        trunc = np.broadcast_to(np.asarray(truncation, dtype=float), rates.shape)
        return cls("exponential_product", trunc.copy(), rates)

    @property
    def dim(self) -> int:
        return self.truncation.size

    # -- pointwise ---------------------------------------------------------

    def pdf(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        inside = np.all((x >= 0) & (x <= self.truncation), axis=1)
        if self.kind == "uniform_box":
            val = np.full(len(x), 1.0 / np.prod(self.truncation))
        elif self.kind == "exponential_product":
            lam = self.params
            return np.where(np.all(x >= 0, axis=1), np.prod(lam) * np.exp(-(x * lam).sum(axis=1)), 0.0)
        else:
            tab = self.params
            idx = np.floor(x / self.truncation * np.array(tab.shape)).astype(int)
            idx = np.clip(idx, 0, np.array(tab.shape) - 1)
            val = tab[tuple(idx.T)]
        return np.where(inside, val, 0.0)

    def grad(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "uniform_box":
            return np.zeros_like(x)
        if self.kind == "exponential_product":
            return -self.pdf(x)[:, None] * self.params[None, :]
        raise UnsupportedError("tabulated densities carry no gradient data")

    # -- exact cell integrals ----------------------------------------------

    def _axis_mass(self, k, a, b):
        """Integral of the k-th marginal factor over [a, b]."""
        if self.kind == "uniform_box":
            return (b - a) / self.truncation[k]
        lam = self.params[k]
        return np.exp(-lam * a) - np.exp(-lam * b)

    def _axis_moment(self, k, a, b):
        """Integral of t times the k-th marginal factor over [a, b]."""
        if self.kind == "uniform_box":
            return (b * b - a * a) / (2 * self.truncation[k])
        lam = self.params[k]

        def prim(t):
            t = np.asarray(t, dtype=float)
            safe = np.where(np.isinf(t), 0.0, t)
            return np.where(np.isinf(t), 0.0, -(safe + 1 / lam) * np.exp(-lam * safe))

        return prim(b) - prim(a)

    def _axis_value(self, k, t):
        if self.kind == "uniform_box":
            return 1.0 / self.truncation[k]
        lam = self.params[k]
        return lam * np.exp(-lam * t)

    def _require_separable(self):
        if self.kind == "tabulated":
            raise UnsupportedError("transform needs a density with a closed-form gradient")

    def interior_weights(self, edges) -> np.ndarray:
        """Exact ``-int (grad f . z + (n+1) f) dz`` over every grid cell.

        ``edges`` holds one ascending edge array per axis. Returns an n-d
        array indexed like the cell grid.
        """
        self._require_separable()
        n = self.dim
        mass = [self._axis_mass(k, e[:-1], e[1:]) for k, e in enumerate(edges)]
        total = _outer(mass)
        if self.kind == "uniform_box":
            return -(n + 1) * total
        # grad f . z = -f * sum_k lambda_k z_k for the product exponential
        out = -(n + 1) * total
        for k, e in enumerate(edges):
            factors = list(mass)
            factors[k] = self._axis_moment(k, e[:-1], e[1:])
            out = out + self.params[k] * _outer(factors)
        return out

    def face_weights(self, face, edges) -> np.ndarray | None:
        """Weights carried by the upper boundary face ``{z_k = M_k, k in face}``.

        For the uniform box these are the flux terms ``f (z . n_hat)`` on the
        facets (lower facets have ``z . n_hat = 0``); faces of lower
        dimension carry nothing and ``None`` is returned. For the
        exponential, whose support is unbounded, they are the exact
        transformed-measure mass of the region outside X that projects onto
        each face cell. Returned arrays are indexed by the cell grid of the
        axes not in ``face``.
        """
        self._require_separable()
        face = sorted(face)
        if self.kind == "uniform_box":
            if len(face) != 1:
                return None
            k = face[0]
            mk = self.truncation[k]
            factors = [self._axis_mass(i, e[:-1], e[1:]) for i, e in enumerate(edges) if i != k]
            scale = mk * self._axis_value(k, mk)
            return scale * _outer(factors) if factors else np.asarray(scale)
        ext = [np.array([self.truncation[k], np.inf]) if k in face else e
               for k, e in enumerate(edges)]
        return self.interior_weights(ext).squeeze(axis=tuple(face))

    def mass_weights(self, edges) -> np.ndarray:
        """Probability of every grid cell (exact for separable kinds)."""
        if self.kind == "tabulated":
            mids = np.stack(np.meshgrid(*[(e[:-1] + e[1:]) / 2 for e in edges], indexing="ij"), -1)
            vol = _outer([np.diff(e) for e in edges])
            return self.pdf(mids.reshape(-1, self.dim)).reshape(vol.shape) * vol
        return _outer([self._axis_mass(k, e[:-1], e[1:]) for k, e in enumerate(edges)])

    # -- sampling ----------------------------------------------------------

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random((size, self.dim))
        if self.kind == "uniform_box":
            return u * self.truncation
        if self.kind == "exponential_product":
            return -np.log1p(-u) / self.params
        raise UnsupportedError("sampling is only implemented for uniform_box and exponential_product")


def _outer(factors):
    return reduce(np.multiply.outer, factors)
