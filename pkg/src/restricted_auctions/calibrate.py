"""Integrate-to-zero price calibration.

The derivative of expected revenue with respect to an option's price is
minus the measure of that option's cell, so optimal prices for a fixed set
of allocations are roots of the map ``prices -> cell measures``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .density import DensitySpec
from .errors import ConvergenceError, InputError
from .measure import SignedMeasure, transform
from .menu import Menu, cell_measures

log = logging.getLogger(__name__)


def _build_menu(shape, prices, outside_option):
    if outside_option:
        return Menu.with_zero_option(shape, prices)
    return Menu(shape, prices)


def _residuals(shape, prices, mu, outside_option, method):
    if not outside_option:
        # a common shift leaves cells unchanged; keep the menu participation-safe
        prices = prices - prices.min()
    menu = _build_menu(shape, prices, outside_option)
    meas = cell_measures(menu, mu, method).measures
    return meas[1:] if outside_option else meas


def damped_newton(func, x0, tol=1e-10, max_iter=50, fd_step=1e-6, min_damping=1 / 64):
    """Damped Newton iteration with a central finite-difference Jacobian.

    Returns ``(x, trace)``. Raises :class:`ConvergenceError` when the
    Jacobian is singular, the line search cannot reduce the residual, or
    the iteration budget runs out.
    """
    x = np.array(x0, dtype=float)
    fx = np.asarray(func(x), dtype=float)
    trace = [(x.copy(), fx.copy())]
    for _ in range(max_iter):
        norm = np.max(np.abs(fx))
        if norm <= tol:
            return x, trace
        jac = np.empty((fx.size, x.size))
        for j in range(x.size):
            e = np.zeros_like(x)
            e[j] = fd_step
            jac[:, j] = (np.asarray(func(x + e)) - np.asarray(func(x - e))) / (2 * fd_step)
        try:
            if np.linalg.cond(jac) > 1e12:
                raise np.linalg.LinAlgError("ill-conditioned")
            step = np.linalg.solve(jac, -fx)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"singular Jacobian at {x.tolist()}", trace) from exc
        t = 1.0
        while True:
            cand = x + t * step
            fc = np.asarray(func(cand), dtype=float)
            if np.max(np.abs(fc)) < (1 - 1e-4 * t) * norm:
                break
            t /= 2
            if t < min_damping:
                raise ConvergenceError(f"line search stalled at {x.tolist()}", trace)
        x, fx = cand, fc
        trace.append((x.copy(), fx.copy()))
    if np.max(np.abs(fx)) <= tol:
        return x, trace
    raise ConvergenceError(f"no convergence in {max_iter} iterations", trace)


def calibrate_prices(menu_shape, mu: SignedMeasure, initial_prices, tol: float = 1e-10,
                     outside_option: bool = True, method: str = "fractional",
                     **newton_kw) -> Menu:
    """Prices that make every non-zero option's cell integrate to zero.

    With ``outside_option`` the menu gets a zero option at price zero and
    one equation per listed allocation. Without it, the cell measures sum
    to ``mu(X) = 0`` and a common price shift leaves every cell unchanged,
    so the last price is held fixed, the remaining equations are solved,
    and the prices are then shifted so the lowest utility on X is zero
    (participation binds at the origin; needs nonnegative allocations).
    """
    shape = np.atleast_2d(np.asarray(menu_shape, dtype=float))
    p0 = np.asarray(initial_prices, dtype=float).ravel()
    if p0.size != shape.shape[0]:
        raise InputError("one initial price per allocation is required")
    if outside_option:
        func = lambda p: _residuals(shape, p, mu, True, method)
        prices, _ = damped_newton(func, p0, tol=tol, **newton_kw)
    else:
        if np.any(shape < 0):
            raise InputError("pinning prices by participation needs nonnegative allocations")
        fixed = p0[-1]
        func = lambda q: _residuals(shape, np.append(q, fixed), mu, False, method)[:-1]
        q, _ = damped_newton(func, p0[:-1], tol=tol, **newton_kw)
        prices = np.append(q, fixed)
        prices = prices - prices.min()
    return _build_menu(shape, prices, outside_option)


def richardson(coarse, fine, ratio: float = 2.0, order: int = 2):
    """Extrapolate two resolution estimates, assuming error ~ h**order."""
    coarse, fine = np.asarray(coarse, float), np.asarray(fine, float)
    return fine + (fine - coarse) / (ratio ** order - 1)


@dataclass
class Calibration:
    """Calibrated menu plus the per-resolution runs it was extrapolated from."""

    menu: Menu
    resolutions: list
    per_resolution: list = field(default_factory=list)
    order: int = 2


def calibrate_extrapolated(menu_shape, density: DensitySpec, initial_prices,
                           resolutions=(64, 128), tol: float = 1e-10,
                           outside_option: bool = True, order: int = 2) -> Calibration:
    """Calibrate on each grid of a resolution ladder and Richardson-extrapolate
    the last two. Cell weights are exact cell integrals and boxes are split
    exactly between cells, so the leading error is second order in the
    cell size."""
    res = list(resolutions)
    if len(res) < 1 or sorted(res) != res:
        raise InputError("resolutions must be ascending")
    runs = []
    guess = np.asarray(initial_prices, dtype=float)
    for r in res:
        mu = transform(density, resolution=r)
        menu = calibrate_prices(menu_shape, mu, guess, tol=tol, outside_option=outside_option)
        prices = menu.prices[1:] if outside_option else menu.prices
        log.debug("resolution %s: prices %s", r, prices)
        runs.append(prices)
        guess = prices
    if len(res) == 1:
        final = runs[-1]
    else:
        final = richardson(runs[-2], runs[-1], res[-1] / res[-2], order)
        if not outside_option:
            final = final - final.min()
    return Calibration(_build_menu(menu_shape, final, outside_option), res, runs, order)
