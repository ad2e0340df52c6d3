"""Halfspace clipping of boxes of dimension at most two."""

import numpy as np


def _clip_polygon(poly, a, b):
    """Sutherland-Hodgman step: keep the part of ``poly`` with ``a . x <= b``."""
    out = []
    m = len(poly)
    for i in range(m):
        p, q = poly[i], poly[(i + 1) % m]
        fp, fq = a @ p - b, a @ q - b
        if fp <= 0:
            out.append(p)
        if (fp < 0 < fq) or (fq < 0 < fp):
            t = fp / (fp - fq)
            out.append(p + t * (q - p))
    return out


def _area(poly):
    if len(poly) < 3:
        return 0.0
    x = np.array([p[0] for p in poly])
    y = np.array([p[1] for p in poly])
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def box_fraction(lo, hi, halfspaces):
    """Fraction of the box ``[lo, hi]`` satisfying every ``a . x <= b``.

    The box may be degenerate along some axes; its measure is taken in the
    non-degenerate ones, of which there may be at most two. A zero-size box
    counts as fully inside or fully outside.
    """
    active = np.flatnonzero(hi > lo)
    fixed = np.flatnonzero(hi <= lo)
    if active.size > 2:
        raise ValueError("fractional assignment supports boxes of dimension <= 2")
    reduced = [(a[active], b - a[fixed] @ lo[fixed]) for a, b in halfspaces]
    if active.size == 0:
        return float(all(b >= 0 for _, b in reduced))
    l, h = lo[active], hi[active]
    if active.size == 1:
        t0, t1 = l[0], h[0]
        for a, b in reduced:
            if a[0] > 0:
                t1 = min(t1, b / a[0])
            elif a[0] < 0:
                t0 = max(t0, b / a[0])
            elif b < 0:
                return 0.0
        return max(0.0, t1 - t0) / (h[0] - l[0])
    poly = [np.array(c, dtype=float) for c in ((l[0], l[1]), (h[0], l[1]), (h[0], h[1]), (l[0], h[1]))]
    for a, b in reduced:
        poly = _clip_polygon(poly, a, b)
        if not poly:
            return 0.0
    return _area(poly) / ((h[0] - l[0]) * (h[1] - l[1]))
