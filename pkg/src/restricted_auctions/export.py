"""CSV and SVG writers for cells, plans and recovered mechanisms."""

from __future__ import annotations

import csv
import io

import numpy as np

from .menu import CellReport, Menu, utilities
from .transport import GridMechanism, TransportInstance, TransportPlan

PALETTE = ("#f2f2f2", "#8ecae6", "#ffb703", "#90be6d", "#e76f51", "#b5838d", "#6d6875")


def _fmt(v) -> str:
    return repr(float(v))


def cells_csv(menu: Menu, report: CellReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n = menu.dim
    w.writerow([f"s{k}" for k in range(n)]
               + ["price", "measure", "interior", "boundary", "atoms", "tie_fraction"])
    for s, p, m, inner, bd, at, tie in report.rows(menu):
        w.writerow([_fmt(v) for v in s] + [_fmt(p), _fmt(m), _fmt(inner), _fmt(bd), _fmt(at), _fmt(tie)])
    return buf.getvalue()


def mechanism_csv(mech: GridMechanism, alloc_index: np.ndarray, S) -> str:
    """One row per grid node: position, recovered surplus and an allocation."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n = mech.points.shape[1]
    w.writerow([f"x{k}" for k in range(n)] + ["u"] + [f"s{k}" for k in range(n)])
    order = np.lexsort(mech.points.T[::-1])
    for i in order:
        w.writerow([_fmt(v) for v in mech.points[i]] + [_fmt(mech.values[i])]
                   + [_fmt(v) for v in S.vertices[alloc_index[i]]])
    return buf.getvalue()


def rungs_csv(rungs) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["resolution", "primal", "dual", "gap", "rel_gap", "slackness", "sources", "sinks"])
    for r in rungs:
        w.writerow([r.resolution, _fmt(r.primal), _fmt(r.dual), _fmt(r.gap), _fmt(r.rel_gap),
                    _fmt(r.slackness), r.sources, r.sinks])
    return buf.getvalue()


# -- svg ----------------------------------------------------------------------

class _Canvas:
    def __init__(self, domain, size=480, pad=30):
        m = np.asarray(domain, float).ravel()
        # a 1-d domain is drawn as a strip of unit height
        self.m = m if m.size > 1 else np.array([m[0], 1.0])
        self.size, self.pad = size, pad
        self.items = []

    def xy(self, p):
        p = np.asarray(p, float)
        x = self.pad + self.size * p[0] / self.m[0]
        y = self.pad + self.size * (1 - p[1] / self.m[1])
        return x, y

    def rect(self, lo, hi, fill):
        (x0, y0), (x1, y1) = self.xy(lo), self.xy(hi)
        self.items.append(f'<rect x="{x0:.2f}" y="{min(y0, y1):.2f}" width="{max(x1 - x0, 0.5):.2f}" '
                          f'height="{max(abs(y1 - y0), 0.5):.2f}" fill="{fill}" stroke="none"/>')

    def line(self, p, q, width=1.0, color="#222", opacity=1.0):
        (x0, y0), (x1, y1) = self.xy(p), self.xy(q)
        self.items.append(f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x1:.2f}" y2="{y1:.2f}" '
                          f'stroke="{color}" stroke-width="{width:.2f}" stroke-opacity="{opacity:.2f}"/>')

    def text(self, p, s, size=11):
        x, y = self.xy(p)
        self.items.append(f'<text x="{x:.2f}" y="{y:.2f}" font-size="{size}" font-family="sans-serif">{s}</text>')

    def render(self, title=""):
        total = self.size + 2 * self.pad
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" '
                f'viewBox="0 0 {total} {total}">')
        frame = (f'<rect x="{self.pad}" y="{self.pad}" width="{self.size}" height="{self.size}" '
                 f'fill="none" stroke="#000"/>')
        cap = f'<text x="{self.pad}" y="{self.pad - 10}" font-size="13" font-family="sans-serif">{title}</text>'
        return "\n".join([head, frame, *self.items, cap, "</svg>"]) + "\n"


def cells_svg(menu: Menu, domain, view=None, pixels: int = 160, title: str = "") -> str:
    """Colour each pixel of ``[0, view]^2`` by the option the buyer takes there."""
    domain = np.asarray(domain, float)
    view = domain if view is None else np.minimum(np.asarray(view, float), domain)
    c = _Canvas(view)
    if menu.dim == 1:
        edges = np.linspace(0, view[0], pixels + 1)
        mid = (edges[:-1] + edges[1:]) / 2
        _, win = utilities(menu, mid[:, None])
        for k in range(pixels):
            c.rect((edges[k], 0.4), (edges[k + 1], 0.6), PALETTE[win[k] % len(PALETTE)])
    else:
        gx = np.linspace(0, view[0], pixels + 1)
        gy = np.linspace(0, view[1], pixels + 1)
        mx, my = (gx[:-1] + gx[1:]) / 2, (gy[:-1] + gy[1:]) / 2
        X, Y = np.meshgrid(mx, my, indexing="ij")
        pts = np.zeros((X.size, menu.dim))
        pts[:, 0], pts[:, 1] = X.ravel(), Y.ravel()
        _, win = utilities(menu, pts)
        win = win.reshape(X.shape)
        for i in range(pixels):
            # merge runs along x2 to keep the file small
            j = 0
            while j < pixels:
                k = j
                while k + 1 < pixels and win[i, k + 1] == win[i, j]:
                    k += 1
                c.rect((gx[i], gy[j]), (gx[i + 1], gy[k + 1]), PALETTE[win[i, j] % len(PALETTE)])
                j = k + 1
    for k, (s, p) in enumerate(zip(menu.allocations, menu.prices)):
        c.text((0.02 * c.m[0], c.m[1] * (0.97 - 0.05 * k)),
               f"{np.round(s, 3).tolist()} @ {p:.4f}")
    return c.render(title)


def plan_svg(instance: TransportInstance, plan: TransportPlan, domain, view=None,
             max_segments: int = 3000, title: str = "") -> str:
    """Draw the heaviest transport arcs as segments from source to sink."""
    domain = np.asarray(domain, float)
    view = domain if view is None else np.minimum(np.asarray(view, float), domain)
    c = _Canvas(view)
    if plan.weight.size:
        order = np.argsort(-plan.weight, kind="stable")[:max_segments]
        wmax = plan.weight[order[0]]
        for t in order:
            x = instance.sources[plan.source_index[t]]
            y = instance.sinks[plan.sink_index[t]]
            if x.size == 1:
                x, y = np.array([x[0], 0.55]), np.array([y[0], 0.45])
            c.line(np.minimum(x, c.m), np.minimum(y, c.m), width=0.4 + 1.6 * plan.weight[t] / wmax,
                   color="#1d3557", opacity=0.6)
    return c.render(title)
