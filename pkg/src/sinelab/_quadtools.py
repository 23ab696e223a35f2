"""Vectorized panel quadrature for smooth and log-singular integrands.

Integrands with an integrable log singularity are split at the singular
point; the adjacent panels are mapped by y = c -+ exp(-w), which turns the
log factor into a smooth polynomial in w, and every resulting panel is
handled by a fixed Gauss-Legendre rule.  Panels near (but not touching) the
singularity are bisected toward it until each panel is at least half its own
width away, which keeps the integrand analytic on a comfortable ellipse.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import NonFinite

# documented node counts
SMOOTH_PANEL_NODES = 48
LOG_PANEL_NODES = 96
# exp(-w) below this w is irrelevant at double precision
LOG_SUB_WMAX = 60.0


@lru_cache(maxsize=32)
def _gl(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def panel_integral(h, p, q, n=SMOOTH_PANEL_NODES):
    """Gauss-Legendre integral of a smooth vectorized integrand over [p, q]."""
    if q <= p:
        return 0.0
    x, w = _gl(n)
    mid, half = 0.5 * (p + q), 0.5 * (q - p)
    return half * float(np.dot(w, h(mid + half * x)))


def log_edge_integral(h, p, q, edge, n=LOG_PANEL_NODES, wmax=LOG_SUB_WMAX):
    """Integral over [p, q] of an integrand with a log singularity at one edge.

    Substituting y = edge -+ exp(-w) maps the panel to a finite w-interval on
    which the integrand times the Jacobian is smooth.
    """
    if q <= p:
        return 0.0
    if edge == p:
        sign = 1.0
    elif edge == q:
        sign = -1.0
    else:
        raise ValueError("edge must be one of the panel endpoints")
    w_lo = -np.log(q - p)
    if w_lo >= wmax:
        return 0.0
    x, w = _gl(n)
    mid, half = 0.5 * (w_lo + wmax), 0.5 * (wmax - w_lo)
    ww = mid + half * x
    y = edge + sign * np.exp(-ww)
    return half * float(np.dot(w, h(y) * np.exp(-ww)))


def split_panels(a, b, interior_points):
    """Sorted panel decomposition of [a, b] at the given interior points."""
    pts = sorted({float(p) for p in interior_points if a < p < b})
    edges = [a] + pts + [b]
    return list(zip(edges[:-1], edges[1:]))


def integrate_with_log_singularity(h, a, b, c, interior_points=(),
                                   n_smooth=SMOOTH_PANEL_NODES,
                                   n_log=LOG_PANEL_NODES):
    """int_a^b h(y) dy where h has at worst a log singularity at c.

    ``c`` may lie inside, at the boundary of, or outside [a, b]; ``h`` must be
    vectorized and smooth between the interior breakpoints away from c.
    """
    total = 0.0
    for p, q in split_panels(a, b, list(interior_points) + [c]):
        if c == p or c == q:
            total += log_edge_integral(h, p, q, c, n=n_log)
            continue
        stack = [(p, q)]
        while stack:
            pp, qq = stack.pop()
            width = qq - pp
            dist = max(pp - c, c - qq)  # positive since c is outside (pp, qq)
            if dist < 0.5 * width and width > 1e-14 * max(abs(c), 1.0):
                mm = 0.5 * (pp + qq)
                stack.extend([(pp, mm), (mm, qq)])
            else:
                total += panel_integral(h, pp, qq, n=n_smooth)
    if not np.isfinite(total):
        raise NonFinite("log-singular quadrature produced a non-finite value")
    return total


def integrate_log_kernel(g, a, b, x, interior_points=(), n_log=LOG_PANEL_NODES):
    """int_a^b -log|x - y| g(y) dy for vectorized, piecewise-smooth g."""
    def h(y):
        d = np.abs(x - y)
        return -np.log(np.where(d > 0, d, 1.0)) * g(y)
    return integrate_with_log_singularity(h, a, b, float(x),
                                          interior_points=interior_points,
                                          n_log=n_log)
