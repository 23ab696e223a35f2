"""Point configurations, linear-statistic fluctuations, and discrepancy machinery.

Discrepancies use half-open intervals [a, b) so that they are exactly additive;
restriction uses closed intervals.  Configurations are immutable after
construction and serialize bit-exactly through hexadecimal float literals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import OutOfWindow, SupportExceedsWindow

__all__ = [
    "PointConfiguration",
    "DiscrepancyProfile",
    "fluct",
    "discrepancy",
    "discrepancy_profile",
    "apriori_bound_rhs",
]


class PointConfiguration:
    """A finite sorted multiset of real positions with an observation window."""

    def __init__(self, points, window):
        pts = np.sort(np.asarray(points, dtype=float).ravel())
        lo, hi = float(window[0]), float(window[1])
        if lo >= hi:
            raise ValueError("window must be a nondegenerate interval")
        if pts.size and (pts[0] < lo or pts[-1] > hi):
            raise OutOfWindow("points fall outside the observation window")
        pts.flags.writeable = False
        self.points = pts
        self.window = (lo, hi)

    def __len__(self):
        return self.points.size

    def __repr__(self):
        return (f"PointConfiguration(n={len(self)}, "
                f"window=({self.window[0]:g}, {self.window[1]:g}))")

    def count_in(self, a, b):
        """Number of points in the half-open interval [a, b), for a <= b."""
        lo = np.searchsorted(self.points, a, side="left")
        hi = np.searchsorted(self.points, b, side="left")
        return int(hi - lo)

    def restrict(self, a, b):
        """Sub-configuration of the points p with a <= p <= b, window [a, b]."""
        if a < self.window[0] or b > self.window[1]:
            raise OutOfWindow("restriction interval exceeds the window")
        lo = np.searchsorted(self.points, a, side="left")
        hi = np.searchsorted(self.points, b, side="right")
        return PointConfiguration(self.points[lo:hi], (a, b))

    def translate(self, c):
        return PointConfiguration(self.points + c,
                                  (self.window[0] + c, self.window[1] + c))

    def push_forward(self, fn, window=None):
        """Image configuration under a map; window defaults to the current one."""
        return PointConfiguration(fn(self.points),
                                  self.window if window is None else window)

    # -- serialization ------------------------------------------------------

    def to_text(self):
        lines = ["# window %s %s" % (float(self.window[0]).hex(),
                                     float(self.window[1]).hex())]
        lines += [float(p).hex() for p in self.points]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        window = None
        pts = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                fields = line[1:].split()
                if fields and fields[0] == "window":
                    window = (float.fromhex(fields[1]), float.fromhex(fields[2]))
                continue
            pts.append(float.fromhex(line))
        if window is None:
            raise ValueError("missing '# window' header")
        return cls(pts, window)

    def to_json_dict(self):
        return {
            "window": [float(self.window[0]).hex(), float(self.window[1]).hex()],
            "points": [float(p).hex() for p in self.points],
        }

    def to_json(self):
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, obj):
        window = tuple(float.fromhex(w) for w in obj["window"])
        return cls([float.fromhex(p) for p in obj["points"]], window)

    @classmethod
    def from_json(cls, text):
        return cls.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class DiscrepancyProfile:
    """Per-integer discrepancy aggregates; left/right variants are NaN outside [-lam, lam]."""

    lam: float
    indices: np.ndarray
    center: np.ndarray
    left: np.ndarray
    right: np.ndarray


def fluct(phi, config, center=0.0):
    """Fluctuation of the linear statistic: sum of phi over points minus its integral.

    ``phi`` may be recentred at ``center``; its (shifted) support must lie
    inside the configuration window.
    """
    r = phi.support_radius
    lo, hi = config.window
    if center - r < lo or center + r > hi:
        raise SupportExceedsWindow(
            f"support [{center - r:g}, {center + r:g}] not inside window [{lo:g}, {hi:g}]")
    pts = config.points
    mask = np.abs(pts - center) < r
    total = float(np.sum(phi.deriv(0, pts[mask] - center))) if mask.any() else 0.0
    return total - phi.integral()


def discrepancy(config, a, b):
    """Signed discrepancy: point count of [a, b) minus (b - a); antisymmetric in (a, b)."""
    if a > b:
        return -discrepancy(config, b, a)
    lo, hi = config.window
    if a < lo or b > hi:
        raise OutOfWindow(f"[{a:g}, {b:g}] not inside window [{lo:g}, {hi:g}]")
    return config.count_in(a, b) - (b - a)


def discrepancy_profile(config, lam):
    """Tabulate D-tilde aggregates for every integer cell in the window.

    The centered variant anchors the cumulative discrepancy at 0; the
    left/right variants anchor at -lam / +lam and are reported for cells
    inside [-lam, lam].
    """
    lo, hi = config.window
    if -lam < lo or lam > hi:
        raise OutOfWindow("[-lam, lam] not inside the window")
    i_min = int(np.ceil(lo))
    i_max = int(np.floor(hi)) - 1
    idx = np.arange(i_min, i_max + 1)
    center = np.array([abs(discrepancy(config, 0.0, float(i)))
                       + abs(discrepancy(config, float(i), float(i + 1))) + 1.0
                       for i in idx])
    left = np.full(idx.shape, np.nan)
    right = np.full(idx.shape, np.nan)
    inside = (idx >= -lam) & (idx + 1 <= lam)
    for j in np.nonzero(inside)[0]:
        i = float(idx[j])
        left[j] = (abs(discrepancy(config, -lam, i))
                   + abs(discrepancy(config, i, i + 1.0)) + 1.0)
        right[j] = (abs(discrepancy(config, i, lam))
                    + abs(discrepancy(config, i, i + 1.0)) + 1.0)
    return DiscrepancyProfile(lam=float(lam), indices=idx, center=center,
                              left=left, right=right)


def apriori_bound_rhs(g, config, flavor="center", lam=None, refine=1):
    """Fluctuation majorant: sum over integer cells of |g|_{1, V_i} * D-tilde_i.

    This is the exact value of the cell decomposition (midpoint expansion on
    each cell plus summation by parts), so ``|fluct(g)| <= apriori_bound_rhs(g)``
    holds with constant 1.  ``flavor`` selects the anchor of the cumulative
    discrepancy: the origin, or the window edge at -lam / +lam.
    """
    from .testfn import local_seminorm

    if flavor not in ("center", "left", "right"):
        raise ValueError("flavor must be 'center', 'left' or 'right'")
    if flavor != "center" and lam is None:
        raise ValueError("left/right flavors require lam")
    r = g.support_radius
    k_min = int(np.floor(-r - 3.0))
    k_max = int(np.ceil(r + 3.0))
    total = 0.0
    for k in range(k_min, k_max + 1):
        s = local_seminorm(g, 1, float(k), refine=refine)
        if s == 0.0:
            continue
        if flavor == "center":
            base = abs(discrepancy(config, 0.0, float(k)))
        elif flavor == "left":
            base = abs(discrepancy(config, -lam, float(k)))
        else:
            base = abs(discrepancy(config, float(k), lam))
        total += s * (base + abs(discrepancy(config, float(k), k + 1.0)) + 1.0)
    return total
