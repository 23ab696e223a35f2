"""Monotone transport onto the perturbed density and exact energy identities.

The perturbed density 1 + s m~ is pushed from the flat density by the
monotone rearrangement: the cumulative function is accumulated once by
composite Gauss panels on the closed-form pieces and inverted per call by
safeguarded Newton (no interpolation table for the map itself).

Energy identities are verified with both sides computed from their own
definitions; only the background-background block, common to both sides, is
computed once and shared so that residuals reflect the correction terms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from ._quadtools import integrate_log_kernel, panel_integral, split_panels
from .errors import CoincidentPoints, RootNotBracketed
from .pointproc import PointConfiguration

__all__ = [
    "s_max",
    "TransportBundle",
    "transport_map",
    "psi_bounds_check",
    "SignedMeasure",
    "interaction_energy",
    "EnergyReport",
    "verify_energy_splitting",
    "verify_energy_expansion",
    "difference_field",
    "DifferenceField",
    "lebesgue_log_potential",
    "lebesgue_self_energy",
]

# Newton tolerance for the inverse cumulative, relative to lam
TRANSPORT_TOL = 1e-13
# below this separation (in units of ell) the slope kernel switches to its
# diagonal extension psi'(midpoint)
DIAGONAL_SWITCH = 1e-6


def lebesgue_log_potential(x, a, b):
    """Closed form of int_a^b -log|x-y| dy (endpoint antiderivative)."""
    def anti(d):
        d = np.asarray(d, dtype=float)
        out = np.zeros_like(d)
        nz = d != 0.0
        out[nz] = d[nz] * np.log(np.abs(d[nz])) - d[nz]
        return out
    x = np.asarray(x, dtype=float)
    res = -(anti(b - x) - anti(a - x))
    return float(res) if res.ndim == 0 else res


def lebesgue_self_energy(a, b):
    """Closed form of the -log|x-y| double integral over [a,b]^2."""
    L = b - a
    return L * L * (1.5 - np.log(L))


def s_max(bundle):
    """Largest admissible |s|: half the reciprocal of max(1, sup, L1) of m~."""
    return 0.5 / max(1.0, bundle.sup_m_tilde(), bundle.l1_m_tilde())


class TransportBundle:
    """Monotone rearrangement of the flat density onto 1 + s m~."""

    def __init__(self, bundle, s):
        self.bundle = bundle
        self.s = float(s)
        self.smax = s_max(bundle)
        if abs(self.s) > self.smax + 1e-15:
            raise ValueError(f"|s| = {abs(s):g} exceeds s_max = {self.smax:g}")
        self.lam = bundle.lam
        self.ell = bundle.ell
        self._build_cumulative()
        self._shared = {}

    # -- cumulative of m~ --------------------------------------------------------

    def _cumulative_nodes(self):
        # spacing ell/512 in the core keeps the spline's *derivative* error
        # below ~1e-8, which the pointwise derivative identity relies on
        lam, ell = self.lam, self.ell
        edges = set(np.linspace(-lam, -lam + ell, 257))        # left strip
        edges |= set(np.linspace(lam - ell, lam, 257))         # right strip
        a = min(3.0 * ell, lam / 2)
        edges |= set(np.linspace(-a, a, 2 * int(a / (ell / 512)) // 2 + 1))
        n_geo = 400
        edges |= set(np.geomspace(a, lam - ell, n_geo))
        edges |= set(-np.geomspace(a, lam - ell, n_geo))
        edges |= set(self.bundle._y_breakpoints())
        return np.array(sorted(edges))

    def _build_cumulative(self):
        nodes = self._cumulative_nodes()
        gx, gw = np.polynomial.legendre.leggauss(12)
        mids = 0.5 * (nodes[:-1] + nodes[1:])
        halves = 0.5 * np.diff(nodes)
        pts = mids[:, None] + halves[:, None] * gx
        vals = self.bundle.m_tilde(pts.ravel()).reshape(pts.shape)
        panel = halves * (vals @ gw)
        M = np.concatenate([[0.0], np.cumsum(panel)])
        M[-1] = 0.0  # total mass is zero; pin the endpoint exactly
        self._M = CubicSpline(nodes, M)

    def cumulative_m_tilde(self, x):
        """int_{-lam}^{x} m~ (spline-accumulated)."""
        return self._M(np.clip(x, -self.lam, self.lam))

    def F(self, x):
        """Cumulative function of the perturbed density, from -lam."""
        x = np.asarray(x, dtype=float)
        return (x + self.lam) + self.s * self._M(np.clip(x, -self.lam, self.lam))

    # -- the map -------------------------------------------------------------------

    def transport(self, x):
        """Phi_s(x): the monotone map, by safeguarded vectorized Newton."""
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x).astype(float)
        if np.any(np.abs(x) > self.lam):
            raise ValueError("transport is defined on [-lam, lam]")
        lam, s = self.lam, self.s
        lo = np.maximum(x - 1.5, -lam)
        hi = np.minimum(x + 1.5, lam)
        phi = x.copy()
        tol = TRANSPORT_TOL * lam
        for _ in range(80):
            res = phi + s * self._M(phi) - x
            hi = np.where(res > 0, phi, hi)
            lo = np.where(res < 0, phi, lo)
            if np.max(np.abs(res)) <= tol:
                break
            step = -res / (1.0 + s * self.bundle.m_tilde(phi))
            cand = phi + step
            bad = (cand <= lo) | (cand >= hi)
            cand[bad] = 0.5 * (lo[bad] + hi[bad])
            phi = cand
        else:
            raise RootNotBracketed("transport inversion failed to converge")
        phi = np.clip(phi, -lam, lam)
        return float(phi[0]) if scalar else phi

    def psi(self, x):
        """Displacement Phi_s - Id."""
        return self.transport(x) - np.asarray(x, dtype=float)

    def psi_prime(self, x):
        """Phi_s'(x) - 1 through the inverse-function identity."""
        mt = self.bundle.m_tilde(self.transport(x))
        return 1.0 / (1.0 + self.s * mt) - 1.0

    def delta(self, x, y):
        """Slope (psi(y) - psi(x))/(y - x), extended by psi' on the diagonal."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        close = np.abs(x - y) < DIAGONAL_SWITCH * self.ell
        safe = np.where(close, 1.0, y - x)
        slope = (self.psi(y) - self.psi(x)) / safe
        diag = self.psi_prime(0.5 * (x + y))
        out = np.where(close, diag, slope)
        return float(out) if out.ndim == 0 else out

    def mu(self, x):
        """The perturbed density 1 + s m~ (zero weight outside the window)."""
        return 1.0 + self.s * self.bundle.m_tilde(x)

    # -- shared background blocks ----------------------------------------------------

    def _background(self, key):
        """Quantities common to both sides of the energy identities (cached)."""
        if key in self._shared:
            return self._shared[key]
        lam = self.lam
        brk = self.bundle._y_breakpoints()
        if key == "cross":   # int m~(y) * U_Leb(y) dy
            def f(y):
                return self.bundle.m_tilde(y) * lebesgue_log_potential(y, -lam, lam)
            val = sum(panel_integral(f, p, q, n=64)
                      for p, q in split_panels(-lam + self.ell / 4,
                                               lam - self.ell / 4, brk))
        elif key == "leb":
            val = lebesgue_self_energy(-lam, lam)
        elif key == "v":
            val = self.bundle.variance_term().value
        elif key == "mu_self":
            # E[mu_s, mu_s] assembled from the shared blocks
            val = (self._background("leb") + 2 * self.s * self._background("cross")
                   + self.s ** 2 * self._background("v"))
        elif key == "int_lp":
            val, _ = quad(lambda x: self.bundle.log_potential(x, "full_m"),
                          -lam, lam, points=[-2 * self.ell, 0.0, 2 * self.ell,
                                             -lam + self.ell, lam - self.ell],
                          epsabs=1e-10, epsrel=1e-10, limit=600)
        elif key == "int_err":
            val, _ = quad(lambda x: self.bundle.log_potential(x, "error"),
                          -lam, lam, points=[-lam + self.ell, lam - self.ell],
                          epsabs=1e-11, epsrel=1e-10, limit=600)
        else:
            raise KeyError(key)
        self._shared[key] = val
        return val


def transport_map(T, x):
    """Evaluate the monotone map at x (module-level convenience wrapper)."""
    return T.transport(x)


def psi_bounds_check(T):
    """Sup bound |psi| <= 1, regime-wise envelope ratios, and the derivative identity."""
    lam, ell, s = T.lam, T.ell, abs(T.s)
    xs = np.linspace(-lam, lam, 4001)
    psi = T.psi(xs)
    sup = float(np.max(np.abs(psi)))
    report = {"sup_psi": sup, "sup_ok": sup <= 1.0, "s": T.s}

    def envelope(x):
        ax = np.abs(x)
        env = np.where(ax <= 10 * ell, 1.0,
                       np.where(ax <= lam / 2, ell / np.maximum(ax, 1e-300),
                                ell * np.sqrt(np.maximum(lam - ax, 0.0) + 1.0)
                                / lam ** 1.5))
        return env
    if s > 0:
        ratios = np.abs(psi) / (s * envelope(xs))
        report["envelope_ratio_max"] = float(np.max(ratios))
    else:
        report["envelope_ratio_max"] = 0.0

    # Phi'(x) (1 + s m~(Phi(x))) = 1, with Phi' by central differences
    interior = np.linspace(-lam + ell, lam - ell, 201)
    h = 1e-3 * ell
    phip = (T.transport(interior + h) - T.transport(interior - h)) / (2 * h)
    resid = phip * (1.0 + T.s * T.bundle.m_tilde(T.transport(interior))) - 1.0
    report["derivative_identity_max"] = float(np.max(np.abs(resid)))
    return report


# -- signed-measure interaction kernel ---------------------------------------------------


@dataclass
class SignedMeasure:
    """Atoms plus weighted density components on a common window.

    ``densities`` is a list of (fn, a, b, weight) with vectorized fn.
    """

    atoms: np.ndarray = field(default_factory=lambda: np.empty(0))
    atom_weight: float = 1.0
    densities: list = field(default_factory=list)

    @classmethod
    def points(cls, pts, weight=1.0):
        return cls(atoms=np.asarray(pts, dtype=float), atom_weight=weight)

    @classmethod
    def lebesgue(cls, a, b, weight=1.0):
        return cls(densities=[(lambda y: np.ones_like(y), a, b, weight)])


def interaction_energy(A, B, exclude_diagonal=False, breakpoints=()):
    """Double integral of -log|x-y| against A x B with optional diagonal exclusion.

    The diagonal is excluded exactly for atom-atom pairs; density parts meet
    the log kernel only through integrable-singularity quadrature.
    """
    total = 0.0
    same = A is B
    # atoms x atoms
    if A.atoms.size and B.atoms.size:
        diff = np.abs(A.atoms[:, None] - B.atoms[None, :])
        on_diag = diff == 0.0
        if on_diag.any():
            n_same = int(np.sum(on_diag))
            if not exclude_diagonal or (same and n_same > len(A.atoms)) \
                    or (not same and n_same > 0):
                raise CoincidentPoints("two atoms coincide")
            diff = np.where(on_diag, 1.0, diff)
            total += A.atom_weight * B.atom_weight * float(np.sum(-np.log(diff)))
        else:
            total += A.atom_weight * B.atom_weight * float(np.sum(-np.log(diff)))
    # atoms x density (both orders)
    for meas, other in ((A, B), (B, A)):
        if meas.atoms.size:
            for fn, a, b, w in other.densities:
                for p in meas.atoms:
                    total += meas.atom_weight * w * integrate_log_kernel(
                        fn, a, b, float(p), interior_points=breakpoints)
    # density x density
    for fa, a1, b1, wa in A.densities:
        for fb, a2, b2, wb in B.densities:
            def outer(x):
                return np.array([integrate_log_kernel(fb, a2, b2, float(xx),
                                                      interior_points=breakpoints)
                                 for xx in np.atleast_1d(x)])
            val = sum(panel_integral(lambda x: fa(x) * outer(x), p, q, n=32)
                      for p, q in split_panels(a1, b1, list(breakpoints)))
            total += wa * wb * val
    return total


# -- energy identity reports ----------------------------------------------------------------


@dataclass
class EnergyReport:
    main_s: float
    re_s: float
    flu_re: float
    lhs: float
    rhs: float
    residual: float
    terms: dict = field(default_factory=dict)

    def to_json_dict(self):
        return {
            "main_s": self.main_s, "re_s": self.re_s, "flu_re": self.flu_re,
            "lhs": self.lhs, "rhs": self.rhs, "residual": self.residual,
            "terms": dict(self.terms),
        }


def _pair_sum(pts):
    """Sum of -log|p_i - p_j| over ordered pairs i != j."""
    if len(pts) < 2:
        return 0.0
    diff = np.abs(pts[:, None] - pts[None, :])
    if np.any((diff == 0.0) & ~np.eye(len(pts), dtype=bool)):
        raise CoincidentPoints("configuration has coincident points")
    np.fill_diagonal(diff, 1.0)
    return float(np.sum(-np.log(diff)))


def _check_interior(T, eta):
    pts = np.asarray(eta.points if isinstance(eta, PointConfiguration) else eta,
                     dtype=float)
    if pts.size and np.max(np.abs(pts)) >= T.lam:
        raise ValueError("configuration must lie inside (-lam, lam)")
    return pts


def verify_energy_splitting(T, eta):
    """Both sides of the energy identity splitting around the perturbed density.

    LHS: pair energy of (config - flat); RHS: pair energy of (config -
    perturbed) plus the potential fluctuation terms minus the variance terms.
    """
    B, s, lam = T.bundle, T.s, T.lam
    pts = _check_interior(T, eta)
    pp = _pair_sum(pts)
    u_leb = lebesgue_log_potential(pts, -lam, lam) if pts.size else np.empty(0)
    lhs = pp - 2.0 * float(np.sum(u_leb)) + T._background("leb")

    u_mt = np.array([B.potential_m_tilde(p) for p in pts])
    u_mu = u_leb + s * u_mt
    around_mu = pp - 2.0 * float(np.sum(u_mu)) + T._background("mu_self")

    lp_fluct = (float(np.sum([B.log_potential(p, "full_m") for p in pts]))
                - T._background("int_lp"))
    err_fluct = (float(np.sum([B.log_potential(p, "error") for p in pts]))
                 - T._background("int_err"))
    vt = B.variance_term()
    rhs = (around_mu + 2.0 * s * lp_fluct + 2.0 * s * err_fluct
           - s * s * vt.target - s * s * vt.errvar)
    return EnergyReport(
        main_s=0.0, re_s=0.0, flu_re=0.0, lhs=lhs, rhs=rhs, residual=lhs - rhs,
        terms={"pair_sum": pp, "lp_fluct": lp_fluct, "err_fluct": err_fluct,
               "around_mu": around_mu, "variance": vt.value})


def _transport_kernel_integral(T, p, brk):
    """int over the window of -log|1 + Delta(p, y)| dy (vectorized panels)."""
    lam = T.lam

    def f(y):
        return -np.log(np.abs(1.0 + T.delta(p, y)))

    pts = sorted(set(brk) | {float(p)})
    return sum(panel_integral(f, a, b, n=64)
               for a, b in split_panels(-lam, lam, pts))


def verify_energy_expansion(T, eta):
    """Both sides of the energy expansion along the transport map."""
    B, s, lam = T.bundle, T.s, T.lam
    pts = _check_interior(T, eta)
    brk = [b for b in B._y_breakpoints() if -lam < b < lam]

    pts_s = T.transport(pts) if pts.size else pts
    pp = _pair_sum(pts)
    pp_s = _pair_sum(pts_s)
    u_leb = lebesgue_log_potential(pts, -lam, lam) if pts.size else np.empty(0)
    u_mu_s = (lebesgue_log_potential(pts_s, -lam, lam)
              + s * np.array([B.potential_m_tilde(p) for p in pts_s])) \
        if pts.size else np.empty(0)

    lhs = pp_s - 2.0 * float(np.sum(u_mu_s)) + T._background("mu_self")
    base = pp - 2.0 * float(np.sum(u_leb)) + T._background("leb")

    # Main term: double integral of the slope kernel against (d eta - dx)^2
    if pts.size:
        kern = -np.log(np.abs(1.0 + T.delta(pts[:, None], pts[None, :])))
        point_part = float(np.sum(kern))
        cross = float(np.sum([_transport_kernel_integral(T, p, brk) for p in pts]))
    else:
        point_part, cross = 0.0, 0.0
    backgr = T._background("mu_self") - T._background("leb")
    main = point_part - 2.0 * cross + backgr

    # relative entropy of the perturbed density
    def re_integrand(x):
        mu = T.mu(x)
        return -np.log(mu) * mu
    re_s = sum(panel_integral(re_integrand, a, b, n=64)
               for a, b in split_panels(-lam + T.ell / 4, lam - T.ell / 4, brk))

    # its fluctuation under the configuration
    def flu_integrand(x):
        return np.log(T.mu(T.transport(x)))
    flu_int = sum(panel_integral(flu_integrand, a, b, n=64)
                  for a, b in split_panels(-lam, lam, brk))
    flu_re = (-float(np.sum(np.log(T.mu(pts_s)))) + flu_int) if pts.size else flu_int

    rhs = base + main + re_s + flu_re
    return EnergyReport(
        main_s=main, re_s=re_s, flu_re=flu_re, lhs=lhs, rhs=rhs,
        residual=lhs - rhs,
        terms={"pair_sum": pp, "pair_sum_pushed": pp_s, "kernel_cross": cross})


@dataclass(frozen=True)
class DifferenceField:
    df: float
    lp_part: float
    errorlog_part: float
    errordf: float

    @property
    def residual(self):
        return self.df - (self.lp_part + self.errorlog_part + self.errordf)


def difference_field(T, eta, x):
    """Exterior field of (pushed config - config) and its three components.

    The decomposition df = s * lp + s * errorlog + errordf holds up to
    quadrature tolerance; lp_part and errorlog_part are returned already
    multiplied by s.
    """
    B, s, lam = T.bundle, T.s, T.lam
    x = float(x)
    if abs(x) <= lam:
        raise ValueError("the difference field is evaluated outside the window")
    pts = _check_interior(T, eta)
    pts_s = T.transport(pts) if pts.size else pts
    df = float(np.sum(-np.log(np.abs(x - pts_s)) + np.log(np.abs(x - pts)))) \
        if pts.size else 0.0

    lp = s * B.log_potential(x, "full_m")
    err = s * B.log_potential(x, "error")

    def h(y):
        return -np.log(np.abs(1.0 - T.psi(y) / (x - y)))

    brk = [b for b in B._y_breakpoints() if -lam < b < lam]
    supp = (-lam + T.ell / 4, lam - T.ell / 4)
    h_int = sum(panel_integral(h, a, b, n=64)
                for a, b in split_panels(supp[0], supp[1], brk))
    h_pts = float(np.sum(h(pts))) if pts.size else 0.0
    errordf = h_pts - h_int
    return DifferenceField(df=df, lp_part=lp, errorlog_part=err, errordf=errordf)
