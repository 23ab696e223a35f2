"""Compactly supported C^4 test functions, rescalings, seminorms, and the H^{1/2} norm.

All built-in functions carry closed-form derivatives up to order 4.  User
functions plug in through :func:`register_test_function` and must supply all
five derivative orders themselves; the core never differentiates numerically.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.integrate import dblquad, quad

from .errors import NonFinite

__all__ = [
    "TestFunction",
    "RescaledTestFunction",
    "make_bump",
    "make_quintic",
    "make_odd_quintic",
    "get_test_function",
    "register_test_function",
    "builtin_names",
    "local_seminorm",
    "h_half_norm_sq",
]

# Sup-norms of |f^(k)| are taken over a neighborhood of half-width 3.
SEMINORM_HALF_WIDTH = 3.0
# Grid step for seminorm sups, relative to max(1, support radius).
SEMINORM_STEP = 1e-3
# Absolute tolerance of the H^{1/2} double quadrature.
H_HALF_ABS_TOL = 1e-8


class TestFunction:
    """A C^4 function with compact support and exact derivatives up to order 4.

    Parameters
    ----------
    derivs : sequence of 5 callables
        ``derivs[k]`` evaluates the k-th derivative on scalar or array input,
        and must vanish identically for ``|x| >= support_radius``.
    support_radius : float
        Half-width of the support interval.
    name : str
        Identifier used in configs and reports.
    """

    __test__ = False  # not a pytest collectible

    def __init__(self, derivs, support_radius, name="custom"):
        if len(derivs) != 5:
            raise ValueError("need derivative orders 0..4")
        self._derivs = tuple(derivs)
        self.support_radius = float(support_radius)
        self.name = name
        self._integral = None

    def deriv(self, k, x):
        """Evaluate the k-th derivative, k in 0..4."""
        if not 0 <= k <= 4:
            raise ValueError("derivative order must be in 0..4")
        x = np.asarray(x, dtype=float)
        out = np.asarray(self._derivs[k](x), dtype=float)
        if x.ndim == 0:
            return float(out.reshape(-1)[0]) if out.shape else float(out)
        return out.reshape(x.shape)

    def __call__(self, x):
        return self.deriv(0, x)

    def integral(self):
        """Integral of the function over the real line (cached)."""
        if self._integral is None:
            r = self.support_radius
            val, _ = quad(lambda t: self.deriv(0, t), -r, r,
                          epsabs=1e-13, epsrel=1e-13, limit=200)
            self._integral = val
        return self._integral

    def scaled(self, amplitude):
        """Return ``amplitude * f`` as a new function."""
        a = float(amplitude)
        derivs = [(lambda k: (lambda x: a * self.deriv(k, x)))(k) for k in range(5)]
        return TestFunction(derivs, self.support_radius,
                            name=f"{self.name}*{a:g}" if a != 1.0 else self.name)

    def rescaled(self, ell):
        """Return the rescaled function x -> f(x / ell)."""
        return RescaledTestFunction(self, ell)


class RescaledTestFunction(TestFunction):
    """f(x / ell): derivative k picks up a factor ell^(-k), support scales by ell."""

    def __init__(self, base, ell):
        if ell <= 0:
            raise ValueError("ell must be positive")
        self.base = base
        self.ell = float(ell)
        derivs = [
            (lambda k: (lambda x: base.deriv(k, np.asarray(x, float) / self.ell)
                        / self.ell ** k))(k)
            for k in range(5)
        ]
        super().__init__(derivs, base.support_radius * self.ell,
                         name=f"{base.name}@{ell:g}")

    def integral(self):
        return self.ell * self.base.integral()


def _bump_u_derivs(x, inside):
    """Derivatives 1..4 of u(x) = -1/(1-x^2) on the open support."""
    x = x[inside]
    w = 1.0 / (1.0 - x * x)
    u1 = -2.0 * x * w ** 2
    u2 = -(2.0 + 6.0 * x * x) * w ** 3
    u3 = -24.0 * x * (1.0 + x * x) * w ** 4
    u4 = -24.0 * (1.0 + 10.0 * x * x + 5.0 * x ** 4) * w ** 5
    return u1, u2, u3, u4


def make_bump():
    """The reference bump exp(-1/(1-x^2)) on |x|<1, zero outside.

    Smooth, even, with all derivatives in closed form via the exponential
    chain rule.
    """

    def d(k):
        def f(x):
            x = np.atleast_1d(np.asarray(x, dtype=float))
            out = np.zeros_like(x)
            inside = np.abs(x) < 1.0
            if not inside.any():
                return out
            xi = x[inside]
            val = np.exp(-1.0 / (1.0 - xi * xi))
            if k == 0:
                out[inside] = val
                return out
            u1, u2, u3, u4 = _bump_u_derivs(x, inside)
            if k == 1:
                out[inside] = u1 * val
            elif k == 2:
                out[inside] = (u2 + u1 ** 2) * val
            elif k == 3:
                out[inside] = (u3 + 3.0 * u1 * u2 + u1 ** 3) * val
            else:
                out[inside] = (u4 + 4.0 * u1 * u3 + 3.0 * u2 ** 2
                               + 6.0 * u1 ** 2 * u2 + u1 ** 4) * val
            return out
        return f

    return TestFunction([d(k) for k in range(5)], 1.0, name="bump")


def _poly_compact(coeffs_poly, name):
    """C^4 function given by a polynomial on |x|<1 and zero outside."""
    polys = [coeffs_poly]
    for _ in range(4):
        polys.append(polys[-1].deriv())

    def d(k):
        def f(x):
            x = np.atleast_1d(np.asarray(x, dtype=float))
            out = np.zeros_like(x)
            inside = np.abs(x) < 1.0
            out[inside] = polys[k](x[inside])
            return out
        return f

    return TestFunction([d(k) for k in range(5)], 1.0, name=name)


def make_quintic():
    """(1-x^2)^5 on |x|<1: even, exactly C^4 (fifth derivative jumps at +-1)."""
    p = np.polynomial.Polynomial([1.0, 0.0, -1.0]) ** 5
    return _poly_compact(p, "quintic")


def make_odd_quintic():
    """x (1-x^2)^5 on |x|<1: odd, exactly C^4."""
    p = np.polynomial.Polynomial([0.0, 1.0]) * np.polynomial.Polynomial([1.0, 0.0, -1.0]) ** 5
    return _poly_compact(p, "odd_quintic")


_REGISTRY = {
    "bump": make_bump,
    "quintic": make_quintic,
    "odd_quintic": make_odd_quintic,
}


def builtin_names():
    return sorted(_REGISTRY)


def register_test_function(name, factory):
    """Plugin point: register a factory returning a :class:`TestFunction`.

    The factory takes no arguments; amplitude and scale are applied by the
    caller through :meth:`TestFunction.scaled` / :meth:`TestFunction.rescaled`.
    """
    _REGISTRY[name] = factory


def get_test_function(name, amplitude=1.0):
    """Look up a registered function by name, with an amplitude factor."""
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown test function {name!r}; known: {builtin_names()}")
    f = factory()
    if amplitude != 1.0:
        f = f.scaled(amplitude)
    return f


def local_seminorm(f, k, x, refine=1):
    """sup of |f^(k)| over [x-3, x+3], by dense grid evaluation.

    The grid step is ``1e-3 * max(1, support_radius) / refine``; this is a
    documented approximation to the true sup.
    """
    lo, hi = x - SEMINORM_HALF_WIDTH, x + SEMINORM_HALF_WIDTH
    r = f.support_radius
    lo, hi = max(lo, -r), min(hi, r)
    if lo >= hi:
        return 0.0
    step = SEMINORM_STEP * max(1.0, r) / refine
    n = max(int(np.ceil((hi - lo) / step)) + 1, 2)
    grid = np.linspace(lo, hi, n)
    return float(np.max(np.abs(f.deriv(k, grid))))


def h_half_norm_sq(f):
    """Squared H^{1/2} norm: (1/2pi)^2 * double integral of squared difference quotients.

    The inner square [-r, r]^2 is integrated with the difference-quotient
    integrand extended continuously by f'(x)^2 on the diagonal; the exterior
    strips, where one argument is outside the support, reduce exactly to
    2 * int f^2 (1/(r-x) + 1/(r+x)) dx.
    """
    r = f.support_radius

    def integrand(y, x):
        if x == y:
            d = f.deriv(1, x)
        else:
            d = (f.deriv(0, x) - f.deriv(0, y)) / (x - y)
        return d * d

    with warnings.catch_warnings():
        warnings.simplefilter("error")
        try:
            core, core_err = dblquad(integrand, -r, r, -r, r,
                                     epsabs=H_HALF_ABS_TOL * 1e-2,
                                     epsrel=1e-10)
            tails, tail_err = quad(
                lambda x: f.deriv(0, x) ** 2 * (1.0 / (r - x) + 1.0 / (r + x)),
                -r, r, epsabs=H_HALF_ABS_TOL * 1e-2, epsrel=1e-10, limit=400)
        except Warning as exc:  # convergence warnings are failures here
            raise NonFinite(f"H^1/2 quadrature did not converge: {exc}") from exc
    total = core + 2.0 * tails
    if not np.isfinite(total) or core_err + 2 * tail_err > H_HALF_ABS_TOL:
        raise NonFinite("H^1/2 quadrature exceeded its error budget")
    return total / (2.0 * np.pi) ** 2
