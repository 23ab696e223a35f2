"""Independent oracles shared by the test suite.

These deliberately avoid the library's own evaluation paths: Fourier-side
norms use the FFT, principal values use symmetric excision, and integrals use
brute-force summation or closed forms.
"""

import numpy as np
from scipy.integrate import quad


def fourier_h_half_norm_sq(f, half_length=256.0, n=2 ** 22):
    """(1/2pi)^2 * int |xi| |fhat(xi)|^2 dxi with fhat(xi) = int f e^{-i xi x} dx.

    The constant was pinned against the double-integral definition on the
    reference bump before freezing the tests.
    """
    L = 2.0 * half_length
    x = -half_length + L * np.arange(n) / n
    fx = f.deriv(0, x)
    fhat = np.fft.fft(fx) * (L / n)
    xi = 2.0 * np.pi * np.fft.fftfreq(n, d=L / n)
    integral = np.sum(np.abs(xi) * np.abs(fhat) ** 2) * (2.0 * np.pi / L)
    return integral / (2.0 * np.pi) ** 2


def excised_pv(g, x, eps):
    """Symmetric-excision principal value at a fixed excision radius."""
    r = g.support_radius
    lo, hi = min(-r, x - r), max(r, x + r)
    left = quad(lambda t: g.deriv(0, t) / (t - x), lo, x - eps,
                epsabs=1e-13, epsrel=1e-13, limit=400)[0]
    right = quad(lambda t: g.deriv(0, t) / (t - x), x + eps, hi,
                 epsabs=1e-13, epsrel=1e-13, limit=400)[0]
    return left + right


def richardson_pv(g, x, eps_values=(1e-2, 1e-3, 1e-4)):
    """Extrapolated excision PV: kills the O(eps) excision error."""
    vals = [excised_pv(g, x, e) for e in eps_values]
    extrap = [(e1 * v2 - e2 * v1) / (e1 - e2)
              for (e1, v1), (e2, v2) in zip(zip(eps_values, vals),
                                            list(zip(eps_values, vals))[1:])]
    return extrap[-1]


def lebesgue_log_potential(x, a, b):
    """Closed form of int_a^b -log|x - y| dy via the endpoint antiderivative."""
    def anti(y):
        d = y - x
        return d * np.log(np.abs(d)) - d if d != 0.0 else 0.0
    return -(anti(b) - anti(a))


def lebesgue_self_energy(a, b):
    """Closed form of the double integral of -log|x-y| over [a,b]^2."""
    L = b - a
    return L * L * (1.5 - np.log(L))


def rejection_two_point_spacings(n_samples, seed):
    """Brute-force spacings |x1 - x2| from the two-particle log-gas at beta = 2.

    Target density |x1-x2|^2 exp(-(x1^2 + x2^2)); proposals are standard
    normal pairs, accepted with ratio bound 4/e.
    """
    rng = np.random.default_rng(seed)
    out = []
    bound = 4.0 / np.e
    while len(out) < n_samples:
        x = rng.standard_normal(200_000)
        y = rng.standard_normal(200_000)
        ratio = (x - y) ** 2 * np.exp(-0.5 * (x * x + y * y))
        keep = rng.random(200_000) < ratio / bound
        out.extend(np.abs(x[keep] - y[keep]).tolist())
    return np.array(out[:n_samples])


def charpoly_sign_count(diag, off, x):
    """Eigenvalues below x counted by sign changes of the leading minors.

    Uses the raw three-term recurrence of the characteristic polynomials of
    the leading principal submatrices, rescaled to dodge overflow.  Assumes x
    is not itself an eigenvalue (true almost surely for random probes).
    """
    n = len(diag)
    count = 0
    p_prev, p = 1.0, diag[0] - x
    if p < 0:
        count += 1
    for k in range(1, n):
        p_next = (diag[k] - x) * p - off[k - 1] ** 2 * p_prev
        if p_next * p < 0:
            count += 1
        scale = max(abs(p_next), abs(p), 1e-300)
        p_prev, p = p / scale, p_next / scale
    return count
