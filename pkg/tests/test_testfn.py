"""Tests for test functions, seminorms, and the H^{1/2} norm."""

import numpy as np
import pytest

from sinelab.testfn import (
    TestFunction,
    get_test_function,
    h_half_norm_sq,
    local_seminorm,
    make_bump,
    make_odd_quintic,
    make_quintic,
)

# Pinned by the double-quadrature / Fourier oracle pair (see test below).
BUMP_H_HALF_SQ = 0.028537812268


def zero_function():
    z = lambda x: np.zeros_like(np.asarray(x, dtype=float))
    return TestFunction([z] * 5, 1.0, name="zero")


def central_fd(f, k, x, h):
    return (f.deriv(k - 1, x + h) - f.deriv(k - 1, x - h)) / (2.0 * h)


def richardson_fd(f, k, x, h):
    return (4.0 * central_fd(f, k, x, h / 2) - central_fd(f, k, x, h)) / 3.0


def test_bump_center_value():
    bump = make_bump()
    assert bump.deriv(0, 0.0) == pytest.approx(np.exp(-1.0), rel=1e-14)


def test_bump_odd_first_derivative_at_center():
    assert make_bump().deriv(1, 0.0) == 0.0


def test_bump_second_derivative_fd_example():
    # spec-level contract: plain central differences at h = 1e-4
    bump = make_bump()
    fd = central_fd(bump, 2, 0.5, 1e-4)
    assert bump.deriv(2, 0.5) == pytest.approx(fd, rel=1e-6)


@pytest.mark.parametrize("factory", [make_bump, make_quintic, make_odd_quintic])
@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_derivatives_match_finite_differences(factory, k):
    f = factory()
    for x in [0.0, 0.3, 0.5, -0.7, 0.9]:
        fd = richardson_fd(f, k, x, 1e-4)
        exact = f.deriv(k, x)
        assert abs(exact - fd) <= 1e-6 * (1.0 + abs(exact))


@pytest.mark.parametrize("factory", [make_bump, make_quintic, make_odd_quintic])
def test_vanishing_outside_support(factory):
    f = factory()
    xs = np.array([-5.0, -1.0, 1.0, 2.5, 100.0])
    for k in range(5):
        assert np.all(f.deriv(k, xs) == 0.0)


def test_registry_lookup_and_amplitude():
    f = get_test_function("bump", amplitude=2.5)
    assert f.deriv(0, 0.0) == pytest.approx(2.5 * np.exp(-1.0), rel=1e-14)
    with pytest.raises(KeyError):
        get_test_function("nope")


def test_local_seminorm_outside_support_is_zero():
    assert local_seminorm(make_bump(), 0, 10.0) == 0.0


def test_local_seminorm_center():
    assert local_seminorm(make_bump(), 0, 0.0) == pytest.approx(np.exp(-1.0), rel=1e-12)


def test_local_seminorm_against_brute_force():
    bump = make_bump()
    got = local_seminorm(bump, 1, 0.9)
    grid = np.linspace(0.9 - 3.0, min(0.9 + 3.0, 1.0), 100_000)
    want = np.max(np.abs(bump.deriv(1, grid)))
    assert got == pytest.approx(want, rel=1e-4)


def test_rescaling_seminorm_identity_on_matched_grids():
    # |phi_ell|_k = ell^-k |phi|_k, checked on a grid mapped through the scaling
    bump = make_bump()
    grid = np.linspace(-1.0, 1.0, 20_001)
    for ell in [2.0, 7.0, 50.0]:
        phi = bump.rescaled(ell)
        for k in range(5):
            lhs = np.max(np.abs(phi.deriv(k, ell * grid)))
            rhs = np.max(np.abs(bump.deriv(k, grid))) / ell ** k
            assert lhs == pytest.approx(rhs, rel=1e-10)


def test_rescaled_support():
    phi = make_bump().rescaled(7.0)
    assert phi.support_radius == 7.0
    assert phi.deriv(0, 7.0) == 0.0
    assert phi.deriv(0, 6.9) > 0.0


def test_h_half_zero_function():
    assert h_half_norm_sq(zero_function()) == 0.0


def test_h_half_pinned_value():
    assert h_half_norm_sq(make_bump()) == pytest.approx(BUMP_H_HALF_SQ, abs=2e-9)


def test_h_half_rescaling_invariance_pair():
    bump = make_bump()
    v1 = h_half_norm_sq(bump)
    v7 = h_half_norm_sq(bump.rescaled(7.0))
    assert abs(v1 - v7) <= 1e-8


@pytest.mark.slow
def test_h_half_rescaling_invariance_sweep():
    bump = make_bump()
    vals = [h_half_norm_sq(bump.rescaled(ell)) for ell in [1.0, 2.0, 5.0, 10.0, 100.0]]
    spread = (max(vals) - min(vals)) / min(vals)
    assert spread <= 1e-6


def test_h_half_fourier_oracle():
    from .oracles import fourier_h_half_norm_sq

    bump = make_bump()
    direct = h_half_norm_sq(bump)
    fourier = fourier_h_half_norm_sq(bump)
    assert direct == pytest.approx(fourier, rel=1e-4)


def test_h_half_amplitude_homogeneity():
    bump = make_bump()
    v = h_half_norm_sq(bump)
    v3 = h_half_norm_sq(bump.scaled(3.0))
    assert v3 == pytest.approx(9.0 * v, rel=1e-9)
