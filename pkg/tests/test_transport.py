"""Tests for the monotone transport, energy identities, and difference field."""

import numpy as np
import pytest
from scipy.integrate import quad

from sinelab.errors import CoincidentPoints
from sinelab.pointproc import PointConfiguration
from sinelab.testfn import make_bump
from sinelab.transport import (
    DifferenceField,
    SignedMeasure,
    TransportBundle,
    difference_field,
    interaction_energy,
    lebesgue_log_potential,
    psi_bounds_check,
    s_max,
    verify_energy_splitting,
    verify_energy_expansion,
)


@pytest.fixture(scope="module")
def T_half(bundle_400_20):
    return TransportBundle(bundle_400_20, 0.5 * s_max(bundle_400_20))


@pytest.fixture(scope="module")
def T_zero(bundle_400_20):
    return TransportBundle(bundle_400_20, 0.0)


def random_config(rng, lam, n=20, margin=2.0):
    pts = rng.uniform(-lam + margin, lam - margin, n)
    return PointConfiguration(pts, (-lam, lam))


# -- s_max ------------------------------------------------------------------------


def test_s_max_is_half_for_small_measures(bundle_400_20):
    B = bundle_400_20
    assert B.sup_m_tilde() <= 1.0 and B.l1_m_tilde() <= 1.0
    assert s_max(B) == 0.5


def test_s_max_norm_oracle(bundle_2000_10):
    B = bundle_2000_10
    xs = np.linspace(-2000 + 2.5, 2000 - 2.5, 120_001)
    sup = float(np.max(np.abs(B.m_tilde(xs))))
    l1 = quad(lambda x: abs(float(B.m_tilde(np.asarray(x)))), -2000 + 2.5, 2000 - 2.5,
              points=[-20, -10, 0, 10, 20, -1990, 1990], epsabs=1e-9, limit=500)[0]
    want = 0.5 / max(1.0, sup, l1)
    assert s_max(B) == pytest.approx(want, rel=1e-8)


# -- the map -----------------------------------------------------------------------


def test_transport_identity_at_s_zero(T_zero):
    xs = np.linspace(-400, 400, 101)
    assert np.array_equal(T_zero.transport(xs), xs)


def test_transport_identity_on_endpoint_strips(T_half):
    xs = np.concatenate([np.linspace(-400, -396, 9), np.linspace(396, 400, 9)])
    assert np.max(np.abs(T_half.transport(xs) - xs)) <= 1e-11 * 400


def test_transport_pushforward_identity(T_half):
    # int f(Phi(x)) dx = int f(x) mu_s(x) dx for a mid-window bump
    f = make_bump().rescaled(30.0)
    lhs = quad(lambda x: f.deriv(0, T_half.transport(x)), -40.0, 40.0,
               epsabs=1e-11, epsrel=1e-11, limit=400)[0]
    rhs = quad(lambda x: f.deriv(0, x) * float(T_half.mu(np.asarray(x))),
               -40.0, 40.0, epsabs=1e-11, epsrel=1e-11, limit=400)[0]
    assert lhs == pytest.approx(rhs, rel=1e-8)


def test_transport_monotone(T_half):
    xs = np.linspace(-400, 400, 1001)
    assert np.all(np.diff(T_half.transport(xs)) > 0)


def test_transport_inverse_consistency(T_half):
    xs = np.linspace(-399.5, 399.5, 501)
    assert np.max(np.abs(T_half.F(T_half.transport(xs)) - (xs + 400.0))) <= 1e-10 * 400


def test_psi_bounds_report(T_half, T_zero):
    rep0 = psi_bounds_check(T_zero)
    assert rep0["sup_psi"] == 0.0 and rep0["envelope_ratio_max"] == 0.0
    rep = psi_bounds_check(T_half)
    assert rep["sup_ok"] and rep["sup_psi"] <= 1.0
    assert rep["derivative_identity_max"] <= 1e-8
    assert np.isfinite(rep["envelope_ratio_max"])


def test_psi_dominated_by_l1(T_half):
    l1 = T_half.bundle.l1_m_tilde()
    xs = np.linspace(-400, 400, 201)
    assert np.max(np.abs(T_half.psi(xs))) <= abs(T_half.s) * l1 + 1e-12


# -- signed-measure kernel ------------------------------------------------------------


def test_interaction_energy_two_atoms_unit_gap():
    A = SignedMeasure.points([0.0, 1.0])
    assert interaction_energy(A, A, exclude_diagonal=True) == 0.0


def test_interaction_energy_two_atoms_gap_two():
    A = SignedMeasure.points([0.0, 2.0])
    # ordered pairs double the -log 2
    assert interaction_energy(A, A, exclude_diagonal=True) == pytest.approx(
        -2.0 * np.log(2.0), rel=1e-14)


def test_interaction_energy_coincident_points_raise():
    A = SignedMeasure.points([0.0, 0.0])
    with pytest.raises(CoincidentPoints):
        interaction_energy(A, A, exclude_diagonal=True)


def test_interaction_energy_atoms_vs_lebesgue_closed_form():
    atoms = [-1.0, 0.5, 2.0]
    A = SignedMeasure.points(atoms)
    L = SignedMeasure.lebesgue(-3.0, 3.0)
    got = interaction_energy(A, L)
    want = sum(lebesgue_log_potential(p, -3.0, 3.0) for p in atoms)
    assert got == pytest.approx(want, abs=1e-10)


# -- energy identities ------------------------------------------------------------------


def test_energy_splitting_trivial_at_s_zero(T_zero, rng_factory):
    eta = random_config(rng_factory(0), 400.0)
    rep = verify_energy_splitting(T_zero, eta)
    assert rep.residual == pytest.approx(0.0, abs=1e-9 * max(abs(rep.lhs), 1.0))
    assert rep.lhs == pytest.approx(rep.terms["around_mu"], rel=1e-12)


def test_energy_splitting_random_configs(T_half, rng_factory):
    rng = rng_factory(7)
    for _ in range(3):
        eta = random_config(rng, 400.0)
        rep = verify_energy_splitting(T_half, eta)
        assert abs(rep.residual) <= 1e-5 * max(abs(rep.lhs), 1.0)


def test_energy_splitting_regular_grid(T_half):
    eta = PointConfiguration(np.linspace(-350, 350, 29), (-400, 400))
    rep = verify_energy_splitting(T_half, eta)
    assert abs(rep.residual) <= 1e-5 * max(abs(rep.lhs), 1.0)


def test_energy_expansion_trivial_at_s_zero(T_zero, rng_factory):
    eta = random_config(rng_factory(1), 400.0)
    rep = verify_energy_expansion(T_zero, eta)
    assert rep.main_s == pytest.approx(0.0, abs=1e-10)
    assert rep.re_s == pytest.approx(0.0, abs=1e-12)
    assert rep.flu_re == pytest.approx(0.0, abs=1e-10)
    assert rep.residual == pytest.approx(0.0, abs=1e-9 * max(abs(rep.lhs), 1.0))


def test_energy_expansion_random_configs(T_half, rng_factory):
    rng = rng_factory(8)
    for _ in range(3):
        eta = random_config(rng, 400.0)
        rep = verify_energy_expansion(T_half, eta)
        assert abs(rep.residual) <= 1e-5 * max(abs(rep.lhs), 1.0)


def test_relative_entropy_small(bundle_400_20, bundle_400_10):
    # RE_s <= C s^2 / ell across bundles and s values (observed constant)
    for B in (bundle_400_20, bundle_400_10):
        sm = s_max(B)
        for frac in (0.5, 1.0):
            T = TransportBundle(B, frac * sm)
            rep = verify_energy_expansion(T, PointConfiguration([], (-400, 400)))
            assert abs(rep.re_s) <= 5.0 * T.s ** 2 / B.ell


def test_main_term_even_order_structure(T_half, bundle_400_20, rng_factory):
    eta = random_config(rng_factory(9), 400.0)
    plus = verify_energy_expansion(T_half, eta).main_s
    minus = verify_energy_expansion(
        TransportBundle(bundle_400_20, -T_half.s), eta).main_s
    # linear parts cancel: the symmetric combination is second-order small
    assert abs(plus + minus) <= 0.7 * max(abs(plus), abs(minus))


# -- difference field -----------------------------------------------------------------------


def test_difference_field_zero_at_s_zero(T_zero, rng_factory):
    eta = random_config(rng_factory(2), 400.0)
    rep = difference_field(T_zero, eta, 800.0)
    assert rep.df == 0.0 and rep.lp_part == 0.0 and rep.errorlog_part == 0.0
    assert rep.errordf == pytest.approx(0.0, abs=1e-12)


def test_difference_field_identity_random(T_half, rng_factory):
    rng = rng_factory(3)
    for x in (600.0, 800.0, -650.0):
        eta = random_config(rng, 400.0)
        rep = difference_field(T_half, eta, x)
        assert abs(rep.residual) <= 1e-7


def test_difference_field_points_on_endpoint_strips(T_half):
    # points where the displacement vanishes: their kernel term drops out but
    # the decomposition identity still holds
    eta = PointConfiguration([-398.0, -397.0, 397.5], (-400, 400))
    rep = difference_field(T_half, eta, 800.0)
    assert abs(rep.residual) <= 1e-7
    assert np.all(T_half.psi(eta.points) == 0.0)


def test_difference_field_requires_exterior_point(T_half):
    with pytest.raises(ValueError):
        difference_field(T_half, PointConfiguration([], (-400, 400)), 10.0)
