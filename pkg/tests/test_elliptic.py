import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from conftest import quad_K, quad_s
from fluctcov.elliptic import (EllipticData, agm, complete_K, complete_K_kprime, incomplete_s,
                               jacobi_dn, jacobi_dn_kprime, modulus_from_nome, nome_from_K)
from fluctcov.errors import DomainError

KS = [0.1, 0.3, 0.5, 0.7, 0.9, 0.99]


def test_agm_known_value():
    # agm(1, sqrt 2) is Gauss's constant reciprocal times sqrt 2
    assert agm(1.0, math.sqrt(2.0)) == pytest.approx(1.19814023473559220744, rel=1e-15)


def test_agm_rejects_nonpositive():
    with pytest.raises(DomainError):
        agm(0.0, 1.0)


@given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6))
def test_agm_between_means(a, b):
    m = agm(a, b)
    assert math.sqrt(a * b) * (1 - 1e-14) <= m <= 0.5 * (a + b) * (1 + 1e-14)
    assert m == pytest.approx(agm(b, a), rel=1e-14)


@pytest.mark.parametrize("k", KS)
def test_complete_K_matches_quadrature(k):
    assert complete_K(k) == pytest.approx(quad_K(k), rel=1e-12)


def test_complete_K_zero_modulus():
    assert complete_K(0.0) == pytest.approx(math.pi / 2, rel=1e-15)


def test_complete_K_self_complementary_point():
    k = 1 / math.sqrt(2)
    assert complete_K(k) == pytest.approx(1.8540746773013719, rel=1e-14)
    assert complete_K_kprime(k) == pytest.approx(complete_K(k), rel=1e-14)


@pytest.mark.parametrize("k", [-0.1, 1.0, 1.5])
def test_complete_K_domain(k):
    with pytest.raises(DomainError):
        complete_K(k)


@pytest.mark.parametrize("k", KS)
def test_incomplete_s_matches_quadrature(k):
    for x in (0.1, 0.5, 0.9, 0.99):
        assert incomplete_s(x, k) == pytest.approx(quad_s(x, k), rel=1e-11)
    assert incomplete_s(1.0, k) == pytest.approx(quad_K(k), rel=1e-11)
    assert incomplete_s(0.0, k) == 0.0


def test_incomplete_s_domain():
    with pytest.raises(DomainError):
        incomplete_s(1.2, 0.5)


@pytest.mark.parametrize("k", KS)
def test_dn_at_quarter_period_is_kprime(k):
    assert jacobi_dn(complete_K(k), k) == pytest.approx(math.sqrt(1 - k * k), rel=1e-10)


@pytest.mark.parametrize("k", KS)
def test_dn_sn_identity_through_inverse_integral(k):
    # x = sn(u) where u = s_k(x); then dn(u)^2 + k^2 x^2 = 1
    for x in np.linspace(0.05, 0.95, 20):
        u = quad_s(x, k)
        assert jacobi_dn(u, k) ** 2 + k * k * x * x == pytest.approx(1.0, abs=1e-10)


def test_dn_matches_scipy_ellipj():
    u = np.linspace(-3, 3, 41)
    for k in (0.2, 0.8, 0.999999):
        ref = special.ellipj(u, k * k)[2]
        np.testing.assert_allclose(jacobi_dn(u, k), ref, rtol=1e-11)


def test_dn_special_cases():
    assert jacobi_dn(0.0, 0.7) == pytest.approx(1.0, abs=1e-15)
    assert jacobi_dn(1.3, 0.0) == 1.0
    # even and 2K periodic
    k = 0.6
    K = complete_K(k)
    assert jacobi_dn(-0.4, k) == pytest.approx(jacobi_dn(0.4, k), rel=1e-14)
    assert jacobi_dn(0.4 + 2 * K, k) == pytest.approx(jacobi_dn(0.4, k), rel=1e-12)


def test_dn_kprime_entry_point_keeps_precision():
    kp = 1e-6
    K = complete_K_kprime(kp)
    assert jacobi_dn_kprime(K, kp) == pytest.approx(kp, rel=1e-8)


@given(st.floats(0.0, 0.999), st.floats(-10, 10))
def test_dn_range(k, u):
    d = jacobi_dn(u, k)
    assert math.sqrt(1 - k * k) - 1e-12 <= d <= 1 + 1e-12


def test_nome_self_complementary():
    assert modulus_from_nome(math.exp(-math.pi)) == pytest.approx(1 / math.sqrt(2), rel=1e-14)
    assert nome_from_K(2.0, 2.0) == pytest.approx(math.exp(-math.pi), rel=1e-15)


def test_modulus_from_nome_endpoints():
    assert modulus_from_nome(0.0) == 1.0
    with pytest.raises(DomainError):
        modulus_from_nome(1.0)


@pytest.mark.parametrize("k", np.linspace(0.05, 0.95, 19))
def test_nome_round_trip(k):
    ed = EllipticData.from_modulus(k)
    assert modulus_from_nome(ed.q) == pytest.approx(ed.k_prime, rel=1e-12)


@settings(max_examples=50)
@given(st.floats(1e-6, 1.0))
def test_nome_round_trip_from_kprime(kp):
    ed = EllipticData.from_kprime(kp)
    assert modulus_from_nome(ed.q) == pytest.approx(kp, rel=1e-9)


def test_elliptic_data_degenerate():
    ed = EllipticData.from_kprime(1.0)
    assert ed.k == 0.0 and ed.q == 0.0 and math.isinf(ed.K_prime)
    assert ed.k_prime_power(3) == 1.0


def test_kprime_power_is_landen_transform():
    # q -> q^2 is the descending Landen step: k'_2 = 2 sqrt(k') / (1 + k')
    ed = EllipticData.from_kprime(0.3)
    assert ed.k_prime_power(2) == pytest.approx(2 * math.sqrt(0.3) / 1.3, rel=1e-13)
