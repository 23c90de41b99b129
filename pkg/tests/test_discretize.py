import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import heat_spec, jacobi_eigvals
from fluctcov.discretize import (DiscretizedSystem, Nonlinearity, ProblemSpec, build_laplacian_1d,
                                 build_noise_factor, discretize, fd_laplacian_eigenvalues, linearize,
                                 mesh, newton_steady_state, q_eigenvalues, sine_modes)
from fluctcov.errors import DomainError, SolverError, StabilityError


def test_mesh():
    x, h = mesh(4, 1.0)
    assert h == pytest.approx(0.2)
    np.testing.assert_allclose(x, [0.2, 0.4, 0.6, 0.8])


def test_laplacian_eigenvalues_closed_form_vs_jacobi():
    A = build_laplacian_1d(12, 2.0)
    np.testing.assert_allclose(fd_laplacian_eigenvalues(12, 2.0), jacobi_eigvals(A), rtol=1e-12)


def test_laplacian_converges_to_continuum():
    lam = fd_laplacian_eigenvalues(400, 1.0)[-1]
    assert lam == pytest.approx(-math.pi ** 2, rel=1e-5)


def test_sine_modes_orthogonal_eigenvectors():
    N = 15
    S = sine_modes(N)
    np.testing.assert_allclose(S @ S, np.eye(N), atol=1e-13)
    np.testing.assert_allclose(S, S.T)
    A = build_laplacian_1d(N, 1.0)
    D = S @ A @ S
    np.testing.assert_allclose(D, np.diag(np.diag(D)), atol=1e-9)


def test_q_eigenvalues():
    np.testing.assert_allclose(q_eigenvalues(3, 2.0), [1.0, 0.25, 1 / 9])


@pytest.mark.parametrize("name, kw", [("linear", {"c": 2.0}), ("cubic", {"mu": -1.0}),
                                      ("logistic", {"mu": 0.5})])
def test_nonlinearity_derivative_and_remainder(name, kw, rng):
    nl = Nonlinearity(name, **kw)
    u = rng.standard_normal(7)
    z = 0.3 * rng.standard_normal(7)
    eps = 1e-6
    np.testing.assert_allclose(nl.df(u), (nl.f(u + eps) - nl.f(u - eps)) / (2 * eps), rtol=1e-8, atol=1e-8)
    np.testing.assert_allclose(nl.remainder(u, z), nl.f(u + z) - nl.f(u) - nl.df(u) * z, atol=1e-14)
    Z = rng.standard_normal((7, 4))
    np.testing.assert_allclose(nl.remainder(u, Z)[:, 2], nl.remainder(u, Z[:, 2]), atol=1e-15)


def test_remainder_linear_is_exact_zero(rng):
    z = rng.standard_normal((5, 3))
    assert not np.any(Nonlinearity("linear", c=3.0).remainder(np.zeros(5), z))


@pytest.mark.parametrize("name, kw", [("linear", {"c": 2.0}), ("cubic", {"mu": 0.7}),
                                      ("logistic", {"mu": 1.3})])
def test_lipschitz_constants_bound_difference_quotients(name, kw, rng):
    nl = Nonlinearity(name, **kw)
    radius = 0.8
    x, y = rng.uniform(-radius, radius, (2, 2000))
    q = np.abs(nl.f(x) - nl.f(y)) / np.abs(x - y)
    assert np.max(q) <= nl.lipschitz(radius) + 1e-12
    us = np.full(1, 0.4)
    s, t = rng.uniform(-radius, radius, (2, 2000))
    qr = np.abs(nl.remainder(us, s[:, None].T)[0] - nl.remainder(us, t[:, None].T)[0]) / np.abs(s - t)
    assert np.max(qr) <= nl.remainder_lipschitz(us, radius) + 1e-12


def test_nonlinearity_roundtrip_and_domain():
    nl = Nonlinearity("cubic", mu=1.5)
    assert Nonlinearity.from_dict(nl.to_dict()) == nl
    with pytest.raises(DomainError):
        Nonlinearity("quintic")


@pytest.mark.parametrize("kw", [{"L": 0}, {"upsilon": 0}, {"gamma": -1}, {"R": 0}, {"boundary": "neumann"}])
def test_problem_spec_validation(kw):
    with pytest.raises(DomainError):
        ProblemSpec(**kw)


def test_noise_factor_norm_and_modes():
    spec = heat_spec(upsilon=0.3, gamma=2.0, R=3)
    B = build_noise_factor(spec, 20)
    assert np.linalg.norm(B, 2) == pytest.approx(0.3, rel=1e-14)
    S = sine_modes(20)
    C = S.T @ B
    # only the first R modes are driven, with weights proportional to i^(-gamma/2)
    assert np.allclose(C[3:], 0, atol=1e-14)
    d = np.abs(np.diag(C[:3]))
    np.testing.assert_allclose(d / d[0], [1, 0.5, 1 / 3], rtol=1e-12)
    with pytest.raises(DomainError):
        build_noise_factor(heat_spec(R=30), 20)


def test_discretize_heat():
    sys = discretize(heat_spec(R=2), 30)
    assert sys.N == 30 and sys.R == 2
    assert not np.any(sys.u_star)
    np.testing.assert_allclose(sys.eigenvalues, fd_laplacian_eigenvalues(30, 1.0), rtol=1e-12)
    assert sys.interval.b == pytest.approx(sys.eigenvalues[-1])
    assert sys.norm_A == pytest.approx(-sys.eigenvalues[0])


def test_discretize_unstable_trivial_state():
    spec = ProblemSpec(L=10.0, nonlinearity=Nonlinearity("cubic", mu=1.0))
    with pytest.raises(StabilityError, match="stability condition"):
        discretize(spec, 30)


def test_newton_allen_cahn_kink():
    L, N = 20.0, 199
    x, _ = mesh(N, L)
    nl = Nonlinearity("cubic", mu=1.0)
    guess = np.tanh(x / math.sqrt(2)) * np.tanh((L - x) / math.sqrt(2))
    sys = discretize(ProblemSpec(L=L, nonlinearity=nl), N, guess=guess)
    A_h = build_laplacian_1d(N, L)
    assert np.linalg.norm(A_h @ sys.u_star + nl.f(sys.u_star)) <= 1e-12 * math.sqrt(N)
    assert sys.eigenvalues[-1] < 0
    assert np.max(sys.u_star) == pytest.approx(1.0, abs=1e-3)


def test_newton_nonconvergence():
    A_h = build_laplacian_1d(10, 1.0)
    with pytest.raises((SolverError, StabilityError)):
        newton_steady_state(A_h, Nonlinearity("cubic", mu=500.0), np.full(10, 1e6))


def test_linearize_checks_stability():
    with pytest.raises(StabilityError):
        linearize(np.diag([-1.0, -2.0]), Nonlinearity("linear", c=-1.5), np.zeros(2))


def test_spectral_method_matches_continuum():
    sys = discretize(heat_spec(R=2), 10, method="spectral")
    np.testing.assert_allclose(np.sort(sys.eigenvalues)[::-1], -(np.arange(1, 11) * math.pi) ** 2)
    with pytest.raises(DomainError):
        discretize(heat_spec(), 10, guess=np.zeros(10), method="spectral")
    with pytest.raises(DomainError):
        discretize(heat_spec(), 10, method="fem")


def test_from_linear():
    sys = DiscretizedSystem.from_linear([[-2.0]], [[1.0]])
    assert sys.N == 1 and sys.upsilon == 1.0 and sys.nonlinearity.is_linear
    with pytest.raises(StabilityError):
        DiscretizedSystem.from_linear([[1.0]], [[1.0]])


@given(st.integers(2, 60), st.floats(0.5, 20.0))
def test_laplacian_negative_definite(N, L):
    assert fd_laplacian_eigenvalues(N, L).max() < 0
