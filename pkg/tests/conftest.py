"""Independent oracles shared by the test modules."""

import math

import numpy as np
import pytest
from scipy import integrate


def quad_K(k):
    """K(k) by Gauss-Jacobi type quadrature with the (1 - t)^(-1/2) weight split off."""
    val, _ = integrate.quad(lambda t: 1.0 / math.sqrt((1.0 + t) * (1.0 - k * k * t * t)),
                            0.0, 1.0, weight="alg", wvar=(0.0, -0.5),
                            epsabs=1e-15, epsrel=1e-14, limit=200)
    return val


def quad_s(x, k):
    """s_k(x) by plain adaptive quadrature in t (x < 1 keeps the integrand bounded)."""
    val, _ = integrate.quad(lambda t: 1.0 / math.sqrt((1.0 - t * t) * (1.0 - k * k * t * t)),
                            0.0, x, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def jacobi_eigvals(M, tol=1e-14, max_sweeps=100):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations (ascending)."""
    A = np.array(M, dtype=float)
    n = A.shape[0]
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= tol * max(np.linalg.norm(A), 1e-300):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(A[p, q]) <= 1e-300 + 1e-20 * math.sqrt(abs(A[p, p] * A[q, q])):
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * A[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q] = s
                J[q, p] = -s
                A = J.T @ A @ J
    return np.sort(np.diag(A))


def brute_theta(shifts, a, b, n=200_001):
    """max over a dense linear-plus-log grid of |prod (z - alpha)/(z + alpha)|."""
    z = -np.unique(np.concatenate([np.linspace(-b, -a, n), np.geomspace(-b, -a, n)]))
    p = np.ones_like(z)
    for al in shifts:
        p *= np.abs((z - al) / (z + al))
    return float(np.max(p))


def heat_spec(**kw):
    from fluctcov.discretize import Nonlinearity, ProblemSpec

    kw.setdefault("nonlinearity", Nonlinearity("linear", c=0.0))
    return ProblemSpec(**kw)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
