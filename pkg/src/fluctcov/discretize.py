"""Finite-dimensional reaction-diffusion systems on an interval.

Builds the discrete diffusion operator (homogeneous Dirichlet data on
``[0, L]``), a steady state of ``A_h u + f(u) = 0``, the linearisation
``A_h + diag(f'(u*))`` and the truncated noise factor.

State vectors hold nodal values at ``x_j = j h``, ``j = 1..N``,
``h = L/(N+1)``.  The discrete sine modes

    zeta_i[j] = sqrt(2h/L) sin(i pi x_j / L)

are orthonormal in the Euclidean inner product, so covariance matrices
built from them compare directly across mesh levels once rotated into
the sine basis (see :func:`sine_modes`).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla

from .errors import DomainError, SolverError, StabilityError
from .linalg import SpectralInterval, bandwidth, sym_eig

logger = logging.getLogger(__name__)

NEWTON_MAXITER = 50


@dataclass(frozen=True)
class Nonlinearity:
    """Scalar reaction term from a closed catalog.

    ``linear``    f(u) = -c u
    ``cubic``     f(u) = mu u - u^3
    ``logistic``  f(u) = mu u (1 - u)
    """

    name: str
    c: float = 0.0
    mu: float = 0.0

    KINDS = ("linear", "cubic", "logistic")

    def __post_init__(self):
        if self.name not in self.KINDS:
            raise DomainError(f"unknown nonlinearity {self.name!r}; expected one of {self.KINDS}")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        name = d.pop("name")
        return cls(name, **d)

    def to_dict(self):
        if self.name == "linear":
            return {"name": "linear", "c": self.c}
        return {"name": self.name, "mu": self.mu}

    @property
    def is_linear(self):
        return self.name == "linear"

    def f(self, u):
        if self.name == "linear":
            return -self.c * u
        if self.name == "cubic":
            return self.mu * u - u ** 3
        return self.mu * u * (1.0 - u)

    def df(self, u):
        u = np.asarray(u, dtype=float)
        if self.name == "linear":
            return np.full_like(u, -self.c)
        if self.name == "cubic":
            return self.mu - 3.0 * u ** 2
        return self.mu * (1.0 - 2.0 * u)

    def remainder(self, u_star, z):
        """Nonlinear part ``f(u*+z) - f(u*) - f'(u*) z`` in closed form.

        Exactly zero for the linear member, which keeps coupled linear and
        nonlinear simulations bitwise identical.
        """
        if self.name == "linear":
            return np.zeros_like(z)
        us = u_star[:, None] if z.ndim == 2 else u_star
        if self.name == "cubic":
            return -(3.0 * us + z) * z * z
        return -self.mu * z * z

    def lipschitz(self, radius):
        """Lipschitz constant of ``f`` on the ball ``|u| <= radius``."""
        radius = float(radius)
        if self.name == "linear":
            return abs(self.c)
        if self.name == "cubic":
            return max(abs(self.mu), abs(self.mu - 3.0 * radius ** 2))
        return abs(self.mu) * (1.0 + 2.0 * radius)

    def remainder_lipschitz(self, u_star, radius):
        """Lipschitz constant of the remainder for ``|z_i| <= radius``.

        Equals ``sup |f'(u*_i + s) - f'(u*_i)|`` over ``|s| <= radius``.
        """
        radius = float(radius)
        umax = float(np.max(np.abs(u_star))) if np.size(u_star) else 0.0
        if self.name == "linear":
            return 0.0
        if self.name == "cubic":
            return 6.0 * umax * radius + 3.0 * radius ** 2
        return 2.0 * abs(self.mu) * radius


@dataclass(frozen=True)
class ProblemSpec:
    """Continuous problem data: domain length, reaction term and noise."""

    L: float = 1.0
    nonlinearity: Nonlinearity = field(default_factory=lambda: Nonlinearity("linear"))
    upsilon: float = 0.1
    gamma: float = 2.0
    R: int = 1
    boundary: str = "dirichlet"

    def __post_init__(self):
        if not self.L > 0:
            raise DomainError(f"L must be positive, got {self.L}")
        if not self.upsilon > 0:
            raise DomainError(f"upsilon must be positive, got {self.upsilon}")
        if not self.gamma >= 0:
            raise DomainError(f"gamma must be nonnegative, got {self.gamma}")
        if int(self.R) != self.R or self.R < 1:
            raise DomainError(f"R must be a positive integer, got {self.R}")
        if self.boundary != "dirichlet":
            raise DomainError(f"only Dirichlet boundaries are supported, got {self.boundary!r}")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "nonlinearity" in d:
            d["nonlinearity"] = Nonlinearity.from_dict(d["nonlinearity"])
        return cls(**d)


@dataclass(frozen=True)
class DiscretizedSystem:
    """Linearised finite-dimensional system around a steady state.

    Attributes
    ----------
    h : float
        Mesh width.
    A_h : (N, N) ndarray
        Discrete diffusion operator.
    u_star : (N,) ndarray
        Steady state.
    script_A : (N, N) ndarray
        Linearisation ``A_h + diag(f'(u*))``, verified negative definite.
    B : (N, R) ndarray
        Noise factor with ``||B||_2 = upsilon``.
    nonlinearity : Nonlinearity
        Reaction term used for nonlinear simulations.
    eigenvalues, eigenvectors : ndarray
        Spectral decomposition of ``script_A`` (ascending).
    """

    h: float
    A_h: np.ndarray
    u_star: np.ndarray
    script_A: np.ndarray
    B: np.ndarray
    nonlinearity: Nonlinearity
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    L: float = 1.0
    method: str = "fd"

    @property
    def N(self):
        return self.script_A.shape[0]

    @property
    def R(self):
        return self.B.shape[1]

    @property
    def upsilon(self):
        return float(np.linalg.norm(self.B, 2))

    @property
    def interval(self):
        return SpectralInterval(float(self.eigenvalues[0]), float(self.eigenvalues[-1]))

    @property
    def norm_A(self):
        return float(np.max(np.abs(self.eigenvalues)))

    @classmethod
    def from_linear(cls, A, B, h=1.0, L=1.0):
        """Wrap a given stable symmetric ``A`` and noise ``B`` (linear drift, ``u* = 0``)."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.asarray(B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        w, S = sym_eig(A)
        if w[-1] >= 0:
            raise StabilityError(f"spectral stability condition violated: max eigenvalue {w[-1]:.6g} >= 0")
        n = A.shape[0]
        return cls(h, A.copy(), np.zeros(n), A.copy(), B, Nonlinearity("linear"), w, S, L, "given")


def _check_dims(N, L):
    if int(N) != N or N < 1:
        raise DomainError(f"N must be a positive integer, got {N}")
    if not L > 0:
        raise DomainError(f"L must be positive, got {L}")


def mesh(N, L):
    """Interior nodes and mesh width."""
    _check_dims(N, L)
    h = L / (N + 1)
    return h * np.arange(1, N + 1), h


def build_laplacian_1d(N, L):
    """Second-order finite difference Laplacian ``(1/h^2) tridiag(1, -2, 1)``."""
    _, h = mesh(N, L)
    main = np.full(N, -2.0 / h ** 2)
    off = np.full(N - 1, 1.0 / h ** 2)
    return np.diag(main) + np.diag(off, 1) + np.diag(off, -1)


def fd_laplacian_eigenvalues(N, L):
    """Closed-form spectrum ``-(4/h^2) sin^2(k pi / (2(N+1)))``, ascending."""
    _, h = mesh(N, L)
    k = np.arange(N, 0, -1)
    return -(4.0 / h ** 2) * np.sin(k * np.pi / (2 * (N + 1))) ** 2


def sine_modes(N, L=None):
    """Orthonormal discrete sine modes as the columns of an ``N x N`` matrix.

    The matrix is symmetric and orthogonal (a scaled DST-I), and column
    ``i-1`` equals ``sqrt(2h/L) sin(i pi x_j / L)``.
    """
    _check_dims(N, 1.0 if L is None else L)
    j = np.arange(1, N + 1)
    return np.sqrt(2.0 / (N + 1)) * np.sin(np.outer(j, j) * np.pi / (N + 1))


def q_eigenvalues(R, gamma):
    """Power-law eigenvalues ``i^(-gamma)`` of the noise covariance."""
    return np.arange(1, R + 1, dtype=float) ** (-float(gamma))


def _newton_jacobian_solve(A_h, d, rhs):
    J = A_h + np.diag(d)
    if bandwidth(J) == 1:
        n = J.shape[0]
        ab = np.zeros((3, n))
        ab[0, 1:] = np.diagonal(J, 1)
        ab[1] = np.diagonal(J)
        ab[2, :-1] = np.diagonal(J, -1)
        return spla.solve_banded((1, 1), ab, rhs)
    return np.linalg.solve(J, rhs)


def newton_steady_state(A_h, f, guess):
    """Newton's method for ``A_h u + f(u) = 0``.

    Converges when ``||A_h u + f(u)||_2 <= 1e-12 sqrt(N)``.  The returned
    state is checked to have a negative definite linearisation.

    Raises
    ------
    SolverError
        No convergence within 50 iterations.
    StabilityError
        Converged to a state whose linearisation is not stable.
    """
    A_h = np.asarray(A_h, dtype=float)
    u = np.array(guess, dtype=float, copy=True)
    n = A_h.shape[0]
    if u.shape != (n,):
        raise DomainError(f"guess must have shape ({n},), got {u.shape}")
    tol = 1e-12 * np.sqrt(n)
    for it in range(NEWTON_MAXITER + 1):
        F = A_h @ u + f.f(u)
        res = np.linalg.norm(F)
        if not np.isfinite(res):
            break
        if res <= tol:
            logger.debug("Newton converged in %d iterations, residual %.3e", it, res)
            linearize(A_h, f, u)
            return u
        if it == NEWTON_MAXITER:
            break
        u = u - _newton_jacobian_solve(A_h, f.df(u), F)
    raise SolverError("steady state not found: Newton did not converge in "
                      f"{NEWTON_MAXITER} iterations")


def linearize(A_h, f, u_star):
    """Linearisation ``A_h + diag(f'(u*))``, verified negative definite."""
    A = np.asarray(A_h, dtype=float) + np.diag(f.df(np.asarray(u_star, dtype=float)))
    A = 0.5 * (A + A.T)
    lam_max = sym_eig(A)[0][-1]
    if lam_max >= 0:
        raise StabilityError("steady state unstable: spectral stability condition violated, "
                             f"max eigenvalue {lam_max:.6g} >= 0")
    return A


def build_noise_factor(spec, N, u_star=None):
    """Truncated Q-Wiener noise factor ``B`` (``N x R``).

    Column ``i`` is ``sqrt(i^-gamma)`` times the ``i``-th discrete sine mode;
    the whole factor is then rescaled to ``||B||_2 = upsilon``.  The noise
    coefficient is evaluated at the steady state and is taken to be a
    constant, so ``u_star`` does not change the result.
    """
    if spec.R > N:
        raise DomainError(f"noise rank R={spec.R} exceeds dimension N={N}")
    S = sine_modes(N, spec.L)
    B = S[:, : spec.R] * np.sqrt(q_eigenvalues(spec.R, spec.gamma))
    return B * (spec.upsilon / np.linalg.norm(B, 2))


def default_guess(spec, N):
    """Zero for the catalog members (all have ``f(0) = 0``)."""
    return np.zeros(N)


def discretize(spec, N, guess=None, method="fd"):
    """Build the linearised system for ``spec`` on ``N`` interior nodes.

    ``method="fd"`` uses finite differences; ``method="spectral"`` uses a
    spectral Galerkin discretisation in the sine basis, which is only
    available around the trivial steady state ``u* = 0``.
    """
    _check_dims(N, spec.L)
    if method == "fd":
        x, h = mesh(N, spec.L)
        A_h = build_laplacian_1d(N, spec.L)
        u0 = default_guess(spec, N) if guess is None else np.asarray(guess, dtype=float)
        u_star = newton_steady_state(A_h, spec.nonlinearity, u0)
        A = linearize(A_h, spec.nonlinearity, u_star)
        B = build_noise_factor(spec, N, u_star)
    elif method == "spectral":
        if guess is not None:
            raise DomainError("spectral Galerkin builder supports only u* = 0")
        h = spec.L / (N + 1)
        k = np.arange(1, N + 1)
        A_h = np.diag(-(k * np.pi / spec.L) ** 2)
        u_star = np.zeros(N)
        A = linearize(A_h, spec.nonlinearity, u_star)
        if spec.R > N:
            raise DomainError(f"noise rank R={spec.R} exceeds dimension N={N}")
        B = np.eye(N)[:, : spec.R] * np.sqrt(q_eigenvalues(spec.R, spec.gamma))
        B *= spec.upsilon / np.linalg.norm(B, 2)
    else:
        raise DomainError(f"unknown discretization method {method!r}")
    w, S = sym_eig(A)
    return DiscretizedSystem(h, A_h, u_star, A, B, spec.nonlinearity, w, S, spec.L, method)
