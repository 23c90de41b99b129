"""Dense symmetric linear algebra used by the solvers and the oracles.

Matrices are plain 2-D numpy arrays.  "Symmetric" arguments are checked
to be symmetric up to round-off; negative definiteness is checked where
an operation relies on it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as spla

from .errors import DomainError, SolverError, StabilityError

BANDED_MAX_BANDWIDTH = 5


@dataclass(frozen=True)
class SpectralInterval:
    """Interval ``[a, b]`` containing the spectrum of a stable symmetric matrix.

    ``a`` is the most negative eigenvalue and ``b`` the least negative one.
    """

    a: float
    b: float

    def __post_init__(self):
        if not (self.a <= self.b):
            raise DomainError(f"need a <= b, got a={self.a}, b={self.b}")
        if not (self.b < 0):
            raise StabilityError(f"operator not stable: b = {self.b} >= 0")

    @property
    def kappa(self):
        return self.a / self.b

    @property
    def k_prime(self):
        """Complementary modulus ``b/a = 1/kappa``."""
        return self.b / self.a


def _as_square(M, name="M"):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DomainError(f"{name} must be square, got shape {M.shape}")
    return M


def _as_symmetric(M, name="M"):
    M = _as_square(M, name)
    scale = np.max(np.abs(M)) if M.size else 0.0
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-12 * max(scale, 1e-300):
        raise DomainError(f"{name} is not symmetric")
    return M


def _as_tall(W, n, name="W"):
    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    if W.ndim != 2 or W.shape[0] != n or W.shape[1] < 1:
        raise DomainError(f"{name} must have shape ({n}, c) with c >= 1, got {W.shape}")
    return W


def sym_eig(M):
    """Eigendecomposition of a symmetric matrix.

    Returns
    -------
    w : (n,) ndarray
        Eigenvalues in ascending order.
    S : (n, n) ndarray
        Orthonormal eigenvectors, ``M @ S[:, i] = w[i] * S[:, i]``.
    """
    M = _as_symmetric(M)
    return np.linalg.eigh(M)


def spectral_interval(A):
    """Extreme eigenvalues ``(a, b)`` of a symmetric negative definite matrix."""
    w = sym_eig(A)[0]
    if w[-1] >= 0:
        raise StabilityError(f"operator not stable: max eigenvalue {w[-1]:.6g} >= 0")
    return SpectralInterval(float(w[0]), float(w[-1]))


def bandwidth(A):
    """Lower bandwidth of a square matrix (0 for diagonal)."""
    rows, cols = np.nonzero(A)
    if rows.size == 0:
        return 0
    return int(np.max(np.abs(rows - cols)))


def shifted_factor(A, alpha):
    """Factor ``-(A + alpha I)`` once and return a solver for ``(A + alpha I) H = W``.

    Banded Cholesky is used when the bandwidth is at most
    ``BANDED_MAX_BANDWIDTH``, dense Cholesky otherwise.
    """
    A = _as_symmetric(A, "A")
    n = A.shape[0]
    P = -(A + alpha * np.eye(n))
    bw = bandwidth(A)
    try:
        if bw <= BANDED_MAX_BANDWIDTH:
            ab = np.zeros((bw + 1, n))
            for d in range(bw + 1):
                ab[d, : n - d] = np.diagonal(P, -d)
            cb = spla.cholesky_banded(ab, lower=True)

            def solve(W):
                return -spla.cho_solve_banded((cb, True), W)
        else:
            cf = spla.cho_factor(P, lower=True)

            def solve(W):
                return -spla.cho_solve(cf, W)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(
            f"shifted operator not definite for alpha={alpha!r}: {exc}") from exc
    return solve


def shifted_solve(A, alpha, W):
    """Solve ``(A + alpha I) H = W`` for negative definite ``A`` and ``alpha < 0``."""
    A = _as_square(A, "A")
    W = _as_tall(W, A.shape[0])
    return shifted_factor(A, alpha)(W)


def spectral_norm(M, tol=1e-10, maxiter=200_000):
    """Spectral norm ``max |lambda_i|`` of a symmetric matrix by power iteration.

    The iteration runs on ``M^2`` so that eigenvalues of equal modulus and
    opposite sign do not make it oscillate.  The start vector is fixed, so
    the result is deterministic.  Iteration stops once the residual of the
    ``M^2`` eigenpair falls below ``tol`` relative to the current estimate.
    """
    M = _as_symmetric(M)
    n = M.shape[0]
    if n == 0 or not np.any(M):
        return 0.0
    v = np.random.default_rng(12345).standard_normal(n)
    v /= np.linalg.norm(v)
    for _ in range(maxiter):
        Mv = M @ v
        w = M @ Mv
        theta2 = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        if np.linalg.norm(w - theta2 * v) <= tol * theta2:
            return float(np.sqrt(theta2))
        v = w / nw
    raise SolverError(f"power iteration did not converge in {maxiter} steps")


def dense_lyapunov(A, B):
    """Solve ``A V + V A^T + B B^T = 0`` for symmetric negative definite ``A``.

    Works in the eigenbasis of ``A``: with ``A = S diag(w) S^T`` and
    ``C = S^T B B^T S`` the solution is ``V = S X S^T`` where
    ``X_ij = -C_ij / (w_i + w_j)``.
    """
    A = _as_symmetric(A, "A")
    B = _as_tall(B, A.shape[0], "B")
    w, S = np.linalg.eigh(A)
    if w[-1] >= 0:
        raise StabilityError(f"operator not stable: max eigenvalue {w[-1]:.6g} >= 0")
    F = S.T @ B
    X = -(F @ F.T) / (w[:, None] + w[None, :])
    V = S @ X @ S.T
    return 0.5 * (V + V.T)


def truncated_svd_of_factor(Z, r):
    """Singular values of ``Z Z^T`` and its best rank-``r`` factor.

    Computed from the small Gram matrix ``Z^T Z``, so the cost is linear in
    the row dimension.

    Returns
    -------
    sigma : (c,) ndarray
        Nonzero part of the spectrum of ``Z Z^T``, descending.  All further
        singular values are exactly zero.
    Zr : (n, r) ndarray
        Factor with ``Zr Zr^T`` the best rank-``r`` approximation of ``Z Z^T``.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2:
        raise DomainError(f"Z must be 2-D, got shape {Z.shape}")
    c = Z.shape[1]
    if not (1 <= r <= c):
        raise DomainError(f"rank r must lie in [1, {c}], got {r}")
    w, U = np.linalg.eigh(Z.T @ Z)
    order = np.argsort(w)[::-1]
    w = np.clip(w[order], 0.0, None)
    U = U[:, order]
    return w, Z @ U[:, :r]
