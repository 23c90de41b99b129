"""Singular value decay bounds for Lyapunov solutions and relaxation rates."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .elliptic import EllipticData, modulus_from_nome
from .errors import DomainError
from .linalg import SpectralInterval, dense_lyapunov, spectral_interval, sym_eig

# Absolute slack, relative to sigma_1, allowed for round-off in the dense solve
ROUNDOFF_SLACK = 1e-12


def penzl_bound(kappa, p, R=1):
    """Relative bound on ``sigma_{R p + 1}(V_*) / sigma_1(V_*)`` from the condition number.

    ``(prod_{i=0}^{p-1} (kappa^((2i+1)/(2p)) - 1) / (kappa^((2i+1)/(2p)) + 1))^2``.
    ``R`` only fixes which singular value is bounded.
    """
    kappa = float(kappa)
    if not kappa >= 1:
        raise DomainError(f"condition number must be >= 1, got {kappa}")
    if int(p) != p or p < 1:
        raise DomainError(f"p must be a positive integer, got {p}")
    e = (2 * np.arange(p) + 1) / (2.0 * p)
    t = kappa ** e
    return float(np.prod((t - 1.0) / (t + 1.0)) ** 2)


def sabino_bound(interval, r, R=1):
    """Relative bound on ``sigma_{R r + 1}(V_*) / sigma_1(V_*)`` from elliptic data.

    With ``k' = b/a``, nome ``q`` and ``k'_r`` belonging to ``q^r`` the bound
    is ``((1 - sqrt(k'_r)) / (1 + sqrt(k'_r)))^2``; it is 0 when ``a == b``.
    """
    if not isinstance(interval, SpectralInterval):
        interval = SpectralInterval(*map(float, interval))
    if int(r) != r or r < 1:
        raise DomainError(f"r must be a positive integer, got {r}")
    if interval.a == interval.b:
        return 0.0
    q = EllipticData.from_kprime(interval.k_prime).q
    s = math.sqrt(modulus_from_nome(q ** r))
    return ((1.0 - s) / (1.0 + s)) ** 2


@dataclass
class DecayReport:
    """Singular values of ``V_*`` next to both decay bounds.

    ``index[m]`` is the 1-based index ``R r + 1`` bounded by ``penzl[m]`` and
    ``sabino[m]`` (relative to ``sigma_1``) for ``r = m + 1``.
    """

    singular_values: np.ndarray
    index: np.ndarray
    penzl: np.ndarray
    sabino: np.ndarray
    R: int
    kappa: float
    violations: list

    @property
    def ok(self):
        return not self.violations

    def rows(self):
        s1 = self.singular_values[0]
        for i, p, s in zip(self.index, self.penzl, self.sabino):
            yield int(i), float(self.singular_values[i - 1] / s1), float(p), float(s)

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "sigma_i", "sigma_i_rel", "penzl", "sabino"])
        for i, rel, p, s in self.rows():
            w.writerow([i, repr(float(self.singular_values[i - 1])), repr(rel), repr(p), repr(s)])


def verify_decay(A, B, max_dim=1000):
    """Check both singular value bounds against the dense solution of the Lyapunov equation.

    Every admissible ``r`` (``R r + 1 <= N``) is tested; an inequality
    counts as violated only if it fails by more than ``ROUNDOFF_SLACK``
    times ``sigma_1``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    N = A.shape[0]
    if N > max_dim:
        raise DomainError(f"verify_decay is a dense check limited to N <= {max_dim}, got N = {N}")
    R = B.shape[1]
    interval = spectral_interval(A)
    V = dense_lyapunov(A, B)
    sigma = np.clip(np.sort(np.linalg.eigvalsh(V))[::-1], 0.0, None)
    s1 = sigma[0]
    rs = np.arange(1, (N - 1) // R + 1)
    index = R * rs + 1
    penzl = np.array([penzl_bound(interval.kappa, r) for r in rs])
    sabino = np.array([sabino_bound(interval, r) for r in rs])
    violations = []
    for i, p, s in zip(index, penzl, sabino):
        lhs = sigma[i - 1]
        if lhs > s1 * p + ROUNDOFF_SLACK * s1:
            violations.append(("penzl", int(i), float(lhs / s1), float(p)))
        if lhs > s1 * s + ROUNDOFF_SLACK * s1:
            violations.append(("sabino", int(i), float(lhs / s1), float(s)))
    return DecayReport(sigma, index, penzl, sabino, R, interval.kappa, violations)


def decay_rate_spectral(A):
    """Relaxation exponent ``min_i |lambda_i(A)|`` of the covariance ODE."""
    return -spectral_interval(A).b


def decay_rate_H(A):
    """Relaxation exponent ``2 / ||H||_2`` with ``A H + H A^T + 2 I = 0``."""
    A = np.asarray(A, dtype=float)
    H = dense_lyapunov(A, math.sqrt(2.0) * np.eye(A.shape[0]))
    return 2.0 / float(np.max(np.abs(sym_eig(H)[0])))
