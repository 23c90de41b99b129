"""Low-rank ADI for ``A V + V A^T + B B^T = 0`` with symmetric stable ``A``.

Only real shifts are used; for symmetric ``A`` the Wachspress shifts are
real and optimal for the spectral interval, and all factors stay real.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .elliptic import EllipticData, jacobi_dn_kprime, modulus_from_nome
from .errors import DomainError, SolverError
from .linalg import SpectralInterval, shifted_factor, spectral_interval

logger = logging.getLogger(__name__)

DEFAULT_MAX_STEPS = 100
DEFAULT_RESIDUAL_TOL = 1e-10
_THETA_GRID = 2001


@dataclass(frozen=True)
class ShiftSet:
    """Ordered strictly negative ADI shifts."""

    shifts: tuple
    source: str = "user"
    interval: SpectralInterval | None = None

    def __post_init__(self):
        if len(self.shifts) == 0:
            raise DomainError("shift set is empty")
        if not all(s < 0 for s in self.shifts):
            raise DomainError(f"all shifts must be negative, got {self.shifts}")
        if self.source not in ("wachspress", "user"):
            raise DomainError(f"unknown shift source {self.source!r}")

    def __len__(self):
        return len(self.shifts)

    def __iter__(self):
        return iter(self.shifts)

    def cyclic(self, steps):
        """First ``steps`` shifts, reusing the set cyclically."""
        return [self.shifts[i % len(self.shifts)] for i in range(steps)]


def _interval_of(interval):
    if isinstance(interval, SpectralInterval):
        return interval
    a, b = interval
    return SpectralInterval(float(a), float(b))


def wachspress_shifts(interval, j):
    """Wachspress shifts ``alpha_i = a dn((2i-1) K / (2j), k)`` for ``i = 1..j``.

    The modulus is set from ``k' = b/a``.  For ``a == b`` all shifts equal ``a``.
    """
    interval = _interval_of(interval)
    if int(j) != j or j < 1:
        raise DomainError(f"number of shifts must be a positive integer, got {j}")
    a, b = interval.a, interval.b
    if a == b:
        return ShiftSet(tuple([a] * j), "wachspress", interval)
    ed = EllipticData.from_kprime(b / a)
    u = (2 * np.arange(1, j + 1) - 1) * ed.K / (2 * j)
    dn = np.atleast_1d(jacobi_dn_kprime(u, ed.k_prime))
    shifts = np.clip(a * dn, a, b)
    return ShiftSet(tuple(float(s) for s in shifts), "wachspress", interval)


def shift_rho(alpha, interval):
    """``max |(z - alpha)/(z + alpha)|`` over ``z`` in the interval.

    For a single real shift the maximum sits at an endpoint.
    """
    interval = _interval_of(interval)
    return max(abs((z - alpha) / (z + alpha)) for z in (interval.a, interval.b))


@dataclass(frozen=True)
class ThetaTable:
    """Per-shift contraction factors and cumulative ADI error factors.

    ``theta[j-1]`` is the maximum over the interval of the modulus of the
    product of the first ``j`` Cayley factors; ``theta_product`` is the
    looser product of the individual ``rho_i``.
    """

    rho: np.ndarray
    theta: np.ndarray
    theta_product: np.ndarray


def _log_factor(logx, alpha):
    z = -np.exp(logx)
    with np.errstate(divide="ignore"):
        return np.log(np.abs((z - alpha) / (z + alpha)))


def theta_bound(shifts, interval):
    """Cumulative ADI error factors ``Theta_1 .. Theta_j`` on a spectral interval.

    ``Theta_j = max_{z in [a, b]} |prod_{i<=j} (z - alpha_i)/(z + alpha_i)|``,
    located on a logarithmic grid in ``-z`` and refined with a bounded
    scalar search around every grid-local maximum.
    """
    interval = _interval_of(interval)
    alphas = [float(s) for s in shifts]
    rho = np.array([shift_rho(al, interval) for al in alphas])
    if interval.a == interval.b:
        z = interval.a
        vals = np.cumprod([abs((z - al) / (z + al)) for al in alphas])
        return ThetaTable(rho, vals, np.cumprod(rho))
    lo, hi = math.log(-interval.b), math.log(-interval.a)
    grid = np.linspace(lo, hi, _THETA_GRID)
    acc = np.zeros_like(grid)
    theta = np.empty(len(alphas))
    for j, al in enumerate(alphas):
        acc = acc + _log_factor(grid, al)
        prefix = alphas[: j + 1]

        def g(s, prefix=prefix):
            return float(sum(_log_factor(np.array([s]), p)[0] for p in prefix))

        best = float(np.max(acc))
        if grid.size > 2:
            interior = np.flatnonzero((acc[1:-1] >= acc[:-2]) & (acc[1:-1] >= acc[2:])) + 1
            for i in interior:
                if not np.isfinite(acc[i]):
                    continue
                res = optimize.minimize_scalar(
                    lambda s: -g(s), bounds=(grid[i - 1], grid[i + 1]),
                    method="bounded", options={"xatol": 1e-13})
                best = max(best, -res.fun)
        theta[j] = math.exp(best)
    return ThetaTable(rho, theta, np.cumprod(rho))


def theoretical_error_bound(interval, j):
    """Relative error factor ``((1 - sqrt(k'_j)) / (1 + sqrt(k'_j)))^2`` after ``j`` steps.

    ``k'_j`` belongs to the nome ``q^j`` of the interval.  Multiply by
    ``||V_*||_2`` to bound ``||V_j - V_*||_2``.
    """
    interval = _interval_of(interval)
    if int(j) != j or j < 1:
        raise DomainError(f"step count must be a positive integer, got {j}")
    if interval.a == interval.b:
        return 0.0
    ed = EllipticData.from_kprime(interval.k_prime)
    skj = math.sqrt(modulus_from_nome(ed.q ** j))
    return ((1.0 - skj) / (1.0 + skj)) ** 2


@dataclass
class LowRankSolution:
    """Result of an LR-ADI run; ``V_j = Z Z^T``."""

    Z: np.ndarray
    W: np.ndarray
    steps: int
    shifts_used: list
    residual_history: list = field(default_factory=list)
    theta_history: np.ndarray | None = None
    B_norm2: float = 1.0

    @property
    def V(self):
        return self.Z @ self.Z.T

    @property
    def relative_residual(self):
        return self.residual_history[-1] / self.B_norm2 if self.residual_history else 1.0


def lr_adi_run(A, B, shifts, max_steps=DEFAULT_MAX_STEPS,
               residual_tol=DEFAULT_RESIDUAL_TOL, interval=None):
    """Run the low-rank ADI iteration.

    Starting from ``W_0 = B`` each step solves ``(A + alpha_j I) H_j = W_{j-1}``,
    updates ``W_j = W_{j-1} - 2 alpha_j H_j`` and appends ``sqrt(-2 alpha_j) H_j``
    to ``Z``.  The residual ``A V_j + V_j A^T + B B^T`` equals ``W_j W_j^T``,
    so its spectral norm ``||W_j||_2^2`` is tracked without forming it.

    Parameters
    ----------
    A : (n, n) array_like
        Symmetric negative definite matrix.
    B : (n, R) array_like
        Right-hand side factor.
    shifts : ShiftSet or sequence of float
        Reused cyclically if ``max_steps`` exceeds their number.
    max_steps : int
        Upper bound on the number of steps.
    residual_tol : float
        Stop once ``||W_j||_2^2 / ||B||_2^2 <= residual_tol``.
    interval : SpectralInterval, optional
        Used for the ``Theta`` history; taken from a Wachspress shift set or
        computed from ``A`` if omitted.
    """
    if not isinstance(shifts, ShiftSet):
        shifts = ShiftSet(tuple(float(s) for s in shifts))
    A = np.asarray(A, dtype=float)
    W = np.array(B, dtype=float, copy=True)
    if W.ndim == 1:
        W = W[:, None]
    if W.shape[0] != A.shape[0]:
        raise DomainError(f"B has {W.shape[0]} rows, A has dimension {A.shape[0]}")
    nB2 = float(np.linalg.norm(W, 2)) ** 2
    if nB2 == 0.0:
        raise DomainError("B must be nonzero")
    if int(max_steps) != max_steps or max_steps < 1:
        raise DomainError(f"max_steps must be a positive integer, got {max_steps}")

    solvers = {}
    blocks = []
    used = []
    history = []
    for step in range(int(max_steps)):
        alpha = shifts.shifts[step % len(shifts)]
        if alpha not in solvers:
            solvers[alpha] = shifted_factor(A, alpha)
        H = solvers[alpha](W)
        W = W - 2.0 * alpha * H
        blocks.append(math.sqrt(-2.0 * alpha) * H)
        used.append(alpha)
        res = float(np.linalg.norm(W, 2)) ** 2
        if not np.isfinite(res):
            raise SolverError(f"iteration diverged at step {step + 1}")
        history.append(res)
        logger.debug("LR-ADI step %d alpha=%.6g rel. residual %.3e", step + 1, alpha, res / nB2)
        if res / nB2 <= residual_tol:
            break

    if interval is None:
        interval = shifts.interval if shifts.interval is not None else spectral_interval(A)
    theta = theta_bound(used, interval).theta
    return LowRankSolution(np.hstack(blocks), W, len(used), used, history, theta, nB2)
