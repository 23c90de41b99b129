"""Monte Carlo and ODE validators for the linearisation and relaxation stages.

Paths are simulated in fluctuation coordinates ``z = u - u*`` with the
Euler-Maruyama scheme.  The nonlinear drift is split as

    F(u* + z) = script_A z + R(z) + F(u*),

where ``R`` is the closed-form remainder of the reaction term and
``F(u*)`` the (round-off sized) steady state residual.  For the linear
catalog member both extra terms vanish identically, so coupled linear and
nonlinear runs produce bitwise identical paths.

Seeding contract: paths are grouped into blocks of ``BLOCK_SIZE``; block
``b`` draws all its Gaussian increments from a Philox stream keyed by
``(seed, b)``, in step order.  Results therefore do not depend on the
order in which blocks are processed, and per-block moments are combined
by pairwise summation.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DomainError, SolverError
from .linalg import dense_lyapunov, sym_eig

logger = logging.getLogger(__name__)

BLOCK_SIZE = 1000
MAX_OUTPUT_POINTS = 200


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings.

    ``dt=None`` selects ``0.1 / max|lambda(script_A)|``.  ``init_scale``
    sets the initial fluctuation law ``N(0, init_scale * V_*)``; the
    default 0 starts every path at the steady state.
    """

    T: float = 1.0
    dt: float | None = None
    M: int = 1000
    seed: int = 0
    init_scale: float = 0.0

    def __post_init__(self):
        if not self.T > 0:
            raise DomainError(f"T must be positive, got {self.T}")
        if self.dt is not None and not (0 < self.dt <= self.T):
            raise DomainError(f"dt must satisfy 0 < dt <= T, got dt={self.dt}, T={self.T}")
        if int(self.M) != self.M or self.M < 2:
            raise DomainError(f"M must be an integer >= 2, got {self.M}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise DomainError(f"seed must be a nonnegative integer, got {self.seed}")
        if not self.init_scale >= 0:
            raise DomainError(f"init_scale must be nonnegative, got {self.init_scale}")

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class CovarianceTrajectory:
    """Covariance matrices on a time grid, optionally with path statistics."""

    times: np.ndarray
    matrices: np.ndarray
    source: str
    means: np.ndarray | None = None
    mean_norm: np.ndarray | None = None
    second_moment: np.ndarray | None = None
    max_abs: float | None = None
    M: int | None = None

    def norms(self):
        """Spectral norm of each covariance matrix."""
        return np.array([_sym_norm(C) for C in self.matrices])

    def write_csv(self, fh, reference=None):
        """One row per time: ``t, ||Cov||_2`` and, if given, ``||Cov - reference||_2``."""
        w = csv.writer(fh, lineterminator="\n")
        header = ["t", "cov_norm"] + (["err_to_reference"] if reference is not None else [])
        w.writerow(header)
        for t, C in zip(self.times, self.matrices):
            row = [repr(float(t)), repr(_sym_norm(C))]
            if reference is not None:
                row.append(repr(_sym_norm(C - reference)))
            w.writerow(row)


def _sym_norm(C):
    return float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (C + C.T))), initial=0.0))


class _PairwiseSum:
    """Pairwise (binary tree) reduction of a stream of arrays."""

    def __init__(self):
        self._stack = []

    def add(self, x):
        level = 0
        while self._stack and self._stack[-1][0] == level:
            _, y = self._stack.pop()
            x = y + x
            level += 1
        self._stack.append((level, x))

    def total(self):
        out = None
        for _, x in reversed(self._stack):
            out = x if out is None else x + out
        return out


def _time_grid(sys, cfg):
    """Step size, step count and output steps (uniform, at most ``MAX_OUTPUT_POINTS``)."""
    lam_max = sys.norm_A
    dt = cfg.dt if cfg.dt is not None else 0.1 / lam_max
    n_steps = max(1, math.ceil(cfg.T / dt - 1e-9))
    stride = math.ceil(n_steps / (MAX_OUTPUT_POINTS - 1))
    n_steps = stride * math.ceil(n_steps / stride)
    dt = cfg.T / n_steps
    if dt * lam_max >= 1.0:
        raise DomainError(f"step size violates stability: dt*max|lambda| = {dt * lam_max:.3g} >= 1")
    return dt, n_steps, np.arange(0, n_steps + 1, stride)


def _initial_factor(sys, cfg):
    if cfg.init_scale == 0:
        return None
    w, S = sym_eig(dense_lyapunov(sys.script_A, sys.B))
    return S * np.sqrt(cfg.init_scale * np.clip(w, 0.0, None))


def _simulate(sys, cfg, kinds):
    # overflow in a diverging path is detected explicitly at the next output point
    with np.errstate(over="ignore", invalid="ignore"):
        return _simulate_inner(sys, cfg, kinds)


def _simulate_inner(sys, cfg, kinds):
    dt, n_steps, out_steps = _time_grid(sys, cfg)
    A = sys.script_A
    B = sys.B
    N, R = B.shape
    nl = sys.nonlinearity
    u_star = sys.u_star
    F_star = sys.A_h @ u_star + nl.f(u_star)
    add_extra = not nl.is_linear or bool(np.any(F_star))
    sqdt = math.sqrt(dt)
    init = _initial_factor(sys, cfg)
    n_out = out_steps.size
    is_out = np.zeros(n_steps + 1, dtype=bool)
    is_out[out_steps] = True

    sums = {k: [_PairwiseSum() for _ in range(4)] for k in kinds}
    max_abs = {k: 0.0 for k in kinds}

    n_blocks = math.ceil(cfg.M / BLOCK_SIZE)
    for blk in range(n_blocks):
        m = min(BLOCK_SIZE, cfg.M - blk * BLOCK_SIZE)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg.seed, blk])))
        z0 = np.zeros((N, m)) if init is None else init @ rng.standard_normal((N, m))
        state = {k: z0.copy() for k in kinds}
        acc = {k: (np.zeros((n_out, N)), np.zeros((n_out, N, N)), np.zeros(n_out), np.zeros(n_out))
               for k in kinds}
        o = 0
        for step in range(n_steps + 1):
            if is_out[step]:
                for k in kinds:
                    z = state[k]
                    if not np.all(np.isfinite(z)):
                        raise SolverError(f"path diverged ({k}) at t = {step * dt:.6g}")
                    s1, s2, n1, n2 = acc[k]
                    s1[o] = z.sum(axis=1)
                    s2[o] = z @ z.T
                    nrm2 = np.einsum("ij,ij->j", z, z)
                    n1[o] = np.sqrt(nrm2).sum()
                    n2[o] = nrm2.sum()
                    max_abs[k] = max(max_abs[k], float(np.max(np.abs(z), initial=0.0)))
                o += 1
            if step == n_steps:
                break
            noise = B @ (sqdt * rng.standard_normal((R, m)))
            for k in kinds:
                z = state[k]
                drift = A @ z
                if k == "mc_nonlinear" and add_extra:
                    drift = drift + nl.remainder(u_star, z) + F_star[:, None]
                state[k] = z + dt * drift + noise
        for k in kinds:
            for s, a in zip(sums[k], acc[k]):
                s.add(a)

    times = cfg.T * out_steps / n_steps
    M = cfg.M
    out = {}
    for k in kinds:
        s1, s2, n1, n2 = (s.total() for s in sums[k])
        mean = s1 / M
        cov = (s2 - M * np.einsum("ti,tj->tij", mean, mean)) / (M - 1)
        cov = 0.5 * (cov + np.transpose(cov, (0, 2, 1)))
        out[k] = CovarianceTrajectory(times, cov, k, mean, n1 / M, n2 / M, max_abs[k], M)
    return out


def simulate_nonlinear(sys, cfg):
    """Sample covariances of the nonlinear SODE ``dz = F(z) dt + B dW``."""
    return _simulate(sys, cfg, ("mc_nonlinear",))["mc_nonlinear"]


def simulate_linear(sys, cfg):
    """Sample covariances of the linearised OU process ``dZ = script_A Z dt + B dW``."""
    return _simulate(sys, cfg, ("mc_linear",))["mc_linear"]


def simulate_coupled(sys, cfg):
    """Nonlinear and linear runs driven by the same increments, in one pass.

    Returns ``(nonlinear, linear)``; identical to calling the two single
    simulators with the same configuration.
    """
    out = _simulate(sys, cfg, ("mc_nonlinear", "mc_linear"))
    return out["mc_nonlinear"], out["mc_linear"]


def ode_covariance(sys, V0, T, steps):
    """Integrate ``dV/dt = A V + V A^T + B B^T`` with classical RK4.

    ``steps`` fixes the output grid ``t_k = k T / steps``.  Each output
    interval is split into substeps so that the step times the largest
    eigenvalue modulus of the Lyapunov operator stays below 2 (RK4
    stability).  The iterate is symmetrised after every substep.
    """
    if int(steps) != steps or steps < 1:
        raise DomainError(f"steps must be a positive integer, got {steps}")
    A = sys.script_A
    N = A.shape[0]
    V = np.array(V0, dtype=float, copy=True).reshape(N, N)
    Q = sys.B @ sys.B.T
    h_out = T / steps
    n_sub = max(1, math.ceil(h_out * 2.0 * sys.norm_A / 2.0))
    h = h_out / n_sub

    def rhs(X):
        AX = A @ X
        return AX + AX.T + Q

    out = np.empty((steps + 1, N, N))
    out[0] = V
    for k in range(1, steps + 1):
        for _ in range(n_sub):
            k1 = rhs(V)
            k2 = rhs(V + 0.5 * h * k1)
            k3 = rhs(V + 0.5 * h * k2)
            k4 = rhs(V + h * k3)
            V = V + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            V = 0.5 * (V + V.T)
        out[k] = V
    return CovarianceTrajectory(np.linspace(0.0, T, steps + 1), out, "ode_exact")


def fit_exponential_rate(times, values, floor=0.0):
    """Least-squares rate ``c`` in ``values ~ C exp(-c t)``.

    Points with ``values <= floor`` are ignored.  Returns ``(c, C)``.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = values > floor
    if keep.sum() < 2:
        raise DomainError("need at least two points above the floor to fit a rate")
    slope, icpt = np.polyfit(times[keep], np.log(values[keep]), 1)
    return float(-slope), float(math.exp(icpt))


@dataclass(frozen=True)
class EtaIngredients:
    """Constants entering the linearisation error function ``eta``."""

    C_F: float
    C_G: float
    norm_A: float
    remainder_lipschitz: float
    radius: float
    upsilon: float
    lipschitz_form: str


@dataclass
class EtaEstimate:
    ingredients: EtaIngredients
    times: np.ndarray
    eta_max: np.ndarray
    eta_star: np.ndarray
    mean_norm: np.ndarray
    second_moment: np.ndarray


def estimate_eta(sys, traj, C_G=0.0, lipschitz="remainder"):
    """Assemble ``eta_ij(t)``, its maximum over ``(i, j)`` and the running integral ``eta*``.

    The computation happens in the eigenbasis of ``script_A`` (where it is
    diagonal).  With ``c_i = L (|mu_i| E||z|| + E||z||^2) / |lambda_i|``:

        eta_ii = c_i + C_G upsilon^2,   eta_ij = c_i + c_j + C_G upsilon^2,

    and ``eta*(t) = int_0^t max_ij eta_ij(s) ds`` by the trapezoid rule.

    ``L`` is the Lipschitz constant of the drift remainder on the sampled
    ball.  ``lipschitz="remainder"`` uses the sharp value from the reaction
    term catalog (zero for linear drift); ``lipschitz="crude"`` uses the
    cruder ``||script_A|| + C_F``.  ``C_G`` defaults to 0 because the noise
    coefficient is frozen at the steady state.
    """
    if traj.means is None or traj.mean_norm is None or traj.second_moment is None:
        raise DomainError("trajectory carries no path statistics; use a Monte Carlo trajectory")
    if lipschitz not in ("remainder", "crude"):
        raise DomainError(f"unknown lipschitz form {lipschitz!r}")
    lam = np.abs(sys.eigenvalues)
    S = sys.eigenvectors
    radius = float(traj.max_abs)
    nl = sys.nonlinearity
    C_F = nl.lipschitz(float(np.max(np.abs(sys.u_star), initial=0.0)) + radius)
    norm_A = sys.norm_A
    if lipschitz == "remainder":
        L = nl.remainder_lipschitz(sys.u_star, radius)
    else:
        L = norm_A + C_F
    ups = sys.upsilon
    mu = np.abs(traj.means @ S)
    c = L * (mu * traj.mean_norm[:, None] + traj.second_moment[:, None]) / lam[None, :]
    c_sorted = np.sort(c, axis=1)
    eta_diag = c_sorted[:, -1]
    eta_off = c_sorted[:, -1] + c_sorted[:, -2] if c.shape[1] > 1 else eta_diag
    eta_max = np.maximum(eta_diag, eta_off) + C_G * ups ** 2
    eta_star = integrate.cumulative_trapezoid(eta_max, traj.times, initial=0.0)
    ing = EtaIngredients(C_F, C_G, norm_A, L, radius, ups, lipschitz)
    return EtaEstimate(ing, traj.times, eta_max, eta_star, traj.mean_norm, traj.second_moment)


def _fit_constant(measured, envelope):
    """Smallest ``C`` with ``measured <= C * envelope`` on the grid."""
    pos = envelope > 0
    if np.any(measured[~pos] > 0):
        return math.inf
    if not np.any(pos):
        return 0.0
    return float(np.max(measured[pos] / envelope[pos], initial=0.0))


@dataclass
class GapReport:
    """Measured linearisation gap and the two fitted exponential envelopes.

    ``envelope_m`` decays like ``exp(-t min|lambda|)`` and
    ``envelope_2m`` like ``exp(-2 t min|lambda|)``; ``C_m`` and
    ``C_2m`` are the a-posteriori constants making each one an upper
    bound on the grid.
    """

    times: np.ndarray
    gap: np.ndarray
    eta_star: np.ndarray | None
    envelope_m: np.ndarray | None = None
    envelope_2m: np.ndarray | None = None
    C_m: float | None = None
    C_2m: float | None = None
    initial_gap: float = 0.0

    @property
    def bound_m(self):
        return None if self.C_m is None else self.C_m * self.envelope_m

    @property
    def bound_2m(self):
        return None if self.C_2m is None else self.C_2m * self.envelope_2m

    @property
    def sup_gap(self):
        return float(np.max(self.gap))

    def flags(self):
        """Which envelopes hold with a unit constant."""
        return {"m": self.C_m is not None and self.C_m <= 1.0,
                "2m": self.C_2m is not None and self.C_2m <= 1.0}

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "gap", "eta_star", "bound_m", "bound_2m"])
        bt, bl = self.bound_m, self.bound_2m
        for i, t in enumerate(self.times):
            w.writerow([repr(float(t)), repr(float(self.gap[i])),
                        "" if self.eta_star is None else repr(float(self.eta_star[i])),
                        "" if bt is None else repr(float(bt[i])),
                        "" if bl is None else repr(float(bl[i]))])


def linearization_gap(nl, lin, eta=None, min_abs_eig=None):
    """``||Cov_nl(t) - Cov_lin(t)||_2`` with optional fitted bound curves.

    When ``eta`` (from :func:`estimate_eta`) and ``min_abs_eig`` are given,
    both envelopes ``[d0 + eta*(t)] exp(-t m)`` and ``[d0 + eta*(t)] exp(-2 t m)``
    are evaluated with ``d0 = ||Cov_nl(0) - Cov_lin(0)||_2`` and their
    minimal constants fitted.
    """
    if nl.times.shape != lin.times.shape or not np.array_equal(nl.times, lin.times):
        raise DomainError("trajectories are on different time grids")
    if nl.matrices.shape != lin.matrices.shape:
        raise DomainError("trajectories have different dimensions")
    gap = np.array([_sym_norm(a - b) for a, b in zip(nl.matrices, lin.matrices)])
    rep = GapReport(nl.times, gap, None, initial_gap=float(gap[0]))
    if eta is None:
        return rep
    if min_abs_eig is None:
        raise DomainError("min_abs_eig is required to evaluate the envelopes")
    if not np.array_equal(eta.times, nl.times):
        raise DomainError("eta estimate is on a different time grid")
    base = rep.initial_gap + eta.eta_star
    rep.eta_star = eta.eta_star
    rep.envelope_m = base * np.exp(-nl.times * min_abs_eig)
    rep.envelope_2m = base * np.exp(-2.0 * nl.times * min_abs_eig)
    rep.C_m = _fit_constant(gap, rep.envelope_m)
    rep.C_2m = _fit_constant(gap, rep.envelope_2m)
    return rep
