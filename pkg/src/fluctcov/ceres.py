"""Combined error budget over the four pipeline stages.

Stages: (S1) spatial discretisation, (S2) linearisation, (S3) relaxation
to the stationary covariance and (S4) the low-rank ADI solve.  Bound
constants that the theory leaves unspecified are fitted a posteriori as
the smallest values that make each bound hold on the computed data.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .bounds import ROUNDOFF_SLACK, decay_rate_H, decay_rate_spectral
from .discretize import discretize, sine_modes
from .errors import DomainError
from .linalg import dense_lyapunov
from .lradi import theoretical_error_bound
from .mc import _fit_constant, _sym_norm

logger = logging.getLogger(__name__)

TERMS = ("err_s1", "err_s2", "err_s3", "err_s4")


def modal_covariance(sys):
    """Stationary covariance in the discrete sine basis, ``S^T V_* S``.

    With noise modes built from orthonormal sine vectors this matrix
    approximates the covariance of the continuous sine coefficients, so
    levels of different size can be compared entry by entry.
    """
    V = dense_lyapunov(sys.script_A, sys.B)
    if sys.method == "spectral":
        return V
    S = sine_modes(sys.N, sys.L)
    X = S.T @ V @ S
    return 0.5 * (X + X.T)


def _padded_diff(X, Xref):
    n = X.shape[0]
    D = Xref.copy()
    D[:n, :n] -= X
    return D


@dataclass
class OrderStudy:
    """Refinement study of the stationary covariance against a fine reference.

    ``errors`` are Hilbert-Schmidt (Frobenius) norms of the modal
    covariance error, ``errors_spectral`` the matching spectral norms.
    ``order`` and ``C_d_lsq`` come from a least-squares fit of
    ``log error`` against ``log h``; ``C_d`` is the smallest constant with
    ``error <= C_d h^(1+r)`` at every level.
    """

    levels: tuple
    h: np.ndarray
    errors: np.ndarray
    errors_spectral: np.ndarray
    order: float
    C_d_lsq: float
    r: float
    C_d: float
    ratios: np.ndarray
    conclusive: bool
    reference_N: int
    reference: np.ndarray = field(repr=False)
    message: str = ""

    def bound(self, h):
        return self.C_d * h ** (1.0 + self.r)

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "h", "err_hs", "err_2"])
        for N, h, e, e2 in zip(self.levels, self.h, self.errors, self.errors_spectral):
            w.writerow([N, repr(float(h)), repr(float(e)), repr(float(e2))])


def galerkin_order_study(spec, levels, reference=801, method="fd"):
    """Observed convergence order of the stationary covariance under mesh refinement.

    Parameters
    ----------
    spec : ProblemSpec
    levels : sequence of int
        At least three interior node counts, coarsest first.
    reference : int
        Node count of the reference solution; at least twice the finest level.
    method : {"fd", "spectral"}

    Returns
    -------
    OrderStudy
        A non-monotone error sequence is reported through
        ``conclusive=False``, not raised.
    """
    levels = tuple(int(n) for n in levels)
    if len(levels) < 3:
        raise DomainError(f"need at least 3 levels, got {len(levels)}")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise DomainError(f"levels must be strictly increasing, got {levels}")
    if reference < 2 * levels[-1]:
        raise DomainError(f"reference N={reference} must be at least twice the finest level {levels[-1]}")
    Xref = modal_covariance(discretize(spec, reference, method=method))
    h, err, err2 = [], [], []
    for N in levels:
        sys = discretize(spec, N, method=method)
        D = _padded_diff(modal_covariance(sys), Xref)
        h.append(sys.h)
        err.append(float(np.linalg.norm(D, "fro")))
        err2.append(_sym_norm(D))
    h, err, err2 = np.array(h), np.array(err), np.array(err2)
    conclusive = bool(np.all(np.diff(err) < 0) and np.all(err > 0))
    if np.all(err > 0):
        slope, icpt = np.polyfit(np.log(h), np.log(err), 1)
        order, C_lsq = float(slope), float(math.exp(icpt))
    else:
        order, C_lsq = math.nan, math.nan
    msg = "" if conclusive else "refinement study inconclusive"
    if msg:
        logger.warning("%s: errors %s", msg, err)
    r = 0.0 if not np.isfinite(order) else min(max(order - 1.0, 0.0), np.nextafter(1.0, 0.0))
    C_d = float(np.max(err / h ** (1.0 + r)))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = err[:-1] / err[1:]
    return OrderStudy(levels, h, err, err2, order, C_lsq, r, C_d, ratios,
                      conclusive, reference, Xref, msg)


@dataclass
class BudgetTerm:
    bound: float
    measured: float
    details: dict = field(default_factory=dict)


@dataclass
class CeresBudget:
    """Four-term error budget with per-term bounds and measured values.

    ``total_bound`` is the sum of the four per-term suprema;
    ``sup_of_sum_bound`` is the supremum over time of the summed bound
    curves, which can only be smaller.  ``total_measured`` is the supremum
    over time of the summed measured errors.
    """

    err_s1: BudgetTerm
    err_s2: BudgetTerm
    err_s3: BudgetTerm
    err_s4: BudgetTerm
    total_bound: float
    sup_of_sum_bound: float
    total_measured: float
    V_star_norm: float
    dominant: str

    @property
    def consistent(self):
        return self.total_measured <= self.total_bound + ROUNDOFF_SLACK * self.V_star_norm

    def terms(self):
        return {t: getattr(self, t) for t in TERMS}

    def to_dict(self):
        d = {t: asdict(v) for t, v in self.terms().items()}
        d.update(total_bound=self.total_bound, sup_of_sum_bound=self.sup_of_sum_bound,
                 total_measured=self.total_measured, V_star_norm=self.V_star_norm,
                 dominant=self.dominant, consistent=self.consistent)
        return d

    def to_json(self):
        return json.dumps(_plain(self.to_dict()), indent=2, sort_keys=True)

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["term", "bound", "measured", "dominant_flag"])
        for t, v in self.terms().items():
            w.writerow([t, repr(float(v.bound)), repr(float(v.measured)), int(t == self.dominant)])
        w.writerow(["total", repr(float(self.total_bound)), repr(float(self.total_measured)), 0])

    def statement(self):
        b = self.terms()[self.dominant].bound
        return (f"dominant term: {self.dominant} (bound {b:.3e}, "
                f"{b / self.total_bound:.1%} of total {self.total_bound:.3e})")


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def _s1_measured(sys, study):
    Xref = study.reference
    if sys.N > Xref.shape[0]:
        raise DomainError(f"system N={sys.N} is finer than the study reference N={study.reference_N}")
    D = _padded_diff(modal_covariance(sys), Xref)
    return float(np.linalg.norm(D, "fro")), _sym_norm(D)


def assemble_budget(sys, order_study, gap, ode_traj, lr, T=None):
    """Evaluate the four error terms on a shared time grid.

    Parameters
    ----------
    sys : DiscretizedSystem
        The level whose covariance is being budgeted.
    order_study : OrderStudy
        Supplies ``C_d``, ``r`` and the reference covariance.
    gap : GapReport or None
        Linearisation gap with fitted envelopes.  ``None`` is accepted only
        for linear drift, where the nonlinear and linearised equations
        coincide and the term vanishes identically.
    ode_traj : CovarianceTrajectory
        Covariance ODE trajectory of ``sys`` from the initial covariance.
    lr : LowRankSolution
        LR-ADI solution for ``sys``.
    T : float, optional
        Horizon; must match the end of the time grid if given.
    """
    N = sys.N
    times = ode_traj.times
    if ode_traj.matrices.shape[1:] != (N, N) or lr.Z.shape[0] != N:
        raise DomainError("stage artifacts have incompatible dimensions")
    if T is not None and not math.isclose(times[-1], T, rel_tol=1e-12):
        raise DomainError(f"time grid ends at {times[-1]}, expected T={T}")
    if gap is not None:
        if gap.times.shape != times.shape or not np.allclose(gap.times, times, rtol=0, atol=1e-12 * times[-1]):
            raise DomainError("gap and ODE trajectories are on different time grids")
        if gap.C_m is None:
            raise DomainError("gap report carries no fitted envelope; pass an eta estimate")
    elif not sys.nonlinearity.is_linear:
        raise DomainError("a linearisation gap is required for nonlinear drift")

    V_star = dense_lyapunov(sys.script_A, sys.B)
    nV = _sym_norm(V_star)
    ones = np.ones_like(times)

    # S1: spatial discretisation, Hilbert-Schmidt norm
    hs, sp = _s1_measured(sys, order_study)
    b1 = order_study.bound(sys.h)
    s1 = BudgetTerm(b1, hs, {"C_d": order_study.C_d, "r": order_study.r, "h": sys.h,
                             "order": order_study.order, "measured_spectral": sp})
    curves_b = [b1 * ones]
    curves_m = [hs * ones]

    # S2: linearisation
    if gap is None:
        s2 = BudgetTerm(0.0, 0.0, {"reason": "linear drift"})
        curves_b.append(0 * ones)
        curves_m.append(0 * ones)
    else:
        bt, bl = gap.bound_m, gap.bound_2m
        s2 = BudgetTerm(float(np.max(bt)), gap.sup_gap,
                        {"C_l": gap.C_m, "C_l_2m": gap.C_2m,
                         "bound_2m": float(np.max(bl)), "flags": gap.flags()})
        curves_b.append(bt)
        curves_m.append(gap.gap)

    # S3: relaxation, both candidate rates, report the tighter
    d = np.array([_sym_norm(V - V_star) for V in ode_traj.matrices])
    d0 = d[0]
    floor = ROUNDOFF_SLACK * nV
    rates = {"spectral": decay_rate_spectral(sys.script_A), "H": decay_rate_H(sys.script_A)}
    cands = {}
    for name, rate in rates.items():
        env = d0 * np.exp(-rate * times)
        C_tau = _fit_constant(np.where(d > floor, d, 0.0), env)
        cands[name] = (C_tau * env, C_tau, rate)
    best = min(cands, key=lambda k: (np.max(cands[k][0]), cands[k][0][-1]))
    b3curve = cands[best][0]
    s3 = BudgetTerm(float(np.max(b3curve)), float(np.max(d)),
                    {"rate_used": best, "C_tau": cands[best][1], "rate": cands[best][2],
                     "alternatives": {k: {"C_tau": v[1], "rate": v[2], "sup_bound": float(np.max(v[0]))}
                                      for k, v in cands.items()}})
    curves_b.append(b3curve)
    curves_m.append(d)

    # S4: low-rank solver
    factor = theoretical_error_bound(sys.interval, lr.steps)
    b4 = factor * nV
    m4 = _sym_norm(lr.V - V_star)
    s4 = BudgetTerm(b4, m4, {"j": lr.steps, "factor": factor})
    curves_b.append(b4 * ones)
    curves_m.append(m4 * ones)

    terms = (s1, s2, s3, s4)
    total_bound = float(sum(t.bound for t in terms))
    sup_sum = float(np.max(np.sum(curves_b, axis=0)))
    total_measured = float(np.max(np.sum(curves_m, axis=0)))
    dominant = TERMS[int(np.argmax([t.bound for t in terms]))]
    budget = CeresBudget(s1, s2, s3, s4, total_bound, sup_sum, total_measured, nV, dominant)
    if not budget.consistent:
        logger.warning("budget inconsistent: measured %.3e > bound %.3e", total_measured, total_bound)
    return budget
