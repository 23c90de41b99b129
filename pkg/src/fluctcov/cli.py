"""Batch command-line front end.

Subcommands ``shifts``, ``solve``, ``bounds``, ``validate`` and ``ceres``
read one JSON configuration, validate it completely, run the requested
stages and write CSV or JSON reports to ``--out``.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 unstable
operator, 4 solver failure, 5 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import decay_rate_H, decay_rate_spectral, verify_decay
from .ceres import _plain, assemble_budget, galerkin_order_study
from .config import DEFAULTS, ConfigError, kink_guess, load_config, parse_config
from .discretize import discretize, mesh
from .errors import DomainError, SolverError, StabilityError
from .linalg import SpectralInterval, dense_lyapunov
from .lradi import (ShiftSet, lr_adi_run, theoretical_error_bound, theta_bound,
                    wachspress_shifts)
from .mc import (_sym_norm, estimate_eta, fit_exponential_rate, linearization_gap,
                 ode_covariance, simulate_coupled)

logger = logging.getLogger("fluctcov")

EXIT_OK, EXIT_CONFIG, EXIT_STABILITY, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4, 5
BOUNDS_MAX_N = 1000
RELAX_DECAY_TIMES = 3.0
RELAX_STEPS = 200


class Output:
    """Writes reports into one directory; CSV files start with a version line."""

    def __init__(self, directory, fmt="csv"):
        self.dir = Path(directory)
        self.fmt = fmt
        self.dir.mkdir(parents=True, exist_ok=True)
        self.written = []

    def csv(self, name, header, rows):
        buf = io.StringIO()
        buf.write(f"# fluctcov {__version__}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
        self._write(name + ".csv", buf.getvalue())

    def json(self, name, obj):
        obj = dict(_plain(obj), version=__version__)
        self._write(name + ".json", json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def table(self, name, header, rows):
        """A table in the selected format."""
        rows = list(rows)
        if self.fmt == "json":
            self.json(name, {"columns": header, "rows": [list(r) for r in rows]})
        else:
            self.csv(name, header, rows)

    def _write(self, fname, text):
        path = self.dir / fname
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        self.written.append(str(path))


def _system(rc, upsilon=None):
    spec = rc.problem if upsilon is None else dataclasses.replace(rc.problem, upsilon=upsilon)
    guess = None
    if rc.guess == "kink":
        x, _ = mesh(rc.N, spec.L)
        guess = kink_guess(spec.L, spec.nonlinearity.mu, x)
    return discretize(spec, rc.N, guess=guess, method=rc.method)


def _shift_set(rc, interval):
    if rc.shifts == "wachspress":
        return wachspress_shifts(interval, rc.j)
    return ShiftSet(rc.shifts, "user", interval)


def cmd_shifts(rc, out):
    """Shift table: alpha_i, rho_i, cumulative Theta_j and the error factor bound."""
    if rc.interval is not None:
        interval = SpectralInterval(*map(float, rc.interval))
    else:
        interval = _system(rc).interval
    shifts = _shift_set(rc, interval)
    tab = theta_bound(shifts.shifts, interval)
    rows = []
    for i, al in enumerate(shifts.shifts, 1):
        rows.append([i, al, tab.rho[i - 1], tab.theta[i - 1], tab.theta_product[i - 1],
                     theoretical_error_bound(interval, i)])
    out.table("shifts", ["j", "alpha_j", "rho_j", "theta_j", "theta_product_j", "bound_j"], rows)
    print(f"interval [{interval.a!r}, {interval.b!r}], kappa {interval.kappa:.6g}, {len(rows)} shifts")
    for r in rows:
        print(f"  j={r[0]:3d} alpha={r[1]: .10e} theta={r[3]:.3e} bound={r[5]:.3e}")
    return {"interval": [interval.a, interval.b], "shifts": list(shifts.shifts),
            "theta": tab.theta, "bound": [r[5] for r in rows]}


def cmd_solve(rc, out):
    """Discretise, run LR-ADI and write the factor, residual history and summary."""
    system = _system(rc)
    shifts = _shift_set(rc, system.interval)
    max_steps = rc.max_steps if rc.max_steps is not None else max(rc.j, 100)
    lr = lr_adi_run(system.script_A, system.B, shifts, max_steps=max_steps,
                    residual_tol=rc.residual_tol, interval=system.interval)
    rel = [r / lr.B_norm2 for r in lr.residual_history]
    summary = {"N": system.N, "R": system.R, "j": len(shifts), "steps": lr.steps,
               "rank": int(lr.Z.shape[1]), "final_residual": lr.relative_residual,
               "residual_tol": rc.residual_tol, "converged": lr.relative_residual <= rc.residual_tol,
               "theta_final": float(lr.theta_history[-1]),
               "theta_bound": theoretical_error_bound(system.interval, lr.steps),
               "interval": [system.interval.a, system.interval.b]}
    if out.fmt == "json":
        np.save(out.dir / "Z.npy", lr.Z)
        out.json("solve", dict(summary, residual_history=rel, theta_history=lr.theta_history))
    else:
        out.csv("residuals", ["step", "alpha_j", "residual_rel", "theta_j"],
                [[i + 1, a, r, t] for i, (a, r, t) in
                 enumerate(zip(lr.shifts_used, rel, lr.theta_history))])
        out.csv("Z", [f"z{c}" for c in range(lr.Z.shape[1])], lr.Z.tolist())
        out.json("solve", summary)
    print(f"N={system.N} R={system.R} steps={lr.steps} rank={lr.Z.shape[1]} "
          f"relative residual {lr.relative_residual:.3e}")
    if not summary["converged"]:
        logger.warning("residual tolerance %.1e not reached in %d steps", rc.residual_tol, lr.steps)
    return summary


def cmd_bounds(rc, out):
    """Singular values of the dense stationary covariance against both decay bounds."""
    if rc.N > BOUNDS_MAX_N:
        raise DomainError(f"bounds needs a dense solve and is limited to N <= {BOUNDS_MAX_N} "
                          f"(got N={rc.N}); lower discretization.N")
    system = _system(rc)
    rep = verify_decay(system.script_A, system.B, max_dim=BOUNDS_MAX_N)
    out.table("decay", ["index", "sigma_i", "sigma_i_rel", "penzl", "sabino"],
              [[i, float(rep.singular_values[i - 1]), rel, p, s] for i, rel, p, s in rep.rows()])
    print(f"N={system.N} R={rep.R} kappa={rep.kappa:.6g}: "
          + ("all inequalities hold" if rep.ok else f"{len(rep.violations)} violations"))
    if not rep.ok:
        raise SolverError(f"decay bounds violated: {rep.violations[:3]}")
    return {"ok": rep.ok, "kappa": rep.kappa, "R": rep.R}


def cmd_validate(rc, out):
    """Monte Carlo and covariance ODE checks of the linearisation and relaxation stages."""
    summary = {"sweep": []}
    base = None
    for k, ups in enumerate(rc.upsilon_sweep):
        system = _system(rc, ups)
        nl, lin = simulate_coupled(system, rc.sim)
        m = -system.eigenvalues[-1]
        eta = estimate_eta(system, nl)
        gap = linearization_gap(nl, lin, eta, m)
        bt, bl = gap.bound_m, gap.bound_2m
        out.table(f"gap_{k}", ["t", "gap", "eta_star", "bound_m", "bound_2m"],
                  [[t, g, e, a, b] for t, g, e, a, b in zip(gap.times, gap.gap, gap.eta_star, bt, bl)])
        row = {"upsilon": ups, "sup_gap": gap.sup_gap, "C_l_m": gap.C_m,
               "C_l_2m": gap.C_2m, "eta_star_T": float(eta.eta_star[-1]),
               "flags": gap.flags()}
        summary["sweep"].append(row)
        print(f"upsilon={ups:.3g}: sup gap {gap.sup_gap:.3e}, C_l {gap.C_m:.3g} "
              f"(e^-tm) / {gap.C_2m:.3g} (e^-2tm), eta*(T) {row['eta_star_T']:.3e}")
        if base is None:
            base = (system, lin)

    system, lin = base
    V_star = dense_lyapunov(system.script_A, system.B)
    V0 = rc.sim.init_scale * V_star
    ode = ode_covariance(system, V0, rc.sim.T, len(lin.times) - 1)
    rows = [[t, _sym_norm(C), _sym_norm(V), _sym_norm(C - V)]
            for t, C, V in zip(lin.times, lin.matrices, ode.matrices)]
    out.table("ode_vs_mc", ["t", "cov_mc_linear", "cov_ode", "difference"], rows)
    terminal_rel = rows[-1][3] / max(rows[-1][2], 1e-300)

    m = decay_rate_spectral(system.script_A)
    T_relax = RELAX_DECAY_TIMES / m
    relax = ode_covariance(system, np.zeros_like(V_star), T_relax, RELAX_STEPS)
    dist = np.array([_sym_norm(V - V_star) for V in relax.matrices])
    rate, C = fit_exponential_rate(relax.times, dist, floor=1e-14 * _sym_norm(V_star))
    out.table("relaxation", ["t", "err_to_stationary"], zip(relax.times, dist))
    summary.update(terminal_rel_mc_vs_ode=terminal_rel, fitted_rate=rate,
                   decay_rate_spectral=m, decay_rate_H=decay_rate_H(system.script_A))
    print(f"terminal MC vs ODE relative difference {terminal_rel:.3e}")
    print(f"relaxation rate fit {rate:.6g} (min|lambda| {m:.6g}, 2/||H|| {summary['decay_rate_H']:.6g})")
    out.json("validate", summary)
    return summary


def cmd_ceres(rc, out):
    """Full pipeline and four-term error budget."""
    study = galerkin_order_study(rc.problem, rc.levels, rc.reference, method=rc.method)
    system = _system(rc)
    V_star = dense_lyapunov(system.script_A, system.B)
    gap = None
    if system.nonlinearity.is_linear:
        steps = 100
    else:
        nl, lin = simulate_coupled(system, rc.sim)
        eta = estimate_eta(system, nl)
        gap = linearization_gap(nl, lin, eta, -system.eigenvalues[-1])
        steps = len(nl.times) - 1
    ode = ode_covariance(system, rc.sim.init_scale * V_star, rc.sim.T, steps)
    lr = lr_adi_run(system.script_A, system.B, _shift_set(rc, system.interval),
                    max_steps=rc.j, residual_tol=0.0, interval=system.interval)
    budget = assemble_budget(system, study, gap, ode, lr, rc.sim.T)
    if out.fmt == "json":
        out.json("budget", budget.to_dict())
    else:
        out.csv("budget", ["term", "bound", "measured", "dominant_flag"],
                [[t, v.bound, v.measured, int(t == budget.dominant)] for t, v in budget.terms().items()]
                + [["total", budget.total_bound, budget.total_measured, 0]])
        out.json("budget", budget.to_dict())
    out.table("order_study", ["N", "h", "err_hs", "err_2"],
              zip(study.levels, study.h, study.errors, study.errors_spectral))
    print(f"order {study.order:.3f}, C_d {study.C_d:.3e}, r {study.r:.3f}"
          + ("" if study.conclusive else " (refinement study inconclusive)"))
    for t, v in budget.terms().items():
        print(f"  {t}: bound {v.bound:.3e} measured {v.measured:.3e}")
    print(f"total bound {budget.total_bound:.3e}, total measured {budget.total_measured:.3e}"
          + ("" if budget.consistent else " INCONSISTENT"))
    print(budget.statement())
    return budget


COMMANDS = {"shifts": cmd_shifts, "solve": cmd_solve, "bounds": cmd_bounds,
            "validate": cmd_validate, "ceres": cmd_ceres}


def build_parser():
    p = argparse.ArgumentParser(prog="fluctcov", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=fn.__doc__.strip().split("\n")[0])
        sp.add_argument("--config", help="JSON configuration file (defaults if omitted)")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--seed", type=int, help="override sim.seed")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("-j", type=int, dest="j", help="override adi.j (number of ADI shifts)")
    return p


def _load(args):
    if args.config:
        rc = load_config(args.config)
        raw = rc.raw
    else:
        raw = json.loads(json.dumps(DEFAULTS))
    changed = False
    if args.seed is not None:
        raw["sim"]["seed"] = args.seed
        changed = True
    if args.j is not None:
        raw["adi"]["j"] = args.j
        changed = True
    if changed or not args.config:
        rc = parse_config(raw, source=args.config or "<defaults>")
    return rc


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        rc = _load(args)
        out = Output(args.out, args.format)
        COMMANDS[args.command](rc, out)
    except ConfigError as exc:
        print(f"config error:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StabilityError as exc:
        print(f"stability error: {exc}", file=sys.stderr)
        return EXIT_STABILITY
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
