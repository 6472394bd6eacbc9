"""Configuration-driven experiment runner.

Every pipeline stage is a subcommand writing machine-readable artifacts; see
the package README for the configuration schema.  Exit codes: 0 success,
2 validation failure, 3 solver nonconvergence, 4 verify-gate failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import reporting
from .config import ConfigError, load_config
from .elliptic import NonconvergenceError, discretize, solve_state
from .expressions import check_admissible
from .functionals import (direction_family, dirderiv_distributed, dirderiv_tracking,
                          objective_value, optimality_check)
from .grid import Grid, classify
from .instances import BUNDLED
from .quotient import evaluate_gates, norm_table
from .sensitivity import boundary_data, solve_derivative
from .tracing import (NoIntersectionError, ProjectionError, TraceError,
                      pick_initial_points, trace, trace_components)
from .velocity import lipschitz_estimate, solve_w, transversality_residual

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_GATE = 4


class _Pipeline:
    """Lazily computed shared stages for one configuration."""

    def __init__(self, cfg, seed=None, threads=1):
        self.cfg = cfg
        self.threads = threads
        if seed is not None:
            cfg.directions["seed"] = seed
        self._cache = {}

    def meta(self):
        return {"config_sha256": self.cfg.sha, "tool_version": reporting.TOOL_VERSION}

    def _get(self, key, builder):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]

    @property
    def grid(self):
        return self._get("grid", lambda: Grid(self.cfg.box, self.cfg.grid_n))

    def require_admissible(self):
        rep = check_admissible(self.cfg.g, self.cfg.box,
                               n=int(self.cfg.tolerances["admissibility_n"]))
        if not rep.in_F:
            raise ConfigError(
                f"level function g is not admissible (delta={rep.delta:.3g}, "
                f"boundary_min={rep.boundary_min:.3g}, "
                f"has_negative_point={rep.has_negative_point})"
            )
        return rep

    @property
    def curves(self):
        def build():
            self.require_admissible()
            base = trace_components(self.cfg.g, self.cfg.box)
            x0s = pick_initial_points(self.cfg.g, self.cfg.h, base,
                                      tol=self.cfg.tolerances["trace_tol"] * 10)
            return [trace(self.cfg.g, x0, component_id=cid) for cid, x0 in x0s]

        return self._get("curves", build)

    @property
    def fields(self):
        return self._get("fields", lambda: [solve_w(self.cfg.g, self.cfg.h, c)
                                            for c in self.curves])

    @property
    def mask(self):
        return self._get("mask", lambda: classify(self.cfg.g, self.grid))

    @property
    def disc(self):
        return self._get("disc", lambda: discretize(self.mask))

    @property
    def state(self):
        return self._get("state", lambda: solve_state(
            self.cfg.g, self.cfg.f.value, self.cfg.beta, self.grid, disc=self.disc,
            tol_rel=self.cfg.tolerances["solver_tol"]))

    @property
    def bd(self):
        return self._get("bd", lambda: boundary_data(self.state, self.fields, self.mask))

    @property
    def deriv(self):
        return self._get("deriv", lambda: solve_derivative(
            self.cfg.g, self.state, self.cfg.beta, self.bd, disc=self.disc,
            tol_rel=self.cfg.tolerances["solver_tol"]))


def _cmd_admissible(p, out):
    rep_g = check_admissible(p.cfg.g, p.cfg.box, n=int(p.cfg.tolerances["admissibility_n"]))
    rep_h = check_admissible(p.cfg.h, p.cfg.box, n=int(p.cfg.tolerances["admissibility_n"]))
    payload = {}
    for name, rep in (("g", rep_g), ("h", rep_h)):
        payload[name] = {
            "in_F": rep.in_F, "delta": rep.delta, "boundary_min": rep.boundary_min,
            "has_negative_point": rep.has_negative_point,
            "delta_witness": list(rep.delta_witness),
            "boundary_witness": list(rep.boundary_witness),
            "negative_witness": list(rep.negative_witness) if rep.negative_witness else None,
            "samples_per_axis": rep.samples_per_axis,
        }
    reporting.write_json(os.path.join(out, "admissible.json"), payload, meta=p.meta())
    return EXIT_OK


def _cmd_trace(p, out):
    for c in p.curves:
        cols, rows, extra = reporting.curve_rows(c, p.cfg.g)
        meta = {**p.meta(), **extra}
        reporting.write_csv(os.path.join(out, f"curve_{c.component_id}.csv"),
                            cols, rows, meta)
    return EXIT_OK


def _cmd_velocity(p, out):
    worst = transversality_residual(p.cfg.g, p.cfg.h, p.fields)
    summary = {"transversality_residual": worst, "components": []}
    for V in p.fields:
        cols, rows, extra = reporting.velocity_rows(V, p.cfg.g, p.cfg.h)
        meta = {**p.meta(), **extra}
        cid = V.curve.component_id
        reporting.write_csv(os.path.join(out, f"velocity_{cid}.csv"), cols, rows, meta)
        lip = lipschitz_estimate(V)
        summary["components"].append({
            "component": cid, "lipschitz": lip.lw, "delta": lip.delta,
            "apriori_bound": lip.apriori,
        })
    reporting.write_json(os.path.join(out, "velocity.json"), summary, meta=p.meta())
    return EXIT_OK


def _cmd_solve(p, out):
    y = p.state
    cols, rows = reporting.field_rows(y)
    reporting.write_csv(os.path.join(out, "state.csv"), cols, rows, p.meta())
    log = y.log
    reporting.write_json(os.path.join(out, "state_log.json"), {
        "newton_iters": log.newton_iters, "picard_iters": log.picard_iters,
        "damped_steps": log.damped_steps, "converged": log.converged,
        "residuals": log.residuals, "selection": log.selection,
    }, meta=p.meta())
    return EXIT_OK


def _cmd_derivative(p, out):
    q = p.deriv
    cols, rows = reporting.field_rows(q)
    reporting.write_csv(os.path.join(out, "derivative.csv"), cols, rows, p.meta())
    bd = p.bd
    reporting.write_csv(
        os.path.join(out, "boundary_data.csv"),
        ["x1", "x2", "value", "component", "t_hat", "stencil", "fallback"],
        [(bd.points[k, 0], bd.points[k, 1], bd.values[k], bd.component[k],
          bd.t_hat[k], bd.stencil_size[k], bool(bd.fallback[k]))
         for k in range(len(bd.values))],
        p.meta(),
    )
    return EXIT_OK


def _cmd_verify(p, out):
    study = norm_table(p.cfg.g, p.cfg.h, p.cfg.f.value, p.cfg.beta, p.grid,
                       p.cfg.lambdas, r_list=p.cfg.r_list, omega=p.cfg.omega,
                       threads=p.threads)
    cols, rows = reporting.study_rows(study)
    reporting.write_csv(os.path.join(out, "verify.csv"), cols, rows, p.meta())
    g_cfg = p.cfg.gates
    gates = evaluate_gates(study, kind=g_cfg["kind"],
                           slope_min=g_cfg.get("slope_min", 0.9),
                           m_ratio_max=g_cfg.get("m_ratio_max", 0.1))
    reporting.write_json(os.path.join(out, "verify.json"), {
        "slopes": study.slopes, "gates": gates,
        "dropped": [[lam, why] for lam, why in study.dropped],
        "lambdas": study.lambdas, "omega_note": study.omega_note,
    }, meta=p.meta())
    return EXIT_OK if gates["all_pass"] else EXIT_GATE


def _cmd_objective(p, out):
    spec = p.cfg.objective
    if spec is None:
        raise ConfigError("configuration has no objective section")
    j0 = objective_value(spec, p.cfg.g, p.state, p.grid, curves=p.curves)
    if spec.kind == "tracking_h2":
        jp = dirderiv_tracking(spec, p.state, p.deriv, p.grid)
    else:
        jp = dirderiv_distributed(spec, p.cfg.g, p.cfg.h, p.state, p.deriv,
                                  p.curves, p.grid)
    reporting.write_json(os.path.join(out, "objective.json"),
                         {"value": j0, "dirderiv": jp, "kind": spec.kind},
                         meta=p.meta())
    return EXIT_OK


def _cmd_optimality(p, out):
    spec = p.cfg.objective
    if spec is None:
        raise ConfigError("configuration has no objective section")
    fam = direction_family(p.cfg.g, p.curves, p.cfg.box,
                           count=int(p.cfg.directions["count"]),
                           seed=int(p.cfg.directions["seed"]))
    report = optimality_check(p.cfg.g, spec, fam, p.cfg.f.value, p.cfg.beta, p.grid)
    payload = {
        "j_value": report.j_value, "tolerance": report.tolerance,
        "multi_component": report.multi_component,
        "directions": report.rows,
        "n_violations": len(report.violations),
    }
    reporting.write_json(os.path.join(out, "optimality.json"), payload, meta=p.meta())
    reporting.write_csv(
        os.path.join(out, "optimality.csv"),
        ["label", "qualifying", "jprime", "violation"],
        [(r["label"], r["qualifying"], r["jprime"], r["violation"])
         for r in report.rows],
        p.meta(),
    )
    return EXIT_OK


_COMMANDS = {
    "admissible": _cmd_admissible,
    "trace": _cmd_trace,
    "velocity": _cmd_velocity,
    "solve": _cmd_solve,
    "derivative": _cmd_derivative,
    "verify": _cmd_verify,
    "objective": _cmd_objective,
    "optimality": _cmd_optimality,
}


def main(argv=None):
    ap = argparse.ArgumentParser(prog="shapecalc",
                                 description="level-set shape calculus pipeline")
    ap.add_argument("command", choices=list(_COMMANDS) + ["all"])
    ap.add_argument("--config", required=True,
                    help="path to a JSON configuration, or a bundled instance "
                         f"name ({', '.join(sorted(BUNDLED))})")
    ap.add_argument("--out", default=None, help="output directory (default from config)")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=None,
                    help="override the direction-family seed")
    args = ap.parse_args(argv)

    try:
        cfg = load_config(BUNDLED[args.config] if args.config in BUNDLED else args.config)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    out = args.out or cfg.out_dir
    os.makedirs(out, exist_ok=True)
    pipe = _Pipeline(cfg, seed=args.seed, threads=max(1, args.threads))

    commands = list(_COMMANDS) if args.command == "all" else [args.command]
    worst = EXIT_OK
    for name in commands:
        try:
            code = _COMMANDS[name](pipe, out)
        except (ConfigError, NoIntersectionError, ValueError) as exc:
            print(f"{name}: validation failure: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        except (NonconvergenceError, TraceError, ProjectionError) as exc:
            print(f"{name}: solver failure: {exc}", file=sys.stderr)
            return EXIT_SOLVER
        if code != EXIT_OK:
            worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
