"""Command-line surface: ``pulsefront <command> --config <path> [--out <dir>]``.

Every run writes into its output directory exactly one ``effective_config.json``,
one or more CSV files and one ``summary.json``.  Exit status: 0 success, 2 the
run completed but something was flagged (sweep row, failed check), 1 failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import artifacts as io
from . import nonlinearity as nl
from .config import COMMANDS, ConfigError, RunConfig, build_grid, build_nonlinearity, echo, parse_config
from .experiments import (barrier_operator, build_subsolution, homogenization_sweep, measure_D, perturbation_sweep,
                          run_stability, smoothstep, verify_subsolution)
from .front_solver import FrontError, crossing, solve_front
from .pde_core import FrameState, OvershootError, Stepper
from .periodic_ode import IntegrationError, equilibrium_from_fixed_point, find_fixed_points

log = logging.getLogger(__name__)

EXIT_OK, EXIT_FAIL, EXIT_FLAGGED = 0, 1, 2
SUMMARY_KEYS = ("command", "status", "exit_code", "diagnostic", "result", "artifacts", "version")
CONFIG_NAME = "effective_config.json"
SUMMARY_NAME = "summary.json"


@dataclass
class Outcome:
    exit_code: int = EXIT_OK
    result: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)  # file name -> (columns, rows)
    diagnostic: str | None = None


def initial_data(spec):
    c, w = spec.center, spec.width
    if spec.shape == "tanh":
        return lambda x: 0.5 * (1.0 - np.tanh((x - c) / w))
    if spec.shape == "step":
        return lambda x: (np.asarray(x) < c).astype(float)
    return lambda x: 1.0 - smoothstep(x, c - 0.5 * w, c + 0.5 * w)[0]


def _front(cfg: RunConfig, f, grid):
    fs = cfg.front
    return solve_front(f, fs.alpha_norm, grid, speed_tol=fs.speed_tol, c_bracket=fs.c_bracket, dt=cfg.time.dt)


def _front_result(fr) -> dict:
    keep = ("c_bisection", "c_max", "residual", "T", "M", "dxi", "iterations", "steps_per_period")
    out = {"speed": fr.speed, "alpha_norm": fr.alpha_norm, "n_slices": fr.n_slices,
           "monotonicity_violations": fr.monotonicity_violations(), "invariant_problems": fr.check_invariants()}
    out.update({k: fr.meta[k] for k in keep if k in fr.meta})
    return out


def cmd_analyze(cfg, f, grid) -> Outcome:
    a = cfg.analyze
    rep = find_fixed_points(f, n_seeds=a.n_seeds, root_tol=a.root_tol, margin=a.margin,
                            tol=a.ode_tol, substeps=a.substeps)
    rows, points = [], []
    for p in rep.fixed_points:
        eq = equilibrium_from_fixed_point(f, p.alpha, substeps=a.substeps, tol=max(10 * a.root_tol, 1e-9))
        rows.append((p.alpha, p.multiplier, p.classification, eq.eigenvalue))
        points.append(dict(p.to_dict(), eigenvalue=eq.eigenvalue))
    bis = nl.check_bistable_on_average(f)
    result = dict(rep.to_json(), fixed_points=points, bistable_structure=rep.has_bistable_structure(),
                  integral_at_0=bis.integral_at_0, integral_at_1=bis.integral_at_1,
                  bistable_on_average=bis.is_bistable_on_average, period=f.period)
    return Outcome(EXIT_OK, result, {"fixed_points.csv": (("alpha", "multiplier", "class", "eigenvalue"), rows)})


def cmd_front(cfg, f, grid) -> Outcome:
    fr = _front(cfg, f, grid)
    res = _front_result(fr)
    code = EXIT_FLAGGED if res["invariant_problems"] else EXIT_OK
    return Outcome(code, res, {"profile.csv": (io.PROFILE_COLUMNS, io.profile_rows(fr.times, fr.xi, fr.slices))})


def cmd_cauchy(cfg, f, grid) -> Outcome:
    cs = cfg.cauchy
    state = FrameState.from_function(grid, initial_data(cs.initial))
    stepper = Stepper(f, cs.speed, grid, dt=cfg.time.dt)
    xi = grid.nodes
    times, slices, pos = [0.0], [state.values.copy()], [crossing(state.values, xi, 0.5)]
    for n in range(1, cs.n_periods + 1):
        state, _ = stepper.period(state)
        times.append(n * f.period)
        slices.append(state.values.copy())
        pos.append(crossing(state.values, xi, 0.5))
    pos = np.asarray(pos)
    result = {"frame_speed": cs.speed, "n_periods": cs.n_periods, "crossings": pos,
              "final_lab_speed": cs.speed + (pos[-1] - pos[-2]) / f.period,
              "steps_per_period": stepper.n_steps}
    return Outcome(EXIT_OK, result, {"profile.csv": (io.PROFILE_COLUMNS, io.profile_rows(times, xi, slices))})


def cmd_stability(cfg, f, grid) -> Outcome:
    fr = _front(cfg, f, grid)
    run = run_stability(fr, f, initial_data(cfg.stability.initial), cfg.stability.n_periods)
    res = dict(run.to_dict(), speed=fr.speed, rate_bound=-0.9 * run.mu,
               rate_ok=bool(run.fitted_rate <= -0.9 * run.mu), D=measure_D(fr, f))
    code = EXIT_OK if run.status == "ok" and res["rate_ok"] else EXIT_FLAGGED
    rows = zip(run.times, run.shifts, run.distances)
    return Outcome(code, res, {"distance.csv": (("t", "shift", "distance"), rows)})


def _sweep(table) -> Outcome:
    code = EXIT_FLAGGED if table.flagged else EXIT_OK
    res = {"reference": table.reference, "fits": table.fits, "rows": table.rows, "flagged": table.flagged}
    return Outcome(code, res, {"sweep.csv": (table.columns, table.rows)})


def cmd_homogenize(cfg, f, grid) -> Outcome:
    return _sweep(homogenization_sweep(f, cfg.homogenize.T_list, grid, workers=cfg.workers))


def cmd_perturb(cfg, f, grid) -> Outcome:
    p = cfg.perturb
    out = _sweep(perturbation_sweep(f, p.eps_list, grid, workers=cfg.workers, n_alpha=p.n_alpha,
                                    envelope_tol=p.envelope_tol))
    env = out.result["fits"].get("sinh_envelope", {})
    if not env.get("validated", True):
        out.exit_code = EXIT_FLAGGED
    return out


def cmd_verify_subsolution(cfg, f, grid) -> Outcome:
    s = cfg.subsolution
    fr = _front(cfg, f, grid)
    bundle = build_subsolution(fr, f, s.q0)
    horizon = s.horizon_periods * f.period
    kinds = ("sub", "super") if s.kind == "both" else (s.kind,)
    res = {"bundle": bundle.to_dict(), "speed": fr.speed, "horizon": horizon, "reports": {}}
    rows = []
    passed = True
    for kind in kinds:
        rep = verify_subsolution(bundle, fr, f, horizon, kind, s.slack, s.order_test)
        res["reports"][kind] = rep.to_dict()
        passed &= rep.passed
        times, N, zones, ok = barrier_operator(bundle, fr, f, horizon, kind)
        red = np.max if kind == "sub" else np.min
        for k, t in enumerate(times):
            vals = []
            for z in (-1, 0, 1):
                sel = ok[k] & (zones[k] == z)
                vals.append(float(red(N[k, sel])) if np.any(sel) else float("nan"))
            rows.append((t, kind, *vals))
    res["passed"] = bool(passed)
    cols = ("t", "kind", "omega_minus", "omega_0", "omega_plus")
    return Outcome(EXIT_OK if passed else EXIT_FLAGGED, res, {"barrier.csv": (cols, rows)})


HANDLERS = {"analyze": cmd_analyze, "front": cmd_front, "cauchy": cmd_cauchy, "stability": cmd_stability,
            "homogenize": cmd_homogenize, "perturb": cmd_perturb, "verify-subsolution": cmd_verify_subsolution}
FAILURE_CSV = {"analyze": "fixed_points.csv", "front": "profile.csv", "cauchy": "profile.csv",
               "stability": "distance.csv", "homogenize": "sweep.csv", "perturb": "sweep.csv",
               "verify-subsolution": "barrier.csv"}

_EXPECTED = (FrontError, IntegrationError, OvershootError, ValueError, ArithmeticError)


def run(command: str, config: RunConfig, out_dir: Path | str | None = None) -> int:
    """Dispatch one command and write its artifacts; returns the exit status."""
    if command not in HANDLERS:
        raise ValueError(f"unknown command {command!r}")
    if config.command is not None and config.command != command:
        raise ConfigError(f"config command {config.command!r} does not match {command!r}")
    out = Path(out_dir or config.output_dir or f"pulsefront-{command}")
    config = config.model_copy(update={"command": command, "output_dir": str(out)})
    out.mkdir(parents=True, exist_ok=True)
    (out / CONFIG_NAME).write_text(echo(config))

    try:
        f = build_nonlinearity(config.nonlinearity)
        grid = build_grid(config.grid)
        outcome = HANDLERS[command](config, f, grid)
    except _EXPECTED as exc:
        log.error("%s failed: %s", command, exc)
        outcome = Outcome(EXIT_FAIL, {}, {}, f"{type(exc).__name__}: {exc}")
        if isinstance(exc, FrontError) and exc.info:
            outcome.result["info"] = exc.info

    if not outcome.tables:
        outcome.tables = {FAILURE_CSV[command]: (("status",), [])}
    names = []
    for name, (cols, rows) in outcome.tables.items():
        io.write_csv(out / name, cols, rows)
        names.append(name)
    status = {EXIT_OK: "ok", EXIT_FLAGGED: "flagged", EXIT_FAIL: "failed"}[outcome.exit_code]
    summary = {"command": command, "status": status, "exit_code": outcome.exit_code,
               "diagnostic": outcome.diagnostic, "result": outcome.result, "artifacts": sorted(names),
               "version": __version__}
    io.write_json(out / SUMMARY_NAME, summary)
    return outcome.exit_code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors are failures (1); exit status 2 is reserved for flagged runs
        self.print_usage(sys.stderr)
        self.exit(EXIT_FAIL, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pulsefront", description="Pulsating fronts of time-periodic bistable reaction-diffusion.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = parse_config(args.config.read_text())
        return run(args.command, config, args.out)
    except OSError as exc:
        print(f"pulsefront: cannot read config: {exc}", file=sys.stderr)
    except ConfigError as exc:
        print(f"pulsefront: invalid config: {exc}", file=sys.stderr)
    return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
