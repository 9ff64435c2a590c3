"""Scenario runner: JSON config in, report.json plus CSV artifacts out.

Exit codes: 0 completed (failed hypotheses are results, not errors),
2 validation failure, 3 numerical failure, 4 inconclusive guard abort.
"""

from __future__ import annotations

import datetime
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor

import click

from . import eigen, frontsim, orbits, pde, weinberger
from .errors import (BlowupError, DomainTooSmall, EvalError, InconsistentClassification,
                     NoConvergence, NoInteriorMinimum, NonEllipticError, NotMonostable,
                     ParseError, ShiftOutOfRange, SingularSolve, ValidationError)
from .speeds import FIELD_NAMES, SystemSpec, compute_speed_report

TASKS = ("eigen", "orbit", "speed", "check", "weinberger", "front")
_TASK_DEPS = {
    "eigen": set(),
    "orbit": set(),
    "speed": {"orbit"},
    "check": {"orbit"},
    "weinberger": {"orbit", "speed"},
    "front": {"orbit", "speed"},
}

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_INCONCLUSIVE = 4


class ScenarioConfig:
    """Validated scenario: system spec, discretization controls, task list."""

    def __init__(self, raw: dict):
        if not isinstance(raw, dict):
            raise ValidationError("config must be a JSON object")
        unknown = set(raw) - {"model", "discretization", "tasks", "output"}
        if unknown:
            raise ValidationError(f"unknown top-level keys: {sorted(unknown)}")
        for key in ("model", "tasks", "output"):
            if key not in raw:
                raise ValidationError(f"missing top-level key {key!r}")

        model = raw["model"]
        if not isinstance(model, dict):
            raise ValidationError("model must be an object")
        missing = [n for n in ("omega", "ell", *FIELD_NAMES) if n not in model]
        if missing:
            raise ValidationError(f"model is missing {missing}")
        extra = set(model) - {"omega", "ell", *FIELD_NAMES}
        if extra:
            raise ValidationError(f"unknown model keys: {sorted(extra)}")
        self.omega = _positive_number(model, "omega")
        self.ell = _positive_number(model, "ell")

        disc = raw.get("discretization", {})
        if not isinstance(disc, dict):
            raise ValidationError("discretization must be an object")
        extra = set(disc) - {"nt", "nx", "dt", "dx", "A", "T"}
        if extra:
            raise ValidationError(f"unknown discretization keys: {sorted(extra)}")
        self.nt = _resolve_steps(disc, "nt", "dt", self.omega, default=200)
        self.nx = _resolve_steps(disc, "nx", "dx", self.ell, default=64)
        self.domain_half_width = disc.get("A")
        if self.domain_half_width is not None and self.domain_half_width <= 0:
            raise ValidationError("A must be positive")
        self.periods = int(disc.get("T", 30))
        if self.periods < 1:
            raise ValidationError("T must be >= 1")

        tasks = raw["tasks"]
        if (not isinstance(tasks, list) or not tasks
                or any(t not in TASKS for t in tasks)):
            raise ValidationError(f"tasks must be a non-empty subset of {TASKS}")
        self.requested = list(dict.fromkeys(tasks))
        closure = set(self.requested)
        for t in self.requested:
            closure |= _TASK_DEPS[t]
        self.tasks = [t for t in TASKS if t in closure]

        self.output = raw["output"]
        if not isinstance(self.output, str) or not self.output:
            raise ValidationError("output must be a non-empty directory path")

        try:
            self.system = SystemSpec.from_expressions(
                {n: str(model[n]) for n in FIELD_NAMES},
                self.omega, self.ell, self.nt, self.nx)
        except (ParseError, EvalError, NonEllipticError, ValueError) as exc:
            raise ValidationError(f"model rejected: {exc}") from exc
        self.raw = raw


def _positive_number(obj, key):
    v = obj[key]
    if not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
        raise ValidationError(f"{key} must be a positive number")
    return float(v)


def _resolve_steps(disc, count_key, width_key, period, default):
    if count_key in disc and width_key in disc:
        raise ValidationError(f"give either {count_key} or {width_key}, not both")
    if width_key in disc:
        w = disc[width_key]
        if not isinstance(w, (int, float)) or w <= 0:
            raise ValidationError(f"{width_key} must be positive")
        n = int(round(period / w))
    else:
        n = disc.get(count_key, default)
    if not isinstance(n, int) or n < 2:
        raise ValidationError(f"{count_key} must be an integer >= 2")
    return n


def run_scenario(config: dict | ScenarioConfig, refine=False, jobs=1, quiet=False) -> int:
    """Execute the scenario; writes report.json and per-task CSVs."""
    try:
        cfg = config if isinstance(config, ScenarioConfig) else ScenarioConfig(config)
    except ValidationError as exc:
        if not quiet:
            click.echo(f"validation failure: {exc}", err=True)
        return EXIT_VALIDATION

    os.makedirs(cfg.output, exist_ok=True)
    report = {
        "tasks": cfg.tasks,
        "requested_tasks": cfg.requested,
        "status": "ok",
        "generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    status = EXIT_OK
    sys_spec = cfg.system

    def log(msg):
        if not quiet:
            click.echo(msg)

    try:
        speed_report = None
        for task in cfg.tasks:
            log(f"[{task}]")
            if task == "orbit":
                report["orbits"] = _task_orbit(cfg, sys_spec)
            elif task == "eigen":
                report["eigen"] = _task_eigen(cfg, sys_spec, jobs)
            elif task in ("speed", "check"):
                if speed_report is None:
                    speed_report = compute_speed_report(sys_spec, refine=refine)
                    report["speed_report"] = speed_report.to_dict()
            elif task == "weinberger":
                report["weinberger"] = _task_weinberger(cfg, sys_spec, speed_report)
            elif task == "front":
                frag, inconclusive = _task_front(cfg, sys_spec, speed_report)
                report["front"] = frag
                if inconclusive:
                    status = max(status, EXIT_INCONCLUSIVE)
    except (NoConvergence, BlowupError, SingularSolve, NonEllipticError) as exc:
        report["status"] = "numerical-failure"
        report["reason"] = f"{type(exc).__name__}: {exc}"
        status = EXIT_NUMERICAL
    except (DomainTooSmall, ShiftOutOfRange, InconsistentClassification,
            NoInteriorMinimum, NotMonostable, ValueError) as exc:
        report["status"] = "inconclusive"
        report["reason"] = f"{type(exc).__name__}: {exc}"
        status = EXIT_INCONCLUSIVE

    path = os.path.join(cfg.output, "report.json")
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    log(f"report written to {path}")
    return status


def _task_orbit(cfg, sys_spec):
    frag = {}
    for name, orbit in (("u1", sys_spec.u1_star()), ("u2", sys_spec.u2_star())):
        orbits.dump_orbit_csv(os.path.join(cfg.output, f"orbit_{name}.csv"), orbit)
        frag[name] = {"extinct": orbit.extinct, "residual": orbit.residual,
                      "closure_gap": orbit.closure_gap,
                      "periods_marched": orbit.periods_marched,
                      "max": orbit.max()}
    return frag


def _task_eigen(cfg, sys_spec, jobs):
    lam1 = eigen.principal_eigen(sys_spec.d1, sys_spec.g1, sys_spec.b1)
    lam2 = eigen.principal_eigen(sys_spec.d2, sys_spec.g2, sys_spec.b2)
    mus = [round(0.1 + 0.2 * k, 10) for k in range(15)]

    def solve(mu):
        return eigen.lambda_of_mu(sys_spec.d1, sys_spec.g1, sys_spec.b1, mu)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(solve, mus))
    else:
        results = [solve(mu) for mu in mus]
    eigen.write_lambda_curve(os.path.join(cfg.output, "lambda_curve_species1.csv"),
                             mus, results)
    return {"lambda_species1": lam1.lam, "lambda_species2": lam2.lam,
            "residuals": [lam1.residual, lam2.residual]}


def _task_weinberger(cfg, sys_spec, speed_report):
    c_ref = None
    if speed_report is not None:
        c_ref = speed_report.c0_plus or speed_report.c1_plus
    if c_ref is None:
        c_ref = 2.0 * math.sqrt(sys_spec.d1.max() * max(sys_spec.b1.max(), 1e-9))
    c_hi = 1.2 * c_ref + 1.0
    cstar, cbar = weinberger.bracket_speeds(
        sys_spec, (0.0, c_hi, weinberger.DEFAULT_BISECTION_STEPS), keep_profiles=True)
    weinberger.dump_bracket_trace_csv(os.path.join(cfg.output, "bracket_trace.csv"),
                                      cstar.trace)
    for label, c_edge in (("lo", cstar.c_lo), ("hi", cstar.c_hi)):
        if c_edge in cstar.profiles:
            prof, iters = cstar.profiles[c_edge]
            weinberger.dump_profile_csv(
                os.path.join(cfg.output, f"profile_cstar_{label}.csv"), prof, iters)
    return {
        "cstar": {"lo": cstar.c_lo, "hi": cstar.c_hi,
                  "open_below": cstar.open_below, "open_above": cstar.open_above},
        "cbar": {"lo": cbar.c_lo, "hi": cbar.c_hi,
                 "open_below": cbar.open_below, "open_above": cbar.open_above},
        "classifications": [{"c": c, "class": cls} for c, cls, _, _ in cstar.trace],
    }


def _task_front(cfg, sys_spec, speed_report):
    c0 = speed_report.c0_plus if speed_report is not None else None
    # pad the sizing estimate; validate the chosen domain against the raw one
    c_sizing = 1.5 * c0 if c0 else 2.0 * 2.0 * math.sqrt(
        sys_spec.d1.max() * max(sys_spec.b1.max(), 1e-9))
    a_needed = c_sizing * cfg.periods * sys_spec.omega + 10.0 * sys_spec.ell
    half_width = cfg.domain_half_width or a_needed
    u1, u2 = sys_spec.u1_star(), sys_spec.u2_star()
    trace = frontsim.run_front(sys_spec, u1, u2, half_width, cfg.periods,
                               c_estimate=c0)
    frontsim.dump_trace_csv(os.path.join(cfg.output, "front_trace.csv"), trace)
    if trace.final_state is not None:
        pde.dump_snapshot_csv(os.path.join(cfg.output, "final_snapshot.csv"),
                              trace.final_state, labels=("v1", "v2"))
    verdict = frontsim.spreading_verdict(sys_spec, trace, speed_report, u1, u2)
    return verdict.to_dict(), verdict.verdict == "inconclusive"


# ---------------------------------------------------------------------------
# Demos
# ---------------------------------------------------------------------------

DEMOS = {
    "fisher": {
        "model": {"omega": 1.0, "ell": 1.0, "d1": "1", "d2": "1", "g1": "0", "g2": "0",
                  "b1": "1", "b2": "1", "a11": "1", "a12": "0", "a21": "0", "a22": "1"},
        "discretization": {"nt": 200, "nx": 64, "T": 20},
        "tasks": ["speed", "check"],
        "output": "out-fisher",
    },
    "competition-constants": {
        "model": {"omega": 1.0, "ell": 1.0, "d1": "1", "d2": "0.5", "g1": "0", "g2": "0",
                  "b1": "2", "b2": "1", "a11": "1", "a12": "0.3", "a21": "1.2", "a22": "1"},
        "discretization": {"nt": 200, "nx": 64, "A": 70.0, "T": 20},
        "tasks": ["speed", "check", "front"],
        "output": "out-competition-constants",
    },
    "competition-periodic": {
        "model": {"omega": 1.0, "ell": 1.0, "d1": "1", "d2": "0.5", "g1": "0", "g2": "0",
                  "b1": "2", "b2": "1 + 0.5*sin(2*pi*t)", "a11": "1", "a12": "0.3",
                  "a21": "1.2", "a22": "1"},
        "discretization": {"nt": 200, "nx": 8, "T": 20},
        "tasks": ["orbit", "speed", "check"],
        "output": "out-competition-periodic",
    },
    "shared-growth": {
        "model": {"omega": 1.0, "ell": 1.0, "d1": "0.25", "d2": "2.5", "g1": "0", "g2": "0",
                  "b1": "1 + 0.5*cos(2*pi*x) + 0.25*sin(2*pi*t)",
                  "b2": "1 + 0.5*cos(2*pi*x) + 0.25*sin(2*pi*t)",
                  "a11": "1", "a12": "1", "a21": "1", "a22": "1"},
        "discretization": {"nt": 200, "nx": 64},
        "tasks": ["orbit", "check"],
        "output": "out-shared-growth",
    },
}


# ---------------------------------------------------------------------------
# Command line
# ---------------------------------------------------------------------------

@click.group()
def main():
    """Spreading speeds for time-space periodic reaction-advection-diffusion systems."""


@main.command("run")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--refine", is_flag=True, help="Richardson grid-doubling study for speeds.")
@click.option("--jobs", default=1, show_default=True, help="Worker cap for sweeps.")
@click.option("--quiet", is_flag=True, help="Suppress progress output.")
def cmd_run(config_path, refine, jobs, quiet):
    """Execute a scenario config."""
    try:
        with open(config_path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        click.echo(f"validation failure: bad JSON: {exc}", err=True)
        raise SystemExit(EXIT_VALIDATION)
    raise SystemExit(run_scenario(raw, refine=refine, jobs=jobs, quiet=quiet))


@main.command("validate")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
def cmd_validate(config_path):
    """Validate a scenario config without running it."""
    try:
        with open(config_path) as fh:
            raw = json.load(fh)
        ScenarioConfig(raw)
    except (json.JSONDecodeError, ValidationError) as exc:
        click.echo(f"invalid: {exc}", err=True)
        raise SystemExit(EXIT_VALIDATION)
    click.echo("ok")
    raise SystemExit(EXIT_OK)


@main.command("demo")
@click.argument("name", type=click.Choice(sorted(DEMOS)))
@click.option("--run", "execute", is_flag=True, help="Run the demo after writing it.")
@click.option("--output", default=None, help="Override the demo's output directory.")
def cmd_demo(name, execute, output):
    """Print (or run) one of the shipped demo scenarios."""
    cfg = json.loads(json.dumps(DEMOS[name]))
    if output:
        cfg["output"] = output
    if not execute:
        click.echo(json.dumps(cfg, indent=2, sort_keys=True))
        raise SystemExit(EXIT_OK)
    raise SystemExit(run_scenario(cfg))


if __name__ == "__main__":
    main()
