"""Command-line front end: config parsing, pipelines and reports.

Exit codes: 0 success, 2 invalid configuration or failed hypothesis,
3 solver non-convergence, 4 threshold violation, 1 anything else.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import BranchEmptyError, ConvergenceError, DomainError, GrushinError, HypothesisError, ThresholdError
from .fibering import RayData, find_roots
from .functional import EnergyFunctional
from .grid import TensorGrid
from .model import ProblemSpec, validate
from .operator import GrushinOperator
from .reporting import write_csv, write_field, write_json, write_trace

logger = logging.getLogger("grushin")

OUTPUT_ENV = "GRUSHIN_OUTPUT_ROOT"
EXIT_OK, EXIT_ERROR, EXIT_INVALID, EXIT_CONVERGENCE, EXIT_THRESHOLD = 0, 1, 2, 3, 4
SUBCOMMANDS = ("validate", "solve", "fibering", "sobolev", "bubble", "mpl-gap", "solve-critical", "sweep")

SECTION_DEFAULTS = {
    "grid": {"nodes": 129},
    "solver": {"tol": 1e-6, "max_iter": 5000, "seeds": [0, 1, 2], "branch": "both", "distinct_tol": 1e-2,
               "polish_iter": 10, "workers": 1, "sobolev_tol": 1e-10, "sobolev_max_iter": 2000},
    "critical": {"eps": [0.2, 0.1, 0.05, 0.025], "center": None, "radius": None, "path_points": 64,
                 "tol": 1e-6, "max_iter": 500, "ball_tol": 1e-8, "gammas": [4.5, 5.0], "gap_samples": 400,
                 "floor_samples": 100},
    "output": {"dir": None},
}

BENCHMARK_CONFIG = {"problem": {"mu_fraction": 0.05}}


@dataclass
class RunConfig:
    """Validated configuration, one attribute per section.

    ``mu_fraction`` (problem section) sets ``mu`` relative to the estimated
    threshold (``mu0`` subcritical, ``mu*`` critical) instead of directly.
    """

    problem: ProblemSpec
    grid: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    critical: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    mu_fraction: float | None = None

    @classmethod
    def from_dict(cls, data) -> "RunConfig":
        data = dict(data or {})
        unknown = set(data) - {"problem", *SECTION_DEFAULTS}
        if unknown:
            raise DomainError(f"unknown config sections: {sorted(unknown)}")
        sections = {}
        for name, defaults in SECTION_DEFAULTS.items():
            given = dict(data.get(name) or {})
            bad = set(given) - set(defaults)
            if bad:
                raise DomainError(f"unknown keys in section {name!r}: {sorted(bad)}")
            sections[name] = {**defaults, **given}
        problem = dict(data.get("problem") or {})
        mu_fraction = problem.pop("mu_fraction", None)
        if mu_fraction is not None and "mu" in problem:
            raise DomainError("give either problem.mu or problem.mu_fraction, not both")
        spec = ProblemSpec.from_dict(problem)
        if sections["solver"]["branch"] not in ("plus", "minus", "both"):
            raise DomainError("solver.branch must be plus, minus or both")
        return cls(spec, mu_fraction=None if mu_fraction is None else float(mu_fraction), **sections)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(yaml.safe_load(fh))

    def to_dict(self) -> dict:
        problem = self.problem.to_dict()
        if self.mu_fraction is not None:
            problem["mu_fraction"] = self.mu_fraction
        return {"problem": problem, "grid": self.grid, "solver": self.solver, "critical": self.critical}


class Runner:
    """Shared setup for one subcommand invocation."""

    def __init__(self, cfg: RunConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.spec = cfg.problem

    def require_valid(self):
        report = validate(self.spec)
        if not report.passed:
            failed = "; ".join(f"{c.name}: {c.detail}" for c in report.failures)
            raise HypothesisError(f"validation failed: {failed}")
        return report

    def build(self):
        grid = TensorGrid.from_spec(self.spec, self.cfg.grid["nodes"])
        op = GrushinOperator(grid, self.spec.lam)
        return grid, op

    def sobolev_opts(self):
        return {"tol": self.cfg.solver["sobolev_tol"], "max_iter": self.cfg.solver["sobolev_max_iter"]}

    def base_report(self, **extra):
        return {"config": self.cfg.to_dict(), "problem": self.spec.to_dict(), **extra}


# ---------------------------------------------------------------- subcommands

def cmd_validate(runner: Runner, args) -> tuple[int, str]:
    report = validate(runner.spec)
    write_json(runner.out / "validate.json", runner.base_report(validation=report.to_dict()))
    if report.passed:
        return EXIT_OK, f"validate: all {len(report.checks)} checks passed"
    failed = "; ".join(f"{c.name}: {c.detail}" for c in report.failures)
    return EXIT_INVALID, f"validate: failed: {failed}"


def _subcritical_setup(runner: Runner):
    from .nehari_solver import thresholds

    if runner.spec.regime != "subcritical":
        raise HypothesisError("this subcommand expects a subcritical problem (use solve-critical)")
    runner.require_valid()
    grid, op = runner.build()
    functional = EnergyFunctional(runner.spec, op)
    from .sobolev import estimate_sobolev_constants

    consts = estimate_sobolev_constants(op, (runner.spec.q_exp, runner.spec.p_exp), **runner.sobolev_opts())
    limits = thresholds(functional, consts)
    if runner.cfg.mu_fraction is not None:
        runner.spec = runner.spec.with_params(mu=runner.cfg.mu_fraction * limits.mu0)
        functional = functional.with_mu(runner.spec.mu)
        limits = thresholds(functional, consts)
    return grid, op, functional, limits


def solve_subcritical(runner: Runner, branch: str) -> dict:
    from .nehari_solver import minimize_on_branch, reprojection_t_minus, two_solutions

    grid, op, functional, limits = _subcritical_setup(runner)
    solver = runner.cfg.solver
    opts = {"tol": solver["tol"], "max_iter": solver["max_iter"], "polish_iter": solver["polish_iter"],
            "limits": limits}
    results = {}
    payload = runner.base_report(constants=limits.to_dict())
    if branch == "both":
        pair = two_solutions(functional, seeds=tuple(solver["seeds"]), distinct_tol=solver["distinct_tol"],
                             n_jobs=solver["workers"], **opts)
        results = {"minus": pair.first, "plus": pair.second}
        payload["distinctness"] = pair.distinctness
    else:
        best = None
        for seed in solver["seeds"]:
            res = minimize_on_branch(functional, branch, seed=seed, **opts)
            if best is None or res.energy < best.energy:
                best = res
        results[branch] = best
    payload["results"] = {}
    for name, res in results.items():
        entry = res.to_dict()
        entry["norm"] = float(np.sqrt(op.energy(res.field)))
        entry["minorant"] = float(limits.minorant(entry["norm"]))
        if name == "minus":
            entry["reprojection_t_minus"] = reprojection_t_minus(functional, res.field)
            entry["norm_bound"] = limits.minus_norm_bound
        payload["results"][name] = entry
        write_field(runner.out / f"field_{name}.csv", grid, res.field)
        write_trace(runner.out / f"trace_{name}.csv", res.trace)
    write_json(runner.out / "solve.json", payload)
    return payload


def cmd_solve(runner: Runner, args) -> tuple[int, str]:
    branch = args.branch or runner.cfg.solver["branch"]
    payload = solve_subcritical(runner, branch)
    parts = [f"{k}: I={v['energy']:.6g} res={v['residual']:.2e}" for k, v in sorted(payload["results"].items())]
    return EXIT_OK, f"solve (mu={runner.spec.mu:.6g}): " + ", ".join(parts)


def cmd_fibering(runner: Runner, args) -> tuple[int, str]:
    from .nehari_solver import initial_field

    grid, op, functional, limits = _subcritical_setup(runner)
    u = initial_field(functional, "minus")
    ray = RayData.from_field(functional, u)
    report = find_roots(ray)
    t_end = 1.5 * report.t_minus
    ts = np.linspace(0.0, t_end, args.samples)
    write_csv(runner.out / "fibering.csv", ["t", "F", "dF", "G"],
              zip(ts, ray.F(ts), ray.dF(ts), ray.G(ts)))
    write_json(runner.out / "fibering.json", runner.base_report(
        constants=limits.to_dict(), ray={"A": ray.A, "B": ray.B, "C": ray.C}, fibering=report.to_dict()))
    t_plus = "none" if report.t_plus is None else f"{report.t_plus:.6g}"
    return EXIT_OK, f"fibering: case ({report.case}) t+={t_plus} t0={report.t0:.6g} t-={report.t_minus:.6g}"


def cmd_sobolev(runner: Runner, args) -> tuple[int, str]:
    from .sobolev import SobolevEstimator

    runner.require_valid()
    grid, op = runner.build()
    spec = runner.spec
    exps = args.exponents or [2.0, spec.q_exp, spec.p_exp if spec.regime == "subcritical" else spec.crit]
    est = SobolevEstimator(tuple(float(p) for p in exps), **runner.sobolev_opts()).fit(op)
    rows = {f"{p:g}": {"p": p, "S": e.S, "quotient": e.quotient, "converged": e.converged, "iterations": e.iterations}
            for p, e in sorted(est.estimates_.items())}
    payload = runner.base_report(sobolev=rows)
    if spec.crit in est.estimates_:
        payload["S_lambda_hat"] = est.estimates_[spec.crit].quotient
    write_json(runner.out / "sobolev.json", payload)
    flagged = [k for k, v in rows.items() if not v["converged"]]
    summary = "sobolev: " + ", ".join(f"S_{k}={v['S']:.6g}" for k, v in rows.items())
    if flagged:
        summary += f" (not converged: {', '.join(flagged)})"
    return EXIT_OK, summary


def _family(runner: Runner, op):
    from .critical_solver import build_bubble_family

    c = runner.cfg.critical
    return build_bubble_family(runner.spec, op, center=c["center"], R=c["radius"], eps_list=c["eps"])


def cmd_bubble(runner: Runner, args) -> tuple[int, str]:
    from .critical_solver import asymptotics_experiment

    runner.require_valid()
    grid, op = runner.build()
    family = _family(runner, op)
    table = asymptotics_experiment(family, runner.cfg.critical["gammas"])
    keys = [k for k in table.rows[0] if k != "eps"]
    write_csv(runner.out / "asymptotics.csv", ["eps"] + keys, ([r["eps"]] + [r[k] for k in keys] for r in table.rows))
    members = {f"{e:g}": {"nodes_across": family.nodes_across(grid, e).tolist(),
                          "energy_w": op.energy(family.w[e])} for e in family.eps}
    payload = runner.base_report(
        family={"center": family.center, "R": family.R, "resolved": family.eps, "skipped": family.skipped,
                "members": members, "profile_quotient": family.profile.quotient},
        asymptotics=table.to_dict())
    write_json(runner.out / "bubble.json", payload)
    bad = [f.quantity for f in table.fits if not f.ok]
    fits = ", ".join(f"{f.quantity}={f.observed:.3f}/{f.predicted:.3f}" for f in table.fits)
    return EXIT_OK, f"bubble: slopes observed/predicted {fits}" + (f" (poor fits: {', '.join(bad)})" if bad else "")


def _critical_setup(runner: Runner):
    from .critical_solver import compute_thresholds, critical_constants, local_minimize_in_ball

    if runner.spec.regime != "critical":
        raise HypothesisError("this subcommand expects a critical problem")
    runner.require_valid()
    grid, op = runner.build()
    consts = critical_constants(runner.spec, op, **runner.sobolev_opts())
    thr = compute_thresholds(runner.spec, op, consts)
    if runner.cfg.mu_fraction is not None:
        runner.spec = runner.spec.with_params(mu=runner.cfg.mu_fraction * thr.mu_star)
    functional = EnergyFunctional(runner.spec, op)
    local = local_minimize_in_ball(functional, thr, tol=runner.cfg.critical["ball_tol"],
                                   max_iter=runner.cfg.solver["max_iter"])
    thr = thr.with_level(local.energy)
    return grid, op, functional, thr, local


def _gap(runner, functional, local, family, thr):
    from .critical_solver import verify_energy_gap

    table = verify_energy_gap(functional, local.field, family, thr.S_lambda_hat,
                           samples=runner.cfg.critical["gap_samples"], n_jobs=runner.cfg.solver["workers"])
    write_csv(runner.out / "energy_gap.csv", ["eps", "t_max", "max_energy", "bound", "margin", "holds"],
              ([r.eps, r.t_max, r.max_energy, r.bound, r.margin, int(r.holds)] for r in table.rows))
    return table


def cmd_energy_gap(runner: Runner, args) -> tuple[int, str]:
    grid, op, functional, thr, local = _critical_setup(runner)
    family = _family(runner, op)
    table = _gap(runner, functional, local, family, thr)
    write_json(runner.out / "energy_gap.json", runner.base_report(
        constants=thr.to_dict(), local_minimizer=local.to_dict(), gap=table.to_dict(), skipped_eps=family.skipped))
    rows = ", ".join(f"eps={r.eps:g}: margin={r.margin:+.4g}" for r in table.rows)
    return EXIT_OK, f"mpl-gap (bound {table.bound:.6g}): {rows}"


def cmd_solve_critical(runner: Runner, args) -> tuple[int, str]:
    from .critical_solver import floor_check, mountain_pass

    grid, op, functional, thr, local = _critical_setup(runner)
    c = runner.cfg.critical
    family = _family(runner, op)
    gap = _gap(runner, functional, local, family, thr)
    eps = max(gap.holding) if gap.holding else min(family.eps)
    mp = mountain_pass(functional, local.field, family, thr, eps=eps, points=c["path_points"], tol=c["tol"],
                       max_iter=c["max_iter"], gap_certified=bool(gap.holding))
    u_t = mp.solve.field
    from .operator import lp_norm

    levels = {
        "beta": local.energy,
        "c_mu": mp.solve.energy,
        "floor": thr.delta ** 2 / 8.0,
        "ceiling": local.energy + thr.compact_level,
        "c_tilde_hat": thr.c_tilde_hat,
        "c_tilde_note": "certified only over the critical points computed in this run",
    }
    levels["window_holds"] = levels["floor"] <= levels["c_mu"] < levels["ceiling"]
    levels["ceiling_slack"] = levels["ceiling"] - levels["c_mu"]
    write_field(runner.out / "field_u_mu.csv", grid, local.field)
    write_field(runner.out / "field_u_tilde.csv", grid, u_t)
    write_trace(runner.out / "trace_mountain_pass.csv", mp.solve.trace)
    write_csv(runner.out / "path.csv", ["t", "energy"], zip(mp.path_t, mp.path_energy))
    payload = runner.base_report(
        constants=thr.to_dict(), local_minimizer=local.to_dict(), mountain_pass=mp.to_dict(), levels=levels,
        gap=gap.to_dict(), distinctness=lp_norm(grid, u_t - local.field, 2),
        floor_check=floor_check(functional, thr, samples=c["floor_samples"]))
    write_json(runner.out / "solve_critical.json", payload)
    return EXIT_OK, (f"solve-critical (mu={runner.spec.mu:.6g}): I(u_mu)={local.energy:.6g}, "
                     f"c_mu={mp.solve.energy:.6g} < {levels['ceiling']:.6g}, res={mp.solve.residual:.2e}")


def _sweep_one(job):
    cfg_dict, param, value, out = job
    cfg_dict = {**cfg_dict, "problem": {**cfg_dict["problem"], param: value}}
    if param == "mu":
        cfg_dict["problem"].pop("mu_fraction", None)
    runner = Runner(RunConfig.from_dict(cfg_dict), Path(out))
    try:
        payload = solve_subcritical(runner, "both")
    except GrushinError as exc:
        return {"value": value, "error": str(exc), "exit_code": exit_code_for(exc)}
    res = payload["results"]
    return {"value": value, "m_plus": res["plus"]["energy"], "m_minus": res["minus"]["energy"],
            "distinctness": payload["distinctness"], "exit_code": EXIT_OK}


def cmd_sweep(runner: Runner, args) -> tuple[int, str]:
    if not args.values:
        raise DomainError("sweep needs --values")
    base = runner.cfg.to_dict()
    for key in ("q", "p"):
        if getattr(runner.spec, key) is None:
            base["problem"].pop(key)
    jobs = [(base, args.param, float(v), str(runner.out / f"{args.param}={float(v):g}")) for v in args.values]
    workers = max(1, int(runner.cfg.solver["workers"]))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]
    ok = [r for r in rows if r["exit_code"] == EXIT_OK]
    trend = None
    if args.param == "mu" and len(ok) > 1:
        by_mu = sorted(ok, key=lambda r: r["value"])
        # m_plus should rise toward 0 as mu decreases
        trend = all(a["m_plus"] >= b["m_plus"] for a, b in zip(by_mu, by_mu[1:]))
    write_json(runner.out / "sweep.json", runner.base_report(param=args.param, runs=rows, m_plus_trend_to_zero=trend))
    write_csv(runner.out / "sweep.csv", ["value", "m_plus", "m_minus", "exit_code"],
              ([r["value"], r.get("m_plus", float("nan")), r.get("m_minus", float("nan")), r["exit_code"]] for r in rows))
    code = max((r["exit_code"] for r in rows), default=EXIT_OK)
    return code, f"sweep {args.param}: {len(ok)}/{len(rows)} runs succeeded, m_plus trend to 0: {trend}"


COMMANDS = {
    "validate": cmd_validate,
    "solve": cmd_solve,
    "fibering": cmd_fibering,
    "sobolev": cmd_sobolev,
    "bubble": cmd_bubble,
    "mpl-gap": cmd_energy_gap,
    "solve-critical": cmd_solve_critical,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grushin", description="Two-solution solver for the Grushin concave-convex problem.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML file with problem/grid/solver/critical/output sections")
        p.add_argument("--out", help=f"output directory (default: config output.dir, then ${OUTPUT_ENV}/<command>)")
        if name == "solve":
            p.add_argument("--branch", choices=("plus", "minus", "both"))
        if name == "fibering":
            p.add_argument("--samples", type=int, default=201)
        if name == "sobolev":
            p.add_argument("--exponents", type=float, nargs="+")
        if name == "sweep":
            p.add_argument("--param", default="mu")
            p.add_argument("--values", type=float, nargs="+")
    return parser


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ThresholdError):
        return EXIT_THRESHOLD
    if isinstance(exc, (ConvergenceError, BranchEmptyError)):
        return EXIT_CONVERGENCE
    if isinstance(exc, (HypothesisError, DomainError, yaml.YAMLError, OSError)):
        return EXIT_INVALID
    return EXIT_ERROR


def output_dir(cfg: RunConfig, args) -> Path:
    if args.out:
        return Path(args.out)
    if cfg.output.get("dir"):
        return Path(cfg.output["dir"])
    return Path(os.environ.get(OUTPUT_ENV, "grushin-output")) / args.command


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig.from_dict(BENCHMARK_CONFIG)
        runner = Runner(cfg, output_dir(cfg, args))
        code, summary = COMMANDS[args.command](runner, args)
    except (GrushinError, ValueError, yaml.YAMLError, OSError) as exc:
        code = exit_code_for(exc)
        print(f"{args.command}: error: {exc}", file=sys.stderr)
        return code
    print(summary)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
