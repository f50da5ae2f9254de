"""Command-line front end.

Exit codes: 0 ok, 2 configuration, 3 integration, 4 optimization, 5 I/O.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .calibration import calibrate_beta, calibration_ngm, effective_rt
from .dynamics import IntegrationError, integrate
from .economics import summary
from .model import ConfigError, germany_baseline, initial_state, load_params, params_from_dict, params_to_dict, validate
from .optimize import (
    InfeasibleCapError,
    OptimizationError,
    SearchConfig,
    default_chi_grid,
    nested_frontiers,
    optimize_policy,
    safety_policy,
)
from .policy import FAMILY_ORDER, Family, PolicySchedule
from .reporting import (
    RunManifest,
    atomic_write,
    csv_text,
    frontier_chart,
    frontier_csv,
    point_dict,
    read_frontier_csv,
    trajectory_charts,
    write_json,
)
from .scenarios import ScenarioError, ScenarioSpec, apply_scenario, resolve_scenario, scenario_catalog, spec_from_list

log = logging.getLogger("mgseir")

EXIT_CONFIG, EXIT_INTEGRATION, EXIT_OPTIMIZATION, EXIT_IO = 2, 3, 4, 5


class Context:
    """Resolved inputs of one run: base parameters, scenarios and options."""

    def __init__(self, command: str, opts: dict[str, Any], base, scenarios: list[ScenarioSpec], config_path=None):
        self.command = command
        self.opts = opts
        self.base = base
        self.scenarios = scenarios
        self.config_path = config_path
        self.out = Path(opts["out"])
        self.outputs: list[str] = []

    @property
    def search(self) -> SearchConfig:
        o = self.opts
        kw = {"seed": o["seed"], "dt": o["dt"], "knots": o["knots"]}
        if o.get("population") is not None:
            kw["population"] = o["population"]
        if o.get("generations") is not None:
            kw["generations"] = o["generations"]
        return SearchConfig(**kw)

    def params_for(self, spec: ScenarioSpec):
        return apply_scenario(self.base, spec)

    def write(self, name: str, text: str) -> None:
        atomic_write(self.out / name, text)
        self.outputs.append(name)

    def write_json(self, name: str, obj) -> None:
        write_json(self.out / name, obj)
        self.outputs.append(name)

    def manifest(self, chi_grid=None) -> None:
        m = RunManifest(
            command=self.command,
            options={k: v for k, v in self.opts.items() if k != "out"},
            params=params_to_dict(self.base),
            scenarios=[s.name for s in self.scenarios],
            seed=self.opts.get("seed"),
            dt=self.opts.get("dt"),
            chi_grid=None if chi_grid is None else [float(c) for c in chi_grid],
            outputs=sorted(set(self.outputs)),
            config_path=self.config_path,
            version=__version__,
        )
        d = m.to_dict()
        d["scenario_specs"] = [{"name": s.name, "transforms": s.to_list()} for s in self.scenarios]
        write_json(self.out / "manifest.json", d)


def _families(ctx: Context) -> list[Family]:
    fams = ctx.opts.get("family") or ["semi"]
    return sorted({Family.parse(f) for f in fams}, key=FAMILY_ORDER.index)


def _chi_grid(ctx: Context, params) -> np.ndarray:
    if ctx.opts.get("chi") is not None:
        return np.array([float(ctx.opts["chi"])])
    return default_chi_grid(params, int(ctx.opts.get("chi_grid") or 24), ctx.search)


def cmd_simulate(ctx: Context) -> dict:
    params = ctx.params_for(ctx.scenarios[0])
    if ctx.opts.get("policy"):
        policy = PolicySchedule.from_dict(json.loads(Path(ctx.opts["policy"]).read_text()))
        if policy.horizon != params.horizon:
            raise ConfigError("policy horizon does not match the scenario horizon")
    else:
        policy = PolicySchedule.zero(params.horizon, knots=ctx.opts["knots"])
    traj = integrate(params, policy, ctx.opts["dt"])
    ctx.write("trajectory.csv", traj.to_csv())
    result = summary(traj, float(ctx.opts.get("chi") or 0.0))
    result["rt0"] = float(traj.rt[0])
    result["max_icu"] = float(traj.icu.max())
    ctx.write_json("summary.json", result)
    ctx.write_json("policy.json", policy.to_dict())
    if not ctx.opts["no_svg"]:
        for name, svg in trajectory_charts(ctx.out / "trajectory.csv").items():
            ctx.write(name, svg)
    ctx.manifest()
    return result


def cmd_calibrate(ctx: Context) -> dict:
    params = ctx.params_for(ctx.scenarios[0])
    target = float(ctx.opts.get("r0") or 2.4)
    beta = calibrate_beta(params, target)
    ngm = calibration_ngm(params.replace(beta=beta))
    result = {
        "beta": beta,
        "target_r0": target,
        "ngm": ngm.matrix.tolist(),
        "spectral_radius": ngm.radius,
        "rt0_scenario": effective_rt(initial_state(params.replace(beta=beta)), np.zeros(3), params.replace(beta=beta)),
    }
    print(json.dumps(result, indent=2))
    return result


def cmd_optimize(ctx: Context) -> dict:
    params = ctx.params_for(ctx.scenarios[0])
    fam = _families(ctx)[0]
    if ctx.opts.get("safety_cap") is not None:
        point = safety_policy(fam, params, ctx.opts["safety_cap"], ctx.search)
    else:
        point = optimize_policy(fam, params, float(ctx.opts.get("chi") or 0.0), ctx.search)
    ctx.write_json("policy.json", point.policy.to_dict())
    ctx.write_json("point.json", point_dict(point))
    traj = integrate(params, point.policy, ctx.opts["dt"])
    ctx.write("trajectory.csv", traj.to_csv())
    if not ctx.opts["no_svg"]:
        for name, svg in trajectory_charts(ctx.out / "trajectory.csv").items():
            ctx.write(name, svg)
    ctx.manifest()
    return point_dict(point)


def cmd_frontier(ctx: Context) -> dict:
    params = ctx.params_for(ctx.scenarios[0])
    families = _families(ctx)
    grid = _chi_grid(ctx, params)
    _, curves = nested_frontiers(params, grid, families, ctx.search)
    safety = {}
    for fam in families:
        ctx.write(f"frontier_{fam.value}.csv", frontier_csv(curves[fam]))
        if ctx.opts.get("safety_cap") is not None:
            safety[fam.value] = safety_policy(fam, params, ctx.opts["safety_cap"], ctx.search)
    if len(families) == 1:
        ctx.write("frontier.csv", frontier_csv(curves[families[0]]))
    if safety:
        ctx.write_json("safety.json", {k: point_dict(v) for k, v in safety.items()})
    if not ctx.opts["no_svg"]:
        rows = {fam.value: read_frontier_csv(ctx.out / f"frontier_{fam.value}.csv") for fam in families}
        marks = {k: (v.mortality, v.econ_loss_pct_gdp) for k, v in safety.items()}
        ctx.write("frontier.svg", frontier_chart(rows, marks))
    ctx.manifest(grid)
    return {fam.value: len(curves[fam]) for fam in families}


COMPARE_HEADER = ["scenario", "mortality", "econ_loss", "econ_loss_pct_gdp", "max_icu", "senior_shield_days", "chi"]


def cmd_compare(ctx: Context) -> dict:
    fam = _families(ctx)[0]
    rows = []
    for spec in ctx.scenarios:
        params = ctx.params_for(spec)
        if ctx.opts.get("safety_cap") is not None:
            point = safety_policy(fam, params, ctx.opts["safety_cap"], ctx.search)
        else:
            point = optimize_policy(fam, params, float(ctx.opts.get("chi") or 0.0), ctx.search)
        traj = integrate(params, point.policy, ctx.opts["dt"])
        senior = point.policy.group_levels()[2]
        rows.append(
            {
                "scenario": spec.name,
                "mortality": point.mortality,
                "econ_loss": point.econ_loss,
                "econ_loss_pct_gdp": point.econ_loss_pct_gdp,
                "max_icu": float(traj.icu[:-1].max()),
                "senior_shield_days": float(np.sum(senior > 0.5) * point.policy.block),
                "chi": point.chi,
            }
        )
    ctx.write("compare.csv", csv_text(COMPARE_HEADER, [[r[k] for k in COMPARE_HEADER] for r in rows]))
    ctx.write_json("compare.json", rows)
    ctx.manifest()
    return {"rows": rows}


def cmd_catalog(ctx: Context) -> dict:
    cat = scenario_catalog()
    for name, spec in cat.items():
        print(f"{name}\t{json.dumps(spec.to_list())}")
    return {"scenarios": list(cat)}


COMMANDS = {
    "simulate": cmd_simulate,
    "calibrate-beta": cmd_calibrate,
    "optimize": cmd_optimize,
    "frontier": cmd_frontier,
    "compare": cmd_compare,
    "catalog": cmd_catalog,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mgseir", description="Multi-group SEIR shielding policy tool")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenarios_many=False):
        p.add_argument("--config", help="JSON parameter file (missing fields take baseline values)")
        if scenarios_many:
            p.add_argument("--scenario", action="append", help="catalog name or JSON file; repeatable")
        else:
            p.add_argument("--scenario", default="baseline", help="catalog name or JSON file")
        p.add_argument("--dt", type=float, default=0.25)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--knots", type=int, default=13)
        p.add_argument("--out", default="out")
        p.add_argument("--no-svg", action="store_true")

    def search(p, many_families=False):
        p.add_argument(
            "--family", action="append" if many_families else None, choices=["uniform", "semi", "full"],
            default=None,
        )
        g = p.add_mutually_exclusive_group()
        g.add_argument("--chi", type=float)
        g.add_argument("--chi-grid", type=int)
        p.add_argument("--safety-cap", type=float)
        p.add_argument("--population", type=int)
        p.add_argument("--generations", type=int)

    p = sub.add_parser("simulate", help="integrate one trajectory")
    common(p)
    p.add_argument("--policy", help="policy JSON (default: no shielding)")
    p.add_argument("--chi", type=float, default=0.0)

    p = sub.add_parser("calibrate-beta", help="print the calibrated transmission rate as JSON")
    common(p)
    p.add_argument("--r0", type=float, default=2.4)

    p = sub.add_parser("optimize", help="optimize one policy for a chi or a mortality cap")
    common(p)
    search(p)

    p = sub.add_parser("frontier", help="trace efficient frontiers")
    common(p)
    search(p, many_families=True)

    p = sub.add_parser("compare", help="compare scenarios at a chi or a mortality cap")
    common(p, scenarios_many=True)
    search(p)

    p = sub.add_parser("catalog", help="list named scenarios")

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    return parser


def _resolve(args) -> Context:
    opts = {k: v for k, v in vars(args).items() if k not in ("command", "verbose", "config")}
    base = load_params(args.config) if getattr(args, "config", None) else germany_baseline()
    problems = validate(base)
    if problems:
        raise ConfigError("; ".join(problems))
    refs = opts.pop("scenario", None) or ["baseline"]
    if isinstance(refs, str):
        refs = [refs]
    scenarios = [resolve_scenario(r) for r in refs]
    if isinstance(opts.get("family"), str):
        opts["family"] = [opts["family"]]
    opts.setdefault("dt", 0.25)
    opts.setdefault("knots", 13)
    opts.setdefault("seed", 0)
    opts.setdefault("out", "out")
    opts.setdefault("no_svg", True)
    opts["scenario"] = refs
    return Context(args.command, opts, base, scenarios, getattr(args, "config", None))


def _replay_context(path: str, out: str) -> Context:
    d = json.loads(Path(path).read_text())
    base = params_from_dict(d["params"], germany_baseline())
    scenarios = [spec_from_list(s["transforms"], s["name"]) for s in d.get("scenario_specs", [])]
    opts = dict(d["options"])
    opts["out"] = out
    return Context(d["command"], opts, base, scenarios or [ScenarioSpec((), "baseline")], d.get("config_path"))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        ctx = _replay_context(args.manifest, args.out) if args.command == "replay" else _resolve(args)
        COMMANDS[ctx.command](ctx)
    except (ConfigError, ScenarioError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationError as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except (OptimizationError, InfeasibleCapError) as exc:
        print(f"optimization failed: {exc}", file=sys.stderr)
        return EXIT_OPTIMIZATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
