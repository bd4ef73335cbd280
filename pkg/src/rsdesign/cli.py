"""Command-line interface: ``rsdesign {simulate,reproduce,advise,info}``.

Exit status is 0 on success, 2 for invalid input files or arguments and 3
when a numerical procedure fails.
"""

import argparse
import logging
import os
import sys

import numpy as np

from . import adaptive, config
from .designs import DesignError
from .error_models import Family, ModelError, elemental_info, moment_table
from .estimation import ConvergenceError, mle_location, weighted_location
from .information import InformationError, SupportGroup, invariant_info, relevant_info_eta, uv_statistics
from .montecarlo import (ScenarioConfig, SimulationError, Strategy, run_scenario, substream,
                         write_series)
from .quadrature import QuadratureError
from . import reproduce as repro

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
_NUMERIC = (ConvergenceError, InformationError, QuadratureError, SimulationError,
            np.linalg.LinAlgError, ArithmeticError)
_INPUT = (config.ConfigError, adaptive.AdaptiveError, DesignError, ModelError, ValueError,
          OSError)


class _Console:
    def __init__(self, quiet):
        self.quiet = quiet

    def __call__(self, message):
        if not self.quiet:
            print(message, flush=True)


def _out_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


# -- simulate --------------------------------------------------------------

def scenario_configs(doc, seed=None, iterations=None):
    """Expand a validated scenario document into ``ScenarioConfig`` objects."""
    model = config.build_model(doc["model"])
    strategies = doc["strategy"] if isinstance(doc["strategy"], list) else [doc["strategy"]]
    sizes = doc.get("sweep_n") or [None]
    out = []
    for n in sizes:
        design = config.build_design(doc["design"], n)
        for strategy in strategies:
            out.append(ScenarioConfig(
                model=model, design=design, strategy=strategy,
                theta_true=doc["theta_true"], n1=doc.get("n1"),
                iterations=iterations or doc.get("iterations", 2000),
                seed=doc.get("seed", 0) if seed is None else seed,
                contrast=config.as_array(doc.get("contrast")),
                criterion=config.build_criterion(doc.get("criterion")),
                first_run=tuple(doc["first_run"]) if "first_run" in doc else None,
            ))
    return out


def cmd_simulate(args, say):
    doc = config.load_json(args.config, config.SCENARIO_SCHEMA)
    reports, rows = [], []
    for cfg in scenario_configs(doc, args.seed, args.iterations):
        rep = run_scenario(cfg, workers=args.threads)
        reports.append(rep.to_dict())
        label = cfg.strategy.value
        for metric in ("lb_eff", "var_eff"):
            value = getattr(rep, metric)
            if value is not None:
                rows.append((cfg.n, label, metric, value, getattr(rep, metric + "_se")))
        say(f"n={cfg.n} {label}: lb_eff={_fmt(rep.lb_eff)} var_eff={_fmt(rep.var_eff)}"
            f" R_effective={rep.R_effective}")
    out = _out_dir(args.out)
    config.dump_json({"schema_version": config.SCHEMA_VERSION, "reports": reports},
                     os.path.join(out, "report.json"))
    write_series(rows, os.path.join(out, "series.csv"))
    say(f"wrote {out}/report.json and {out}/series.csv")
    return EXIT_OK


def _fmt(x):
    return "n/a" if x is None else f"{x:.4f}"


# -- reproduce -------------------------------------------------------------

def cmd_reproduce(args, say):
    out = _out_dir(args.out)
    kwargs = {"iterations": args.iterations or 2000, "seed": args.seed,
              "workers": args.threads, "progress": say}
    sweep = repro.parse_sweep(args.sweep)
    if args.target == "fig1":
        rows = repro.reproduce_fig1(sweep=sweep or repro.FIG1_SWEEP, **kwargs)
    elif args.target == "fig2":
        rows = repro.reproduce_fig2(sweep=sweep or repro.FIG2_SWEEP, **kwargs)
    else:
        tables, rows = repro.reproduce_table1(**kwargs)
        config.dump_json({"schema_version": config.SCHEMA_VERSION, "target": "table1",
                          "tables": tables}, os.path.join(out, "table1.json"))
    write_series(rows, os.path.join(out, f"{args.target}.csv"))
    say(f"wrote {out}/{args.target}.csv")
    return EXIT_OK


# -- advise ----------------------------------------------------------------

def _new_state(doc):
    design = config.build_design(doc["design"])
    if not isinstance(design, adaptive.Design):
        raise config.ConfigError("advise needs a deterministic design", "design.randomized")
    seed = doc.get("seed", 0)
    state = adaptive.initialize(design, config.build_model(doc["model"]), doc["n1"], doc["mode"],
                                substream(seed, 0, 1), first_run=doc.get("first_run"))
    state.seed = seed
    return state


def _describe(plan, state):
    if plan is None:
        return "experiment complete"
    counts = np.bincount(plan.allocations, minlength=state.d).tolist()
    text = f"run {state.run_index + 1}: {plan.size} observation(s), per-point counts {counts}"
    if plan.chosen_index is not None:
        text += f", chosen point {plan.chosen_index}"
    elif plan.probs is not None:
        text += f", probabilities {np.round(plan.probs, 6).tolist()}"
    if plan.capped:
        text += " (final run: remaining budget at the target weights)"
    return text


def cmd_advise(args, say):
    if args.state:
        raw = config.load_json(args.state, config.STATE_SCHEMA)
        state = adaptive.state_from_dict(raw)
    elif args.config:
        state = _new_state(config.load_json(args.config, config.EXPERIMENT_SCHEMA))
    else:
        raise config.ConfigError("advise needs --state or --config")
    if args.responses:
        if state.complete:
            raise adaptive.AdaptiveError("the experiment is already complete")
        if state.pending is None or state.pending.allocations is None:
            raise adaptive.AdaptiveError("state has no pending run to attach responses to")
        data = config.load_json(args.responses, config.RESPONSES_SCHEMA)
        adaptive.record_run(state, state.pending, data["responses"],
                            precisions=data.get("precisions"))
        plan = adaptive.next_plan(state)
        if plan is not None:
            adaptive.realize(plan, substream(state.seed, state.run_index, 1))
        state.pending = plan
    plan = None if state.complete else state.pending
    doc = adaptive.state_to_dict(state)
    say(_describe(plan, state))
    if plan is not None:
        say(f"allocations: {plan.allocations.tolist()}")
    if args.out:
        config.dump_json(doc, args.out)
    elif not args.quiet:
        sys.stdout.write(config.dump_json(doc))
    return EXIT_OK


# -- info ------------------------------------------------------------------

def info_document(model, data=None):
    table = moment_table(model)
    doc = {
        "schema_version": config.SCHEMA_VERSION,
        "model": model.to_dict(),
        "mu": table.mu,
        "gamma": None if not np.isfinite(table.gamma) else table.gamma,
        "gamma_alt": table.gamma_alt,
        "nu": {f"{k}{l}": v for (k, l), v in sorted(table.nu.items())},
    }
    if data is not None:
        groups = []
        for i, grp in enumerate(data["groups"]):
            y = np.asarray(grp["responses"], dtype=float)
            a = None if "precisions" not in grp else np.asarray(grp["precisions"], dtype=float)
            if model.family is Family.HETERO_NORMAL_GAMMA:
                if a is None or a.size != y.size:
                    raise config.ConfigError("need one precision per response",
                                             f"groups.{i}.precisions")
                eta = weighted_location(y, a)
            else:
                eta = mle_location(model, y)
            groups.append(SupportGroup(i, y, eta, a))
        h = np.array([relevant_info_eta(model, g) for g in groups])
        g = invariant_info(h, elemental_info(model))
        d = len(groups)
        w = np.asarray(data.get("weights", [1.0 / d] * d), dtype=float)
        if w.size != d:
            raise config.ConfigError(f"{w.size} weights for {d} groups", "weights")
        u, v = uv_statistics(g, w, sum(len(grp) for grp in groups))
        doc["groups"] = [
            {"eta_hat": grp.eta_hat, "h": float(h[i]), "g": float(g[i]),
             "u": float(u[i]), "v": float(v[i]), "size": len(grp)}
            for i, grp in enumerate(groups)
        ]
    return doc


def cmd_info(args, say):
    doc = config.load_json(args.config, {"type": "object", "required": ["model"],
                                         "properties": {"model": config.MODEL_SCHEMA}})
    model = config.build_model(doc["model"])
    data = config.load_json(args.responses, config.DATA_SCHEMA) if args.responses else None
    out = info_document(model, data)
    say(f"mu = {out['mu']:.10g}   gamma = {out['gamma']}   gamma_alt = {out['gamma_alt']:.10g}")
    for key, value in out["nu"].items():
        say(f"nu_{key} = {value:.10g}")
    for i, grp in enumerate(out.get("groups", [])):
        say(f"group {i}: n={grp['size']} eta_hat={grp['eta_hat']:.6g} h={grp['h']:.6g}"
            f" g={grp['g']:.6g} u={grp['u']:.6g} v={grp['v']:.6g}")
    if args.out:
        config.dump_json(out, args.out)
    return EXIT_OK


# -- entry point -------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="rsdesign", description=__doc__.splitlines()[0])
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="override the random seed")
        p.add_argument("--threads", type=int, default=1, help="worker processes")
        p.add_argument("--iterations", type=int, default=None, help="override R")
        p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)

    p = sub.add_parser("simulate", help="run the scenarios of a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory")
    common(p)

    p = sub.add_parser("reproduce", help="rerun one of the reference simulation studies")
    p.add_argument("--target", required=True, choices=["fig1", "fig2", "table1"])
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--sweep", default=None, help="comma-separated sample sizes")
    common(p)

    p = sub.add_parser("advise", help="plan the next run of a live experiment")
    p.add_argument("--state", help="state file from a previous call")
    p.add_argument("--config", help="experiment file, to start a new experiment")
    p.add_argument("--responses", help="responses of the pending run")
    p.add_argument("--out", help="where to write the updated state")
    p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)

    p = sub.add_parser("info", help="information moments of an error model")
    p.add_argument("--config", required=True, help="file with a 'model' block")
    p.add_argument("--responses", help="grouped data file")
    p.add_argument("--out", help="write the results as JSON")
    p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    say = _Console(args.quiet)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    handler = {"simulate": cmd_simulate, "reproduce": cmd_reproduce,
               "advise": cmd_advise, "info": cmd_info}[args.verb]
    try:
        return handler(args, say)
    except _NUMERIC as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except _INPUT as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
