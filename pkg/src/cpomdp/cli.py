"""Command-line entry point: ``cpomdp run|pareto|ablation|oracle-test``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from cpomdp import harness
from cpomdp.config import ConfigError, RunConfig, describe_keys, load_config

DEFAULT_ORACLE_CONFIG = "[problem]\nname = tiger\n"


def _on_off(value: str) -> bool:
    low = value.lower()
    if low in ("on", "true", "1", "yes"):
        return True
    if low in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on or off, got {value!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cpomdp",
        description="Online planning for constrained POMDPs: experiments and checks.",
        epilog=describe_keys(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log depletion events and progress")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "run": "compare planners over seeded episodes; writes episodes.csv and summary.json",
        "pareto": "scalarized-reward sweep plus the constrained planner; writes plot data",
        "ablation": "root statistics with normal/minimal cost propagation and unconstrained search",
        "oracle-test": "check first actions against the enumerated optimum of the discrete oracle problem",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text, epilog=describe_keys(),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", required=name != "oracle-test", help="config file (key = value with sections)")
        p.add_argument("--episodes", type=int, help="episodes per planner (searches for ablation/oracle-test)")
        p.add_argument("--seed", type=int, help="base seed")
        p.add_argument("--jobs", type=int, help="worker processes")
        p.add_argument("--out-dir", help="output directory (default: $CPOMDP_OUT_DIR, then the config)")
        p.add_argument("--planner", help="comma-separated planner ids")
        p.add_argument("--min-cost-prop", type=_on_off, metavar="on|off", help="minimal cost propagation")
        p.add_argument("--rolling-budget", type=_on_off, metavar="on|off", help="rolling budget between steps")
    return parser


def _load(args) -> RunConfig:
    overrides: dict[str, dict] = {"harness": {}, "planner": {}, "dual": {}}
    if args.episodes is not None:
        overrides["harness"]["n_episodes"] = args.episodes
    if args.seed is not None:
        overrides["harness"]["base_seed"] = args.seed
    if args.jobs is not None:
        overrides["harness"]["jobs"] = args.jobs
    if args.planner is not None:
        overrides["planner"]["ids"] = args.planner
    if args.rolling_budget is not None:
        overrides["dual"]["rolling_budget"] = args.rolling_budget
    if args.config is None:
        cfg = load_config(text=DEFAULT_ORACLE_CONFIG, overrides=overrides)
    else:
        cfg = load_config(args.config, overrides=overrides)
    if args.min_cost_prop is not None:
        flag = args.min_cost_prop
        cfg.search_by_planner = {k: replace(v, return_minimal_cost=flag) for k, v in cfg.search_by_planner.items()}
        cfg.planners = [replace(p, search=replace(p.search, return_minimal_cost=flag)) for p in cfg.planners]
    if args.episodes is not None:
        cfg.pareto_episodes = args.episodes
        cfg.n_searches = args.episodes
    return cfg


def _out_dir(args, cfg: RunConfig) -> Path:
    chosen = args.out_dir or os.environ.get("CPOMDP_OUT_DIR") or cfg.out_dir or "."
    path = Path(chosen)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_run(args, cfg: RunConfig) -> int:
    model = cfg.model()
    result = harness.run_comparison(model, cfg.planners, cfg.n_episodes, cfg.base_seed, cfg.belief_particles,
                                    cfg.max_steps, cfg.rolling_budget, cfg.jobs)
    out = _out_dir(args, cfg)
    episodes = [e for pid in result.episodes for e in result.episodes[pid]]
    (out / "episodes.csv").write_text(harness.episodes_csv(episodes, model.n_costs, cfg.record_wall_time))
    (out / "summary.json").write_text(harness.summary_json(result))
    print(harness.format_grid(result))
    return 0


def cmd_pareto(args, cfg: RunConfig) -> int:
    model = cfg.model()
    result = harness.run_pareto_sweep(model, cfg.lambda_grid, cfg.pareto_episodes, cfg.planner(cfg.sweep_planner),
                                      cfg.planner(cfg.constrained_planner), cfg.base_seed, cfg.belief_particles,
                                      cfg.max_steps, cfg.rolling_budget, cfg.jobs)
    out = _out_dir(args, cfg)
    harness.write_pareto(result, out)
    print("lambda      V_C              V_R")
    for lam, s in zip(result.lambdas, result.sweep):
        print(f"{lam:<10g}  {s.cost_means[0]:.3f} ± {s.cost_sems[0]:.3f}  {s.reward_mean:8.2f} ± {s.reward_sem:.2f}")
    c = result.constrained
    print(f"{cfg.constrained_planner:<10}  {c.cost_means[0]:.3f} ± {c.cost_sems[0]:.3f}  "
          f"{c.reward_mean:8.2f} ± {c.reward_sem:.2f}")
    return 0


def cmd_ablation(args, cfg: RunConfig) -> int:
    model = cfg.model()
    rows = harness.run_costprop_ablation(model, cfg.planner(cfg.ablation_planner), cfg.n_searches, cfg.base_seed,
                                         cfg.belief_particles, cfg.ablation_actions, cfg.jobs)
    table = harness.ablation_table(rows)
    (_out_dir(args, cfg) / "ablation.tsv").write_text(table)
    print(table, end="")
    return 0


def cmd_oracle_test(args, cfg: RunConfig) -> int:
    model = cfg.model()
    if not hasattr(model, "transition_probs"):
        raise ConfigError(f"oracle-test needs the discrete oracle problem, not {cfg.problem!r}")
    n = args.episodes or 200
    checks = harness.run_oracle_check(model, cfg.planners, n, cfg.base_seed, cfg.belief_particles)
    ok = True
    for c in checks:
        passed = c.match_rate >= 0.95
        ok = ok and passed
        print(f"{c.planner:<11} expected={c.expected_action!r} match={c.matches}/{c.n_searches} "
              f"({c.match_rate:.1%}) {'PASS' if passed else 'FAIL'}")
    return 0 if ok else 1


COMMANDS = {"run": cmd_run, "pareto": cmd_pareto, "ablation": cmd_ablation, "oracle-test": cmd_oracle_test}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _load(args)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as err:
        print(f"cpomdp: config error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"cpomdp: I/O error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
