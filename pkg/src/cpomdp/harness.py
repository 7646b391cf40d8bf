"""Episode execution, aggregation and the three experiment protocols."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import random
import statistics
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from cpomdp.belief import bootstrap_update, initial_belief
from cpomdp.model import CPOMDP, discounted_return
from cpomdp.planner import Planner
from cpomdp.policy import update_budget
from cpomdp.problems.scalarized import scalarize

logger = logging.getLogger(__name__)


def derive_seed(base_seed: int, episode: int) -> int:
    """Episode seed shared by every planner (common random numbers)."""
    return int(np.random.SeedSequence([base_seed, episode]).generate_state(1)[0])


def _streams(seed: int) -> tuple[random.Random, random.Random, random.Random]:
    env, bel, pl = np.random.SeedSequence(seed).spawn(3)
    return tuple(random.Random(int(s.generate_state(1)[0])) for s in (env, bel, pl))


@dataclass
class EpisodeResult:
    planner: str
    problem: str
    episode: int
    seed: int
    reward_return: float
    cost_returns: tuple[float, ...]
    steps: int
    depletions: int = 0
    wall_ms: list[float] = field(default_factory=list)
    actions: list = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    costs: list[tuple] = field(default_factory=list)
    discount: float = 0.95

    def recount(self):
        return discounted_return(self.rewards, self.costs, self.discount)


@dataclass
class AggregateStats:
    count: int
    reward_mean: float
    reward_sem: float
    cost_means: tuple[float, ...]
    cost_sems: tuple[float, ...]

    def as_dict(self) -> dict:
        return {
            "count": self.count,
            "V_R": {"mean": self.reward_mean, "sem": self.reward_sem},
            "V_C": [{"mean": m, "sem": s} for m, s in zip(self.cost_means, self.cost_sems)],
        }


def _mean_sem(values: Sequence[float]) -> tuple[float, float]:
    values = sorted(values)  # permutation-invariant summation order
    n = len(values)
    mean = math.fsum(values) / n
    sem = statistics.stdev(values) / math.sqrt(n) if n > 1 else 0.0
    return mean, sem


def aggregate(results: Sequence[EpisodeResult]) -> AggregateStats:
    if not results:
        raise ValueError("cannot aggregate zero episodes")
    r_mean, r_sem = _mean_sem([e.reward_return for e in results])
    n_costs = len(results[0].cost_returns)
    cost_stats = [_mean_sem([e.cost_returns[k] for e in results]) for k in range(n_costs)]
    return AggregateStats(len(results), r_mean, r_sem,
                          tuple(m for m, _ in cost_stats), tuple(s for _, s in cost_stats))


def run_episode(model: CPOMDP, planner: Planner, n_belief_particles: int, max_steps: int, seed: int,
                episode: int = 0, rolling_budget: bool = True, planning_model: Optional[CPOMDP] = None,
                forced_actions: Optional[Sequence] = None) -> EpisodeResult:
    """Plan, act and filter in ``model`` until termination or ``max_steps``.

    Rewards and costs are always recorded from ``model``; ``planning_model``
    (default: the planner's view of ``model``) is what the search and the
    belief filter see. ``forced_actions`` replaces the planner for scripted
    traces.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    env_rng, belief_rng, plan_rng = _streams(seed)
    pmodel = planning_model if planning_model is not None else planner.planning_model(model)
    state = model.initial_state(env_rng)
    belief = initial_belief(pmodel, n_belief_particles, belief_rng)
    budget = tuple(pmodel.cost_budget)
    gamma = model.discount
    result = EpisodeResult(planner.planner_id, model.name, episode, seed, 0.0, (0.0,) * model.n_costs, 0,
                           discount=gamma)
    v = 0.0
    c_acc = [0.0] * model.n_costs
    w = 1.0
    for t in range(max_steps):
        start = time.perf_counter()
        if forced_actions is not None:
            action = forced_actions[t]
        else:
            action, _, _ = planner.plan(belief, pmodel, plan_rng, budget)
        sp, obs, r, c = model.generative_step(state, action, env_rng)
        v += w * r
        for k in range(len(c_acc)):
            c_acc[k] += w * c[k]
        w *= gamma
        result.actions.append(action)
        result.rewards.append(r)
        result.costs.append(tuple(c))
        if sp is not None:
            belief, depleted = bootstrap_update(pmodel, belief, action, obs, n_belief_particles, belief_rng)
            result.depletions += depleted
            if rolling_budget and pmodel.n_costs:
                budget = update_budget(budget, c, gamma)
        result.wall_ms.append(1000.0 * (time.perf_counter() - start))
        state = sp
        if sp is None:
            break
    result.reward_return = v
    result.cost_returns = tuple(c_acc)
    result.steps = len(result.rewards)
    return result


@dataclass(frozen=True)
class EpisodeTask:
    model: CPOMDP
    planner: Planner
    n_belief_particles: int
    max_steps: int
    seed: int
    episode: int
    rolling_budget: bool = True
    planning_model: Optional[CPOMDP] = None


def _run_task(task: EpisodeTask) -> EpisodeResult:
    return run_episode(task.model, task.planner, task.n_belief_particles, task.max_steps, task.seed,
                       task.episode, task.rolling_budget, task.planning_model)


def run_tasks(tasks: Sequence[EpisodeTask], jobs: int = 1) -> list[EpisodeResult]:
    """Run episodes, in parallel when ``jobs > 1``; output order follows ``tasks``."""
    if jobs <= 1 or len(tasks) <= 1:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_task, tasks, chunksize=1))


@dataclass
class ComparisonResult:
    problem: str
    budget: tuple[float, ...]
    episodes: dict[str, list[EpisodeResult]]
    stats: dict[str, AggregateStats]

    def summary(self) -> dict:
        return {
            "problem": self.problem,
            "budget": list(self.budget),
            "planners": {pid: s.as_dict() for pid, s in self.stats.items()},
        }


def run_comparison(model: CPOMDP, planners: Sequence[Planner], n_episodes: int, base_seed: int = 0,
                   n_belief_particles: int = 10_000, max_steps: int = 100, rolling_budget: bool = True,
                   jobs: int = 1) -> ComparisonResult:
    """Run every planner on the same seed sequence and aggregate per planner."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    tasks = [
        EpisodeTask(model, p, n_belief_particles, max_steps, derive_seed(base_seed, i), i, rolling_budget)
        for p in planners for i in range(n_episodes)
    ]
    flat = run_tasks(tasks, jobs)
    episodes = {p.planner_id: flat[j * n_episodes:(j + 1) * n_episodes] for j, p in enumerate(planners)}
    stats = {pid: aggregate(eps) for pid, eps in episodes.items()}
    return ComparisonResult(model.name, tuple(model.cost_budget), episodes, stats)


@dataclass
class ParetoResult:
    lambdas: list[float]
    sweep: list[AggregateStats]
    constrained: AggregateStats
    sweep_episodes: list[list[EpisodeResult]]
    constrained_episodes: list[EpisodeResult]

    def best_feasible(self, budget: float) -> Optional[tuple[float, AggregateStats]]:
        feasible = [(lam, s) for lam, s in zip(self.lambdas, self.sweep) if s.cost_means[0] <= budget]
        return max(feasible, key=lambda x: x[1].reward_mean) if feasible else None


def run_pareto_sweep(model: CPOMDP, lambda_grid: Sequence[float], n_episodes: int, unconstrained: Planner,
                     constrained: Planner, base_seed: int = 0, n_belief_particles: int = 10_000,
                     max_steps: int = 100, rolling_budget: bool = True, jobs: int = 1) -> ParetoResult:
    """Scalarized-reward sweep with an unconstrained planner plus one constrained run.

    Each sweep point records the true (unscalarized) reward and cost returns.
    """
    if not lambda_grid:
        raise ValueError("lambda grid is empty")
    if unconstrained.constrained:
        raise ValueError("the sweep planner must be an unconstrained planner")
    tasks = []
    for lam in lambda_grid:
        scal = scalarize(model, (float(lam),) * model.n_costs)
        tasks += [EpisodeTask(model, unconstrained, n_belief_particles, max_steps, derive_seed(base_seed, i), i,
                              rolling_budget, scal) for i in range(n_episodes)]
    tasks += [EpisodeTask(model, constrained, n_belief_particles, max_steps, derive_seed(base_seed, i), i,
                          rolling_budget) for i in range(n_episodes)]
    flat = run_tasks(tasks, jobs)
    chunks = [flat[j * n_episodes:(j + 1) * n_episodes] for j in range(len(lambda_grid) + 1)]
    return ParetoResult([float(l) for l in lambda_grid], [aggregate(c) for c in chunks[:-1]],
                        aggregate(chunks[-1]), chunks[:-1], chunks[-1])


ABLATION_MODES = ("normal", "min", "unconstrained")


@dataclass
class AblationRow:
    mode: str
    actions: tuple
    visit_fraction: list[float]
    q_cost: list[Optional[float]]
    delta_q_lambda: list[float]
    chosen_counts: dict
    modal_action: Any


def _ablation_search(args):
    model, planner, n_belief_particles, seed = args
    belief_rng, plan_rng = (random.Random(int(s.generate_state(1)[0]))
                            for s in np.random.SeedSequence(seed).spawn(2))
    pmodel = planner.planning_model(model)
    belief = initial_belief(pmodel, n_belief_particles, belief_rng)
    action, _, diag = planner.plan(belief, pmodel, plan_rng)
    return action, diag.root_visits, diag.root


def run_costprop_ablation(model: CPOMDP, planner: Planner, n_searches: int = 50, base_seed: int = 0,
                          n_belief_particles: int = 10_000, actions: Sequence = (1, 5, 10),
                          jobs: int = 1) -> list[AblationRow]:
    """Root statistics of repeated searches from the initial belief.

    Runs ``planner`` (a constrained variant) with normal and with minimal cost
    propagation, and its unconstrained counterpart, ``n_searches`` times each.
    """
    if n_searches < 1:
        raise ValueError("n_searches must be >= 1")
    unconstrained_id = {"cpomcpow": "pomcpow", "cpft-dpw": "pft-dpw"}.get(planner.planner_id)
    if unconstrained_id is None:
        raise ValueError(f"no unconstrained counterpart for {planner.planner_id!r}")
    mode_planners = {
        "normal": replace(planner, search=replace(planner.search, return_minimal_cost=False)),
        "min": replace(planner, search=replace(planner.search, return_minimal_cost=True)),
        "unconstrained": replace(planner, planner_id=unconstrained_id,
                                 search=replace(planner.search, return_minimal_cost=False)),
    }
    rows = []
    for mode in ABLATION_MODES:
        mp = mode_planners[mode]
        args = [(model, mp, n_belief_particles, derive_seed(base_seed, i)) for i in range(n_searches)]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                outs = list(pool.map(_ablation_search, args))
        else:
            outs = [_ablation_search(a) for a in args]
        fractions = {a: [] for a in actions}
        q_costs = {a: [] for a in actions}
        gaps = {a: [] for a in actions}
        chosen = Counter()
        for action, n_root, root in outs:
            chosen[action] += 1
            best = max(r["Q_lambda"] for r in root if r["N"] > 0)
            by_action = {r["action"]: r for r in root}
            for a in actions:
                r = by_action.get(a)
                if r is None or r["N"] == 0:
                    continue
                fractions[a].append(r["N"] / n_root)
                if r["Q_C"]:
                    q_costs[a].append(r["Q_C"][0])
                gaps[a].append(r["Q_lambda"] - best)
        modal = max(sorted(chosen, key=repr), key=lambda a: chosen[a])
        rows.append(AblationRow(
            mode, tuple(actions),
            [_avg(fractions[a]) for a in actions],
            [_avg(q_costs[a]) if q_costs[a] else None for a in actions],
            [_avg(gaps[a]) for a in actions],
            {repr(k): v for k, v in sorted(chosen.items(), key=lambda kv: repr(kv[0]))},
            modal,
        ))
    return rows


def _avg(xs: Sequence[float]) -> float:
    return math.fsum(xs) / len(xs) if xs else float("nan")


# -- output formats -----------------------------------------------------------

def episodes_csv(results: Iterable[EpisodeResult], n_costs: int, record_wall_time: bool = False) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["planner", "problem", "seed", "episode", "V_R"]
                    + [f"V_C_{k + 1}" for k in range(n_costs)] + ["steps", "wall_ms"])
    for e in results:
        wall = f"{sum(e.wall_ms):.3f}" if record_wall_time else ""
        writer.writerow([e.planner, e.problem, e.seed, e.episode, repr(e.reward_return)]
                        + [repr(c) for c in e.cost_returns] + [e.steps, wall])
    return buf.getvalue()


def summary_json(result: ComparisonResult) -> str:
    return json.dumps(result.summary(), indent=2, sort_keys=True) + "\n"


def format_grid(result: ComparisonResult) -> str:
    lines = [f"{result.problem}  budget={list(result.budget)}"]
    for pid, s in result.stats.items():
        costs = "  ".join(f"V_C={m:.3f} ± {e:.3f}" for m, e in zip(s.cost_means, s.cost_sems))
        lines.append(f"  {pid:<11} n={s.count:<4} V_R={s.reward_mean:8.2f} ± {s.reward_sem:.2f}  {costs}")
    return "\n".join(lines)


GNUPLOT_SCRIPT = """\
# usage: gnuplot -p pareto.gp
set xlabel "discounted cost V_C"
set ylabel "discounted reward V_R"
set key left top
plot "pareto_summary.dat" using 2:4:3:5 with xyerrorbars title "scalarized sweep", \\
     "pareto_constrained.dat" using 1:3:2:4 with xyerrorbars title "constrained planner"
"""


def write_pareto(result: ParetoResult, out_dir: Path) -> list[Path]:
    """Write per-lambda episode files, a summary table and the constrained point."""
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for lam, stats, eps in zip(result.lambdas, result.sweep, result.sweep_episodes):
        p = out_dir / f"pareto_lambda_{lam:g}.dat"
        lines = [f"# lambda={lam!r} mean_cost={stats.cost_means[0]!r} mean_reward={stats.reward_mean!r}",
                 "# cost reward"]
        lines += [f"{e.cost_returns[0]!r} {e.reward_return!r}" for e in eps]
        p.write_text("\n".join(lines) + "\n")
        paths.append(p)
    summary = out_dir / "pareto_summary.dat"
    lines = ["# lambda mean_cost sem_cost mean_reward sem_reward"]
    lines += [f"{lam!r} {s.cost_means[0]!r} {s.cost_sems[0]!r} {s.reward_mean!r} {s.reward_sem!r}"
              for lam, s in zip(result.lambdas, result.sweep)]
    summary.write_text("\n".join(lines) + "\n")
    c = result.constrained
    constrained = out_dir / "pareto_constrained.dat"
    constrained.write_text("# mean_cost sem_cost mean_reward sem_reward\n"
                           f"{c.cost_means[0]!r} {c.cost_sems[0]!r} {c.reward_mean!r} {c.reward_sem!r}\n")
    script = out_dir / "pareto.gp"
    script.write_text(GNUPLOT_SCRIPT)
    return paths + [summary, constrained, script]


def ablation_table(rows: Sequence[AblationRow]) -> str:
    def fmt(xs):
        return "[" + ", ".join("---" if x is None else f"{x:.3f}" for x in xs) + "]"

    out = ["mode\tN(b0a)/N(b0)\tQ_c(b0a)\tdQ_lambda(b0a)\tmodal_action\tchosen_counts"]
    for r in rows:
        out.append("\t".join([r.mode, fmt(r.visit_fraction), fmt(r.q_cost), fmt(r.delta_q_lambda),
                              repr(r.modal_action), json.dumps(r.chosen_counts, sort_keys=True)]))
    return "\n".join(out) + "\n"


@dataclass
class OracleCheck:
    planner: str
    expected_action: Any
    matches: int
    n_searches: int
    chosen_counts: dict

    @property
    def match_rate(self) -> float:
        return self.matches / self.n_searches


def run_oracle_check(model, planners: Sequence[Planner], n_searches: int = 200, base_seed: int = 0,
                     n_belief_particles: int = 1_000, depth: int = 3) -> list[OracleCheck]:
    """Compare each planner's first action from b0 with the enumerated constrained optimum."""
    from cpomdp.problems.tiger import solve_by_enumeration

    expected = solve_by_enumeration(model, depth).best_first_action
    out = []
    for planner in planners:
        planner = replace(planner, search=replace(planner.search, max_depth=depth))
        pmodel = planner.planning_model(model)
        chosen: Counter = Counter()
        for i in range(n_searches):
            belief_rng, plan_rng = (random.Random(int(s.generate_state(1)[0]))
                                    for s in np.random.SeedSequence(derive_seed(base_seed, i)).spawn(2))
            belief = initial_belief(pmodel, n_belief_particles, belief_rng)
            action, _, _ = planner.plan(belief, pmodel, plan_rng)
            chosen[action] += 1
        out.append(OracleCheck(planner.planner_id, expected, chosen[expected], n_searches,
                               {repr(k): v for k, v in sorted(chosen.items(), key=lambda kv: repr(kv[0]))}))
    return out
