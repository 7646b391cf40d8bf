"""Online planner: tree search interleaved with projected dual ascent."""
from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Any, Optional, Sequence

from cpomdp.belief import ParticleBelief
from cpomdp.model import CPOMDP
from cpomdp.policy import DualAscentConfig, LambdaState, StochasticActionPolicy, greedy_policy, lagrangian_values
from cpomdp.problems.scalarized import scalarize
from cpomdp.tree import SearchConfig, TreeSearch, dump_root

PLANNER_IDS = ("cpomcp-dpw", "cpomcpow", "cpft-dpw", "pomcpow", "pft-dpw")

# unconstrained baselines run the constrained search on a cost-free model
_UNCONSTRAINED = {"pomcpow": "cpomcpow", "pft-dpw": "cpft-dpw"}


@dataclass
class PlanDiagnostics:
    lam: list[float]
    iterations: int
    root_visits: int
    root: list[dict] = field(default_factory=list)
    policy: Optional[StochasticActionPolicy] = None
    tree_dump: str = ""
    n_history_nodes: int = 0
    n_action_nodes: int = 0


def plan(belief: ParticleBelief, model: CPOMDP, config: SearchConfig, rng: random.Random,
         variant: str = "cpomcpow", dual: DualAscentConfig = DualAscentConfig(),
         budget: Optional[Sequence[float]] = None) -> tuple[Any, StochasticActionPolicy, PlanDiagnostics]:
    """Search from ``belief`` and return ``(action, policy, diagnostics)``.

    ``budget`` defaults to the model's cost budget; receding-horizon callers
    pass the remaining budget instead.
    """
    if config.n_iterations < 1:
        raise ValueError("n_iterations must be >= 1")
    budget = tuple(model.cost_budget if budget is None else budget)
    if len(budget) != model.n_costs:
        raise ValueError(f"budget has {len(budget)} entries, the model has {model.n_costs} costs")
    lam_state = LambdaState.start(model.n_costs, dual)
    search = TreeSearch(model, config, variant, rng, budget, lam_state.lam)
    root = search.new_root(belief)
    tree = search.tree
    depth = config.max_depth
    belief_search = variant == "cpft-dpw"
    for _ in range(config.n_iterations):
        if belief_search:
            search.simulate_cpft(belief, root, depth)
        elif variant == "cpomcpow":
            search.simulate_cpomcpow(belief.sample(rng), root, depth)
        else:
            search.simulate_cpomcp_dpw(belief.sample(rng), root, depth)
        if not tree.h_children[root] or tree.h_n[root] == 0:
            continue
        ha = greedy_policy(tree, root, search.lam, 0.0, 0.0, budget).sample(rng)
        search.lam = lam_state.update(tree.a_qc[ha], budget)
    if not tree.h_children[root] or tree.h_n[root] == 0:
        raise ValueError("search finished without expanding any root action")
    policy = greedy_policy(tree, root, search.lam, 0.0, config.nu, budget)
    ha = policy.sample(rng)
    stats = tree.root_statistics(root)
    q_lambda = lagrangian_values(tree, root, search.lam, 0.0)
    for row, ql in zip(stats, q_lambda):
        row["Q_lambda"] = ql
    diagnostics = PlanDiagnostics(
        lam=list(search.lam),
        iterations=config.n_iterations,
        root_visits=tree.h_n[root],
        root=stats,
        policy=StochasticActionPolicy([tree.a_action[i] for i in policy.support], list(policy.probabilities)),
        tree_dump=dump_root(tree, root),
        n_history_nodes=tree.n_history_nodes,
        n_action_nodes=tree.n_action_nodes,
    )
    return tree.a_action[ha], policy, diagnostics


@dataclass(frozen=True)
class Planner:
    """A named planner: search variant, hyperparameters and dual-ascent schedule."""

    planner_id: str
    search: SearchConfig = SearchConfig()
    dual: DualAscentConfig = DualAscentConfig()

    def __post_init__(self) -> None:
        if self.planner_id not in PLANNER_IDS:
            raise ValueError(f"unknown planner {self.planner_id!r}; expected one of {PLANNER_IDS}")

    @property
    def variant(self) -> str:
        return _UNCONSTRAINED.get(self.planner_id, self.planner_id)

    @property
    def constrained(self) -> bool:
        return self.planner_id not in _UNCONSTRAINED

    def planning_model(self, model: CPOMDP) -> CPOMDP:
        return model if self.constrained else scalarize(model, (0.0,) * model.n_costs)

    def plan(self, belief: ParticleBelief, model: CPOMDP, rng: random.Random,
             budget: Optional[Sequence[float]] = None):
        """``model`` must already be the planning model (see ``planning_model``)."""
        dual = self.dual
        if len(dual.lambda0) != model.n_costs:
            dual = replace(dual, lambda0=())
        return plan(belief, model, self.search, rng, self.variant, dual, budget)

