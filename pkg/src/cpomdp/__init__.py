"""Online planning for constrained POMDPs with continuous spaces."""
from cpomdp.belief import ParticleBelief, bootstrap_update, initial_belief, pf_step
from cpomdp.model import CPOMDP, CPOMDPSpec, GenerativeOutcome, Returns, discounted_return
from cpomdp.planner import PLANNER_IDS, Planner, plan
from cpomdp.policy import DualAscentConfig, greedy_policy, step_size, stochastic_policy, update_budget
from cpomdp.tree import SearchConfig, SearchTree, TreeSearch, minimal_cost_return, rollout

__all__ = [
    "CPOMDP", "CPOMDPSpec", "DualAscentConfig", "GenerativeOutcome", "PLANNER_IDS", "ParticleBelief",
    "Planner", "Returns", "SearchConfig", "SearchTree", "TreeSearch", "bootstrap_update",
    "discounted_return", "greedy_policy", "initial_belief", "minimal_cost_return", "pf_step", "plan",
    "rollout", "step_size", "stochastic_policy", "update_budget",
]
