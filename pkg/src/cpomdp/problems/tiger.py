"""Two-state tiger-style CPOMDP with a costly listen action, and its exact solver.

States: 0 = tiger behind the left door, 1 = tiger behind the right door.
Actions: 0 = listen (costs budget), 1 = open the left door.
Observations: 0 / 1, the door the tiger was heard behind.

Opening resets the tiger uniformly and yields an uninformative observation.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from cpomdp.model import CPOMDP, CPOMDPSpec, GenerativeOutcome

LISTEN, OPEN = 0, 1


@dataclass(frozen=True, eq=False)
class CTiger(CPOMDP):
    actions: tuple = (LISTEN, OPEN)
    listen_accuracy: float = 0.85
    listen_reward: float = -1.0
    listen_cost: float = 1.0
    open_reward: float = 10.0
    eaten_reward: float = -20.0
    prior_right: float = 0.5
    budget: float = 0.0
    discount_factor: float = 0.95
    name: str = "tiger"
    spec: CPOMDPSpec = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "spec", CPOMDPSpec(self.discount_factor, (self.budget,)))

    def initial_state(self, rng: random.Random) -> int:
        return 1 if rng.random() < self.prior_right else 0

    # exact model --------------------------------------------------------

    def transition_probs(self, s: int, a: int) -> dict[int, float]:
        if a == LISTEN:
            return {s: 1.0}
        return {0: 1.0 - self.prior_right, 1: self.prior_right}

    def obs_probs(self, a: int, sp: int) -> dict[int, float]:
        if a == LISTEN:
            p = self.listen_accuracy
            return {sp: p, 1 - sp: 1.0 - p} if p < 1.0 else {sp: 1.0}
        return {0: 0.5, 1: 0.5}

    # generative model -----------------------------------------------------

    def _step(self, s, a, rng):
        if a == LISTEN:
            o = s if rng.random() < self.listen_accuracy else 1 - s
            return GenerativeOutcome(s, o, self.listen_reward, (self.listen_cost,))
        sp = 1 if rng.random() < self.prior_right else 0
        o = 1 if rng.random() < 0.5 else 0
        return GenerativeOutcome(sp, o, self.reward(s, a, sp), (0.0,))

    def reward(self, s, a, sp):
        if a == LISTEN:
            return self.listen_reward
        return self.open_reward if s == 1 else self.eaten_reward

    def cost(self, s, a, sp):
        return (self.listen_cost,) if a == LISTEN else (0.0,)

    def _obs_density(self, o, s, a, sp):
        return self.obs_probs(a, sp).get(o, 0.0)

    def rollout_policy(self, name):
        if name == "open":
            return lambda s, rng: OPEN
        return super().rollout_policy(name)


@dataclass(frozen=True)
class PolicyTree:
    """Deterministic conditional plan: an action, then a subtree per observation."""

    action: int
    children: tuple = ()

    def first_action(self) -> int:
        return self.action


def policy_trees(actions, observations, depth: int):
    if depth == 1:
        for a in actions:
            yield PolicyTree(a)
        return
    subtrees = list(policy_trees(actions, observations, depth - 1))
    for a in actions:
        for combo in itertools.product(subtrees, repeat=len(observations)):
            yield PolicyTree(a, combo)


def evaluate_policy_tree(model: CTiger, tree: PolicyTree, belief: dict[int, float]) -> tuple[float, float]:
    """Exact discounted ``(V_R, V_C)`` of a policy tree from a belief over states."""
    gamma = model.discount
    a = tree.action
    v_r = v_c = 0.0
    joint: dict[int, dict[int, float]] = {}
    for s, ps in belief.items():
        if ps == 0.0:
            continue
        for sp, pt in model.transition_probs(s, a).items():
            v_r += ps * pt * model.reward(s, a, sp)
            v_c += ps * pt * model.cost(s, a, sp)[0]
            for o, po in model.obs_probs(a, sp).items():
                joint.setdefault(o, {}).setdefault(sp, 0.0)
                joint[o][sp] += ps * pt * po
    if tree.children:
        for o, dist in sorted(joint.items()):
            p_o = sum(dist.values())
            if p_o == 0.0:
                continue
            post = {sp: p / p_o for sp, p in dist.items()}
            sub_r, sub_c = evaluate_policy_tree(model, tree.children[o], post)
            v_r += gamma * p_o * sub_r
            v_c += gamma * p_o * sub_c
    return v_r, v_c


@dataclass
class OracleSolution:
    best_value: float
    best_cost: float
    best_first_action: int
    unconstrained_first_action: int
    mixed_first_action_probs: dict[int, float]
    n_policies: int


def solve_by_enumeration(model: CTiger, depth: int = 3) -> OracleSolution:
    """Constrained optimum over all depth-``depth`` policy trees, pure and mixed."""
    belief = {0: 1.0 - model.prior_right, 1: model.prior_right}
    trees = list(policy_trees(model.actions, (0, 1), depth))
    values = [evaluate_policy_tree(model, t, belief) for t in trees]
    budget = model.cost_budget[0]
    tol = 1e-12
    feasible = [i for i, (_, c) in enumerate(values) if c <= budget + tol]
    if not feasible:
        raise ValueError("no deterministic policy satisfies the budget")
    best = max(feasible, key=lambda i: values[i][0])
    best_free = max(range(len(trees)), key=lambda i: values[i][0])
    # mixtures of policy trees cover every stochastic policy of this horizon
    r = np.array([v[0] for v in values])
    c = np.array([v[1] for v in values])
    res = linprog(-r, A_ub=c[None, :], b_ub=[budget], A_eq=np.ones((1, len(trees))), b_eq=[1.0],
                  bounds=(0, None), method="highs")
    mix: dict[int, float] = {}
    for i, p in enumerate(res.x):
        if p > 1e-9:
            mix[trees[i].action] = mix.get(trees[i].action, 0.0) + float(p)
    return OracleSolution(values[best][0], values[best][1], trees[best].action,
                          trees[best_free].action, mix, len(trees))
