"""Search-tree arena and the three constrained Simulate procedures.

The tree is stored as flat per-field lists indexed by node id. History nodes
(which double as observation nodes ``hao`` in the state-based variants, or
belief nodes in CPFT-DPW) and action nodes live in separate tables.
"""
from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from typing import Any, Optional, Sequence

from cpomdp.belief import ParticleBelief, ParticleDepletion, pf_step
from cpomdp.model import CPOMDP, Returns, State
from cpomdp.policy import greedy_policy

logger = logging.getLogger(__name__)

VARIANTS = ("cpomcpow", "cpft-dpw", "cpomcp-dpw")


@dataclass(frozen=True)
class SearchConfig:
    n_iterations: int = 1000
    max_depth: int = 20
    k_action: float = 10.0
    alpha_action: float = 1.0
    k_obs: float = 5.0
    alpha_obs: float = 0.1
    exploration: float = 90.0
    nu: float = 0.01
    pf_width: int = 30
    return_minimal_cost: bool = False
    rollout_policy: str = "random"

    def __post_init__(self) -> None:
        problems = []
        if self.n_iterations < 1:
            problems.append("n_iterations must be >= 1")
        if self.max_depth < 1:
            problems.append("max_depth must be >= 1")
        if self.k_action <= 0 or self.k_obs <= 0:
            problems.append("widening constants k_action, k_obs must be > 0")
        if not (0.0 <= self.alpha_action <= 1.0 and 0.0 <= self.alpha_obs <= 1.0):
            problems.append("widening exponents alpha_action, alpha_obs must lie in [0, 1]")
        if self.exploration < 0:
            problems.append("exploration must be >= 0")
        if self.nu < 0:
            problems.append("nu must be >= 0")
        if self.pf_width < 1:
            problems.append("pf_width must be >= 1")
        if problems:
            raise ValueError("; ".join(problems))


class SearchTree:
    """Flat node tables for one search; never shrinks."""

    def __init__(self, n_costs: int):
        self.n_costs = n_costs
        # history / observation / belief nodes
        self.h_n: list[int] = []
        self.h_children: list[list[int]] = []
        self.h_obs: list[Any] = []
        self.h_m: list[int] = []
        self.h_particles: list[Optional[list]] = []
        self.h_weights: list[Optional[list]] = []
        self.h_belief: list[Optional[ParticleBelief]] = []
        self.h_untried: list[Optional[list]] = []
        # action nodes
        self.a_action: list[Any] = []
        self.a_parent: list[int] = []
        self.a_n: list[int] = []
        self.a_q: list[float] = []
        self.a_qc: list[list[float]] = []
        self.a_cbar: list[list[float]] = []
        self.a_children: list[list] = []
        self.a_obs_index: list[Optional[dict]] = []

    @property
    def n_history_nodes(self) -> int:
        return len(self.h_n)

    @property
    def n_action_nodes(self) -> int:
        return len(self.a_n)

    def add_history(self, obs: Any = None, belief: Optional[ParticleBelief] = None,
                    weighted: bool = True) -> int:
        self.h_n.append(0)
        self.h_children.append([])
        self.h_obs.append(obs)
        self.h_m.append(0)
        self.h_particles.append([] if belief is None else None)
        self.h_weights.append([] if belief is None and weighted else None)
        self.h_belief.append(belief)
        self.h_untried.append(None)
        return len(self.h_n) - 1

    def add_action(self, parent: int, action: Any, obs_index: bool = True) -> int:
        ha = len(self.a_n)
        self.a_action.append(action)
        self.a_parent.append(parent)
        self.a_n.append(0)
        self.a_q.append(0.0)
        self.a_qc.append([0.0] * self.n_costs)
        self.a_cbar.append([0.0] * self.n_costs)
        self.a_children.append([])
        self.a_obs_index.append({} if obs_index else None)
        self.h_children[parent].append(ha)
        return ha

    def root_statistics(self, root: int = 0) -> list[dict]:
        return [
            {
                "action": self.a_action[ha],
                "N": self.a_n[ha],
                "Q": self.a_q[ha],
                "Q_C": tuple(self.a_qc[ha]),
                "c_bar": tuple(self.a_cbar[ha]),
            }
            for ha in self.h_children[root]
        ]


def dump_root(tree: SearchTree, root: int = 0) -> str:
    """Line-oriented dump of ``(action, N, Q, Q_C..., c_bar...)`` for the root's children."""
    lines = []
    for row in tree.root_statistics(root):
        fields = [repr(row["action"]), str(row["N"]), repr(row["Q"])]
        fields += [repr(x) for x in row["Q_C"]] + [repr(x) for x in row["c_bar"]]
        lines.append("\t".join(fields))
    return "\n".join(lines) + ("\n" if lines else "")


def minimal_cost_return(tree: SearchTree, node: int, lam: Sequence[float]) -> tuple[float, ...]:
    """Cost-value vector of the preferred visited child of ``node``.

    With one cost this is the minimum ``Q_C`` over children. With several,
    children are ordered by ``lambda^T Q_C``, then the first component, then
    insertion order.
    """
    children = [ha for ha in tree.h_children[node] if tree.a_n[ha] > 0]
    if not children:
        raise ValueError(f"node {node} has no visited child actions")
    a_qc = tree.a_qc
    if tree.n_costs == 1:
        return (min(a_qc[ha][0] for ha in children),)
    if tree.n_costs == 0:
        return ()
    best = min(
        range(len(children)),
        key=lambda i: (sum(l * c for l, c in zip(lam, a_qc[children[i]])), a_qc[children[i]][0], i),
    )
    return tuple(a_qc[children[best]])


def rollout(model: CPOMDP, state: State, depth: int, policy, rng: random.Random) -> Returns:
    """Discounted reward and cost of following ``policy`` for ``depth`` steps.

    Policies with a ``begin`` method are stateful; ``begin()`` returns the
    per-rollout callable.
    """
    begin = getattr(policy, "begin", None)
    if begin is not None:
        policy = begin()
    n_costs = model.n_costs
    gamma = model.discount
    step = model.rollout_step
    v = 0.0
    c_tot = [0.0] * n_costs
    w = 1.0
    s = state
    for _ in range(depth):
        if s is None:
            break
        a = policy(s, rng)
        s, r, c = step(s, a, rng)
        v += w * r
        for k in range(n_costs):
            c_tot[k] += w * c[k]
        w *= gamma
    return Returns(v, tuple(c_tot))


class TreeSearch:
    """One search over a fresh arena: widening, Simulate variants and backups.

    ``lam`` and ``budget`` are read on every action selection; the planner
    mutates ``lam`` between iterations.
    """

    def __init__(self, model: CPOMDP, config: SearchConfig, variant: str, rng: random.Random,
                 budget: Sequence[float], lam: Optional[list[float]] = None):
        if variant not in VARIANTS:
            raise ValueError(f"unknown search variant {variant!r}; expected one of {VARIANTS}")
        self.model = model
        self.config = config
        self.variant = variant
        self.rng = rng
        self.budget = tuple(budget)
        self.n_costs = model.n_costs
        self.lam = list(lam) if lam is not None else [0.0] * self.n_costs
        self.tree = SearchTree(self.n_costs)
        self.gamma = model.discount
        self.rollout_policy = model.rollout_policy(config.rollout_policy)
        self.zero = Returns(0.0, (0.0,) * self.n_costs)
        self.n_uniform_fallbacks = 0
        self.n_depletions = 0

    def new_root(self, belief: Optional[ParticleBelief] = None) -> int:
        return self.tree.add_history(belief=belief if self.variant == "cpft-dpw" else None,
                                     weighted=self.variant == "cpomcpow")

    # -- action side ---------------------------------------------------------

    def next_action(self, node: int):
        """A new action for ``node``, or ``None`` once a finite action set is exhausted."""
        model = self.model
        if model.actions is None:
            return model.sample_action(self.rng)
        tree = self.tree
        untried = tree.h_untried[node]
        if untried is None:
            untried = list(model.actions)
            self.rng.shuffle(untried)
            untried.reverse()
            tree.h_untried[node] = untried
        return untried.pop() if untried else None

    def action_prog_widen(self, node: int) -> int:
        tree = self.tree
        cfg = self.config
        children = tree.h_children[node]
        if len(children) <= cfg.k_action * tree.h_n[node] ** cfg.alpha_action or not children:
            a = self.next_action(node)
            if a is not None:
                tree.add_action(node, a, obs_index=self.variant != "cpft-dpw")
        policy = greedy_policy(tree, node, self.lam, cfg.exploration, cfg.nu, self.budget)
        return policy.sample(self.rng)

    # -- backups -------------------------------------------------------------

    def _backup(self, node: int, ha: int, r: float, c, v_next: float, c_next) -> Returns:
        tree = self.tree
        gamma = self.gamma
        v = r + gamma * v_next
        cost = tuple(ci + gamma * cn for ci, cn in zip(c, c_next))
        tree.h_n[node] += 1
        n = tree.a_n[ha] + 1
        tree.a_n[ha] = n
        tree.a_q[ha] += (v - tree.a_q[ha]) / n
        qc = tree.a_qc[ha]
        cbar = tree.a_cbar[ha]
        for k in range(self.n_costs):
            qc[k] += (cost[k] - qc[k]) / n
            cbar[k] += (c[k] - cbar[k]) / n
        if self.config.return_minimal_cost:
            cost = minimal_cost_return(tree, node, self.lam)
        return Returns(v, cost)

    def _obs_widen(self, ha: int) -> bool:
        cfg = self.config
        tree = self.tree
        return len(tree.a_children[ha]) <= cfg.k_obs * tree.a_n[ha] ** cfg.alpha_obs

    def _select_observation(self, ha: int) -> int:
        tree = self.tree
        children = tree.a_children[ha]
        h_m = tree.h_m
        total = sum(h_m[h] for h in children)
        u = self.rng.random() * total
        acc = 0.0
        for h in children:
            acc += h_m[h]
            if u < acc:
                return h
        return children[-1]

    # -- Simulate variants -----------------------------------------------------

    def simulate(self, state_or_belief, node: int, depth: int) -> Returns:
        if self.variant == "cpomcpow":
            return self.simulate_cpomcpow(state_or_belief, node, depth)
        if self.variant == "cpomcp-dpw":
            return self.simulate_cpomcp_dpw(state_or_belief, node, depth)
        return self.simulate_cpft(state_or_belief, node, depth)

    def simulate_cpomcpow(self, s: State, node: int, depth: int) -> Returns:
        if depth == 0 or s is None:
            return self.zero
        model = self.model
        tree = self.tree
        rng = self.rng
        ha = self.action_prog_widen(node)
        a = tree.a_action[ha]
        sp, o, r, c = model.generative_step(s, a, rng)
        new = False
        if self._obs_widen(ha):
            index = tree.a_obs_index[ha]
            hao = index.get(o)
            if hao is None:
                hao = tree.add_history(obs=o)
                index[o] = hao
                tree.a_children[ha].append(hao)
                new = True
            tree.h_m[hao] += 1
        else:
            hao = self._select_observation(ha)
            o = tree.h_obs[hao]
        particles = tree.h_particles[hao]
        weights = tree.h_weights[hao]
        particles.append(sp)
        weights.append(model.obs_density(o, s, a, sp))
        if new:
            v_next, c_next = rollout(model, sp, depth - 1, self.rollout_policy, rng)
        else:
            sp = particles[self._weighted_index(weights)]
            r = model.reward(s, a, sp)
            c = model.cost(s, a, sp)
            v_next, c_next = self.simulate_cpomcpow(sp, hao, depth - 1)
        return self._backup(node, ha, r, c, v_next, c_next)

    def _weighted_index(self, weights: list) -> int:
        total = sum(weights)
        if total <= 0.0:
            self.n_uniform_fallbacks += 1
            logger.debug("zero total particle weight; selecting uniformly")
            return int(self.rng.random() * len(weights))
        u = self.rng.random() * total
        acc = 0.0
        for i, w in enumerate(weights):
            acc += w
            if u < acc:
                return i
        return len(weights) - 1

    def simulate_cpomcp_dpw(self, s: State, node: int, depth: int) -> Returns:
        if depth == 0 or s is None:
            return self.zero
        model = self.model
        tree = self.tree
        rng = self.rng
        new = False
        ha = self.action_prog_widen(node)
        a = tree.a_action[ha]
        if self._obs_widen(ha):
            sp, o, r, c = model.generative_step(s, a, rng)
            index = tree.a_obs_index[ha]
            hao = index.get(o)
            if hao is None:
                hao = tree.add_history(obs=o, weighted=False)
                index[o] = hao
                tree.a_children[ha].append(hao)
            tree.h_m[hao] += 1
            tree.h_particles[hao].append(sp)
            new = tree.h_m[hao] == 1
        else:
            hao = self._select_observation(ha)
            particles = tree.h_particles[hao]
            sp = particles[int(rng.random() * len(particles))]
            r = model.reward(s, a, sp)
            c = model.cost(s, a, sp)
        if new:
            v_next, c_next = rollout(model, sp, depth - 1, self.rollout_policy, rng)
        else:
            v_next, c_next = self.simulate_cpomcp_dpw(sp, hao, depth - 1)
        return self._backup(node, ha, r, c, v_next, c_next)

    def simulate_cpft(self, belief: ParticleBelief, node: int, depth: int) -> Returns:
        if depth == 0 or belief.all_terminal(self.model):
            return self.zero
        tree = self.tree
        rng = self.rng
        ha = self.action_prog_widen(node)
        a = tree.a_action[ha]
        if self._obs_widen(ha):
            try:
                bp, r, c = pf_step(self.model, belief, a, self.config.pf_width, rng)
            except ParticleDepletion as err:
                self.n_depletions += 1
                logger.debug("in-tree particle depletion; using unweighted propagated particles")
                bp = ParticleBelief(err.propagated)
                r, c = err.reward, err.costs
            child = tree.add_history(belief=bp)
            tree.a_children[ha].append((child, r, c))
            v_next, c_next = rollout(self.model, bp.sample(rng), depth - 1, self.rollout_policy, rng)
        else:
            children = tree.a_children[ha]
            child, r, c = children[int(rng.random() * len(children))]
            v_next, c_next = self.simulate_cpft(tree.h_belief[child], child, depth - 1)
        return self._backup(node, ha, r, c, v_next, c_next)
