"""Lagrangian action selection and projected dual ascent on the multipliers."""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np
from scipy.optimize import linprog

if TYPE_CHECKING:
    from cpomdp.tree import SearchTree

INF = math.inf


@dataclass(frozen=True)
class DualAscentConfig:
    lambda0: tuple[float, ...] = ()
    a_step: float = 1.0
    b_step: float = 100.0

    def __post_init__(self) -> None:
        if self.a_step <= 0 or self.b_step <= 0:
            raise ValueError("step-size parameters a_step and b_step must be positive")
        if any(x < 0 for x in self.lambda0):
            raise ValueError("initial multipliers must be nonnegative")


def step_size(a_step: float, b_step: float, i: int) -> float:
    """Dual step ``a / (b + i)`` for iteration ``i >= 1``."""
    if i < 1:
        raise ValueError("iterations are counted from 1")
    return a_step / (b_step + i)


@dataclass
class LambdaState:
    """Nonnegative Lagrange multipliers and the iteration counter."""

    lam: list[float]
    a_step: float = 1.0
    b_step: float = 100.0
    iteration: int = 0

    @classmethod
    def start(cls, n_costs: int, config: DualAscentConfig) -> "LambdaState":
        lam0 = list(config.lambda0) if config.lambda0 else [0.0] * n_costs
        if len(lam0) != n_costs:
            raise ValueError(f"lambda0 has {len(lam0)} entries, the model has {n_costs} costs")
        return cls(lam0, config.a_step, config.b_step)

    def update(self, q_costs: Sequence[float], budget: Sequence[float]) -> list[float]:
        """``lambda <- [lambda + alpha_i (Q_C - c_hat)]^+``."""
        self.iteration += 1
        alpha = step_size(self.a_step, self.b_step, self.iteration)
        self.lam = [max(0.0, l + alpha * (q - b)) for l, q, b in zip(self.lam, q_costs, budget)]
        return self.lam


def update_budget(budget: Sequence[float], incurred: Sequence[float], discount: float) -> tuple[float, ...]:
    """Remaining budget for the next step of a receding-horizon episode."""
    if not 0.0 < discount < 1.0:
        raise ValueError("discount must lie in (0, 1)")
    return tuple(max(0.0, (b - c) / discount) for b, c in zip(budget, incurred))


@dataclass
class StochasticActionPolicy:
    """Distribution over a support of child indices (or action-node ids)."""

    support: list[int]
    probabilities: list[float] = field(default_factory=list)

    def sample(self, rng: random.Random) -> int:
        if len(self.support) == 1:
            return self.support[0]
        u = rng.random()
        acc = 0.0
        for item, p in zip(self.support, self.probabilities):
            acc += p
            if u < acc:
                return item
        return self.support[-1]


def _point(i: int) -> StochasticActionPolicy:
    return StochasticActionPolicy([i], [1.0])


def _fallback(close: list[int], q_lambda: Sequence[float], q_costs: Sequence[Sequence[float]],
              lam: Sequence[float]) -> StochasticActionPolicy:
    # minimum lambda-weighted cost, ties to the higher Lagrangian value
    best = min(close, key=lambda i: (sum(l * c for l, c in zip(lam, q_costs[i])), -q_lambda[i]))
    return _point(best)


def stochastic_policy(q_lambda: Sequence[float], q_costs: Sequence[Sequence[float]], nu: float,
                      budget: Sequence[float], lam: Sequence[float]) -> StochasticActionPolicy:
    """Mix the actions whose Lagrangian value is within ``nu`` of the best.

    Among the nu-close set, the mixture maximizes the expected Lagrangian value
    subject to the expected cost-value respecting ``budget`` componentwise. If
    no mixture is feasible, the action with the smallest lambda-weighted cost
    is returned as a point mass. Support indices refer to positions in
    ``q_lambda``.
    """
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    n = len(q_lambda)
    if n == 0:
        raise ValueError("no actions to choose from")
    best = max(q_lambda)
    if best == INF:
        return _point(next(i for i in range(n) if q_lambda[i] == INF))
    threshold = best - nu
    close = [i for i in range(n) if q_lambda[i] >= threshold]
    if len(close) == 1:
        return _point(close[0])
    n_costs = len(budget)
    top = max(close, key=lambda i: q_lambda[i])
    if all(q_costs[top][k] <= budget[k] for k in range(n_costs)):
        return _point(top)
    if n_costs == 1:
        return _mix_single_constraint(close, q_lambda, q_costs, budget[0], lam)
    return _mix_lp(close, q_lambda, q_costs, budget, lam)


def _mix_single_constraint(close, q_lambda, q_costs, budget, lam) -> StochasticActionPolicy:
    # With one constraint an optimal vertex mixes at most two actions.
    feasible = [i for i in close if q_costs[i][0] <= budget]
    if not feasible:
        return _fallback(close, q_lambda, q_costs, lam)
    best_j = max(feasible, key=lambda i: q_lambda[i])
    best_value = q_lambda[best_j]
    best_policy = _point(best_j)
    for i in close:
        ci = q_costs[i][0]
        if ci <= budget or q_lambda[i] <= best_value:
            continue
        for j in feasible:
            cj = q_costs[j][0]
            p = (budget - cj) / (ci - cj)
            value = p * q_lambda[i] + (1.0 - p) * q_lambda[j]
            if value > best_value:
                best_value = value
                best_policy = StochasticActionPolicy([i, j], [p, 1.0 - p]) if p > 0 else _point(j)
    return best_policy


def _mix_lp(close, q_lambda, q_costs, budget, lam) -> StochasticActionPolicy:
    c = -np.array([q_lambda[i] for i in close])
    a_ub = np.array([[q_costs[i][k] for i in close] for k in range(len(budget))])
    res = linprog(c, A_ub=a_ub, b_ub=np.asarray(budget, dtype=float),
                  A_eq=np.ones((1, len(close))), b_eq=[1.0], bounds=(0, None), method="highs")
    if res.status != 0:
        return _fallback(close, q_lambda, q_costs, lam)
    p = np.clip(res.x, 0.0, None)
    keep = [k for k in range(len(close)) if p[k] > 1e-12]
    total = float(sum(p[k] for k in keep))
    return StochasticActionPolicy([close[k] for k in keep], [float(p[k]) / total for k in keep])


def lagrangian_values(tree: "SearchTree", node: int, lam: Sequence[float], kappa: float) -> list[float]:
    """``Q(ha) - lambda^T Q_C(ha) + kappa sqrt(log N(h) / N(ha))`` per child; unvisited score +inf."""
    children = tree.h_children[node]
    a_n, a_q, a_qc = tree.a_n, tree.a_q, tree.a_qc
    log_n = math.log(max(tree.h_n[node], 1))
    out = []
    for ha in children:
        n = a_n[ha]
        if n == 0:
            out.append(INF)
            continue
        v = a_q[ha]
        for l, qc in zip(lam, a_qc[ha]):
            v -= l * qc
        if kappa:
            v += kappa * math.sqrt(log_n / n)
        out.append(v)
    return out


def greedy_policy(tree: "SearchTree", node: int, lam: Sequence[float], kappa: float, nu: float,
                  budget: Sequence[float]) -> StochasticActionPolicy:
    """Stochastic policy over the children of ``node``; support holds action-node ids."""
    children = tree.h_children[node]
    if not children:
        raise ValueError(f"node {node} has no child actions")
    q_lambda = lagrangian_values(tree, node, lam, kappa)
    a_qc = tree.a_qc
    policy = stochastic_policy(q_lambda, [a_qc[ha] for ha in children], nu, budget, lam)
    policy.support = [children[i] for i in policy.support]
    return policy
