"""Fold cost constraints into the reward with fixed weights."""
from __future__ import annotations

from typing import Sequence

from cpomdp.model import CPOMDP, CPOMDPSpec, GenerativeOutcome


class ScalarizedCPOMDP(CPOMDP):
    """Unconstrained view of ``inner`` with reward ``R - w^T C`` and no costs."""

    def __init__(self, inner: CPOMDP, weights: Sequence[float]):
        weights = tuple(float(w) for w in weights)
        if len(weights) != inner.n_costs:
            raise ValueError(f"expected {inner.n_costs} scalarization weights, got {len(weights)}")
        if any(w < 0 for w in weights):
            raise ValueError("scalarization weights must be nonnegative")
        self.inner = inner
        self.weights = weights
        self.spec = CPOMDPSpec(inner.discount, ())
        self.actions = inner.actions
        self.name = f"{inner.name}-scalarized"
        self._any_weight = any(weights)

    def _penalty(self, costs) -> float:
        return sum(w * c for w, c in zip(self.weights, costs)) if self._any_weight else 0.0

    def initial_state(self, rng):
        return self.inner.initial_state(rng)

    def _step(self, s, a, rng):
        sp, o, r, c = self.inner.generative_step(s, a, rng)
        return GenerativeOutcome(sp, o, r - self._penalty(c), ())

    def transition(self, s, a, rng):
        return self.inner.transition(s, a, rng)

    def rollout_step(self, s, a, rng):
        sp, r, c = self.inner.rollout_step(s, a, rng)
        return sp, r - self._penalty(c), ()

    def reward(self, s, a, sp):
        return self.inner.reward(s, a, sp) - self._penalty(self.inner.cost(s, a, sp))

    def cost(self, s, a, sp):
        return ()

    def obs_density(self, o, s, a, sp):
        return self.inner.obs_density(o, s, a, sp)

    def sample_action(self, rng):
        return self.inner.sample_action(rng)

    def rollout_policy(self, name):
        return self.inner.rollout_policy(name)


def scalarize(model: CPOMDP, weights: Sequence[float]) -> ScalarizedCPOMDP:
    return ScalarizedCPOMDP(model, weights)
